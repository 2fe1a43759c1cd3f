use std::fmt;

use serde::{Deserialize, Serialize};

/// Primitive types of the language. Closed set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ParamType {
    Robot,
    Loc,
    Int,
    Bool,
    String,
    Duration,
}

impl ParamType {
    pub const ALL: [ParamType; 6] = [
        ParamType::Robot,
        ParamType::Loc,
        ParamType::Int,
        ParamType::Bool,
        ParamType::String,
        ParamType::Duration,
    ];

    pub fn keyword(self) -> &'static str {
        match self {
            ParamType::Robot => "robot",
            ParamType::Loc => "loc",
            ParamType::Int => "int",
            ParamType::Bool => "bool",
            ParamType::String => "string",
            ParamType::Duration => "duration",
        }
    }

    pub fn from_keyword(s: &str) -> Option<ParamType> {
        ParamType::ALL.into_iter().find(|t| t.keyword() == s)
    }
}

impl fmt::Display for ParamType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.keyword())
    }
}

/// The eleven binary temporal operators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TemporalOp {
    /// `&`: both execute, no ordering.
    And,
    /// `=>`: rhs starts after lhs finishes.
    Seq,
    /// `+`: both start in the same letter.
    Par,
    /// `+=>`: rhs starts no earlier than lhs starts.
    ParSeq,
    /// `|`: exactly one side executes.
    Choice,
    /// `!&`: like `&`, lhs is cut short when rhs finishes first.
    LAnd,
    /// `&!`: like `&`, rhs is cut short when lhs finishes first.
    RAnd,
    /// `!&!`: like `&`, whichever finishes first cuts the other short.
    BAnd,
    /// `!+`
    LPar,
    /// `+!`
    RPar,
    /// `!+!`
    BPar,
}

impl TemporalOp {
    pub const ALL: [TemporalOp; 11] = [
        TemporalOp::And,
        TemporalOp::Seq,
        TemporalOp::Par,
        TemporalOp::ParSeq,
        TemporalOp::Choice,
        TemporalOp::LAnd,
        TemporalOp::RAnd,
        TemporalOp::BAnd,
        TemporalOp::LPar,
        TemporalOp::RPar,
        TemporalOp::BPar,
    ];

    pub fn symbol(self) -> &'static str {
        match self {
            TemporalOp::And => "&",
            TemporalOp::Seq => "=>",
            TemporalOp::Par => "+",
            TemporalOp::ParSeq => "+=>",
            TemporalOp::Choice => "|",
            TemporalOp::LAnd => "!&",
            TemporalOp::RAnd => "&!",
            TemporalOp::BAnd => "!&!",
            TemporalOp::LPar => "!+",
            TemporalOp::RPar => "+!",
            TemporalOp::BPar => "!+!",
        }
    }

    /// Binding strength; larger binds tighter. All levels are left-associative.
    pub fn precedence(self) -> u8 {
        match self {
            TemporalOp::Seq => 0,
            TemporalOp::ParSeq => 1,
            TemporalOp::And | TemporalOp::LAnd | TemporalOp::RAnd | TemporalOp::BAnd => 2,
            TemporalOp::Par | TemporalOp::LPar | TemporalOp::RPar | TemporalOp::BPar => 3,
            TemporalOp::Choice => 4,
        }
    }

    /// Operators whose operands start together in one letter.
    pub fn is_par(self) -> bool {
        matches!(
            self,
            TemporalOp::Par | TemporalOp::LPar | TemporalOp::RPar | TemporalOp::BPar
        )
    }

    /// Whether the lhs is terminated (or never started) when the rhs finishes first.
    pub fn cuts_lhs(self) -> bool {
        matches!(
            self,
            TemporalOp::LAnd | TemporalOp::BAnd | TemporalOp::LPar | TemporalOp::BPar
        )
    }

    /// Whether the rhs is terminated (or never started) when the lhs finishes first.
    pub fn cuts_rhs(self) -> bool {
        matches!(
            self,
            TemporalOp::RAnd | TemporalOp::BAnd | TemporalOp::RPar | TemporalOp::BPar
        )
    }

    pub fn is_short_circuit(self) -> bool {
        self.cuts_lhs() || self.cuts_rhs()
    }
}

impl fmt::Display for TemporalOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

/// `->` shares the robot; `<->` reserves it for the whole sub-expression.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum AssignMode {
    Shared,
    Exclusive,
}

/// Right operand of `@`, `->` and `<->`.
///
/// An identifier names a declared variable; a string literal is a symbolic
/// external name (a map location or a robot name) resolved at runtime.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Target {
    Var(String),
    Name(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Expr {
    Str(String),
    Int(i64),
    Bool(bool),
    /// Milliseconds.
    Duration(u64),
    Var(String),
}

/// `[!][owner.]prop`
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PropSpec {
    pub prop: String,
    pub negated: bool,
    pub owner: Option<String>,
}

impl PropSpec {
    pub fn new(prop: impl Into<String>) -> Self {
        PropSpec {
            prop: prop.into(),
            negated: false,
            owner: None,
        }
    }

    /// The boolean value the property must hold for this literal to be satisfied.
    pub fn wanted(&self) -> bool {
        !self.negated
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Param {
    pub name: String,
    pub ty: ParamType,
}

impl Param {
    pub fn new(name: impl Into<String>, ty: ParamType) -> Self {
        Param {
            name: name.into(),
            ty,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Term {
    Action {
        name: String,
        args: Vec<Expr>,
    },
    Call {
        task: String,
        args: Vec<Expr>,
    },
    WaitEvent {
        name: String,
        params: Vec<Param>,
    },
    WaitProp(PropSpec),
    /// Milliseconds.
    Pause(u64),
    Repeat {
        body: Box<Term>,
        until: PropSpec,
    },
    Binary {
        op: TemporalOp,
        lhs: Box<Term>,
        rhs: Box<Term>,
    },
    Assigned {
        inner: Box<Term>,
        mode: AssignMode,
        target: Target,
    },
    Located {
        inner: Box<Term>,
        loc: Target,
    },
    Group(Box<Term>),
}

impl Term {
    pub fn action(name: impl Into<String>) -> Term {
        Term::Action {
            name: name.into(),
            args: Vec::new(),
        }
    }

    pub fn binary(op: TemporalOp, lhs: Term, rhs: Term) -> Term {
        Term::Binary {
            op,
            lhs: Box::new(lhs),
            rhs: Box::new(rhs),
        }
    }

    pub fn group(inner: Term) -> Term {
        Term::Group(Box::new(inner))
    }

    pub fn located(inner: Term, loc: Target) -> Term {
        Term::Located {
            inner: Box::new(inner),
            loc,
        }
    }

    pub fn assigned(inner: Term, mode: AssignMode, target: Target) -> Term {
        Term::Assigned {
            inner: Box::new(inner),
            mode,
            target,
        }
    }

    /// Drops every `Group` wrapper. Groups only matter to the printer.
    pub fn strip_groups(&self) -> Term {
        match self {
            Term::Group(inner) => inner.strip_groups(),
            Term::Binary { op, lhs, rhs } => Term::binary(*op, lhs.strip_groups(), rhs.strip_groups()),
            Term::Assigned {
                inner,
                mode,
                target,
            } => Term::assigned(inner.strip_groups(), *mode, target.clone()),
            Term::Located { inner, loc } => Term::located(inner.strip_groups(), loc.clone()),
            Term::Repeat { body, until } => Term::Repeat {
                body: Box::new(body.strip_groups()),
                until: until.clone(),
            },
            other => other.clone(),
        }
    }

    /// Number of nodes in the tree, counting `Group` wrappers.
    pub fn size(&self) -> usize {
        1 + match self {
            Term::Group(inner)
            | Term::Assigned { inner, .. }
            | Term::Located { inner, .. }
            | Term::Repeat { body: inner, .. } => inner.size(),
            Term::Binary { lhs, rhs, .. } => lhs.size() + rhs.size(),
            _ => 0,
        }
    }

    /// Calls `f` on every node, parents first.
    pub fn walk<'a>(&'a self, f: &mut impl FnMut(&'a Term)) {
        f(self);
        match self {
            Term::Group(inner)
            | Term::Assigned { inner, .. }
            | Term::Located { inner, .. }
            | Term::Repeat { body: inner, .. } => inner.walk(f),
            Term::Binary { lhs, rhs, .. } => {
                lhs.walk(f);
                rhs.walk(f);
            }
            _ => {}
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ActionDecl {
    pub name: String,
    pub signature: Vec<ParamType>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct VarDecl {
    pub name: String,
    pub ty: ParamType,
    /// Conjunction of boolean property literals; empty when there is no `with`.
    pub with: Vec<PropSpec>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TaskDecl {
    pub name: String,
    pub params: Vec<Param>,
    pub vars: Vec<VarDecl>,
    pub body: Term,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Declaration {
    Action(ActionDecl),
    Task(TaskDecl),
    Var(VarDecl),
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct Program {
    pub decls: Vec<Declaration>,
}

impl Program {
    pub fn actions(&self) -> impl Iterator<Item = &ActionDecl> {
        self.decls.iter().filter_map(|d| match d {
            Declaration::Action(a) => Some(a),
            _ => None,
        })
    }

    pub fn tasks(&self) -> impl Iterator<Item = &TaskDecl> {
        self.decls.iter().filter_map(|d| match d {
            Declaration::Task(t) => Some(t),
            _ => None,
        })
    }

    pub fn globals(&self) -> impl Iterator<Item = &VarDecl> {
        self.decls.iter().filter_map(|d| match d {
            Declaration::Var(v) => Some(v),
            _ => None,
        })
    }

    pub fn task(&self, name: &str) -> Option<&TaskDecl> {
        self.tasks().find(|t| t.name == name)
    }
}
