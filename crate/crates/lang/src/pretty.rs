//! Canonical source rendering.
//!
//! `Group` nodes print as parentheses. Where the tree shape needs parentheses
//! that no `Group` provides, they are added, so the output always re-parses;
//! for trees produced by the parser (or passed through
//! [`insert_required_groups`]) the re-parse is structurally identical.

use std::fmt::Write;

use crate::ast::{
    AssignMode, Declaration, Expr, Param, Program, PropSpec, Target, TemporalOp, Term, VarDecl,
};

pub fn pretty_print(program: &Program) -> String {
    let mut out = String::new();
    for decl in &program.decls {
        match decl {
            Declaration::Action(a) => {
                let sig: Vec<_> = a.signature.iter().map(|t| t.keyword()).collect();
                let _ = writeln!(out, "action {}({})", a.name, sig.join(", "));
            }
            Declaration::Var(v) => {
                let _ = writeln!(out, "var {}", var_decl(v));
            }
            Declaration::Task(t) => {
                let _ = writeln!(out, "task {}({}) {{", t.name, params(&t.params));
                for v in &t.vars {
                    let _ = writeln!(out, "  var {}", var_decl(v));
                }
                let _ = writeln!(out, "  {}", pretty_term(&t.body));
                out.push_str("}\n");
            }
        }
    }
    out
}

pub fn pretty_term(term: &Term) -> String {
    let mut out = String::new();
    write_term(&mut out, term);
    out
}

/// Wraps every subterm whose position requires parentheses in a `Group`.
pub fn insert_required_groups(term: &Term) -> Term {
    match term {
        Term::Group(inner) => Term::group(insert_required_groups(inner)),
        Term::Binary { op, lhs, rhs } => {
            let lhs = insert_required_groups(lhs);
            let rhs = insert_required_groups(rhs);
            let lhs = if needs_parens_lhs(*op, &lhs) { Term::group(lhs) } else { lhs };
            let rhs = if needs_parens_rhs(*op, &rhs) { Term::group(rhs) } else { rhs };
            Term::binary(*op, lhs, rhs)
        }
        Term::Assigned {
            inner,
            mode,
            target,
        } => Term::assigned(wrap_postfix(insert_required_groups(inner)), *mode, target.clone()),
        Term::Located { inner, loc } => {
            Term::located(wrap_postfix(insert_required_groups(inner)), loc.clone())
        }
        Term::Repeat { body, until } => Term::Repeat {
            body: Box::new(wrap_postfix(insert_required_groups(body))),
            until: until.clone(),
        },
        other => other.clone(),
    }
}

fn wrap_postfix(t: Term) -> Term {
    if matches!(t, Term::Binary { .. }) {
        Term::group(t)
    } else {
        t
    }
}

fn needs_parens_lhs(op: TemporalOp, child: &Term) -> bool {
    matches!(child, Term::Binary { op: c, .. } if c.precedence() < op.precedence())
}

fn needs_parens_rhs(op: TemporalOp, child: &Term) -> bool {
    matches!(child, Term::Binary { op: c, .. } if c.precedence() <= op.precedence())
}

fn write_paren(out: &mut String, term: &Term, parens: bool) {
    if parens {
        out.push('(');
        write_term(out, term);
        out.push(')');
    } else {
        write_term(out, term);
    }
}

fn write_term(out: &mut String, term: &Term) {
    match term {
        Term::Action { name, args } | Term::Call { task: name, args } => {
            out.push_str(name);
            out.push('(');
            for (i, a) in args.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                write_expr(out, a);
            }
            out.push(')');
        }
        Term::WaitEvent { name, params: ps } => {
            let _ = write!(out, "waitevent {}({})", name, params(ps));
        }
        Term::WaitProp(spec) => {
            out.push_str("waitprop ");
            out.push_str(&prop_spec(spec));
        }
        Term::Pause(ms) => {
            out.push_str("pause ");
            out.push_str(&duration(*ms));
        }
        Term::Repeat { body, until } => {
            out.push_str("repeat ");
            write_paren(out, body, matches!(**body, Term::Binary { .. }));
            out.push_str(" untilprop ");
            out.push_str(&prop_spec(until));
        }
        Term::Binary { op, lhs, rhs } => {
            write_paren(out, lhs, needs_parens_lhs(*op, lhs));
            let _ = write!(out, " {} ", op.symbol());
            write_paren(out, rhs, needs_parens_rhs(*op, rhs));
        }
        Term::Assigned {
            inner,
            mode,
            target,
        } => {
            write_paren(out, inner, matches!(**inner, Term::Binary { .. }));
            out.push_str(match mode {
                AssignMode::Shared => " -> ",
                AssignMode::Exclusive => " <-> ",
            });
            out.push_str(&target_text(target));
        }
        Term::Located { inner, loc } => {
            write_paren(out, inner, matches!(**inner, Term::Binary { .. }));
            out.push_str(" @ ");
            out.push_str(&target_text(loc));
        }
        Term::Group(inner) => write_paren(out, inner, true),
    }
}

fn write_expr(out: &mut String, e: &Expr) {
    match e {
        Expr::Str(s) => out.push_str(&quote(s)),
        Expr::Int(i) => {
            let _ = write!(out, "{i}");
        }
        Expr::Bool(b) => {
            let _ = write!(out, "{b}");
        }
        Expr::Duration(ms) => out.push_str(&duration(*ms)),
        Expr::Var(v) => out.push_str(v),
    }
}

pub(crate) fn duration(ms: u64) -> String {
    if ms.is_multiple_of(1000) {
        format!("{}s", ms / 1000)
    } else {
        format!("{ms}ms")
    }
}

fn quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

fn target_text(t: &Target) -> String {
    match t {
        Target::Var(v) => v.clone(),
        Target::Name(n) => quote(n),
    }
}

fn prop_spec(p: &PropSpec) -> String {
    let mut s = String::new();
    if p.negated {
        s.push('!');
    }
    if let Some(owner) = &p.owner {
        s.push_str(owner);
        s.push('.');
    }
    s.push_str(&p.prop);
    s
}

fn params(ps: &[Param]) -> String {
    ps.iter()
        .map(|p| format!("{} {}", p.name, p.ty))
        .collect::<Vec<_>>()
        .join(", ")
}

fn var_decl(v: &VarDecl) -> String {
    let mut s = format!("{} {}", v.name, v.ty);
    if !v.with.is_empty() {
        s.push_str(" with ");
        let lits: Vec<_> = v.with.iter().map(prop_spec).collect();
        s.push_str(&lits.join(" and "));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lexer::SourceProgram;
    use crate::parser::{parse_source, parse_term};

    #[test]
    fn pause_zero() {
        assert_eq!(pretty_term(&Term::Pause(0)), "pause 0s");
        assert_eq!(pretty_term(&Term::Pause(250)), "pause 250ms");
    }

    #[test]
    fn hello_program_round_trips() {
        let src = "action say(string)\ntask main() {\n  say(\"I'm in the lobby!\") @ \"lobby\"\n}\n";
        let p = parse_source(&SourceProgram::inline(src)).unwrap();
        let text = pretty_print(&p);
        assert_eq!(text, src);
        assert_eq!(parse_source(&SourceProgram::inline(&text)).unwrap(), p);
    }

    #[test]
    fn missing_parens_are_added() {
        let t = Term::binary(
            TemporalOp::Seq,
            Term::action("a"),
            Term::binary(TemporalOp::Seq, Term::action("b"), Term::action("c")),
        );
        let text = pretty_term(&t);
        assert_eq!(text, "a() => (b() => c())");
        assert_eq!(parse_term(&text).unwrap(), insert_required_groups(&t));
    }
}
