//! Static checking, task-call expansion and the recursion ban.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use crate::ast::{
    ActionDecl, Declaration, Expr, Param, ParamType, Program, PropSpec, Target, TaskDecl, Term,
    VarDecl,
};
use crate::error::TypeError;

/// Name plus parameter types; the unit robots advertise.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ActionSig {
    pub name: String,
    pub signature: Vec<ParamType>,
}

impl ActionSig {
    pub fn new(name: impl Into<String>, signature: Vec<ParamType>) -> Self {
        ActionSig {
            name: name.into(),
            signature,
        }
    }

    /// The implicit movement capability behind `@`.
    pub fn goto() -> Self {
        ActionSig::new("goto", vec![ParamType::Loc])
    }
}

impl std::fmt::Display for ActionSig {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let sig: Vec<_> = self.signature.iter().map(|t| t.keyword()).collect();
        write!(f, "{}({})", self.name, sig.join(", "))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RobotRef {
    Var(String),
    Named(String),
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RobotRequirements {
    pub capabilities: BTreeSet<ActionSig>,
    pub props: Vec<PropSpec>,
}

/// What each robot variable (or fixed robot name) must offer.
pub type RequirementSet = BTreeMap<RobotRef, RobotRequirements>;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VarInfo {
    pub ty: ParamType,
    pub with: Vec<PropSpec>,
}

/// A checked program with every task call inlined.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TypedProgram {
    pub entry_body: Term,
    pub actions: BTreeMap<String, Vec<ParamType>>,
    pub vars: BTreeMap<String, VarInfo>,
    pub events: BTreeMap<String, Vec<ParamType>>,
    pub requirements: RequirementSet,
}

impl TypedProgram {
    pub fn signature_of(&self, action: &str) -> Option<ActionSig> {
        self.actions
            .get(action)
            .map(|sig| ActionSig::new(action, sig.clone()))
    }
}

/// Type-check `program`, reject recursion, and expand `main`.
pub fn check(program: &Program) -> Result<TypedProgram, TypeError> {
    let mut actions = BTreeMap::new();
    for ActionDecl { name, signature } in program.actions() {
        if actions.insert(name.clone(), signature.clone()).is_some() {
            return Err(TypeError::Duplicate(name.clone()));
        }
    }
    let mut tasks: HashMap<&str, &TaskDecl> = HashMap::new();
    for t in program.tasks() {
        if tasks.insert(&t.name, t).is_some() || actions.contains_key(&t.name) {
            return Err(TypeError::Duplicate(t.name.clone()));
        }
    }
    let main = tasks.get("main").ok_or(TypeError::NoMain)?;
    if !main.params.is_empty() {
        return Err(TypeError::MainHasParams);
    }
    detect_recursion(program)?;

    let mut globals = BTreeMap::new();
    for v in program.globals() {
        check_var_decl(v)?;
        if globals.insert(v.name.clone(), v.ty).is_some() {
            return Err(TypeError::Duplicate(v.name.clone()));
        }
    }

    let mut events = BTreeMap::new();
    for t in program.tasks() {
        let mut scope = globals.clone();
        for p in &t.params {
            if scope.insert(p.name.clone(), p.ty).is_some() {
                return Err(TypeError::Duplicate(p.name.clone()));
            }
        }
        for v in &t.vars {
            check_var_decl(v)?;
            if scope.insert(v.name.clone(), v.ty).is_some() {
                return Err(TypeError::Duplicate(v.name.clone()));
            }
        }
        let mut event_params = Vec::new();
        collect_event_params(&t.body, &mut event_params);
        for p in event_params {
            if scope.insert(p.name.clone(), p.ty).is_some() {
                return Err(TypeError::Duplicate(p.name.clone()));
            }
        }
        let cx = Checker {
            actions: &actions,
            tasks: &tasks,
            scope: &scope,
        };
        cx.term(&t.body, &mut events)?;
    }

    let expanded = expand_program(program)?;
    let main = expanded.task("main").expect("expanded program keeps main");
    let mut vars = BTreeMap::new();
    for v in expanded.globals().chain(main.vars.iter()) {
        vars.insert(
            v.name.clone(),
            VarInfo {
                ty: v.ty,
                with: v.with.clone(),
            },
        );
    }
    let mut event_params = Vec::new();
    collect_event_params(&main.body, &mut event_params);
    for p in event_params {
        vars.insert(
            p.name.clone(),
            VarInfo {
                ty: p.ty,
                with: Vec::new(),
            },
        );
    }
    let requirements = requirements(&main.body, &actions, &vars);
    Ok(TypedProgram {
        entry_body: main.body.clone(),
        actions,
        vars,
        events,
        requirements,
    })
}

fn check_var_decl(v: &VarDecl) -> Result<(), TypeError> {
    if v.with.is_empty() {
        return Ok(());
    }
    if v.ty != ParamType::Robot {
        return Err(TypeError::InvalidWithClause {
            var: v.name.clone(),
            reason: format!("with-clauses apply to robot variables, not {}", v.ty),
        });
    }
    if let Some(p) = v.with.iter().find(|p| p.owner.is_some()) {
        return Err(TypeError::InvalidWithClause {
            var: v.name.clone(),
            reason: format!("property `{}` must not name an owner", p.prop),
        });
    }
    Ok(())
}

fn collect_event_params(term: &Term, out: &mut Vec<Param>) {
    term.walk(&mut |t| {
        if let Term::WaitEvent { params, .. } = t {
            out.extend(params.iter().cloned());
        }
    });
}

struct Checker<'a> {
    actions: &'a BTreeMap<String, Vec<ParamType>>,
    tasks: &'a HashMap<&'a str, &'a TaskDecl>,
    scope: &'a BTreeMap<String, ParamType>,
}

impl Checker<'_> {
    fn expr_type(&self, e: &Expr) -> Result<ParamType, TypeError> {
        Ok(match e {
            Expr::Str(_) => ParamType::String,
            Expr::Int(_) => ParamType::Int,
            Expr::Bool(_) => ParamType::Bool,
            Expr::Duration(_) => ParamType::Duration,
            Expr::Var(v) => *self
                .scope
                .get(v)
                .ok_or_else(|| TypeError::UnknownVariable(v.clone()))?,
        })
    }

    /// Checks an argument against its declared parameter type. String
    /// literals stand in for symbolic locations and robot names.
    fn arg(&self, context: &str, want: ParamType, e: &Expr) -> Result<(), TypeError> {
        let found = self.expr_type(e)?;
        let literal_name = matches!(e, Expr::Str(_))
            && matches!(want, ParamType::Loc | ParamType::Robot);
        if found == want || literal_name {
            Ok(())
        } else {
            Err(TypeError::Mismatch {
                context: context.to_string(),
                expected: want.to_string(),
                found: found.to_string(),
            })
        }
    }

    fn target(&self, context: &str, want: ParamType, t: &Target) -> Result<(), TypeError> {
        match t {
            Target::Name(_) => Ok(()),
            Target::Var(v) => {
                let found = *self
                    .scope
                    .get(v)
                    .ok_or_else(|| TypeError::UnknownVariable(v.clone()))?;
                if found == want {
                    Ok(())
                } else {
                    Err(TypeError::Mismatch {
                        context: context.to_string(),
                        expected: want.to_string(),
                        found: found.to_string(),
                    })
                }
            }
        }
    }

    fn prop_owner(&self, context: &str, spec: &PropSpec) -> Result<(), TypeError> {
        match &spec.owner {
            Some(owner) => self.target(context, ParamType::Robot, &Target::Var(owner.clone())),
            None => Err(TypeError::Mismatch {
                context: context.to_string(),
                expected: "robot.property".to_string(),
                found: spec.prop.clone(),
            }),
        }
    }

    fn term(
        &self,
        term: &Term,
        events: &mut BTreeMap<String, Vec<ParamType>>,
    ) -> Result<(), TypeError> {
        match term {
            Term::Action { name, args } => {
                let sig = self
                    .actions
                    .get(name)
                    .ok_or_else(|| TypeError::UnknownAction(name.clone()))?;
                let context = format!("call to `{name}`");
                if sig.len() != args.len() {
                    return Err(TypeError::Mismatch {
                        context,
                        expected: format!("{} argument(s)", sig.len()),
                        found: format!("{} argument(s)", args.len()),
                    });
                }
                for (want, e) in sig.iter().zip(args) {
                    self.arg(&context, *want, e)?;
                }
                Ok(())
            }
            Term::Call { task, args } => {
                let callee = self
                    .tasks
                    .get(task.as_str())
                    .ok_or_else(|| TypeError::UnknownTask(task.clone()))?;
                let context = format!("call to task `{task}`");
                if callee.params.len() != args.len() {
                    return Err(TypeError::Mismatch {
                        context,
                        expected: format!("{} argument(s)", callee.params.len()),
                        found: format!("{} argument(s)", args.len()),
                    });
                }
                for (p, e) in callee.params.iter().zip(args) {
                    self.arg(&context, p.ty, e)?;
                    if p.ty == ParamType::Robot
                        && matches!(e, Expr::Str(_))
                        && param_owns_props(&callee.body, &p.name)
                    {
                        return Err(TypeError::Mismatch {
                            context,
                            expected: "robot variable (parameter owns a property test)".into(),
                            found: "string".into(),
                        });
                    }
                }
                Ok(())
            }
            Term::WaitEvent { name, params } => {
                let types: Vec<_> = params.iter().map(|p| p.ty).collect();
                match events.get(name) {
                    Some(existing) if *existing != types => {
                        Err(TypeError::EventSignature { name: name.clone() })
                    }
                    _ => {
                        events.insert(name.clone(), types);
                        Ok(())
                    }
                }
            }
            Term::WaitProp(spec) => self.prop_owner("waitprop", spec),
            Term::Pause(_) => Ok(()),
            Term::Repeat { body, until } => {
                self.prop_owner("untilprop", until)?;
                self.term(body, events)
            }
            Term::Binary { lhs, rhs, .. } => {
                self.term(lhs, events)?;
                self.term(rhs, events)
            }
            Term::Assigned { inner, target, .. } => {
                self.target("robot assignment", ParamType::Robot, target)?;
                self.term(inner, events)
            }
            Term::Located { inner, loc } => {
                self.target("location", ParamType::Loc, loc)?;
                self.term(inner, events)
            }
            Term::Group(inner) => self.term(inner, events),
        }
    }
}

fn param_owns_props(body: &Term, param: &str) -> bool {
    let mut found = false;
    body.walk(&mut |t| match t {
        Term::WaitProp(p) | Term::Repeat { until: p, .. } => {
            found |= p.owner.as_deref() == Some(param);
        }
        _ => {}
    });
    found
}

fn calls_in(term: &Term, out: &mut Vec<String>) {
    term.walk(&mut |t| {
        if let Term::Call { task, .. } = t {
            out.push(task.clone());
        }
    });
}

/// Fails with the offending cycle when the task call graph is cyclic.
pub fn detect_recursion(program: &Program) -> Result<(), TypeError> {
    let mut graph: BTreeMap<&str, Vec<String>> = BTreeMap::new();
    for t in program.tasks() {
        let mut callees = Vec::new();
        calls_in(&t.body, &mut callees);
        graph.insert(&t.name, callees);
    }
    for callees in graph.values() {
        if let Some(missing) = callees.iter().find(|c| !graph.contains_key(c.as_str())) {
            return Err(TypeError::UnknownTask(missing.clone()));
        }
    }

    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        New,
        Active,
        Done,
    }
    fn visit<'a>(
        node: &'a str,
        graph: &'a BTreeMap<&'a str, Vec<String>>,
        marks: &mut BTreeMap<&'a str, Mark>,
        stack: &mut Vec<&'a str>,
    ) -> Result<(), TypeError> {
        marks.insert(node, Mark::Active);
        stack.push(node);
        for callee in &graph[node] {
            match marks[callee.as_str()] {
                Mark::Active => {
                    let start = stack.iter().position(|n| *n == callee).unwrap_or(0);
                    let mut cycle: Vec<String> =
                        stack[start..].iter().map(|s| s.to_string()).collect();
                    cycle.push(callee.clone());
                    return Err(TypeError::Recursion(cycle));
                }
                Mark::New => visit(callee, graph, marks, stack)?,
                Mark::Done => {}
            }
        }
        stack.pop();
        marks.insert(node, Mark::Done);
        Ok(())
    }

    let mut marks: BTreeMap<&str, Mark> = graph.keys().map(|k| (*k, Mark::New)).collect();
    let roots: Vec<&str> = graph.keys().copied().collect();
    for root in roots {
        if marks[root] == Mark::New {
            visit(root, &graph, &mut marks, &mut Vec::new())?;
        }
    }
    Ok(())
}

/// Inline every task call in `main`. Returns the expanded body.
pub fn expand(program: &Program) -> Result<Term, TypeError> {
    let expanded = expand_program(program)?;
    expanded
        .task("main")
        .map(|t| t.body.clone())
        .ok_or(TypeError::NoMain)
}

/// Inline every task call, producing a program whose only task is `main`.
/// Callee locals are renamed `name#k` with `k` unique per call site.
pub fn expand_program(program: &Program) -> Result<Program, TypeError> {
    detect_recursion(program)?;
    let main = program.task("main").ok_or(TypeError::NoMain)?;
    let mut ex = Expander {
        program,
        next_site: 0,
        vars: main.vars.clone(),
    };
    let body = ex.term(&main.body)?;
    let mut decls: Vec<Declaration> = program
        .decls
        .iter()
        .filter(|d| !matches!(d, Declaration::Task(_)))
        .cloned()
        .collect();
    decls.push(Declaration::Task(TaskDecl {
        name: "main".into(),
        params: Vec::new(),
        vars: ex.vars,
        body,
    }));
    Ok(Program { decls })
}

struct Expander<'a> {
    program: &'a Program,
    next_site: usize,
    vars: Vec<VarDecl>,
}

impl Expander<'_> {
    fn term(&mut self, term: &Term) -> Result<Term, TypeError> {
        Ok(match term {
            Term::Call { task, args } => {
                let callee = self
                    .program
                    .task(task)
                    .ok_or_else(|| TypeError::UnknownTask(task.clone()))?;
                self.next_site += 1;
                let site = self.next_site;
                let mut renames: HashMap<String, Substitute> = HashMap::new();
                for v in &callee.vars {
                    let fresh = format!("{}#{site}", v.name);
                    renames.insert(v.name.clone(), Substitute::Var(fresh.clone()));
                    self.vars.push(VarDecl {
                        name: fresh,
                        ty: v.ty,
                        with: v.with.clone(),
                    });
                }
                let mut event_params = Vec::new();
                collect_event_params(&callee.body, &mut event_params);
                for p in event_params {
                    renames.insert(p.name.clone(), Substitute::Var(format!("{}#{site}", p.name)));
                }
                for (p, a) in callee.params.iter().zip(args) {
                    renames.insert(p.name.clone(), Substitute::Expr(a.clone()));
                }
                let body = substitute(&callee.body, &renames);
                Term::group(self.term(&body)?)
            }
            Term::Binary { op, lhs, rhs } => Term::binary(*op, self.term(lhs)?, self.term(rhs)?),
            Term::Assigned {
                inner,
                mode,
                target,
            } => Term::assigned(self.term(inner)?, *mode, target.clone()),
            Term::Located { inner, loc } => Term::located(self.term(inner)?, loc.clone()),
            Term::Group(inner) => Term::group(self.term(inner)?),
            Term::Repeat { body, until } => Term::Repeat {
                body: Box::new(self.term(body)?),
                until: until.clone(),
            },
            other => other.clone(),
        })
    }
}

enum Substitute {
    Var(String),
    Expr(Expr),
}

fn substitute(term: &Term, map: &HashMap<String, Substitute>) -> Term {
    let expr = |e: &Expr| match e {
        Expr::Var(v) => match map.get(v) {
            Some(Substitute::Var(n)) => Expr::Var(n.clone()),
            Some(Substitute::Expr(e)) => e.clone(),
            None => e.clone(),
        },
        other => other.clone(),
    };
    let target = |t: &Target| match t {
        Target::Var(v) => match map.get(v) {
            Some(Substitute::Var(n)) | Some(Substitute::Expr(Expr::Var(n))) => {
                Target::Var(n.clone())
            }
            Some(Substitute::Expr(Expr::Str(s))) => Target::Name(s.clone()),
            _ => t.clone(),
        },
        Target::Name(_) => t.clone(),
    };
    let name = |n: &String| match map.get(n) {
        Some(Substitute::Var(v)) | Some(Substitute::Expr(Expr::Var(v))) => v.clone(),
        _ => n.clone(),
    };
    let prop = |p: &PropSpec| PropSpec {
        owner: p.owner.as_ref().map(name),
        ..p.clone()
    };
    match term {
        Term::Action { name, args } => Term::Action {
            name: name.clone(),
            args: args.iter().map(expr).collect(),
        },
        Term::Call { task, args } => Term::Call {
            task: task.clone(),
            args: args.iter().map(expr).collect(),
        },
        Term::WaitEvent { name: ev, params } => Term::WaitEvent {
            name: ev.clone(),
            params: params
                .iter()
                .map(|p| Param::new(name(&p.name), p.ty))
                .collect(),
        },
        Term::WaitProp(p) => Term::WaitProp(prop(p)),
        Term::Pause(ms) => Term::Pause(*ms),
        Term::Repeat { body, until } => Term::Repeat {
            body: Box::new(substitute(body, map)),
            until: prop(until),
        },
        Term::Binary { op, lhs, rhs } => {
            Term::binary(*op, substitute(lhs, map), substitute(rhs, map))
        }
        Term::Assigned {
            inner,
            mode,
            target: t,
        } => Term::assigned(substitute(inner, map), *mode, target(t)),
        Term::Located { inner, loc } => Term::located(substitute(inner, map), target(loc)),
        Term::Group(inner) => Term::group(substitute(inner, map)),
    }
}

fn robot_ref(t: &Target) -> RobotRef {
    match t {
        Target::Var(v) => RobotRef::Var(v.clone()),
        Target::Name(n) => RobotRef::Named(n.clone()),
    }
}

fn requirements(
    body: &Term,
    actions: &BTreeMap<String, Vec<ParamType>>,
    vars: &BTreeMap<String, VarInfo>,
) -> RequirementSet {
    fn walk(
        t: &Term,
        robot: Option<&Target>,
        located: bool,
        actions: &BTreeMap<String, Vec<ParamType>>,
        out: &mut RequirementSet,
    ) {
        match t {
            Term::Action { name, .. } => {
                if let Some(r) = robot {
                    let entry = out.entry(robot_ref(r)).or_default();
                    if let Some(sig) = actions.get(name) {
                        entry
                            .capabilities
                            .insert(ActionSig::new(name.clone(), sig.clone()));
                    }
                    if located {
                        entry.capabilities.insert(ActionSig::goto());
                    }
                }
            }
            Term::Assigned { inner, target, .. } => walk(inner, Some(target), located, actions, out),
            Term::Located { inner, .. } => walk(inner, robot, true, actions, out),
            Term::Group(inner) | Term::Repeat { body: inner, .. } => {
                walk(inner, robot, located, actions, out)
            }
            Term::Binary { lhs, rhs, .. } => {
                walk(lhs, robot, located, actions, out);
                walk(rhs, robot, located, actions, out);
            }
            _ => {}
        }
    }
    let mut out = RequirementSet::new();
    walk(body, None, false, actions, &mut out);
    for (r, req) in out.iter_mut() {
        if let RobotRef::Var(v) = r {
            if let Some(info) = vars.get(v) {
                req.props = info.with.clone();
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lexer::SourceProgram;
    use crate::parser::parse_source;

    fn program(text: &str) -> Program {
        parse_source(&SourceProgram::inline(text)).unwrap()
    }

    const DELIVERY: &str = "action load(), dropoff()
        task main() {
          var r robot with !loaded
          waitevent pickup(A, B loc)
           => (load @ A ->r & waitprop r.loaded)
           => dropoff @ B ->r
        }";

    #[test]
    fn hello_checks() {
        let tp = check(&program(
            "action say(string)\ntask main() { say(\"I'm in the lobby!\") @ \"lobby\" }",
        ))
        .unwrap();
        assert_eq!(tp.actions["say"], vec![ParamType::String]);
        // No robot named or bound: no per-robot requirements.
        assert!(tp.requirements.is_empty());
    }

    #[test]
    fn argument_type_mismatch() {
        let err = check(&program("action say(string)\ntask main() { say(42) }")).unwrap_err();
        assert_eq!(
            err,
            TypeError::Mismatch {
                context: "call to `say`".into(),
                expected: "string".into(),
                found: "int".into()
            }
        );
    }

    #[test]
    fn delivery_requirements() {
        let tp = check(&program(DELIVERY)).unwrap();
        let req = &tp.requirements[&RobotRef::Var("r".into())];
        let caps: Vec<String> = req.capabilities.iter().map(|c| c.to_string()).collect();
        assert_eq!(caps, vec!["dropoff()", "goto(loc)", "load()"]);
        assert_eq!(
            req.props,
            vec![PropSpec {
                prop: "loaded".into(),
                negated: true,
                owner: None
            }]
        );
        assert_eq!(tp.events["pickup"], vec![ParamType::Loc, ParamType::Loc]);
        assert_eq!(tp.vars["A"].ty, ParamType::Loc);
    }

    #[test]
    fn goto_only_when_located() {
        let tp = check(&program(
            "action a(), b() task main() { var r, s robot\n a -> r & b @ \"x\" -> s }",
        ))
        .unwrap();
        assert!(!tp.requirements[&RobotRef::Var("r".into())]
            .capabilities
            .contains(&ActionSig::goto()));
        assert!(tp.requirements[&RobotRef::Var("s".into())]
            .capabilities
            .contains(&ActionSig::goto()));
    }

    #[test]
    fn unknown_names() {
        assert_eq!(
            check(&program("task main() { nope() }")).unwrap_err(),
            TypeError::UnknownAction("nope".into())
        );
        assert_eq!(
            check(&program("action a() task main() { a @ L }")).unwrap_err(),
            TypeError::UnknownVariable("L".into())
        );
        assert!(matches!(
            check(&program("action a() task main() { var n int with ok\n a }")).unwrap_err(),
            TypeError::InvalidWithClause { .. }
        ));
        assert_eq!(check(&program("")).unwrap_err(), TypeError::NoMain);
    }

    #[test]
    fn robot_target_must_be_robot() {
        let err = check(&program("action a() task main() { var l loc\n a -> l }")).unwrap_err();
        assert!(matches!(err, TypeError::Mismatch { .. }));
    }

    #[test]
    fn self_call_is_recursion() {
        let p = program("task a() { a() } task main() { a() }");
        assert_eq!(
            detect_recursion(&p).unwrap_err(),
            TypeError::Recursion(vec!["a".into(), "a".into()])
        );
    }

    #[test]
    fn no_calls_is_ok() {
        assert!(detect_recursion(&program("")).is_ok());
        let p = program("action x() task main() { x }");
        assert_eq!(expand(&p).unwrap(), p.task("main").unwrap().body);
    }

    #[test]
    fn two_call_sites_get_distinct_locals() {
        let p = program(
            "action work()
             task sub() { var w robot\n work -> w }
             task main() { sub() => sub() }",
        );
        let tp = check(&p).unwrap();
        let robots: Vec<&String> = tp
            .vars
            .iter()
            .filter(|(_, v)| v.ty == ParamType::Robot)
            .map(|(k, _)| k)
            .collect();
        assert_eq!(robots, vec!["w#1", "w#2"]);
    }

    #[test]
    fn parameters_are_substituted() {
        let p = program(
            "action say(string)
             task greet(where loc, who robot) { say(\"hi\") @ where -> who }
             task main() { var r robot\n greet(\"lobby\", r) }",
        );
        let body = expand(&p).unwrap();
        let text = crate::pretty::pretty_term(&body);
        assert_eq!(text, "(say(\"hi\") @ \"lobby\" -> r)");
    }

    #[test]
    fn check_of_expansion_is_identical() {
        let p = program(
            "action a(), b(loc)
             task leaf(x loc) { var q robot with ready\n b(x) -> q & waitprop q.ready }
             task mid() { leaf(\"k\") => leaf(\"j\") }
             task main() { var r robot\n mid() + a -> r }",
        );
        let once = check(&p).unwrap();
        let again = check(&expand_program(&p).unwrap()).unwrap();
        assert_eq!(once, again);
    }
}
