use std::collections::BTreeMap;

use resh_engine::{Command, EngineError, RuntimeEvent, TemporalEngine};
use resh_lang::{compile, ActionSig, ParamType, SourceProgram, TypedProgram};
use resh_optimize::{solve, validate, RobotDescriptor, StraightLine};
use resh_protocol::{Pose, StatusKind, TaskState, Value};
use resh_temporal::build_automaton;

fn program(src: &str) -> TypedProgram {
    compile(&SourceProgram::inline(src)).unwrap()
}

fn robot(name: &str, x: f64, actions: &[&str]) -> RobotDescriptor {
    let mut r = RobotDescriptor::new(name, Pose::new(x, 0.0, 0.0));
    for a in actions {
        let sig = if *a == "goto" {
            ActionSig::goto()
        } else {
            ActionSig::new(*a, Vec::new())
        };
        r = r.with_capability(&sig);
    }
    r
}

fn locations() -> BTreeMap<String, Pose> {
    BTreeMap::from([
        ("dock".to_string(), Pose::new(1.0, 0.0, 0.0)),
        ("ward".to_string(), Pose::new(8.0, 0.0, 0.0)),
    ])
}

/// Formulate, solve and apply until nothing is left to decide.
fn decide(e: &mut TemporalEngine, now: u64) -> Vec<Command> {
    let mut out = Vec::new();
    for _ in 0..64 {
        if !e.is_dirty() {
            break;
        }
        let Some(p) = e.formulate(now) else { break };
        let s = solve(&p, &StraightLine);
        validate(&p, &s, &StraightLine).unwrap();
        out.extend(e.apply_solution(&s, now).unwrap());
    }
    out
}

fn event(e: &mut TemporalEngine, ev: RuntimeEvent, now: u64) -> Vec<Command> {
    let mut out = e.on_event(ev, now);
    out.extend(decide(e, now));
    out
}

fn finish(instance: &str, status: StatusKind) -> RuntimeEvent {
    RuntimeEvent::ActionFinished {
        instance: instance.to_string(),
        status,
    }
}

fn started(cmds: &[Command]) -> Vec<(String, String, String)> {
    cmds.iter()
        .filter_map(|c| match c {
            Command::StartAction {
                instance,
                action,
                robot,
                ..
            } => Some((instance.clone(), action.clone(), robot.clone())),
            _ => None,
        })
        .collect()
}

fn cancelled(cmds: &[Command]) -> Vec<String> {
    cmds.iter()
        .filter_map(|c| match c {
            Command::CancelAction { instance } => Some(instance.clone()),
            _ => None,
        })
        .collect()
}

fn state(e: &TemporalEngine, id: &str) -> TaskState {
    e.task(id).unwrap().state
}

fn assert_word_accepted(e: &TemporalEngine, id: &str) {
    let (plan, word) = e.task_word(id).unwrap();
    let automaton = build_automaton(plan);
    assert!(automaton.accepts(word), "word {word:?} rejected");
}

fn pool3(e: &mut TemporalEngine) {
    for (i, n) in ["r0", "r1", "r2"].iter().enumerate() {
        e.on_event(
            RuntimeEvent::RobotAdded(robot(n, i as f64, &["A", "B", "C"])),
            0,
        );
    }
}

const ABC: &str = "action A(), B(), C()\ntask main() { A => (B + C) }";

#[test]
fn seq_then_par_launches_b_and_c_together() {
    let mut e = TemporalEngine::new(BTreeMap::new());
    pool3(&mut e);
    e.submit("p", program(ABC), 0).unwrap();
    let cmds = decide(&mut e, 0);
    assert_eq!(started(&cmds), [("p.f0.a0".into(), "A".into(), "r0".into())]);
    assert_eq!(state(&e, "p"), TaskState::Running);

    e.on_event(finish("p.f0.a0", StatusKind::Succeeded), 10);
    let problem = e.formulate(10).unwrap();
    assert_eq!(problem.groups.len(), 1);
    let ids: Vec<&str> = problem.groups[0]
        .actions
        .iter()
        .map(|a| a.instance.as_str())
        .collect();
    assert_eq!(ids, ["p.f0.a1", "p.f0.a2"]);
    let s = solve(&problem, &StraightLine);
    let cmds = e.apply_solution(&s, 10).unwrap();
    let names: Vec<String> = started(&cmds).into_iter().map(|s| s.1).collect();
    assert_eq!(names, ["B", "C"]);

    event(&mut e, finish("p.f0.a1", StatusKind::Succeeded), 20);
    event(&mut e, finish("p.f0.a2", StatusKind::Succeeded), 30);
    e.formulate(30);
    assert_eq!(state(&e, "p"), TaskState::Succeeded);
    let (plan, word) = e.task_word("p").unwrap();
    let rendered: Vec<String> = word.iter().map(|l| l.to_string()).collect();
    assert_eq!(rendered, ["<{},{0}>", "<{0:ok},{}>", "<{},{1,2}>", "<{1:ok},{}>", "<{2:ok},{}>"]);
    assert!(build_automaton(plan).accepts(word));
}

#[test]
fn failure_aborts_the_task_and_cancels_siblings() {
    let mut e = TemporalEngine::new(BTreeMap::new());
    pool3(&mut e);
    e.submit("p", program("action A(), B()\ntask main() { A & B }"), 0)
        .unwrap();
    assert_eq!(started(&decide(&mut e, 0)).len(), 2);
    let cmds = event(&mut e, finish("p.f0.a0", StatusKind::Failed), 5);
    assert_eq!(cancelled(&cmds), ["p.f0.a1"]);
    let info = e.task("p").unwrap();
    assert_eq!(info.state, TaskState::Aborted);
    assert_eq!(info.detail.as_deref(), Some("p.f0.a0 failed"));
    assert!(cmds.iter().any(|c| matches!(
        c,
        Command::TaskStatus {
            state: TaskState::Aborted,
            ..
        }
    )));
    event(&mut e, finish("p.f0.a1", StatusKind::Terminated), 6);
    assert!(e.pool().values().all(|r| r.busy.is_none()));
    assert_eq!(state(&e, "p"), TaskState::Aborted);
}

const DELIVERY: &str = "action load(), dropoff()
task main() {
  var r robot with !loaded
  waitevent pickup(A, B loc)
   => (load @ A -> r & waitprop r.loaded)
   => dropoff @ B -> r
}";

fn delivery_pool(e: &mut TemporalEngine) {
    for (n, x) in [("amy", 0.0), ("bob", 5.0)] {
        let mut r = robot(n, x, &["load", "dropoff", "goto"]);
        r.properties.insert("loaded".into(), Value::Bool(false));
        e.on_event(RuntimeEvent::RobotAdded(r), 0);
    }
}

fn gotos(cmds: &[Command]) -> Vec<(String, String, String)> {
    cmds.iter()
        .filter_map(|c| match c {
            Command::GotoSet { gotos, .. } => Some(gotos),
            _ => None,
        })
        .flatten()
        .map(|g| (g.instance.clone(), g.robot.clone(), g.location.clone()))
        .collect()
}

#[test]
fn delivery_binds_late_and_reuses_the_robot() {
    let mut e = TemporalEngine::new(locations());
    delivery_pool(&mut e);
    e.submit("d", program(DELIVERY), 0).unwrap();
    decide(&mut e, 0);
    assert!(e.bindings().is_empty());

    let (consumed, _) = e
        .fire_external_event("pickup", vec!["dock".into(), "ward".into()], 100)
        .unwrap();
    assert!(consumed);
    let cmds = decide(&mut e, 100);
    // amy is 1 m from the dock, bob 4 m.
    assert_eq!(
        gotos(&cmds),
        [("d.f0.a1.goto".into(), "amy".into(), "dock".into())]
    );
    assert!(started(&cmds).is_empty());
    assert_eq!(e.bindings().get("d:r").map(String::as_str), Some("amy"));

    let cmds = event(&mut e, finish("d.f0.a1.goto", StatusKind::Succeeded), 200);
    assert_eq!(started(&cmds), [("d.f0.a1".into(), "load".into(), "amy".into())]);
    event(&mut e, finish("d.f0.a1", StatusKind::Succeeded), 300);
    // bob turning loaded changes nothing: the wait watches the robot bound to r.
    let cmds = event(
        &mut e,
        RuntimeEvent::PropertyChanged {
            robot: "bob".into(),
            prop: "loaded".into(),
            value: Value::Bool(true),
        },
        350,
    );
    assert!(gotos(&cmds).is_empty());
    let cmds = event(
        &mut e,
        RuntimeEvent::PropertyChanged {
            robot: "amy".into(),
            prop: "loaded".into(),
            value: Value::Bool(true),
        },
        400,
    );
    assert_eq!(
        gotos(&cmds),
        [("d.f0.a3.goto".into(), "amy".into(), "ward".into())]
    );
    event(&mut e, finish("d.f0.a3.goto", StatusKind::Succeeded), 500);
    event(&mut e, finish("d.f0.a3", StatusKind::Succeeded), 600);
    e.formulate(600);
    assert_eq!(state(&e, "d"), TaskState::Succeeded);
    assert_word_accepted(&e, "d");
}

#[test]
fn two_tasks_waiting_on_one_event_both_unblock() {
    let mut e = TemporalEngine::new(locations());
    delivery_pool(&mut e);
    e.submit("a", program(DELIVERY), 0).unwrap();
    e.submit("b", program(DELIVERY), 0).unwrap();
    decide(&mut e, 0);
    let (consumed, _) = e
        .fire_external_event("pickup", vec!["dock".into(), "ward".into()], 10)
        .unwrap();
    assert!(consumed);
    let cmds = decide(&mut e, 10);
    let mut robots: Vec<String> = gotos(&cmds).into_iter().map(|g| g.1).collect();
    robots.sort();
    assert_eq!(robots, ["amy", "bob"]);
}

#[test]
fn event_arity_is_checked_and_unawaited_events_are_dropped() {
    let mut e = TemporalEngine::new(locations());
    e.submit("d", program(DELIVERY), 0).unwrap();
    decide(&mut e, 0);
    let err = e
        .fire_external_event("pickup", vec!["dock".into()], 1)
        .unwrap_err();
    assert_eq!(
        err,
        EngineError::ArityMismatch {
            name: "pickup".into(),
            expected: 2,
            got: 1
        }
    );
    let (consumed, cmds) = e.fire_external_event("nobody", vec![], 2).unwrap();
    assert!(!consumed);
    assert!(cmds.is_empty());
}

#[test]
fn stale_solutions_are_refused() {
    let mut e = TemporalEngine::new(BTreeMap::new());
    pool3(&mut e);
    e.submit("p", program(ABC), 0).unwrap();
    let p = e.formulate(0).unwrap();
    let s = solve(&p, &StraightLine);
    e.on_event(RuntimeEvent::RobotAdded(robot("r9", 9.0, &["A"])), 1);
    assert_eq!(
        e.apply_solution(&s, 1).unwrap_err(),
        EngineError::StaleSolution(p.epoch)
    );
    assert!(e.is_dirty());
    let p2 = e.formulate(2).unwrap();
    assert!(p2.epoch > p.epoch);
    assert_eq!(
        e.apply_solution(&s, 2).unwrap_err(),
        EngineError::StaleSolution(p.epoch)
    );
}

#[test]
fn empty_pool_defers_until_a_capable_robot_joins() {
    let mut e = TemporalEngine::new(BTreeMap::new());
    e.submit("p", program("action A()\ntask main() { A }"), 0)
        .unwrap();
    assert!(started(&decide(&mut e, 0)).is_empty());
    assert_eq!(state(&e, "p"), TaskState::Queued);
    let epoch = e.epoch();
    let cmds = event(
        &mut e,
        RuntimeEvent::RobotAdded(robot("robbie", 0.0, &["A"])),
        50,
    );
    assert_eq!(started(&cmds).len(), 1);
    assert_eq!(e.epoch(), epoch + 1);
}

#[test]
fn removing_a_robot_mid_action_aborts_the_task() {
    let mut e = TemporalEngine::new(BTreeMap::new());
    e.on_event(RuntimeEvent::RobotAdded(robot("robbie", 0.0, &["A"])), 0);
    e.submit("p", program("action A()\ntask main() { A => A }"), 0)
        .unwrap();
    decide(&mut e, 0);
    event(&mut e, RuntimeEvent::RobotRemoved("robbie".into()), 10);
    let info = e.task("p").unwrap();
    assert_eq!(info.state, TaskState::Aborted);
    assert!(info.detail.unwrap().contains("p.f0.a0"));
}

#[test]
fn unwatched_property_changes_do_not_reformulate() {
    let mut e = TemporalEngine::new(locations());
    delivery_pool(&mut e);
    e.submit("p", program(ABC), 0).unwrap();
    decide(&mut e, 0);
    e.on_event(
        RuntimeEvent::PropertyChanged {
            robot: "amy".into(),
            prop: "color".into(),
            value: Value::Str("red".into()),
        },
        5,
    );
    assert!(!e.is_dirty());
}

#[test]
fn repeat_checks_its_property_before_each_iteration() {
    let src = "action A()\ntask main() { var r robot\n (A -> r) => repeat (A -> r) untilprop r.done }";
    let mut e = TemporalEngine::new(BTreeMap::new());
    e.on_event(RuntimeEvent::RobotAdded(robot("robbie", 0.0, &["A"])), 0);
    e.submit("p", program(src), 0).unwrap();
    decide(&mut e, 0);
    let cmds = event(&mut e, finish("p.f0.a0", StatusKind::Succeeded), 1);
    assert_eq!(started(&cmds), [("p.f1.a0".into(), "A".into(), "robbie".into())]);
    let cmds = event(&mut e, finish("p.f1.a0", StatusKind::Succeeded), 2);
    assert_eq!(started(&cmds), [("p.f2.a0".into(), "A".into(), "robbie".into())]);
    e.on_event(
        RuntimeEvent::PropertyChanged {
            robot: "robbie".into(),
            prop: "done".into(),
            value: Value::Bool(true),
        },
        3,
    );
    let cmds = event(&mut e, finish("p.f2.a0", StatusKind::Succeeded), 4);
    assert!(started(&cmds).is_empty());
    e.formulate(4);
    assert_eq!(state(&e, "p"), TaskState::Succeeded);
    assert_word_accepted(&e, "p");

    // Already satisfied: the body never runs.
    let mut e = TemporalEngine::new(BTreeMap::new());
    let mut r = robot("robbie", 0.0, &["A"]);
    r.properties.insert("done".into(), Value::Bool(true));
    e.on_event(RuntimeEvent::RobotAdded(r), 0);
    e.submit("p", program(src), 0).unwrap();
    decide(&mut e, 0);
    let cmds = event(&mut e, finish("p.f0.a0", StatusKind::Succeeded), 1);
    assert!(started(&cmds).is_empty());
    e.formulate(1);
    assert_eq!(state(&e, "p"), TaskState::Succeeded);
}

#[test]
fn exclusive_scope_keeps_the_robot_for_the_whole_subexpression() {
    let src = "action A(), B(), C()\ntask main() { (A => B) <-> \"solo\" & C -> \"solo\" }";
    let mut e = TemporalEngine::new(BTreeMap::new());
    e.on_event(
        RuntimeEvent::RobotAdded(robot("solo", 0.0, &["A", "B", "C"])),
        0,
    );
    e.submit("p", program(src), 0).unwrap();
    let cmds = decide(&mut e, 0);
    assert_eq!(started(&cmds)[0].1, "A");
    // Between A and B the robot is idle but reserved, so C must wait.
    let cmds = event(&mut e, finish("p.f0.a0", StatusKind::Succeeded), 1);
    let names: Vec<String> = started(&cmds).into_iter().map(|s| s.1).collect();
    assert_eq!(names, ["B"]);
    let cmds = event(&mut e, finish("p.f0.a1", StatusKind::Succeeded), 2);
    let names: Vec<String> = started(&cmds).into_iter().map(|s| s.1).collect();
    assert_eq!(names, ["C"]);
    event(&mut e, finish("p.f0.a2", StatusKind::Succeeded), 3);
    e.formulate(3);
    assert_eq!(state(&e, "p"), TaskState::Succeeded);
    assert!(e.pool()["solo"].reserved.is_none());
}

#[test]
fn short_circuit_cancels_the_slower_side() {
    let src = "action A()\ntask main() { A !& waitevent go() }";
    let mut e = TemporalEngine::new(BTreeMap::new());
    e.on_event(RuntimeEvent::RobotAdded(robot("robbie", 0.0, &["A"])), 0);
    e.submit("p", program(src), 0).unwrap();
    decide(&mut e, 0);
    let (_, cmds) = e.fire_external_event("go", vec![], 5).unwrap();
    assert_eq!(cancelled(&cmds), ["p.f0.a0"]);
    assert_eq!(state(&e, "p"), TaskState::Running);
    event(&mut e, finish("p.f0.a0", StatusKind::Terminated), 6);
    e.formulate(6);
    assert_eq!(state(&e, "p"), TaskState::Succeeded);
    assert_word_accepted(&e, "p");
}

#[test]
fn pause_runs_on_a_timer() {
    let mut e = TemporalEngine::new(BTreeMap::new());
    e.submit("p", program("task main() { pause 2s }"), 0).unwrap();
    let cmds = decide(&mut e, 0);
    assert_eq!(
        cmds,
        [Command::TaskStatus {
            program_id: "p".into(),
            state: TaskState::Running,
            detail: None
        },
        Command::StartTimer {
            timer: "p.f0.a0".into(),
            delay_ms: 2000
        }]
    );
    event(&mut e, RuntimeEvent::TimerFired("p.f0.a0".into()), 2000);
    assert_eq!(state(&e, "p"), TaskState::Succeeded);
}

#[test]
fn cancelling_a_task_cancels_its_actions() {
    let mut e = TemporalEngine::new(locations());
    delivery_pool(&mut e);
    e.submit("d", program(DELIVERY), 0).unwrap();
    decide(&mut e, 0);
    e.fire_external_event("pickup", vec!["dock".into(), "ward".into()], 1)
        .unwrap();
    decide(&mut e, 1);
    let cmds = e.cancel_task("d", 2).unwrap();
    assert_eq!(cancelled(&cmds), ["d.f0.a1.goto"]);
    assert_eq!(state(&e, "d"), TaskState::Cancelled);
    event(&mut e, finish("d.f0.a1.goto", StatusKind::Terminated), 3);
    assert!(e.pool().values().all(|r| r.busy.is_none()));
    assert_eq!(
        e.cancel_task("nope", 4).unwrap_err(),
        EngineError::UnknownProgram("nope".into())
    );
}

#[test]
fn unknown_location_aborts_with_a_distinct_error() {
    let mut e = TemporalEngine::new(locations());
    delivery_pool(&mut e);
    e.submit("d", program(DELIVERY), 0).unwrap();
    decide(&mut e, 0);
    e.fire_external_event("pickup", vec!["moon".into(), "ward".into()], 1)
        .unwrap();
    decide(&mut e, 1);
    let info = e.task("d").unwrap();
    assert_eq!(info.state, TaskState::Aborted);
    assert_eq!(info.detail.as_deref(), Some("unknown location moon"));
}

#[test]
fn signature_mismatch_keeps_the_action_waiting() {
    let mut e = TemporalEngine::new(BTreeMap::new());
    let mut r = RobotDescriptor::new("robbie", Pose::default());
    r = r.with_capability(&ActionSig::new("say", vec![ParamType::Int]));
    e.on_event(RuntimeEvent::RobotAdded(r), 0);
    e.submit(
        "p",
        program("action say(string)\ntask main() { say(\"hi\") }"),
        0,
    )
    .unwrap();
    assert!(started(&decide(&mut e, 0)).is_empty());
    let cmds = event(
        &mut e,
        RuntimeEvent::CapabilityAdvertised {
            robot: "robbie".into(),
            capability: resh_protocol::Capability::new("say", vec![ParamType::String]),
        },
        1,
    );
    let starts: Vec<&Command> = cmds
        .iter()
        .filter(|c| matches!(c, Command::StartAction { .. }))
        .collect();
    assert_eq!(
        starts,
        [&Command::StartAction {
            instance: "p.f0.a0".into(),
            action: "say".into(),
            args: vec![Value::Str("hi".into())],
            robot: "robbie".into()
        }]
    );
}
