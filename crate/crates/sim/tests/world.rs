use proptest::prelude::*;
use resh_lang::ParamType;
use resh_path::WorldMap;
use resh_protocol::{Body, Capability, Message, Pose, StatusKind, Value};
use resh_sim::{
    parse_pool, ActionScript, ClockMode, MockRobotConfig, Mutation, PoolError, SimError, World,
};

fn robot(name: &str, x: f64, y: f64) -> MockRobotConfig {
    MockRobotConfig::new(name, Pose::new(x, y, 0.0))
        .with_capability(Capability::new("goto", vec![ParamType::Loc]))
        .with_capability(Capability::new("load", vec![]))
}

fn world(robots: Vec<MockRobotConfig>) -> World {
    let mut w = World::new(None, ClockMode::Stepped);
    w.spawn_pool(robots).unwrap();
    w
}

fn start(instance: &str, action: &str, args: Vec<Value>, robot: &str) -> Body {
    Body::StartAction {
        instance: instance.into(),
        action: action.into(),
        args,
        robot: robot.into(),
    }
}

fn statuses(msgs: &[Message]) -> Vec<(String, StatusKind)> {
    msgs.iter()
        .filter_map(|m| match &m.body {
            Body::ActionStatus {
                instance, status, ..
            } => Some((instance.clone(), *status)),
            _ => None,
        })
        .collect()
}

fn goto(x: f64, y: f64) -> Vec<Value> {
    vec![Value::Float(x), Value::Float(y)]
}

#[test]
fn two_robot_pool_advertises_twice() {
    let mut w = World::new(None, ClockMode::Stepped);
    let msgs = w
        .spawn_pool(vec![robot("amy", 0.0, 0.0), robot("bob", 1.0, 0.0)])
        .unwrap();
    let kinds: Vec<&str> = msgs.iter().map(|m| m.body.kind()).collect();
    assert_eq!(
        kinds,
        ["ADVERTISE", "POSE_UPDATE", "ADVERTISE", "POSE_UPDATE"]
    );
    let mut w = World::new(None, ClockMode::Stepped);
    assert!(w.spawn_pool(Vec::new()).unwrap().is_empty());
}

#[test]
fn one_metre_at_one_metre_per_second_arrives_in_one_second() {
    let mut w = world(vec![robot("amy", 0.0, 0.0)]);
    let msgs = w.handle(&start("g", "goto", goto(1.0, 0.0), "amy"));
    assert_eq!(statuses(&msgs), [("g".into(), StatusKind::Accepted)]);
    assert!(w.step(0).is_empty());
    let msgs = w.step(1000);
    assert_eq!(statuses(&msgs), [("g".into(), StatusKind::Succeeded)]);
    let amy = w.robot("amy").unwrap();
    assert_eq!((amy.pose.x, amy.pose.y), (1.0, 0.0));
    assert_eq!(amy.current(), None);
}

#[test]
fn scripts_follow_the_pool_file() {
    let pool = parse_pool(
        r#"
version = 1
[[robot]]
name = "amy"
pose = { x = 0.0, y = 0.0 }
capabilities = [{ action = "load", typical_duration_ms = 300 }, { action = "say" }, { action = "wait" }, { action = "boom" }]
script = { boom = { fail_after_ms = 100 }, wait = { hold_until_cancelled = true } }
"#,
    )
    .unwrap();
    assert_eq!(pool[0].script_for("say"), ActionScript::Succeed { duration_ms: 1000 });
    let mut w = world(pool);
    w.handle(&start("a", "load", vec![], "amy"));
    assert!(statuses(&w.step(200)).is_empty());
    assert_eq!(statuses(&w.step(100)), [("a".into(), StatusKind::Succeeded)]);

    w.handle(&start("b", "boom", vec![], "amy"));
    assert_eq!(statuses(&w.step(100)), [("b".into(), StatusKind::Failed)]);

    w.handle(&start("c", "wait", vec![], "amy"));
    assert!(statuses(&w.step(100_000)).is_empty());
    let msgs = w.handle(&Body::CancelAction {
        instance: "c".into(),
    });
    assert_eq!(statuses(&msgs), [("c".into(), StatusKind::Terminated)]);
    assert!(w.handle(&Body::CancelAction { instance: "c".into() }).is_empty());
}

#[test]
fn busy_or_unadvertised_starts_fail() {
    let mut w = world(vec![robot("amy", 0.0, 0.0)]);
    w.handle(&start("a", "load", vec![], "amy"));
    let msgs = w.handle(&start("b", "load", vec![], "amy"));
    assert_eq!(statuses(&msgs), [("b".into(), StatusKind::Failed)]);
    w.step(1000);
    let msgs = w.handle(&start("c", "fly", vec![], "amy"));
    assert_eq!(statuses(&msgs), [("c".into(), StatusKind::Failed)]);
}

#[test]
fn retracting_an_in_use_capability_lets_the_action_finish() {
    let mut w = world(vec![robot("amy", 0.0, 0.0)]);
    w.handle(&start("a", "load", vec![], "amy"));
    let msgs = w
        .inject(Mutation::RetractCapability {
            robot: "amy".into(),
            action: "load".into(),
        })
        .unwrap();
    assert_eq!(msgs[0].body.kind(), "RETRACT");
    assert_eq!(statuses(&w.step(1000)), [("a".into(), StatusKind::Succeeded)]);
    let msgs = w.handle(&start("b", "load", vec![], "amy"));
    assert_eq!(statuses(&msgs), [("b".into(), StatusKind::Failed)]);
}

#[test]
fn injections_emit_protocol_messages() {
    let mut w = world(vec![robot("amy", 0.0, 0.0)]);
    let msgs = w
        .inject(Mutation::SetProperty {
            robot: "amy".into(),
            prop: "loaded".into(),
            value: Value::Bool(true),
        })
        .unwrap();
    assert_eq!(
        msgs[0].body,
        Body::PropertyUpdate {
            robot: "amy".into(),
            prop: "loaded".into(),
            value: Value::Bool(true)
        }
    );
    let msgs = w
        .inject(Mutation::FireEvent {
            name: "pickup".into(),
            args: vec!["dock".into()],
        })
        .unwrap();
    assert_eq!(msgs[0].sender, "inject");
    assert!(matches!(
        w.inject(Mutation::RemoveRobot { robot: "zed".into() }),
        Err(SimError::UnknownRobot(_))
    ));
    let msgs = w.inject(Mutation::RemoveRobot { robot: "amy".into() }).unwrap();
    assert_eq!(msgs[0].body.kind(), "LEAVE");
    assert!(w.robot("amy").is_none());
}

#[test]
fn reserve_robots_join_on_spawn() {
    let mut late = robot("late", 2.0, 0.0);
    late.reserve = true;
    let mut w = World::new(None, ClockMode::Stepped);
    let msgs = w.spawn_pool(vec![robot("amy", 0.0, 0.0), late]).unwrap();
    assert_eq!(msgs.len(), 2);
    assert!(w.robot("late").is_none());
    let msgs = w.inject(Mutation::SpawnRobot { robot: "late".into() }).unwrap();
    assert_eq!(msgs[0].body.kind(), "ADVERTISE");
    assert!(w.robot("late").is_some());
    assert!(matches!(
        w.inject(Mutation::SpawnRobot { robot: "late".into() }),
        Err(SimError::UnknownReserve(_))
    ));
}

#[test]
fn robots_must_start_in_free_cells() {
    let map = WorldMap::parse("3 1 1.0\n.#.\n").unwrap();
    let mut w = World::new(Some(map), ClockMode::Stepped);
    let err = w.spawn_pool(vec![robot("amy", 1.5, 0.5)]).unwrap_err();
    assert!(matches!(err, SimError::Pool(PoolError::PoseOccupied(_))));
    let err = w
        .spawn_pool(vec![robot("a", 0.5, 0.5), robot("a", 2.5, 0.5)])
        .unwrap_err();
    assert!(matches!(err, SimError::Pool(PoolError::DuplicateName(_))));
}

#[test]
fn idle_robots_report_on_the_pose_cadence() {
    let mut w = world(vec![robot("amy", 0.0, 0.0)]);
    assert!(w.step(100).is_empty());
    let msgs = w.step(400);
    assert_eq!(msgs.len(), 1);
    assert_eq!(msgs[0].body.kind(), "POSE_UPDATE");
}

#[test]
fn message_ids_are_unique_per_sender() {
    let mut w = world(vec![robot("amy", 0.0, 0.0)]);
    w.handle(&start("g", "goto", goto(3.0, 0.0), "amy"));
    let mut ids = Vec::new();
    for _ in 0..10 {
        ids.extend(w.step(500).into_iter().map(|m| m.id));
    }
    let n = ids.len();
    ids.dedup();
    assert_eq!(ids.len(), n);
}

proptest! {
    #[test]
    fn motion_respects_speed_and_drains_exactly(
        speed in 0.1f64..3.0,
        drain in 0.0f64..0.05,
        tx in -10.0f64..10.0,
        ty in -10.0f64..10.0,
        steps in prop::collection::vec(0u64..700, 1..40),
    ) {
        let mut cfg = robot("amy", 0.0, 0.0);
        cfg.speed = speed;
        cfg.drain_per_meter = drain;
        let mut w = world(vec![cfg]);
        w.handle(&start("g", "goto", goto(tx, ty), "amy"));
        for dt in steps {
            let before = w.robot("amy").unwrap().pose;
            w.step(dt);
            let after = w.robot("amy").unwrap().pose;
            prop_assert!(before.distance(&after) <= speed * dt as f64 / 1000.0 + 1e-9);
        }
        let amy = w.robot("amy").unwrap();
        prop_assert!((1.0 - amy.battery - drain * amy.odometer).abs() < 1e-9);
    }

    #[test]
    fn scripted_durations_complete_within_one_step(
        duration in 1u64..5000,
        dt in 1u64..400,
    ) {
        let mut cfg = robot("amy", 0.0, 0.0);
        cfg.script.insert("load".into(), ActionScript::Succeed { duration_ms: duration });
        let mut w = world(vec![cfg]);
        w.handle(&start("a", "load", vec![], "amy"));
        let done_at = loop {
            let msgs = w.step(dt);
            if !statuses(&msgs).is_empty() {
                break w.now_ms();
            }
        };
        prop_assert!(done_at >= duration && done_at < duration + dt);
    }
}
