use std::collections::BTreeMap;

use proptest::prelude::*;
use resh_lang::ParamType;
use resh_protocol::{
    decode, encode, Body, Capability, GotoEntry, Message, Pose, StatusKind, TaskState, Value,
    Waypoint,
};

const GOLDEN: &str = include_str!("fixtures/golden.jsonl");

fn msg(id: u64, sender: &str, ts: u64, body: Body) -> Message {
    Message::new(id, sender, ts, body)
}

fn golden_messages() -> Vec<Message> {
    let mut goto = Capability::new("goto", vec![ParamType::Loc]);
    goto.typical_duration_ms = Some(4000);
    vec![
        msg(
            1,
            "robbie",
            0,
            Body::Advertise {
                robot: "robbie".into(),
                capabilities: vec![Capability::new("say", vec![ParamType::String]), goto],
                properties: BTreeMap::from([
                    ("loaded".to_string(), Value::Bool(false)),
                    ("battery_ok".to_string(), Value::Bool(true)),
                ]),
            },
        ),
        msg(
            2,
            "robbie",
            1500,
            Body::Retract {
                robot: "robbie".into(),
                action: "say".into(),
            },
        ),
        msg(
            3,
            "robbie",
            1600,
            Body::PropertyUpdate {
                robot: "robbie".into(),
                prop: "loaded".into(),
                value: Value::Bool(true),
            },
        ),
        msg(
            4,
            "robbie",
            1700,
            Body::PoseUpdate {
                robot: "robbie".into(),
                pose: Pose::new(1.5, -0.25, std::f64::consts::PI),
                battery: 0.875,
            },
        ),
        msg(
            5,
            "runtime",
            2000,
            Body::StartAction {
                instance: "p1.f0.a0".into(),
                action: "say".into(),
                args: vec![Value::Str("I'm in the lobby!".into())],
                robot: "robbie".into(),
            },
        ),
        msg(
            6,
            "runtime",
            2100,
            Body::CancelAction {
                instance: "p1.f0.a0.goto".into(),
            },
        ),
        msg(
            7,
            "robbie",
            2200,
            Body::ActionStatus {
                instance: "p1.f0.a0".into(),
                status: StatusKind::Failed,
                detail: Some("battery empty".into()),
            },
        ),
        msg(
            8,
            "runtime",
            2300,
            Body::GotoSet {
                epoch: 4,
                entries: vec![GotoEntry {
                    robot: "robbie".into(),
                    instance: "p1.f0.a0.goto".into(),
                    waypoints: vec![
                        Waypoint {
                            x: 2.0,
                            y: 3.0,
                            delay_s: 0.0,
                        },
                        Waypoint {
                            x: 7.5,
                            y: 3.0,
                            delay_s: 1.5,
                        },
                    ],
                }],
                path_ref: Some("q4".into()),
            },
        ),
        msg(
            9,
            "ui",
            2400,
            Body::Event {
                name: "pickup".into(),
                args: vec!["dock".into(), "ward3".into()],
            },
        ),
        msg(
            10,
            "ui",
            2500,
            Body::SubmitProgram {
                source: "task main() {\n  pause 1s\n}\n".into(),
                program_id: Some("p1".into()),
            },
        ),
        msg(
            11,
            "runtime",
            2600,
            Body::TaskStatus {
                program_id: "p1".into(),
                state: TaskState::Aborted,
                detail: Some("p1.f0.a0 failed".into()),
            },
        ),
        msg(
            12,
            "ui",
            2700,
            Body::CancelTask {
                program_id: "p1".into(),
            },
        ),
        msg(
            13,
            "ui",
            2800,
            Body::QueryStatus {
                program_id: "p1".into(),
            },
        ),
        msg(
            14,
            "robbie",
            2900,
            Body::Leave {
                robot: "robbie".into(),
            },
        ),
        msg(
            15,
            "robbie",
            3000,
            Body::ActionStatus {
                instance: "p1.f0.a1".into(),
                status: StatusKind::Succeeded,
                detail: None,
            },
        ),
        msg(
            16,
            "runtime",
            3100,
            Body::Event {
                name: "tick".into(),
                args: vec![Value::Int(-3), Value::Float(0.5), Value::Bool(false)],
            },
        ),
    ]
}

#[test]
fn golden_fixtures_are_bit_exact() {
    let lines: Vec<&str> = GOLDEN.split_inclusive('\n').collect();
    let messages = golden_messages();
    assert_eq!(lines.len(), messages.len());
    for (line, m) in lines.iter().zip(&messages) {
        assert_eq!(String::from_utf8(encode(m)).unwrap(), *line);
        assert_eq!(&decode(line.as_bytes()).unwrap(), m);
    }
}

#[test]
fn every_kind_has_a_fixture() {
    let kinds: std::collections::BTreeSet<&str> =
        golden_messages().iter().map(|m| m.body.kind()).collect();
    assert_eq!(kinds.len(), Body::KINDS.len());
}

fn name() -> impl Strategy<Value = String> {
    "[a-zA-Z0-9_.# \"\\\\\n\u{e9}\u{263a}]{0,12}"
}

fn finite() -> impl Strategy<Value = f64> {
    prop_oneof![
        prop::num::f64::NORMAL | prop::num::f64::SUBNORMAL | prop::num::f64::ZERO,
        -1000.0f64..1000.0,
    ]
}

fn value() -> impl Strategy<Value = Value> {
    prop_oneof![
        any::<bool>().prop_map(Value::Bool),
        any::<i64>().prop_map(Value::Int),
        finite().prop_map(Value::Float),
        name().prop_map(Value::Str),
    ]
}

fn param_type() -> impl Strategy<Value = ParamType> {
    prop::sample::select(ParamType::ALL.to_vec())
}

fn capability() -> impl Strategy<Value = Capability> {
    (
        name(),
        prop::collection::vec(param_type(), 0..4),
        prop::option::of(any::<u64>()),
    )
        .prop_map(|(action, signature, typical_duration_ms)| Capability {
            action,
            signature,
            typical_duration_ms,
        })
}

fn waypoint() -> impl Strategy<Value = Waypoint> {
    (finite(), finite(), prop_oneof![Just(0.0), 0.0f64..30.0]).prop_map(|(x, y, delay_s)| {
        Waypoint { x, y, delay_s }
    })
}

fn body() -> impl Strategy<Value = Body> {
    let status = prop::sample::select(vec![
        StatusKind::Accepted,
        StatusKind::Running,
        StatusKind::Succeeded,
        StatusKind::Failed,
        StatusKind::Terminated,
    ]);
    let state = prop::sample::select(vec![
        TaskState::Queued,
        TaskState::Running,
        TaskState::Succeeded,
        TaskState::Aborted,
        TaskState::Cancelled,
    ]);
    prop_oneof![
        (
            name(),
            prop::collection::vec(capability(), 0..3),
            prop::collection::btree_map(name(), value(), 0..3)
        )
            .prop_map(|(robot, capabilities, properties)| Body::Advertise {
                robot,
                capabilities,
                properties
            }),
        (name(), name()).prop_map(|(robot, action)| Body::Retract { robot, action }),
        (name(), name(), value()).prop_map(|(robot, prop, value)| Body::PropertyUpdate {
            robot,
            prop,
            value
        }),
        (name(), finite(), finite(), finite(), 0.0f64..=1.0).prop_map(|(robot, x, y, t, battery)| {
            Body::PoseUpdate {
                robot,
                pose: Pose::new(x, y, t),
                battery,
            }
        }),
        (name(), name(), prop::collection::vec(value(), 0..3), name()).prop_map(
            |(instance, action, args, robot)| Body::StartAction {
                instance,
                action,
                args,
                robot
            }
        ),
        name().prop_map(|instance| Body::CancelAction { instance }),
        (name(), status, prop::option::of(name())).prop_map(|(instance, status, detail)| {
            Body::ActionStatus {
                instance,
                status,
                detail,
            }
        }),
        (
            any::<u64>(),
            prop::collection::vec(
                (name(), name(), prop::collection::vec(waypoint(), 0..4)),
                0..3
            ),
            prop::option::of(name())
        )
            .prop_map(|(epoch, entries, path_ref)| Body::GotoSet {
                epoch,
                entries: entries
                    .into_iter()
                    .map(|(robot, instance, waypoints)| GotoEntry {
                        robot,
                        instance,
                        waypoints
                    })
                    .collect(),
                path_ref
            }),
        (name(), prop::collection::vec(value(), 0..3)).prop_map(|(name, args)| Body::Event {
            name,
            args
        }),
        (name(), prop::option::of(name())).prop_map(|(source, program_id)| {
            Body::SubmitProgram { source, program_id }
        }),
        (name(), state, prop::option::of(name())).prop_map(|(program_id, state, detail)| {
            Body::TaskStatus {
                program_id,
                state,
                detail,
            }
        }),
        name().prop_map(|program_id| Body::CancelTask { program_id }),
        name().prop_map(|program_id| Body::QueryStatus { program_id }),
        name().prop_map(|robot| Body::Leave { robot }),
    ]
}

fn message() -> impl Strategy<Value = Message> {
    (any::<u64>(), name(), any::<u64>(), body())
        .prop_map(|(id, sender, ts, body)| Message::new(id, sender, ts, body))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn round_trip(m in message()) {
        let bytes = encode(&m);
        prop_assert_eq!(bytes.iter().filter(|b| **b == b'\n').count(), 1);
        prop_assert_eq!(bytes.last(), Some(&b'\n'));
        prop_assert_eq!(decode(&bytes).unwrap(), m);
    }
}
