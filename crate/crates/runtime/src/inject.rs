//! Inject scripts: timed world mutations standing in for people.
//!
//! ```text
//! # comments and blank lines are ignored
//! AT 0     event pickup(dock, ward)
//! AT 2500  set :r.loaded true
//! AT 4000  retract amy load
//! AT 5000  nudge amy 0.0 1.5
//! AT 6000  remove bob
//! AT 7000  spawn late
//! ```
//!
//! Times are simulated milliseconds and must not decrease. A robot is
//! named directly or as `<program>:<var>`, which resolves to the robot
//! bound to that variable when the line fires; an empty program means the
//! first submitted one. Values are `true`, `false`, integers, decimals,
//! double-quoted strings or bare words, which read as strings.

use resh_protocol::Value;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}: {message}")]
pub struct InjectError {
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RobotRef {
    Name(String),
    Var { program: Option<String>, var: String },
}

impl RobotRef {
    pub fn parse(s: &str) -> RobotRef {
        match s.split_once(':') {
            Some((p, v)) => RobotRef::Var {
                program: (!p.is_empty()).then(|| p.to_string()),
                var: v.to_string(),
            },
            None => RobotRef::Name(s.to_string()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum InjectAction {
    Set {
        robot: RobotRef,
        prop: String,
        value: Value,
    },
    Event {
        name: String,
        args: Vec<Value>,
    },
    Retract {
        robot: RobotRef,
        action: String,
    },
    Remove {
        robot: RobotRef,
    },
    Spawn {
        robot: String,
    },
    Nudge {
        robot: RobotRef,
        dx: f64,
        dy: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct InjectLine {
    pub at_ms: u64,
    /// Source line, for diagnostics.
    pub line: usize,
    pub action: InjectAction,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct InjectScript {
    pub lines: Vec<InjectLine>,
}

/// Reads a literal the way inject scripts and CLI arguments spell them.
pub fn parse_value(s: &str) -> Value {
    let s = s.trim();
    if let Some(inner) = s.strip_prefix('"').and_then(|r| r.strip_suffix('"')) {
        return Value::Str(inner.to_string());
    }
    match s {
        "true" => return Value::Bool(true),
        "false" => return Value::Bool(false),
        _ => {}
    }
    if let Ok(i) = s.parse::<i64>() {
        return Value::Int(i);
    }
    match s.parse::<f64>() {
        Ok(x) if x.is_finite() => Value::Float(x),
        _ => Value::Str(s.to_string()),
    }
}

fn parse_action(rest: &str) -> Result<InjectAction, String> {
    let (verb, rest) = rest.split_once(char::is_whitespace).unwrap_or((rest, ""));
    let rest = rest.trim();
    let words: Vec<&str> = rest.split_whitespace().collect();
    let number = |s: &str| {
        s.parse::<f64>()
            .ok()
            .filter(|x| x.is_finite())
            .ok_or_else(|| format!("bad number {s:?}"))
    };
    match verb {
        "set" => {
            let (target, value) = rest
                .split_once(char::is_whitespace)
                .ok_or("expected `set ROBOT.PROP VALUE`")?;
            let (robot, prop) = target
                .rsplit_once('.')
                .filter(|(r, p)| !r.is_empty() && !p.is_empty())
                .ok_or("expected `set ROBOT.PROP VALUE`")?;
            Ok(InjectAction::Set {
                robot: RobotRef::parse(robot),
                prop: prop.to_string(),
                value: parse_value(value),
            })
        }
        "event" => {
            let (name, args) = match rest.split_once('(') {
                Some((name, tail)) => {
                    let inner = tail
                        .trim_end()
                        .strip_suffix(')')
                        .ok_or("missing `)`")?;
                    let args = if inner.trim().is_empty() {
                        Vec::new()
                    } else {
                        inner.split(',').map(parse_value).collect()
                    };
                    (name.trim(), args)
                }
                None => (rest, Vec::new()),
            };
            if name.is_empty() || name.contains(char::is_whitespace) {
                return Err("expected `event NAME(ARGS)`".into());
            }
            Ok(InjectAction::Event {
                name: name.to_string(),
                args,
            })
        }
        "retract" => match words[..] {
            [robot, action] => Ok(InjectAction::Retract {
                robot: RobotRef::parse(robot),
                action: action.to_string(),
            }),
            _ => Err("expected `retract ROBOT ACTION`".into()),
        },
        "remove" => match words[..] {
            [robot] => Ok(InjectAction::Remove {
                robot: RobotRef::parse(robot),
            }),
            _ => Err("expected `remove ROBOT`".into()),
        },
        "spawn" => match words[..] {
            [robot] => Ok(InjectAction::Spawn {
                robot: robot.to_string(),
            }),
            _ => Err("expected `spawn ROBOT`".into()),
        },
        "nudge" => match words[..] {
            [robot, dx, dy] => Ok(InjectAction::Nudge {
                robot: RobotRef::parse(robot),
                dx: number(dx)?,
                dy: number(dy)?,
            }),
            _ => Err("expected `nudge ROBOT DX DY`".into()),
        },
        other => Err(format!("unknown mutation {other:?}")),
    }
}

pub fn parse_inject(text: &str) -> Result<InjectScript, InjectError> {
    let mut lines = Vec::new();
    let mut last = 0;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let err = |message: String| InjectError { line, message };
        let l = raw.trim();
        if l.is_empty() || l.starts_with('#') {
            continue;
        }
        let rest = l
            .strip_prefix("AT")
            .filter(|r| r.starts_with(char::is_whitespace))
            .ok_or_else(|| err("expected `AT <ms> <mutation>`".into()))?
            .trim_start();
        let (ms, rest) = rest
            .split_once(char::is_whitespace)
            .ok_or_else(|| err("missing mutation".into()))?;
        let at_ms: u64 = ms.parse().map_err(|_| err(format!("bad time {ms:?}")))?;
        if at_ms < last {
            return Err(err("times must not decrease".into()));
        }
        last = at_ms;
        let action = parse_action(rest.trim()).map_err(err)?;
        lines.push(InjectLine {
            at_ms,
            line,
            action,
        });
    }
    Ok(InjectScript { lines })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_every_mutation() {
        let s = parse_inject(
            "# delivery\nAT 0 event pickup(dock, ward)\n\nAT 10 set :r.loaded true\nAT 10 set amy.note \"two words\"\nAT 20 retract d:r load\nAT 30 remove bob\nAT 40 spawn late\nAT 50 nudge amy 0 -1.5\nAT 60 event go\n",
        )
        .unwrap();
        let acts: Vec<&InjectAction> = s.lines.iter().map(|l| &l.action).collect();
        assert_eq!(
            acts[0],
            &InjectAction::Event {
                name: "pickup".into(),
                args: vec![Value::Str("dock".into()), Value::Str("ward".into())]
            }
        );
        assert_eq!(
            acts[1],
            &InjectAction::Set {
                robot: RobotRef::Var {
                    program: None,
                    var: "r".into()
                },
                prop: "loaded".into(),
                value: Value::Bool(true)
            }
        );
        assert!(matches!(acts[2], InjectAction::Set { value: Value::Str(s), .. } if s == "two words"));
        assert!(matches!(acts[3], InjectAction::Retract { robot: RobotRef::Var { program: Some(p), .. }, .. } if p == "d"));
        assert_eq!(acts[6], &InjectAction::Nudge { robot: RobotRef::Name("amy".into()), dx: 0.0, dy: -1.5 });
        assert_eq!(acts[7], &InjectAction::Event { name: "go".into(), args: vec![] });
        assert_eq!(s.lines[1].line, 4);
    }

    #[test]
    fn values() {
        assert_eq!(parse_value("3"), Value::Int(3));
        assert_eq!(parse_value("2.5"), Value::Float(2.5));
        assert_eq!(parse_value("false"), Value::Bool(false));
        assert_eq!(parse_value(" lobby "), Value::Str("lobby".into()));
        assert_eq!(parse_value("\"3\""), Value::Str("3".into()));
    }

    #[test]
    fn rejects_bad_lines() {
        for (text, line) in [
            ("at 0 remove amy", 1),
            ("AT x remove amy", 1),
            ("AT 5 remove amy\nAT 4 remove bob", 2),
            ("AT 0 fly amy", 1),
            ("AT 0 set amy true", 1),
            ("AT 0 event pickup(a", 1),
            ("AT 0 nudge amy 1", 1),
            ("AT 0", 1),
        ] {
            assert_eq!(parse_inject(text).unwrap_err().line, line, "{text}");
        }
    }
}
