//! Pool files: TOML describing the mock robots of a run.
//!
//! ```toml
//! version = 1
//!
//! [[robot]]
//! name = "amy"
//! pose = { x = 1.0, y = 1.0 }
//! speed = 0.5
//! battery = 1.0
//! drain_per_meter = 0.01
//! capabilities = [
//!   { action = "goto", signature = ["loc"] },
//!   { action = "load", typical_duration_ms = 1500 },
//! ]
//! properties = { loaded = false }
//! script = { load = { duration_ms = 2000 } }
//!
//! [[robot]]
//! name = "late"
//! pose = { x = 3.0, y = 1.0 }
//! reserve = true
//! ```
//!
//! A `script` entry sets exactly one of `duration_ms`, `fail_after_ms` or
//! `hold_until_cancelled = true`. Reserve robots join only when spawned.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use resh_protocol::{Capability, Pose, Value};
use serde::Deserialize;
use thiserror::Error;

pub const POOL_FILE_VERSION: u32 = 1;

/// Used when an action has neither a script entry nor a typical duration.
pub const DEFAULT_DURATION_MS: u64 = 1000;

#[derive(Debug, Error)]
pub enum PoolError {
    #[error("cannot read pool file: {0}")]
    Io(#[from] std::io::Error),
    #[error("invalid pool file: {0}")]
    Syntax(#[from] toml::de::Error),
    #[error("unsupported pool file version {0}")]
    Version(u32),
    #[error("duplicate robot name {0}")]
    DuplicateName(String),
    #[error("robot {0}: speed must be positive")]
    BadSpeed(String),
    #[error("robot {robot}: script for {action} must set exactly one of duration_ms, fail_after_ms, hold_until_cancelled")]
    BadScript { robot: String, action: String },
    #[error("robot {0}: initial pose is not in a free cell")]
    PoseOccupied(String),
}

/// How a mock robot performs an action.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ActionScript {
    Succeed { duration_ms: u64 },
    Fail { after_ms: u64 },
    /// Runs until cancelled.
    Hold,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScriptEntry {
    duration_ms: Option<u64>,
    fail_after_ms: Option<u64>,
    #[serde(default)]
    hold_until_cancelled: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MockRobotConfig {
    pub name: String,
    pub capabilities: Vec<Capability>,
    pub properties: BTreeMap<String, Value>,
    pub pose: Pose,
    /// Metres per second.
    pub speed: f64,
    /// Initial charge as a fraction of capacity.
    pub battery: f64,
    /// Charge fraction used per metre driven.
    pub drain_per_meter: f64,
    pub script: BTreeMap<String, ActionScript>,
    /// Held back at start; joins the pool on a `spawn` mutation.
    pub reserve: bool,
}

impl MockRobotConfig {
    pub fn new(name: impl Into<String>, pose: Pose) -> Self {
        MockRobotConfig {
            name: name.into(),
            capabilities: Vec::new(),
            properties: BTreeMap::new(),
            pose,
            speed: 1.0,
            battery: 1.0,
            drain_per_meter: 0.0,
            script: BTreeMap::new(),
            reserve: false,
        }
    }

    pub fn with_capability(mut self, cap: Capability) -> Self {
        self.capabilities.push(cap);
        self
    }

    /// The script entry, else the advertised typical duration, else
    /// [`DEFAULT_DURATION_MS`].
    pub fn script_for(&self, action: &str) -> ActionScript {
        if let Some(s) = self.script.get(action) {
            return *s;
        }
        let typical = self
            .capabilities
            .iter()
            .find(|c| c.action == action)
            .and_then(|c| c.typical_duration_ms);
        ActionScript::Succeed {
            duration_ms: typical.unwrap_or(DEFAULT_DURATION_MS),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RobotEntry {
    name: String,
    #[serde(default)]
    capabilities: Vec<Capability>,
    #[serde(default)]
    properties: BTreeMap<String, Value>,
    pose: Pose,
    #[serde(default = "one")]
    speed: f64,
    #[serde(default = "one")]
    battery: f64,
    #[serde(default)]
    drain_per_meter: f64,
    #[serde(default)]
    script: BTreeMap<String, ScriptEntry>,
    #[serde(default)]
    reserve: bool,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct PoolFile {
    version: u32,
    #[serde(default)]
    robot: Vec<RobotEntry>,
}

pub fn parse_pool(text: &str) -> Result<Vec<MockRobotConfig>, PoolError> {
    let file: PoolFile = toml::from_str(text)?;
    if file.version != POOL_FILE_VERSION {
        return Err(PoolError::Version(file.version));
    }
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for r in file.robot {
        if !seen.insert(r.name.clone()) {
            return Err(PoolError::DuplicateName(r.name));
        }
        if r.speed.is_nan() || r.speed <= 0.0 {
            return Err(PoolError::BadSpeed(r.name));
        }
        let mut script = BTreeMap::new();
        for (action, e) in r.script {
            let s = match (e.duration_ms, e.fail_after_ms, e.hold_until_cancelled) {
                (Some(d), None, false) => ActionScript::Succeed { duration_ms: d },
                (None, Some(d), false) => ActionScript::Fail { after_ms: d },
                (None, None, true) => ActionScript::Hold,
                _ => {
                    return Err(PoolError::BadScript {
                        robot: r.name,
                        action,
                    })
                }
            };
            script.insert(action, s);
        }
        out.push(MockRobotConfig {
            name: r.name,
            capabilities: r.capabilities,
            properties: r.properties,
            pose: r.pose,
            speed: r.speed,
            battery: r.battery,
            drain_per_meter: r.drain_per_meter,
            script,
            reserve: r.reserve,
        });
    }
    Ok(out)
}

pub fn load_pool(path: &Path) -> Result<Vec<MockRobotConfig>, PoolError> {
    parse_pool(&std::fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    const POOL: &str = r#"
version = 1

[[robot]]
name = "amy"
pose = { x = 1.0, y = 2.0 }
speed = 0.5
drain_per_meter = 0.01
capabilities = [
  { action = "goto", signature = ["loc"] },
  { action = "load", typical_duration_ms = 1500 },
  { action = "say", signature = ["string"] },
]
properties = { loaded = false, floor = 3 }
script = { say = { fail_after_ms = 200 }, wait = { hold_until_cancelled = true } }

[[robot]]
name = "bob"
pose = { x = 4.0, y = 2.0, theta = 1.5 }
"#;

    #[test]
    fn parses_every_field() {
        let pool = parse_pool(POOL).unwrap();
        assert_eq!(pool.len(), 2);
        let amy = &pool[0];
        assert_eq!(amy.speed, 0.5);
        assert_eq!(amy.battery, 1.0);
        assert_eq!(amy.properties["loaded"], Value::Bool(false));
        assert_eq!(amy.properties["floor"], Value::Int(3));
        assert_eq!(amy.script_for("load"), ActionScript::Succeed { duration_ms: 1500 });
        assert_eq!(amy.script_for("say"), ActionScript::Fail { after_ms: 200 });
        assert_eq!(amy.script_for("wait"), ActionScript::Hold);
        assert_eq!(
            amy.script_for("other"),
            ActionScript::Succeed {
                duration_ms: DEFAULT_DURATION_MS
            }
        );
        assert_eq!(pool[1].pose.theta, 1.5);
        assert_eq!(pool[1].speed, 1.0);
    }

    #[test]
    fn rejects_bad_files() {
        assert!(matches!(
            parse_pool("version = 2"),
            Err(PoolError::Version(2))
        ));
        let dup = "version = 1\n[[robot]]\nname = \"a\"\npose = { x = 0.0, y = 0.0 }\n[[robot]]\nname = \"a\"\npose = { x = 1.0, y = 0.0 }\n";
        assert!(matches!(parse_pool(dup), Err(PoolError::DuplicateName(_))));
        let slow = "version = 1\n[[robot]]\nname = \"a\"\npose = { x = 0.0, y = 0.0 }\nspeed = 0.0\n";
        assert!(matches!(parse_pool(slow), Err(PoolError::BadSpeed(_))));
        let both = "version = 1\n[[robot]]\nname = \"a\"\npose = { x = 0.0, y = 0.0 }\nscript = { x = { duration_ms = 1, fail_after_ms = 2 } }\n";
        assert!(matches!(parse_pool(both), Err(PoolError::BadScript { .. })));
        assert!(matches!(parse_pool("version = 1\nfoo = 1"), Err(PoolError::Syntax(_))));
    }

    #[test]
    fn empty_pool_is_valid() {
        assert!(parse_pool("version = 1").unwrap().is_empty());
    }
}
