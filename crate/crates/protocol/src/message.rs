use std::collections::BTreeMap;
use std::fmt;

use resh_lang::ParamType;
use serde::{Deserialize, Serialize};

pub const PROTOCOL_VERSION: u32 = 1;

/// A scalar carried in action arguments, event arguments and properties.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Value {
    Bool(bool),
    Int(i64),
    Float(f64),
    Str(String),
}

impl Value {
    pub fn as_bool(&self) -> Option<bool> {
        match self {
            Value::Bool(b) => Some(*b),
            _ => None,
        }
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            Value::Str(s) => Some(s),
            _ => None,
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Bool(b) => write!(f, "{b}"),
            Value::Int(i) => write!(f, "{i}"),
            Value::Float(x) => write!(f, "{x}"),
            Value::Str(s) => write!(f, "{s:?}"),
        }
    }
}

impl From<bool> for Value {
    fn from(b: bool) -> Self {
        Value::Bool(b)
    }
}

impl From<&str> for Value {
    fn from(s: &str) -> Self {
        Value::Str(s.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    #[serde(default)]
    pub theta: f64,
}

impl Pose {
    pub fn new(x: f64, y: f64, theta: f64) -> Self {
        Pose { x, y, theta }
    }

    pub fn distance(&self, other: &Pose) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// An advertised action.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Capability {
    pub action: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub signature: Vec<ParamType>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub typical_duration_ms: Option<u64>,
}

impl Capability {
    pub fn new(action: impl Into<String>, signature: Vec<ParamType>) -> Self {
        Capability {
            action: action.into(),
            signature,
            typical_duration_ms: None,
        }
    }

    pub fn matches(&self, name: &str, signature: &[ParamType]) -> bool {
        self.action == name && self.signature == signature
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StatusKind {
    Accepted,
    Running,
    Succeeded,
    Failed,
    Terminated,
}

impl StatusKind {
    pub fn is_terminal(self) -> bool {
        matches!(
            self,
            StatusKind::Succeeded | StatusKind::Failed | StatusKind::Terminated
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskState {
    Queued,
    Running,
    Succeeded,
    Aborted,
    Cancelled,
}

impl TaskState {
    pub fn is_terminal(self) -> bool {
        matches!(
            self,
            TaskState::Succeeded | TaskState::Aborted | TaskState::Cancelled
        )
    }

    pub fn as_str(self) -> &'static str {
        match self {
            TaskState::Queued => "queued",
            TaskState::Running => "running",
            TaskState::Succeeded => "succeeded",
            TaskState::Aborted => "aborted",
            TaskState::Cancelled => "cancelled",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Waypoint {
    pub x: f64,
    pub y: f64,
    /// Seconds to wait at this waypoint before leaving for it.
    #[serde(default, skip_serializing_if = "is_zero")]
    pub delay_s: f64,
}

fn is_zero(x: &f64) -> bool {
    *x == 0.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GotoEntry {
    pub robot: String,
    /// The goto instance this movement serves.
    pub instance: String,
    pub waypoints: Vec<Waypoint>,
}

/// The kind-specific part of a message.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Body {
    Advertise {
        robot: String,
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        capabilities: Vec<Capability>,
        #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
        properties: BTreeMap<String, Value>,
    },
    Retract {
        robot: String,
        action: String,
    },
    PropertyUpdate {
        robot: String,
        prop: String,
        value: Value,
    },
    PoseUpdate {
        robot: String,
        pose: Pose,
        battery: f64,
    },
    StartAction {
        instance: String,
        action: String,
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        args: Vec<Value>,
        robot: String,
    },
    CancelAction {
        instance: String,
    },
    ActionStatus {
        instance: String,
        status: StatusKind,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        detail: Option<String>,
    },
    GotoSet {
        epoch: u64,
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        entries: Vec<GotoEntry>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        path_ref: Option<String>,
    },
    Event {
        name: String,
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        args: Vec<Value>,
    },
    SubmitProgram {
        source: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        program_id: Option<String>,
    },
    TaskStatus {
        program_id: String,
        state: TaskState,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        detail: Option<String>,
    },
    CancelTask {
        program_id: String,
    },
    /// Asks the runtime for a `TASK_STATUS` reply.
    QueryStatus {
        program_id: String,
    },
    /// An agent leaving the pool.
    Leave {
        robot: String,
    },
}

impl Body {
    pub const KINDS: [&'static str; 14] = [
        "ADVERTISE",
        "RETRACT",
        "PROPERTY_UPDATE",
        "POSE_UPDATE",
        "START_ACTION",
        "CANCEL_ACTION",
        "ACTION_STATUS",
        "GOTO_SET",
        "EVENT",
        "SUBMIT_PROGRAM",
        "TASK_STATUS",
        "CANCEL_TASK",
        "QUERY_STATUS",
        "LEAVE",
    ];

    pub fn kind(&self) -> &'static str {
        let i = match self {
            Body::Advertise { .. } => 0,
            Body::Retract { .. } => 1,
            Body::PropertyUpdate { .. } => 2,
            Body::PoseUpdate { .. } => 3,
            Body::StartAction { .. } => 4,
            Body::CancelAction { .. } => 5,
            Body::ActionStatus { .. } => 6,
            Body::GotoSet { .. } => 7,
            Body::Event { .. } => 8,
            Body::SubmitProgram { .. } => 9,
            Body::TaskStatus { .. } => 10,
            Body::CancelTask { .. } => 11,
            Body::QueryStatus { .. } => 12,
            Body::Leave { .. } => 13,
        };
        Body::KINDS[i]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Message {
    /// Protocol version.
    pub v: u32,
    /// Unique per sender.
    pub id: u64,
    pub sender: String,
    /// Sender's clock, milliseconds.
    pub ts: u64,
    #[serde(flatten)]
    pub body: Body,
}

impl Message {
    pub fn new(id: u64, sender: impl Into<String>, ts: u64, body: Body) -> Self {
        Message {
            v: PROTOCOL_VERSION,
            id,
            sender: sender.into(),
            ts,
            body,
        }
    }
}
