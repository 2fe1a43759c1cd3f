use std::fmt;

use resh_optimize::RobotDescriptor;
use resh_protocol::{Capability, Pose, StatusKind, TaskState, Value};
use thiserror::Error;

/// Something the engine reacts to.
#[derive(Debug, Clone, PartialEq)]
pub enum RuntimeEvent {
    ActionFinished {
        instance: String,
        status: StatusKind,
    },
    PropertyChanged {
        robot: String,
        prop: String,
        value: Value,
    },
    PoseChanged {
        robot: String,
        pose: Pose,
        battery: f64,
    },
    RobotAdded(RobotDescriptor),
    RobotRemoved(String),
    CapabilityAdvertised {
        robot: String,
        capability: Capability,
    },
    CapabilityRetracted {
        robot: String,
        action: String,
    },
    ExternalEvent {
        name: String,
        args: Vec<Value>,
    },
    TimerFired(String),
}

/// One movement requested in a `GOTO_SET`.
#[derive(Debug, Clone, PartialEq)]
pub struct GotoRequest {
    pub robot: String,
    /// `<action instance>.goto`.
    pub instance: String,
    pub location: String,
    pub goal: Pose,
}

/// Something the engine wants done outside.
#[derive(Debug, Clone, PartialEq)]
pub enum Command {
    StartAction {
        instance: String,
        action: String,
        args: Vec<Value>,
        robot: String,
    },
    CancelAction {
        instance: String,
    },
    /// Every movement launched in one epoch.
    GotoSet {
        epoch: u64,
        gotos: Vec<GotoRequest>,
    },
    StartTimer {
        timer: String,
        delay_ms: u64,
    },
    CancelTimer {
        timer: String,
    },
    TaskStatus {
        program_id: String,
        state: TaskState,
        detail: Option<String>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EngineError {
    #[error("unknown program {0}")]
    UnknownProgram(String),
    #[error("duplicate program id {0}")]
    DuplicateProgram(String),
    #[error("solution for epoch {0} is stale")]
    StaleSolution(u64),
    #[error("event {name} expects {expected} arguments, got {got}")]
    ArityMismatch {
        name: String,
        expected: usize,
        got: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum TraceKind {
    Submit,
    Letter,
    Assign,
    Bind,
    Task,
    Event,
    Note,
}

impl TraceKind {
    pub fn as_str(self) -> &'static str {
        match self {
            TraceKind::Submit => "SUBMIT",
            TraceKind::Letter => "LETTER",
            TraceKind::Assign => "ASSIGN",
            TraceKind::Bind => "BIND",
            TraceKind::Task => "TASK",
            TraceKind::Event => "EVENT",
            TraceKind::Note => "NOTE",
        }
    }
}

/// One line of a run trace: `simTime epoch kind payload`, tab separated.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceRecord {
    pub sim_ms: u64,
    pub epoch: u64,
    pub kind: String,
    pub payload: String,
}

impl TraceRecord {
    pub fn new(sim_ms: u64, epoch: u64, kind: &str, payload: impl Into<String>) -> Self {
        TraceRecord {
            sim_ms,
            epoch,
            kind: kind.to_string(),
            payload: payload.into(),
        }
    }
}

impl fmt::Display for TraceRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let payload = self.payload.replace(['\t', '\n'], " ");
        write!(f, "{}\t{}\t{}\t{}", self.sim_ms, self.epoch, self.kind, payload)
    }
}
