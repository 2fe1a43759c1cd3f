//! Per-task execution state: frames, leaf phases and recorded words.

use std::collections::BTreeMap;

use resh_lang::TypedProgram;
use resh_protocol::{TaskState, Value};
use resh_temporal::{ActionStatus, ExecState, InstanceId, Letter, Plan};

/// What a started leaf is doing right now.
#[derive(Debug, Clone, PartialEq)]
pub(crate) enum LeafRun {
    /// Driving to the action's location; `act` is false for an explicit
    /// `goto`, which is done on arrival.
    Moving {
        robot: String,
        act: Option<PendingStart>,
    },
    Acting {
        robot: String,
    },
    Waiting,
    Pausing,
    Repeating {
        child: usize,
    },
}

/// The `START_ACTION` sent once a located action arrives.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct PendingStart {
    pub action: String,
    pub args: Vec<Value>,
}

/// One executing copy of a plan. Frame 0 runs the task body; each `repeat`
/// iteration runs in a fresh child frame.
#[derive(Debug, Clone)]
pub(crate) struct Frame {
    pub plan: Plan,
    pub exec: ExecState,
    /// The `repeat` leaf this frame iterates.
    pub parent: Option<(usize, InstanceId)>,
    /// Scope keys of the enclosing frames, outermost first.
    pub inherited_scopes: Vec<String>,
    pub leaves: BTreeMap<InstanceId, LeafRun>,
    /// Terminations not yet written to the word.
    pub pending_x: BTreeMap<InstanceId, ActionStatus>,
    pub word: Vec<Letter>,
    /// Set once the frame's completion has been handled.
    pub closed: bool,
}

impl Frame {
    pub fn new(plan: Plan, parent: Option<(usize, InstanceId)>, inherited: Vec<String>) -> Self {
        Frame {
            exec: ExecState::new(&plan),
            plan,
            parent,
            inherited_scopes: inherited,
            leaves: BTreeMap::new(),
            pending_x: BTreeMap::new(),
            word: Vec::new(),
            closed: false,
        }
    }

    /// Node index of the subtree an exclusive scope covers.
    pub fn scope_node(&self, scope: usize) -> usize {
        let s = &self.plan.scopes[scope];
        self.plan
            .nodes
            .iter()
            .position(|n| n.first == s.first && n.end == s.end)
            .expect("every scope covers a subtree")
    }
}

#[derive(Debug, Clone)]
pub(crate) struct Task {
    pub id: String,
    pub program: TypedProgram,
    pub state: TaskState,
    pub detail: Option<String>,
    pub submitted_ms: u64,
    pub frames: Vec<Frame>,
    /// Values received through `waitevent` parameters.
    pub env: BTreeMap<String, Value>,
}

impl Task {
    pub fn new(id: String, program: TypedProgram, now_ms: u64) -> Self {
        let plan = Plan::compile(&program.entry_body);
        Task {
            id,
            program,
            state: TaskState::Queued,
            detail: None,
            submitted_ms: now_ms,
            frames: vec![Frame::new(plan, None, Vec::new())],
            env: BTreeMap::new(),
        }
    }

    pub fn is_live(&self) -> bool {
        !self.state.is_terminal()
    }

    pub fn instance_key(&self, frame: usize, id: InstanceId) -> String {
        format!("{}.f{frame}.a{id}", self.id)
    }

    pub fn scope_key(&self, frame: usize, scope: usize) -> String {
        format!("{}.f{frame}.s{scope}", self.id)
    }

    pub fn var_key(&self, var: &str) -> String {
        format!("{}:{var}", self.id)
    }

    /// Label used when rendering letters: `<label>.<id>`.
    pub fn label(&self, frame: usize, id: InstanceId) -> String {
        format!("{}.{id}", self.frames[frame].plan.leaf(id).label())
    }
}

/// Public snapshot of a task.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskInfo {
    pub program_id: String,
    pub state: TaskState,
    pub detail: Option<String>,
    pub submitted_ms: u64,
}
