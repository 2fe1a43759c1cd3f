//! The event loop state: running tasks, the pool snapshot, bindings and
//! the outstanding optimization epoch.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use log::{info, warn};
use resh_lang::{ActionSig, Expr, ParamType, PropSpec, Target as LangTarget, TypedProgram};
use resh_optimize::{
    ActionRequest, OptimizationProblem, RobotChoice, RobotDescriptor, Solution, StartGroup, Target,
    VarSlot,
};
use resh_protocol::{Pose, StatusKind, TaskState, Value};
use resh_temporal::{
    ActionStatus, InstanceId, LeafInfo, LeafKind, Letter, NodeStatus, Plan, RobotBinding,
};

use crate::event::{Command, EngineError, GotoRequest, RuntimeEvent, TraceKind, TraceRecord};
use crate::task::{Frame, LeafRun, PendingStart, Task, TaskInfo};

/// Leaf `(task, frame, id)`.
type LeafRef = (usize, usize, InstanceId);

#[derive(Debug, Clone)]
struct Launch {
    task: usize,
    frame: usize,
    ids: BTreeSet<InstanceId>,
    targets: BTreeMap<InstanceId, Target>,
}

#[derive(Debug, Clone)]
struct Outstanding {
    epoch: u64,
    launches: Vec<Launch>,
}

/// Watches runtime events, keeps an execution state per task and turns
/// optimizer solutions into commands.
#[derive(Debug, Clone, Default)]
pub struct TemporalEngine {
    locations: BTreeMap<String, Pose>,
    pool: BTreeMap<String, RobotDescriptor>,
    tasks: Vec<Task>,
    bindings: BTreeMap<String, String>,
    /// Instance key (and `<key>.goto`) to leaf.
    instances: BTreeMap<String, LeafRef>,
    /// Exclusive scope key to `(task, frame, node)`.
    scope_nodes: BTreeMap<String, (usize, usize, usize)>,
    cancel_sent: BTreeSet<String>,
    epoch: u64,
    outstanding: Option<Outstanding>,
    dirty: bool,
    seq: u64,
    now: u64,
    finished: VecDeque<(LeafRef, ActionStatus)>,
    out: Vec<Command>,
    trace: Vec<TraceRecord>,
}

impl TemporalEngine {
    /// `locations` resolves symbolic location names.
    pub fn new(locations: BTreeMap<String, Pose>) -> Self {
        TemporalEngine {
            locations,
            ..TemporalEngine::default()
        }
    }

    pub fn epoch(&self) -> u64 {
        self.epoch
    }

    /// Sequence number of the last event consumed.
    pub fn seq(&self) -> u64 {
        self.seq
    }

    /// Whether something happened that may let new groups start.
    pub fn is_dirty(&self) -> bool {
        self.dirty
    }

    /// Whether every submitted task has reached a terminal state.
    pub fn all_done(&self) -> bool {
        self.tasks.iter().all(|t| !t.is_live())
    }

    pub fn pool(&self) -> &BTreeMap<String, RobotDescriptor> {
        &self.pool
    }

    /// Variable key `<program>:<var>` to robot.
    pub fn bindings(&self) -> &BTreeMap<String, String> {
        &self.bindings
    }

    pub fn trace(&self) -> &[TraceRecord] {
        &self.trace
    }

    pub fn tasks(&self) -> Vec<TaskInfo> {
        self.tasks.iter().map(info_of).collect()
    }

    pub fn task(&self, program_id: &str) -> Option<TaskInfo> {
        self.tasks.iter().find(|t| t.id == program_id).map(info_of)
    }

    /// The task's top-level plan and the word recorded for it so far.
    pub fn task_word(&self, program_id: &str) -> Option<(&Plan, &[Letter])> {
        let t = self.tasks.iter().find(|t| t.id == program_id)?;
        Some((&t.frames[0].plan, &t.frames[0].word))
    }

    /// Adds a checked program. It starts once the optimizer launches its
    /// first group.
    pub fn submit(
        &mut self,
        program_id: &str,
        program: TypedProgram,
        now_ms: u64,
    ) -> Result<Vec<Command>, EngineError> {
        if self.tasks.iter().any(|t| t.id == program_id) {
            return Err(EngineError::DuplicateProgram(program_id.to_string()));
        }
        self.now = now_ms;
        let t = self.tasks.len();
        self.tasks
            .push(Task::new(program_id.to_string(), program, now_ms));
        self.register_scopes(t, 0);
        self.record(TraceKind::Submit, program_id.to_string());
        self.out.push(Command::TaskStatus {
            program_id: program_id.to_string(),
            state: TaskState::Queued,
            detail: None,
        });
        self.mark_dirty();
        Ok(self.take_out())
    }

    fn register_scopes(&mut self, t: usize, f: usize) {
        let task = &self.tasks[t];
        let frame = &task.frames[f];
        let keys: Vec<(String, usize)> = (0..frame.plan.scopes.len())
            .map(|s| (task.scope_key(f, s), frame.scope_node(s)))
            .collect();
        for (key, node) in keys {
            self.scope_nodes.insert(key, (t, f, node));
        }
    }

    fn mark_dirty(&mut self) {
        self.dirty = true;
        self.outstanding = None;
    }

    fn take_out(&mut self) -> Vec<Command> {
        std::mem::take(&mut self.out)
    }

    fn record(&mut self, kind: TraceKind, payload: String) {
        self.trace.push(TraceRecord::new(
            self.now,
            self.epoch,
            kind.as_str(),
            payload,
        ));
    }
}

fn info_of(t: &Task) -> TaskInfo {
    TaskInfo {
        program_id: t.id.clone(),
        state: t.state,
        detail: t.detail.clone(),
        submitted_ms: t.submitted_ms,
    }
}

fn action_status(s: StatusKind) -> Option<ActionStatus> {
    match s {
        StatusKind::Succeeded => Some(ActionStatus::Succeeded),
        StatusKind::Failed => Some(ActionStatus::Failed),
        StatusKind::Terminated => Some(ActionStatus::Terminated),
        StatusKind::Accepted | StatusKind::Running => None,
    }
}

impl TemporalEngine {
    /// Writes pending terminations as letters and builds the next epoch's
    /// problem. `None` when no group is eligible anywhere.
    pub fn formulate(&mut self, now_ms: u64) -> Option<OptimizationProblem> {
        self.now = now_ms;
        self.dirty = false;
        self.outstanding = None;
        self.flush_letters();
        let mut groups = Vec::new();
        let mut conflicts = Vec::new();
        let mut launches = Vec::new();
        for t in 0..self.tasks.len() {
            if !self.tasks[t].is_live() {
                continue;
            }
            match self.task_groups(t) {
                Ok(per_frame) => {
                    for frame_groups in per_frame {
                        let base = groups.len();
                        for (i, (sg, launch, eligible)) in frame_groups.iter().enumerate() {
                            for (j, (_, _, other)) in frame_groups.iter().enumerate().skip(i + 1) {
                                if eligible.conflicts_with(other) {
                                    conflicts.push((base + i, base + j));
                                }
                            }
                            groups.push(sg.clone());
                            launches.push(launch.clone());
                        }
                    }
                }
                Err(reason) => self.abort(t, reason),
            }
        }
        self.settle();
        if groups.is_empty() {
            return None;
        }
        self.epoch += 1;
        let vars = self.var_slots();
        self.outstanding = Some(Outstanding {
            epoch: self.epoch,
            launches,
        });
        Some(OptimizationProblem {
            epoch: self.epoch,
            groups,
            conflicts,
            vars,
            pool: self.pool.values().cloned().collect(),
        })
    }

    /// Writes every frame's pending terminations as one letter each.
    pub fn flush_letters(&mut self) {
        for t in 0..self.tasks.len() {
            for f in 0..self.tasks[t].frames.len() {
                self.flush_frame(t, f);
            }
        }
    }

    fn flush_frame(&mut self, t: usize, f: usize) {
        let task = &mut self.tasks[t];
        let pending = std::mem::take(&mut task.frames[f].pending_x);
        if pending.is_empty() {
            return;
        }
        let letter = Letter::finish(pending);
        let text = format!("{} f{f} {}", task.id, letter.render(|id| task.label(f, id)));
        task.frames[f].word.push(letter);
        self.record(TraceKind::Letter, text);
    }

    #[allow(clippy::type_complexity)]
    fn task_groups(
        &self,
        t: usize,
    ) -> Result<Vec<Vec<(StartGroup, Launch, resh_temporal::StartGroup)>>, String> {
        let task = &self.tasks[t];
        let mut out = Vec::new();
        for (f, frame) in task.frames.iter().enumerate() {
            if frame.closed || !frame.exec.status().is_active() {
                continue;
            }
            let mut frame_groups = Vec::new();
            for g in frame.exec.eligible(&frame.plan) {
                let mut actions = Vec::new();
                let mut targets = BTreeMap::new();
                for &id in &g.ids {
                    let leaf = frame.plan.leaf(id);
                    if let Some(req) = self.request(task, f, leaf)? {
                        if let Some(target) = &req.target {
                            targets.insert(id, target.clone());
                        }
                        actions.push(req);
                    }
                }
                let launch = Launch {
                    task: t,
                    frame: f,
                    ids: g.ids.clone(),
                    targets,
                };
                let sg = StartGroup {
                    task: task.id.clone(),
                    actions,
                };
                frame_groups.push((sg, launch, g));
            }
            out.push(frame_groups);
        }
        Ok(out)
    }

    /// The optimizer's view of one leaf; `None` for pseudo-actions.
    fn request(&self, task: &Task, f: usize, leaf: &LeafInfo) -> Result<Option<ActionRequest>, String> {
        let LeafKind::Action { name, args } = &leaf.kind else {
            return Ok(None);
        };
        let sig = task
            .program
            .signature_of(name)
            .unwrap_or_else(|| ActionSig::new(name.clone(), Vec::new()));
        let target = if is_goto(name) {
            let loc = match args.first() {
                Some(Expr::Str(s)) => LangTarget::Name(s.clone()),
                Some(Expr::Var(v)) => LangTarget::Var(v.clone()),
                _ => return Err(format!("{name} needs a location argument")),
            };
            Some(self.resolve_location(task, &loc)?)
        } else {
            match &leaf.loc {
                Some(loc) => Some(self.resolve_location(task, loc)?),
                None => None,
            }
        };
        let frame = &task.frames[f];
        let mut scopes = frame.inherited_scopes.clone();
        scopes.extend(leaf.scopes.iter().map(|&s| task.scope_key(f, s)));
        Ok(Some(ActionRequest {
            instance: task.instance_key(f, leaf.id),
            sig,
            target,
            robot: robot_choice(task, leaf.robot.as_ref()),
            scopes,
        }))
    }

    fn resolve_location(&self, task: &Task, loc: &LangTarget) -> Result<Target, String> {
        let name = match loc {
            LangTarget::Name(n) => n.clone(),
            LangTarget::Var(v) => match task.env.get(v) {
                Some(Value::Str(s)) => s.clone(),
                Some(other) => return Err(format!("location variable {v} holds {other}")),
                None => return Err(format!("location variable {v} is unbound")),
            },
        };
        match self.locations.get(&name) {
            Some(pose) => Ok(Target { name, pose: *pose }),
            None => Err(format!("unknown location {name}")),
        }
    }

    fn var_slots(&self) -> BTreeMap<String, VarSlot> {
        let mut vars = BTreeMap::new();
        for task in self.tasks.iter().filter(|t| t.is_live()) {
            for (name, info) in &task.program.vars {
                if info.ty != ParamType::Robot || task.env.contains_key(name) {
                    continue;
                }
                let key = task.var_key(name);
                let bound = self.bindings.get(&key).cloned();
                vars.insert(
                    key,
                    VarSlot {
                        with: info.with.clone(),
                        bound,
                    },
                );
            }
        }
        vars
    }

    /// The robot a property spec refers to, if known.
    fn prop_owner(&self, task: &Task, spec: &PropSpec) -> Option<String> {
        let owner = spec.owner.as_ref()?;
        match task.env.get(owner) {
            Some(Value::Str(s)) => Some(s.clone()),
            _ => self.bindings.get(&task.var_key(owner)).cloned(),
        }
    }

    /// Unknown owners and missing properties read as false.
    fn prop_holds(&self, task: &Task, spec: &PropSpec) -> bool {
        self.prop_owner(task, spec)
            .and_then(|r| self.pool.get(&r))
            .is_some_and(|r| r.satisfies(spec))
    }

    fn resolve_args(&self, task: &Task, args: &[Expr]) -> Result<Vec<Value>, String> {
        args.iter()
            .map(|e| match e {
                Expr::Str(s) => Ok(Value::Str(s.clone())),
                Expr::Int(i) => Ok(Value::Int(*i)),
                Expr::Bool(b) => Ok(Value::Bool(*b)),
                Expr::Duration(ms) => Ok(Value::Int(*ms as i64)),
                Expr::Var(v) => task
                    .env
                    .get(v)
                    .cloned()
                    .or_else(|| self.bindings.get(&task.var_key(v)).cloned().map(Value::Str))
                    .ok_or_else(|| format!("variable {v} is unbound")),
            })
            .collect()
    }
}

fn is_goto(name: &str) -> bool {
    name == ActionSig::goto().name
}

fn robot_choice(task: &Task, binding: Option<&RobotBinding>) -> RobotChoice {
    match binding.map(|b| &b.target) {
        None => RobotChoice::Any,
        Some(LangTarget::Name(n)) => RobotChoice::Fixed(n.clone()),
        Some(LangTarget::Var(v)) => match task.env.get(v) {
            Some(Value::Str(s)) => RobotChoice::Fixed(s.clone()),
            _ => RobotChoice::Var(task.var_key(v)),
        },
    }
}

impl TemporalEngine {
    /// Starts the selected groups. A solution for any epoch other than the
    /// outstanding one is refused and the engine asks to reformulate.
    pub fn apply_solution(&mut self, sol: &Solution, now_ms: u64) -> Result<Vec<Command>, EngineError> {
        self.now = now_ms;
        let out = match self.outstanding.take() {
            Some(o) if o.epoch == sol.epoch => o,
            other => {
                self.outstanding = other;
                self.mark_dirty();
                return Err(EngineError::StaleSolution(sol.epoch));
            }
        };
        for (var, robot) in &sol.new_bindings {
            self.bindings.insert(var.clone(), robot.clone());
            self.record(TraceKind::Bind, format!("{var} {robot}"));
        }
        let mut selected = sol.selected_groups.clone();
        selected.sort_unstable();
        selected.dedup();
        let mut letters: BTreeMap<(usize, usize), BTreeSet<InstanceId>> = BTreeMap::new();
        let mut gotos = Vec::new();
        for g in selected {
            let Some(launch) = out.launches.get(g) else {
                warn!("epoch {}: no group {g}", sol.epoch);
                continue;
            };
            let (t, f) = (launch.task, launch.frame);
            if !self.tasks[t].is_live() {
                continue;
            }
            let frame = &mut self.tasks[t].frames[f];
            let effects = match frame.exec.apply_initiations(&frame.plan, &launch.ids) {
                Ok(e) => e,
                Err(e) => {
                    warn!("epoch {}: cannot start group {g}: {e}", sol.epoch);
                    continue;
                }
            };
            letters.entry((t, f)).or_default().extend(&launch.ids);
            if self.tasks[t].state == TaskState::Queued {
                self.set_state(t, TaskState::Running, None);
            }
            for &id in &launch.ids {
                let robot = sol
                    .assignments
                    .get(&self.tasks[t].instance_key(f, id))
                    .cloned();
                let target = launch.targets.get(&id).cloned();
                self.start_leaf((t, f, id), robot, target, &mut gotos);
            }
            for id in effects.to_cancel {
                self.cancel_leaf((t, f, id));
            }
        }
        for ((t, f), ids) in letters {
            let task = &mut self.tasks[t];
            let letter = Letter::start(ids);
            let text = format!("{} f{f} {}", task.id, letter.render(|id| task.label(f, id)));
            task.frames[f].word.push(letter);
            self.record(TraceKind::Letter, text);
        }
        if !gotos.is_empty() {
            self.out.push(Command::GotoSet {
                epoch: sol.epoch,
                gotos,
            });
        }
        self.recheck_waitprops();
        self.settle();
        Ok(self.take_out())
    }

    fn start_leaf(
        &mut self,
        (t, f, id): LeafRef,
        robot: Option<String>,
        target: Option<Target>,
        gotos: &mut Vec<GotoRequest>,
    ) {
        let key = self.tasks[t].instance_key(f, id);
        self.instances.insert(key.clone(), (t, f, id));
        let leaf = self.tasks[t].frames[f].plan.leaf(id).clone();
        let run = match &leaf.kind {
            LeafKind::Action { name, args } => {
                let Some(robot) = robot else {
                    self.abort(t, format!("{key} has no robot"));
                    return;
                };
                let args = match self.resolve_args(&self.tasks[t], args) {
                    Ok(a) => a,
                    Err(e) => {
                        self.abort(t, e);
                        return;
                    }
                };
                self.record(
                    TraceKind::Assign,
                    format!("{} {key} {name} {robot}", self.tasks[t].id),
                );
                self.claim_robot(t, f, &leaf, &robot, &key);
                match target {
                    Some(target) => {
                        let goto = format!("{key}.goto");
                        self.instances.insert(goto.clone(), (t, f, id));
                        if let Some(r) = self.pool.get_mut(&robot) {
                            r.goal = Some(target.pose);
                        }
                        gotos.push(GotoRequest {
                            robot: robot.clone(),
                            instance: goto,
                            location: target.name,
                            goal: target.pose,
                        });
                        let act = (!is_goto(name)).then(|| PendingStart {
                            action: name.clone(),
                            args,
                        });
                        LeafRun::Moving { robot, act }
                    }
                    None => {
                        self.out.push(Command::StartAction {
                            instance: key.clone(),
                            action: name.clone(),
                            args,
                            robot: robot.clone(),
                        });
                        LeafRun::Acting { robot }
                    }
                }
            }
            LeafKind::WaitEvent { .. } | LeafKind::WaitProp(_) => LeafRun::Waiting,
            LeafKind::Pause(ms) => {
                self.out.push(Command::StartTimer {
                    timer: key,
                    delay_ms: *ms,
                });
                LeafRun::Pausing
            }
            LeafKind::Repeat { until, .. } => {
                if self.prop_holds(&self.tasks[t], until) {
                    self.finished.push_back(((t, f, id), ActionStatus::Succeeded));
                    LeafRun::Waiting
                } else {
                    let child = self.spawn_iteration(t, f, id);
                    LeafRun::Repeating { child }
                }
            }
        };
        self.tasks[t].frames[f].leaves.insert(id, run);
    }

    /// Marks the robot busy and reserves it for the outermost exclusive
    /// scope around the leaf.
    fn claim_robot(&mut self, t: usize, f: usize, leaf: &LeafInfo, robot: &str, key: &str) {
        let task = &self.tasks[t];
        let frame = &task.frames[f];
        let outermost = frame
            .inherited_scopes
            .first()
            .cloned()
            .or_else(|| leaf.scopes.first().map(|&s| task.scope_key(f, s)));
        if let Some(r) = self.pool.get_mut(robot) {
            r.busy = Some(key.to_string());
            if r.reserved.is_none() {
                r.reserved = outermost;
            }
        }
    }

    fn spawn_iteration(&mut self, t: usize, f: usize, id: InstanceId) -> usize {
        let task = &self.tasks[t];
        let frame = &task.frames[f];
        let leaf = frame.plan.leaf(id);
        let LeafKind::Repeat { body, .. } = &leaf.kind else {
            unreachable!("only repeat leaves iterate");
        };
        let mut inherited = frame.inherited_scopes.clone();
        inherited.extend(leaf.scopes.iter().map(|&s| task.scope_key(f, s)));
        let child = Frame::new((**body).clone(), Some((f, id)), inherited);
        let c = self.tasks[t].frames.len();
        self.tasks[t].frames.push(child);
        self.register_scopes(t, c);
        self.mark_dirty();
        c
    }

    fn set_state(&mut self, t: usize, state: TaskState, detail: Option<String>) {
        if state == TaskState::Succeeded {
            for f in 0..self.tasks[t].frames.len() {
                self.flush_frame(t, f);
            }
        }
        let task = &mut self.tasks[t];
        task.state = state;
        task.detail = detail.clone();
        let id = task.id.clone();
        let text = match &detail {
            Some(d) => format!("{id} {} {d}", state.as_str()),
            None => format!("{id} {}", state.as_str()),
        };
        info!("task {text}");
        self.record(TraceKind::Task, text);
        self.out.push(Command::TaskStatus {
            program_id: id,
            state,
            detail,
        });
    }
}

impl TemporalEngine {
    /// Consumes one event. Call [`formulate`](Self::formulate) afterwards
    /// when [`is_dirty`](Self::is_dirty) reports true.
    pub fn on_event(&mut self, ev: RuntimeEvent, now_ms: u64) -> Vec<Command> {
        self.now = now_ms;
        self.seq += 1;
        match ev {
            RuntimeEvent::ActionFinished { instance, status } => {
                self.action_finished(&instance, status)
            }
            RuntimeEvent::PropertyChanged { robot, prop, value } => {
                let Some(r) = self.pool.get_mut(&robot) else {
                    warn!("property {prop} on unknown robot {robot}");
                    return self.take_out();
                };
                r.properties.insert(prop.clone(), value);
                if self.with_clause_watches(&prop) {
                    self.mark_dirty();
                }
                self.recheck_waitprops();
            }
            RuntimeEvent::PoseChanged {
                robot,
                pose,
                battery,
            } => {
                if let Some(r) = self.pool.get_mut(&robot) {
                    r.pose = pose;
                    r.battery = battery;
                }
            }
            RuntimeEvent::RobotAdded(mut d) => {
                if let Some(old) = self.pool.get(&d.name) {
                    d.busy = old.busy.clone();
                    d.reserved = old.reserved.clone();
                    d.goal = old.goal;
                }
                info!("robot {} joined the pool", d.name);
                self.pool.insert(d.name.clone(), d);
                self.mark_dirty();
            }
            RuntimeEvent::RobotRemoved(name) => self.robot_removed(&name),
            RuntimeEvent::CapabilityAdvertised { robot, capability } => {
                if let Some(r) = self.pool.get_mut(&robot) {
                    if !r.capabilities.contains(&capability) {
                        r.capabilities.push(capability);
                    }
                    self.mark_dirty();
                }
            }
            RuntimeEvent::CapabilityRetracted { robot, action } => {
                if let Some(r) = self.pool.get_mut(&robot) {
                    r.capabilities.retain(|c| c.action != action);
                }
            }
            RuntimeEvent::ExternalEvent { name, args } => {
                if let Err(e) = self.deliver_event(&name, &args) {
                    warn!("{e}");
                }
            }
            RuntimeEvent::TimerFired(timer) => {
                if let Some(&leaf) = self.instances.get(&timer) {
                    if self.run_of(leaf) == Some(&LeafRun::Pausing) {
                        self.finished.push_back((leaf, ActionStatus::Succeeded));
                    }
                }
            }
        }
        self.settle();
        self.take_out()
    }

    /// Delivers an external event to every task waiting for it. Returns
    /// whether anyone consumed it.
    pub fn fire_external_event(
        &mut self,
        name: &str,
        args: Vec<Value>,
        now_ms: u64,
    ) -> Result<(bool, Vec<Command>), EngineError> {
        self.now = now_ms;
        self.seq += 1;
        let consumed = self.deliver_event(name, &args)?;
        self.settle();
        Ok((consumed, self.take_out()))
    }

    fn deliver_event(&mut self, name: &str, args: &[Value]) -> Result<bool, EngineError> {
        for task in self.tasks.iter().filter(|t| t.is_live()) {
            if let Some(sig) = task.program.events.get(name) {
                if sig.len() != args.len() {
                    return Err(EngineError::ArityMismatch {
                        name: name.to_string(),
                        expected: sig.len(),
                        got: args.len(),
                    });
                }
            }
        }
        let shown: Vec<String> = args.iter().map(Value::to_string).collect();
        self.record(TraceKind::Event, format!("{name}({})", shown.join(", ")));
        let mut waiters = Vec::new();
        for (t, task) in self.tasks.iter().enumerate().filter(|(_, t)| t.is_live()) {
            for (f, frame) in task.frames.iter().enumerate() {
                for (&id, run) in &frame.leaves {
                    if *run != LeafRun::Waiting || frame.exec.cancel_requested(&frame.plan, id) {
                        continue;
                    }
                    if let LeafKind::WaitEvent { name: n, params } = &frame.plan.leaf(id).kind {
                        if n == name {
                            waiters.push(((t, f, id), params.clone()));
                        }
                    }
                }
            }
        }
        if waiters.is_empty() {
            warn!("event {name} dropped: no task waits for it");
            return Ok(false);
        }
        for ((t, f, id), params) in waiters {
            for (p, v) in params.iter().zip(args) {
                self.tasks[t].env.insert(p.name.clone(), v.clone());
            }
            self.finished.push_back(((t, f, id), ActionStatus::Succeeded));
        }
        Ok(true)
    }

    /// Records an outside observation in the trace and asks for a fresh
    /// epoch.
    pub fn note(&mut self, text: impl Into<String>, now_ms: u64) {
        self.now = now_ms;
        self.record(TraceKind::Note, text.into());
        self.mark_dirty();
    }

    /// Cancels a task on request.
    pub fn cancel_task(&mut self, program_id: &str, now_ms: u64) -> Result<Vec<Command>, EngineError> {
        self.now = now_ms;
        let t = self
            .tasks
            .iter()
            .position(|t| t.id == program_id)
            .ok_or_else(|| EngineError::UnknownProgram(program_id.to_string()))?;
        if self.tasks[t].is_live() {
            self.set_state(t, TaskState::Cancelled, None);
            self.stop_frames(t, NodeStatus::Cancelled);
            self.mark_dirty();
        }
        self.settle();
        Ok(self.take_out())
    }

    fn run_of(&self, (t, f, id): LeafRef) -> Option<&LeafRun> {
        self.tasks[t].frames[f].leaves.get(&id)
    }

    fn action_finished(&mut self, instance: &str, status: StatusKind) {
        let Some(status) = action_status(status) else {
            return;
        };
        let Some(&leaf) = self.instances.get(instance) else {
            warn!("status for unknown instance {instance}");
            return;
        };
        let is_goto = instance.ends_with(".goto");
        match self.run_of(leaf).cloned() {
            Some(LeafRun::Moving { robot, act }) if is_goto => {
                if let Some(r) = self.pool.get_mut(&robot) {
                    r.goal = None;
                }
                let (t, f, id) = leaf;
                let frame = &self.tasks[t].frames[f];
                let cancelled = frame.exec.cancel_requested(&frame.plan, id);
                match (status, act) {
                    (ActionStatus::Succeeded, Some(act)) if !cancelled => {
                        let key = self.tasks[t].instance_key(f, id);
                        self.out.push(Command::StartAction {
                            instance: key,
                            action: act.action,
                            args: act.args,
                            robot: robot.clone(),
                        });
                        self.tasks[t].frames[f]
                            .leaves
                            .insert(id, LeafRun::Acting { robot });
                    }
                    (ActionStatus::Succeeded, Some(_)) => {
                        self.finished.push_back((leaf, ActionStatus::Terminated));
                    }
                    (status, _) => self.finished.push_back((leaf, status)),
                }
            }
            Some(LeafRun::Acting { .. }) if !is_goto => self.finished.push_back((leaf, status)),
            _ => warn!("stale status {status} for {instance}"),
        }
    }

    fn robot_removed(&mut self, name: &str) {
        if self.pool.remove(name).is_none() {
            return;
        }
        warn!("robot {name} left the pool");
        let bound: BTreeSet<usize> = self
            .tasks
            .iter()
            .enumerate()
            .filter(|(_, t)| {
                t.is_live()
                    && self
                        .bindings
                        .iter()
                        .any(|(k, r)| r == name && k.starts_with(&format!("{}:", t.id)))
            })
            .map(|(t, _)| t)
            .collect();
        for &t in &bound {
            self.abort(t, format!("robot {name} left the pool"));
        }
        let mut hit = Vec::new();
        for (t, task) in self.tasks.iter().enumerate() {
            if !task.is_live() {
                continue;
            }
            for (f, frame) in task.frames.iter().enumerate() {
                for (&id, run) in &frame.leaves {
                    if let LeafRun::Moving { robot, .. } | LeafRun::Acting { robot } = run {
                        if robot == name {
                            hit.push((t, f, id));
                        }
                    }
                }
            }
        }
        for leaf in hit {
            self.finished.push_back((leaf, ActionStatus::Failed));
        }
        self.settle();
        self.mark_dirty();
    }

    /// Whether an unbound variable's with-clause reads `prop`.
    fn with_clause_watches(&self, prop: &str) -> bool {
        self.tasks.iter().filter(|t| t.is_live()).any(|t| {
            t.program.vars.iter().any(|(name, info)| {
                !self.bindings.contains_key(&t.var_key(name))
                    && info.with.iter().any(|p| p.prop == prop)
            })
        })
    }

    fn recheck_waitprops(&mut self) {
        let mut done = Vec::new();
        for (t, task) in self.tasks.iter().enumerate().filter(|(_, t)| t.is_live()) {
            for (f, frame) in task.frames.iter().enumerate() {
                for (&id, run) in &frame.leaves {
                    if *run != LeafRun::Waiting {
                        continue;
                    }
                    if let LeafKind::WaitProp(spec) = &frame.plan.leaf(id).kind {
                        if self.prop_holds(task, spec) {
                            done.push((t, f, id));
                        }
                    }
                }
            }
        }
        for leaf in done {
            self.finished.push_back((leaf, ActionStatus::Succeeded));
        }
    }
}

impl TemporalEngine {
    /// Processes queued leaf terminations until none remain.
    fn settle(&mut self) {
        while let Some((leaf, status)) = self.finished.pop_front() {
            self.leaf_done(leaf, status);
        }
        self.release_scopes();
    }

    fn leaf_done(&mut self, (t, f, id): LeafRef, status: ActionStatus) {
        let frame = &mut self.tasks[t].frames[f];
        if frame.exec.leaf_status(&frame.plan, id) != NodeStatus::Running {
            return;
        }
        let cancelled = frame.exec.cancel_requested(&frame.plan, id);
        let effects = match frame.exec.apply_terminations(&frame.plan, [(id, status)]) {
            Ok(e) => e,
            Err(e) => {
                warn!("cannot terminate {id}: {e}");
                return;
            }
        };
        frame.pending_x.insert(id, status);
        if let Some(LeafRun::Moving { robot, .. } | LeafRun::Acting { robot }) =
            frame.leaves.remove(&id)
        {
            if let Some(r) = self.pool.get_mut(&robot) {
                r.busy = None;
                r.goal = None;
            }
        }
        self.mark_dirty();
        if !effects.to_cancel.is_empty() {
            // Later terminations of the cancelled side belong to a later letter.
            self.flush_frame(t, f);
        }
        for c in effects.to_cancel {
            self.cancel_leaf((t, f, c));
        }
        if status != ActionStatus::Succeeded && !cancelled {
            let key = self.tasks[t].instance_key(f, id);
            self.abort(t, format!("{key} {status}"));
        }
        self.check_frame(t, f);
    }

    /// Handles a frame whose root has settled.
    fn check_frame(&mut self, t: usize, f: usize) {
        let task = &self.tasks[t];
        let frame = &task.frames[f];
        if frame.closed {
            return;
        }
        let status = frame.exec.status();
        let quiet = frame.exec.is_quiescent(&frame.plan);
        let parent = frame.parent;
        match parent {
            None => {
                if status == NodeStatus::Finished {
                    self.tasks[t].frames[f].closed = true;
                    if self.tasks[t].is_live() {
                        self.set_state(t, TaskState::Succeeded, None);
                    }
                }
            }
            Some((pf, pid)) => {
                if status == NodeStatus::Finished {
                    self.tasks[t].frames[f].closed = true;
                    let task = &self.tasks[t];
                    let pframe = &task.frames[pf];
                    let stop = !task.is_live() || pframe.exec.cancel_requested(&pframe.plan, pid);
                    let until = match &pframe.plan.leaf(pid).kind {
                        LeafKind::Repeat { until, .. } => until.clone(),
                        _ => unreachable!("child frames belong to repeat leaves"),
                    };
                    if stop {
                        self.finished.push_back(((t, pf, pid), ActionStatus::Terminated));
                    } else if self.prop_holds(&self.tasks[t], &until) {
                        self.finished.push_back(((t, pf, pid), ActionStatus::Succeeded));
                    } else {
                        let child = self.spawn_iteration(t, pf, pid);
                        self.tasks[t].frames[pf]
                            .leaves
                            .insert(pid, LeafRun::Repeating { child });
                    }
                } else if !status.is_active() && quiet {
                    self.tasks[t].frames[f].closed = true;
                    let s = if status == NodeStatus::Cancelled {
                        ActionStatus::Terminated
                    } else {
                        ActionStatus::Failed
                    };
                    self.finished.push_back(((t, pf, pid), s));
                }
            }
        }
    }

    /// Asks a running leaf to stop. Internal pseudo-actions stop at once;
    /// robot actions stop when their agent reports.
    fn cancel_leaf(&mut self, (t, f, id): LeafRef) {
        let key = self.tasks[t].instance_key(f, id);
        let Some(run) = self.run_of((t, f, id)).cloned() else {
            return;
        };
        if !self.cancel_sent.insert(key.clone()) {
            return;
        }
        match run {
            LeafRun::Moving { .. } => self.out.push(Command::CancelAction {
                instance: format!("{key}.goto"),
            }),
            LeafRun::Acting { .. } => self.out.push(Command::CancelAction { instance: key }),
            LeafRun::Waiting => self
                .finished
                .push_back(((t, f, id), ActionStatus::Terminated)),
            LeafRun::Pausing => {
                self.out.push(Command::CancelTimer { timer: key });
                self.finished
                    .push_back(((t, f, id), ActionStatus::Terminated));
            }
            LeafRun::Repeating { child } => {
                let frame = &mut self.tasks[t].frames[child];
                let running = frame.exec.cancel(&frame.plan);
                for c in running {
                    self.cancel_leaf((t, child, c));
                }
                self.check_frame(t, child);
            }
        }
    }

    fn abort(&mut self, t: usize, reason: String) {
        if !self.tasks[t].is_live() {
            return;
        }
        warn!("task {} aborted: {reason}", self.tasks[t].id);
        self.set_state(t, TaskState::Aborted, Some(reason));
        self.stop_frames(t, NodeStatus::Failed);
        self.mark_dirty();
    }

    fn stop_frames(&mut self, t: usize, how: NodeStatus) {
        for f in 0..self.tasks[t].frames.len() {
            let frame = &mut self.tasks[t].frames[f];
            let running = if how == NodeStatus::Cancelled {
                frame.exec.cancel(&frame.plan)
            } else {
                frame.exec.abort(&frame.plan)
            };
            for id in running {
                self.cancel_leaf((t, f, id));
            }
        }
    }

    /// Drops reservations whose exclusive scope is over.
    fn release_scopes(&mut self) {
        for r in self.pool.values_mut() {
            let Some(key) = &r.reserved else { continue };
            let over = match self.scope_nodes.get(key) {
                Some(&(t, f, node)) => {
                    let task = &self.tasks[t];
                    !task.is_live() || !task.frames[f].exec.node_status(node).is_active()
                }
                None => true,
            };
            if over {
                r.reserved = None;
            }
        }
    }
}
