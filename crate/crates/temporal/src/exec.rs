//! Operational semantics: a status tree mirroring the plan, advanced one
//! letter at a time.

use std::collections::BTreeSet;

use resh_lang::TemporalOp;
use thiserror::Error;

use crate::letter::{ActionStatus, Letter};
use crate::plan::{InstanceId, Plan, Shape};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum NodeStatus {
    #[default]
    Unstarted,
    Running,
    Finished,
    Failed,
    Cancelled,
}

impl NodeStatus {
    pub fn is_active(self) -> bool {
        matches!(self, NodeStatus::Unstarted | NodeStatus::Running)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Side {
    Left,
    Right,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
struct NodeState {
    status: NodeStatus,
    started: bool,
    cancel_requested: bool,
    /// `|`: the committed branch.
    choice: Option<Side>,
    /// Short-circuit operators: the operand that was cut.
    cut: Option<Side>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum IllegalLetter {
    #[error("unknown instance {0}")]
    UnknownInstance(InstanceId),
    #[error("instance {0} terminated but is not running")]
    NotRunning(InstanceId),
    #[error("instance {id} cannot start: {reason}")]
    CannotStart { id: InstanceId, reason: &'static str },
    #[error("the task is no longer active")]
    Inactive,
}

/// Marks a group as belonging to one branch of a `|` node. A group that
/// contains a robot action commits the choice to its branch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ChoiceTag {
    pub node: usize,
    pub side: Side,
    pub commits: bool,
}

/// Initiations that must share one letter.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct StartGroup {
    pub ids: BTreeSet<InstanceId>,
    pub tags: Vec<ChoiceTag>,
}

impl StartGroup {
    fn single(id: InstanceId) -> Self {
        StartGroup {
            ids: BTreeSet::from([id]),
            tags: Vec::new(),
        }
    }

    /// Whether the two groups cannot both start in one letter.
    pub fn conflicts_with(&self, other: &StartGroup) -> bool {
        if !self.ids.is_disjoint(&other.ids) {
            return true;
        }
        self.tags.iter().any(|a| {
            other
                .tags
                .iter()
                .any(|b| a.node == b.node && a.side != b.side && (a.commits || b.commits))
        })
    }
}

/// Side effects of a letter that the runtime must act on.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LetterEffects {
    /// Running instances newly marked for cancellation.
    pub to_cancel: Vec<InstanceId>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ExecState {
    nodes: Vec<NodeState>,
    /// Set when the task is aborted or cancelled from outside.
    stopped: Option<NodeStatus>,
}

impl ExecState {
    pub fn new(plan: &Plan) -> Self {
        ExecState {
            nodes: vec![NodeState::default(); plan.nodes.len()],
            stopped: None,
        }
    }

    pub fn status(&self) -> NodeStatus {
        self.stopped.unwrap_or(self.nodes[0].status)
    }

    /// Status of plan node `n`, ignoring an outside stop.
    pub fn node_status(&self, n: usize) -> NodeStatus {
        self.nodes[n].status
    }

    pub fn is_finished(&self) -> bool {
        self.status() == NodeStatus::Finished
    }

    pub fn leaf_status(&self, plan: &Plan, id: InstanceId) -> NodeStatus {
        self.leaf(plan, id).status
    }

    pub fn cancel_requested(&self, plan: &Plan, id: InstanceId) -> bool {
        self.leaf(plan, id).cancel_requested
    }

    /// Instances initiated and not yet terminated.
    pub fn running(&self, plan: &Plan) -> Vec<InstanceId> {
        (0..plan.len() as InstanceId)
            .filter(|&id| self.leaf(plan, id).status == NodeStatus::Running)
            .collect()
    }

    /// Whether every started instance has terminated.
    pub fn is_quiescent(&self, plan: &Plan) -> bool {
        self.running(plan).is_empty()
    }

    fn leaf(&self, plan: &Plan, id: InstanceId) -> &NodeState {
        &self.nodes[plan.leaf_node[id as usize]]
    }

    fn leaf_mut(&mut self, plan: &Plan, id: InstanceId) -> &mut NodeState {
        &mut self.nodes[plan.leaf_node[id as usize]]
    }

    fn started(&self, plan: &Plan, n: usize) -> bool {
        let node = &plan.nodes[n];
        (node.first..node.end).any(|id| self.leaf(plan, id).started)
    }

    fn has_running(&self, plan: &Plan, n: usize) -> bool {
        let node = &plan.nodes[n];
        (node.first..node.end).any(|id| self.leaf(plan, id).status == NodeStatus::Running)
    }

    /// Applies `letter` atomically: on error the state is unchanged.
    pub fn apply_letter(&mut self, plan: &Plan, letter: &Letter) -> Result<LetterEffects, IllegalLetter> {
        let mut next = self.clone();
        let mut effects = next.apply_terminations(plan, letter.x.iter().map(|(k, v)| (*k, *v)))?;
        let more = next.apply_initiations(plan, &letter.y)?;
        effects.to_cancel.extend(more.to_cancel);
        *self = next;
        Ok(effects)
    }

    /// Applies the terminations of one letter.
    pub fn apply_terminations(
        &mut self,
        plan: &Plan,
        x: impl IntoIterator<Item = (InstanceId, ActionStatus)>,
    ) -> Result<LetterEffects, IllegalLetter> {
        for (id, status) in x {
            if id as usize >= plan.len() {
                return Err(IllegalLetter::UnknownInstance(id));
            }
            let leaf = self.leaf_mut(plan, id);
            if leaf.status != NodeStatus::Running {
                return Err(IllegalLetter::NotRunning(id));
            }
            leaf.status = if leaf.cancel_requested {
                NodeStatus::Cancelled
            } else if status == ActionStatus::Succeeded {
                NodeStatus::Finished
            } else {
                NodeStatus::Failed
            };
        }
        let mut effects = LetterEffects::default();
        self.refresh(plan, 0, &mut effects.to_cancel);
        Ok(effects)
    }

    /// Applies the initiations of one letter.
    pub fn apply_initiations(
        &mut self,
        plan: &Plan,
        y: &BTreeSet<InstanceId>,
    ) -> Result<LetterEffects, IllegalLetter> {
        let mut effects = LetterEffects::default();
        if y.is_empty() {
            return Ok(effects);
        }
        if let Some(&bad) = y.iter().find(|&&id| id as usize >= plan.len()) {
            return Err(IllegalLetter::UnknownInstance(bad));
        }
        if !self.status().is_active() {
            return Err(IllegalLetter::Inactive);
        }
        self.validate(plan, 0, y)?;
        for &id in y {
            let leaf = self.leaf_mut(plan, id);
            leaf.status = NodeStatus::Running;
            leaf.started = true;
        }
        for n in 0..plan.nodes.len() {
            let Shape::Bin {
                op: TemporalOp::Choice,
                lhs,
                rhs,
            } = plan.nodes[n].shape
            else {
                continue;
            };
            if self.nodes[n].choice.is_some() || !self.nodes[n].status.is_active() {
                continue;
            }
            let robot_start = |side: usize| {
                let node = &plan.nodes[side];
                y.range(node.first..node.end)
                    .any(|&id| plan.leaf(id).is_robot_action())
            };
            if robot_start(lhs) {
                self.nodes[n].choice = Some(Side::Left);
                self.cut(plan, rhs, &mut effects.to_cancel);
            } else if robot_start(rhs) {
                self.nodes[n].choice = Some(Side::Right);
                self.cut(plan, lhs, &mut effects.to_cancel);
            }
        }
        self.refresh(plan, 0, &mut effects.to_cancel);
        Ok(effects)
    }

    fn validate(&self, plan: &Plan, n: usize, y: &BTreeSet<InstanceId>) -> Result<(), IllegalLetter> {
        let node = &plan.nodes[n];
        let Some(&first) = y.range(node.first..node.end).next() else {
            return Ok(());
        };
        let state = &self.nodes[n];
        if !state.status.is_active() {
            return Err(IllegalLetter::CannotStart {
                id: first,
                reason: "its sub-expression is no longer active",
            });
        }
        let (op, lhs, rhs) = match node.shape {
            Shape::Leaf(id) => {
                return if state.started {
                    Err(IllegalLetter::CannotStart {
                        id,
                        reason: "already started",
                    })
                } else {
                    Ok(())
                };
            }
            Shape::Bin { op, lhs, rhs } => (op, lhs, rhs),
        };
        let in_side = |side: usize| {
            let s = &plan.nodes[side];
            y.range(s.first..s.end).next().is_some()
        };
        let (sl, sr) = (in_side(lhs), in_side(rhs));
        let (ls, rs) = (self.started(plan, lhs), self.started(plan, rhs));
        let fail = |reason| Err(IllegalLetter::CannotStart { id: first, reason });
        match op {
            TemporalOp::Seq if sr && self.nodes[lhs].status != NodeStatus::Finished => {
                return fail("the right of => starts before the left finishes");
            }
            TemporalOp::ParSeq if sr && !rs && !ls && !sl => {
                return fail("the right of +=> starts before the left");
            }
            op if op.is_par() && !ls && !rs && sl != sr => {
                return fail("operands of + must start in the same letter");
            }
            TemporalOp::Choice if state.choice.is_none() => {
                let robot = |side: usize| {
                    let s = &plan.nodes[side];
                    y.range(s.first..s.end)
                        .any(|&id| plan.leaf(id).is_robot_action())
                };
                if (robot(lhs) && sr) || (robot(rhs) && sl) {
                    return fail("both branches of | start in the letter that commits one");
                }
            }
            _ => {}
        }
        self.validate(plan, lhs, y)?;
        self.validate(plan, rhs, y)
    }

    /// Cuts the subtree at `n`: unstarted parts are cancelled outright and
    /// running instances are marked for cancellation.
    fn cut(&mut self, plan: &Plan, n: usize, to_cancel: &mut Vec<InstanceId>) {
        for k in n..plan.nodes[n].node_end {
            let st = &mut self.nodes[k];
            match plan.nodes[k].shape {
                Shape::Leaf(id) => match st.status {
                    NodeStatus::Unstarted => st.status = NodeStatus::Cancelled,
                    NodeStatus::Running if !st.cancel_requested => {
                        st.cancel_requested = true;
                        to_cancel.push(id);
                    }
                    _ => {}
                },
                Shape::Bin { .. } => {
                    if st.status.is_active() {
                        st.status = NodeStatus::Cancelled;
                    }
                }
            }
        }
    }

    fn refresh(&mut self, plan: &Plan, n: usize, to_cancel: &mut Vec<InstanceId>) {
        let Shape::Bin { op, lhs, rhs } = plan.nodes[n].shape else {
            return;
        };
        if !self.nodes[n].status.is_active() {
            return;
        }
        self.refresh(plan, lhs, to_cancel);
        self.refresh(plan, rhs, to_cancel);
        let (ls, rs) = (self.nodes[lhs].status, self.nodes[rhs].status);
        if ls == NodeStatus::Failed || rs == NodeStatus::Failed {
            self.nodes[n].status = NodeStatus::Failed;
            return;
        }
        let fin = |s: NodeStatus| s == NodeStatus::Finished;
        let done = if op == TemporalOp::Choice {
            if self.nodes[n].choice.is_none() {
                if fin(ls) {
                    self.nodes[n].choice = Some(Side::Left);
                    self.cut(plan, rhs, to_cancel);
                } else if fin(rs) {
                    self.nodes[n].choice = Some(Side::Right);
                    self.cut(plan, lhs, to_cancel);
                }
            }
            match self.nodes[n].choice {
                Some(Side::Left) => fin(ls) && !self.has_running(plan, rhs),
                Some(Side::Right) => fin(rs) && !self.has_running(plan, lhs),
                None => false,
            }
        } else if op.is_short_circuit() {
            if self.nodes[n].cut.is_none() && !(fin(ls) && fin(rs)) {
                if op.cuts_lhs() && fin(rs) {
                    self.nodes[n].cut = Some(Side::Left);
                    self.cut(plan, lhs, to_cancel);
                } else if op.cuts_rhs() && fin(ls) {
                    self.nodes[n].cut = Some(Side::Right);
                    self.cut(plan, rhs, to_cancel);
                }
            }
            match self.nodes[n].cut {
                None => fin(ls) && fin(rs),
                Some(Side::Left) => fin(rs) && !self.has_running(plan, lhs),
                Some(Side::Right) => fin(ls) && !self.has_running(plan, rhs),
            }
        } else {
            fin(ls) && fin(rs)
        };
        self.nodes[n].status = if done {
            NodeStatus::Finished
        } else if self.started(plan, n) {
            NodeStatus::Running
        } else {
            NodeStatus::Unstarted
        };
    }

    /// Every minimal set of initiations the semantics permits next.
    pub fn eligible(&self, plan: &Plan) -> Vec<StartGroup> {
        if !self.status().is_active() {
            return Vec::new();
        }
        self.groups(plan, 0)
    }

    fn groups(&self, plan: &Plan, n: usize) -> Vec<StartGroup> {
        let state = &self.nodes[n];
        if !state.status.is_active() {
            return Vec::new();
        }
        let (op, lhs, rhs) = match plan.nodes[n].shape {
            Shape::Leaf(id) => {
                return if state.started {
                    Vec::new()
                } else {
                    vec![StartGroup::single(id)]
                };
            }
            Shape::Bin { op, lhs, rhs } => (op, lhs, rhs),
        };
        let both = || {
            let mut g = self.groups(plan, lhs);
            g.extend(self.groups(plan, rhs));
            g
        };
        match op {
            TemporalOp::Seq => {
                if self.nodes[lhs].status == NodeStatus::Finished {
                    self.groups(plan, rhs)
                } else {
                    self.groups(plan, lhs)
                }
            }
            TemporalOp::ParSeq if !self.started(plan, lhs) => self.groups(plan, lhs),
            op if op.is_par() && !self.started(plan, lhs) && !self.started(plan, rhs) => {
                let right = self.groups(plan, rhs);
                let mut out = Vec::new();
                for a in self.groups(plan, lhs) {
                    for b in &right {
                        let mut ids = a.ids.clone();
                        ids.extend(b.ids.iter().copied());
                        let mut tags = a.tags.clone();
                        tags.extend(b.tags.iter().copied());
                        out.push(StartGroup { ids, tags });
                    }
                }
                out
            }
            TemporalOp::Choice if state.choice.is_none() => {
                let tag = |side_node: usize, side: Side| {
                    self.groups(plan, side_node).into_iter().map(move |mut g| {
                        let commits = g.ids.iter().any(|&id| plan.leaf(id).is_robot_action());
                        g.tags.push(ChoiceTag {
                            node: n,
                            side,
                            commits,
                        });
                        g
                    })
                };
                tag(lhs, Side::Left).chain(tag(rhs, Side::Right)).collect()
            }
            _ => both(),
        }
    }

    /// Aborts the task: the root becomes `Failed` (or stays so), unstarted
    /// parts are cancelled, and running instances are returned for
    /// cancellation.
    pub fn abort(&mut self, plan: &Plan) -> Vec<InstanceId> {
        self.stop(plan, NodeStatus::Failed)
    }

    /// Cancels the task on request; the root becomes `Cancelled`.
    pub fn cancel(&mut self, plan: &Plan) -> Vec<InstanceId> {
        self.stop(plan, NodeStatus::Cancelled)
    }

    fn stop(&mut self, plan: &Plan, status: NodeStatus) -> Vec<InstanceId> {
        if self.status().is_active() {
            self.stopped = Some(status);
        }
        let mut out = Vec::new();
        self.cut(plan, 0, &mut out);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use resh_lang::parse_term;

    fn plan(src: &str) -> Plan {
        Plan::compile(&parse_term(src).unwrap())
    }

    fn ids(groups: &[StartGroup]) -> Vec<Vec<InstanceId>> {
        groups.iter().map(|g| g.ids.iter().copied().collect()).collect()
    }

    #[test]
    fn seq_then_par() {
        let p = plan("A => (B + C)");
        let mut s = ExecState::new(&p);
        assert_eq!(ids(&s.eligible(&p)), vec![vec![0]]);
        s.apply_letter(&p, &Letter::start([0])).unwrap();
        assert!(s.eligible(&p).is_empty());
        s.apply_letter(&p, &Letter::succeed([0])).unwrap();
        assert_eq!(ids(&s.eligible(&p)), vec![vec![1, 2]]);
        assert!(s.apply_letter(&p, &Letter::start([1])).is_err());
        s.apply_letter(&p, &Letter::start([1, 2])).unwrap();
        s.apply_letter(&p, &Letter::succeed([1])).unwrap();
        assert_eq!(s.status(), NodeStatus::Running);
        s.apply_letter(&p, &Letter::succeed([2])).unwrap();
        assert!(s.is_finished());
    }

    #[test]
    fn single_and_independent() {
        let p = plan("A");
        assert_eq!(ids(&ExecState::new(&p).eligible(&p)), vec![vec![0]]);
        let p = plan("A & B");
        assert_eq!(ids(&ExecState::new(&p).eligible(&p)), vec![vec![0], vec![1]]);
    }

    #[test]
    fn empty_letter_is_identity() {
        let p = plan("A !& B");
        let mut s = ExecState::new(&p);
        s.apply_letter(&p, &Letter::start([0])).unwrap();
        let before = s.clone();
        s.apply_letter(&p, &Letter::empty()).unwrap();
        assert_eq!(s, before);
    }

    #[test]
    fn short_circuit_cancels_running_lhs() {
        // load @ A !& waitprop r.loaded, followed by dropoff.
        let p = plan("(load @ A -> r !& waitprop r.loaded) => dropoff @ B -> r");
        let mut s = ExecState::new(&p);
        s.apply_letter(&p, &Letter::start([0, 1])).unwrap();
        let fx = s.apply_letter(&p, &Letter::succeed([1])).unwrap();
        assert_eq!(fx.to_cancel, vec![0]);
        // Dropoff waits for the cancellation to be acknowledged.
        assert!(s.eligible(&p).is_empty());
        s.apply_letter(&p, &Letter::finish([(0, ActionStatus::Terminated)]))
            .unwrap();
        assert_eq!(ids(&s.eligible(&p)), vec![vec![2]]);
    }

    #[test]
    fn short_circuit_skips_unstarted_side() {
        let p = plan("(X => A) !& B");
        let mut s = ExecState::new(&p);
        s.apply_letter(&p, &Letter::start([2])).unwrap();
        let fx = s.apply_letter(&p, &Letter::succeed([2])).unwrap();
        assert!(fx.to_cancel.is_empty());
        assert!(s.is_finished());
    }

    #[test]
    fn failure_propagates_and_abort_cancels() {
        let p = plan("A & B");
        let mut s = ExecState::new(&p);
        s.apply_letter(&p, &Letter::start([0, 1])).unwrap();
        s.apply_letter(&p, &Letter::finish([(0, ActionStatus::Failed)]))
            .unwrap();
        assert_eq!(s.status(), NodeStatus::Failed);
        assert_eq!(s.abort(&p), vec![1]);
        assert_eq!(s.status(), NodeStatus::Failed);
        assert!(s.apply_letter(&p, &Letter::start([0])).is_err());
        s.apply_letter(&p, &Letter::finish([(1, ActionStatus::Terminated)]))
            .unwrap();
        assert!(s.is_quiescent(&p));
    }

    #[test]
    fn choice_commits_on_first_action() {
        let p = plan("A | B");
        let mut s = ExecState::new(&p);
        let groups = s.eligible(&p);
        assert_eq!(ids(&groups), vec![vec![0], vec![1]]);
        assert!(groups[0].conflicts_with(&groups[1]));
        assert!(s.apply_letter(&p, &Letter::start([0, 1])).is_err());
        s.apply_letter(&p, &Letter::start([1])).unwrap();
        assert_eq!(s.leaf_status(&p, 0), NodeStatus::Cancelled);
        s.apply_letter(&p, &Letter::succeed([1])).unwrap();
        assert!(s.is_finished());
    }

    #[test]
    fn choice_between_waits_commits_at_completion() {
        let p = plan("waitprop r.a | waitprop r.b");
        let mut s = ExecState::new(&p);
        let groups = s.eligible(&p);
        assert!(!groups[0].conflicts_with(&groups[1]));
        s.apply_letter(&p, &Letter::start([0, 1])).unwrap();
        let fx = s.apply_letter(&p, &Letter::succeed([1])).unwrap();
        assert_eq!(fx.to_cancel, vec![0]);
        assert!(!s.is_finished());
        s.apply_letter(&p, &Letter::finish([(0, ActionStatus::Terminated)]))
            .unwrap();
        assert!(s.is_finished());
    }

    #[test]
    fn parseq_allows_same_letter_start() {
        let p = plan("A +=> B");
        let mut s = ExecState::new(&p);
        assert_eq!(ids(&s.eligible(&p)), vec![vec![0]]);
        assert!(s.clone().apply_letter(&p, &Letter::start([1])).is_err());
        s.apply_letter(&p, &Letter::start([0, 1])).unwrap();
    }

    #[test]
    fn par_of_and_offers_products() {
        let p = plan("(A & B) + C");
        let s = ExecState::new(&p);
        assert_eq!(ids(&s.eligible(&p)), vec![vec![0, 2], vec![1, 2]]);
    }
}
