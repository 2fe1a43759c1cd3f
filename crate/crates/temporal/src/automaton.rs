//! Compositional automaton over `<X,Y>` letters.
//!
//! A state is a value built from per-operand states; each operator combines
//! its operands' transitions. Failure of a non-cancelled instance and any
//! letter the semantics forbids lead to the implicit dead state. The
//! construction is deterministic, so [`EventAutomaton`] is obtained by plain
//! reachability over the finite alphabet, with no subset construction.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};

use resh_lang::TemporalOp;

use crate::letter::{ActionStatus, Letter};
use crate::plan::{InstanceId, Plan, Shape};

/// Term structure the automaton is built over.
#[derive(Debug, Clone, PartialEq, Eq)]
enum Node {
    Leaf { id: InstanceId, robot: bool },
    Bin {
        op: TemporalOp,
        lhs: Box<Node>,
        rhs: Box<Node>,
        first: InstanceId,
        mid: InstanceId,
        end: InstanceId,
    },
}

impl Node {
    fn from_plan(plan: &Plan, n: usize) -> Node {
        match plan.nodes[n].shape {
            Shape::Leaf(id) => Node::Leaf {
                id,
                robot: plan.leaf(id).is_robot_action(),
            },
            Shape::Bin { op, lhs, rhs } => Node::Bin {
                op,
                lhs: Box::new(Node::from_plan(plan, lhs)),
                rhs: Box::new(Node::from_plan(plan, rhs)),
                first: plan.nodes[n].first,
                mid: plan.nodes[rhs].first,
                end: plan.nodes[n].end,
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Commit {
    Left,
    Right,
}

/// Automaton state of one operand.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum AState {
    Idle,
    Run,
    Done,
    /// Terminated or skipped; holds the instances whose termination is
    /// still owed.
    Killed(BTreeSet<InstanceId>),
    Bin {
        l: Box<AState>,
        r: Box<AState>,
        commit: Option<Commit>,
    },
}

struct Dead;

fn init(node: &Node) -> AState {
    match node {
        Node::Leaf { .. } => AState::Idle,
        Node::Bin { lhs, rhs, .. } => AState::Bin {
            l: Box::new(init(lhs)),
            r: Box::new(init(rhs)),
            commit: None,
        },
    }
}

fn started(s: &AState) -> bool {
    match s {
        AState::Idle => false,
        AState::Run | AState::Done | AState::Killed(_) => true,
        AState::Bin { l, r, .. } => started(l) || started(r),
    }
}

fn running(s: &AState, node: &Node, out: &mut BTreeSet<InstanceId>) {
    match (s, node) {
        (AState::Run, Node::Leaf { id, .. }) => {
            out.insert(*id);
        }
        (AState::Killed(owed), _) => out.extend(owed.iter().copied()),
        (AState::Bin { l, r, .. }, Node::Bin { lhs, rhs, .. }) => {
            running(l, lhs, out);
            running(r, rhs, out);
        }
        _ => {}
    }
}

fn kill(s: AState, node: &Node) -> AState {
    let mut owed = BTreeSet::new();
    running(&s, node, &mut owed);
    AState::Killed(owed)
}

fn cleared(s: &AState) -> bool {
    matches!(s, AState::Killed(owed) if owed.is_empty())
}

fn finished(s: &AState, node: &Node) -> bool {
    match (s, node) {
        (AState::Done, _) => true,
        (AState::Bin { l, r, commit }, Node::Bin { op, lhs, rhs, .. }) => {
            let fl = finished(l, lhs);
            let fr = finished(r, rhs);
            match op {
                TemporalOp::Choice => match commit {
                    Some(Commit::Left) => fl && cleared(r),
                    Some(Commit::Right) => fr && cleared(l),
                    None => false,
                },
                op if op.is_short_circuit() => (fl || cleared(l)) && (fr || cleared(r)),
                _ => fl && fr,
            }
        }
        _ => false,
    }
}

fn has_any(ids: &BTreeSet<InstanceId>, lo: InstanceId, hi: InstanceId) -> bool {
    ids.range(lo..hi).next().is_some()
}

fn step_x(
    s: AState,
    node: &Node,
    x: &BTreeMap<InstanceId, ActionStatus>,
) -> Result<AState, Dead> {
    match (s, node) {
        (s, Node::Leaf { id, .. }) => match (x.get(id), s) {
            (None, s) => Ok(s),
            (Some(ActionStatus::Succeeded), AState::Run) => Ok(AState::Done),
            (Some(_), AState::Killed(mut owed)) => {
                if owed.remove(id) {
                    Ok(AState::Killed(owed))
                } else {
                    Err(Dead)
                }
            }
            _ => Err(Dead),
        },
        (AState::Killed(mut owed), Node::Bin { first, end, .. }) => {
            for id in x.range(*first..*end).map(|(id, _)| id) {
                if !owed.remove(id) {
                    return Err(Dead);
                }
            }
            Ok(AState::Killed(owed))
        }
        (AState::Bin { l, r, commit }, Node::Bin { op, lhs, rhs, .. }) => {
            let mut l = step_x(*l, lhs, x)?;
            let mut r = step_x(*r, rhs, x)?;
            let mut commit = commit;
            let (fl, fr) = (finished(&l, lhs), finished(&r, rhs));
            if *op == TemporalOp::Choice {
                if commit.is_none() && fl {
                    commit = Some(Commit::Left);
                    r = kill(r, rhs);
                } else if commit.is_none() && fr {
                    commit = Some(Commit::Right);
                    l = kill(l, lhs);
                }
            } else if op.is_short_circuit() && !matches!(l, AState::Killed(_)) && !matches!(r, AState::Killed(_)) {
                if op.cuts_lhs() && fr && !fl {
                    l = kill(l, lhs);
                } else if op.cuts_rhs() && fl && !fr {
                    r = kill(r, rhs);
                }
            }
            Ok(AState::Bin {
                l: Box::new(l),
                r: Box::new(r),
                commit,
            })
        }
        _ => Err(Dead),
    }
}

fn robot_in(node: &Node, y: &BTreeSet<InstanceId>) -> bool {
    match node {
        Node::Leaf { id, robot } => *robot && y.contains(id),
        Node::Bin { lhs, rhs, .. } => robot_in(lhs, y) || robot_in(rhs, y),
    }
}

fn step_y(s: AState, node: &Node, y: &BTreeSet<InstanceId>) -> Result<AState, Dead> {
    match node {
        Node::Leaf { id, .. } => {
            if !y.contains(id) {
                Ok(s)
            } else if s == AState::Idle {
                Ok(AState::Run)
            } else {
                Err(Dead)
            }
        }
        Node::Bin {
            op,
            lhs,
            rhs,
            first,
            mid,
            end,
        } => {
            if !has_any(y, *first, *end) {
                return Ok(s);
            }
            let AState::Bin { l, r, commit } = s else {
                return Err(Dead);
            };
            let yl = has_any(y, *first, *mid);
            let yr = has_any(y, *mid, *end);
            let (sl, sr) = (started(&l), started(&r));
            let mut commit = commit;
            match op {
                TemporalOp::Seq if yr && !finished(&l, lhs) => return Err(Dead),
                TemporalOp::ParSeq if yr && !sr && !sl && !yl => return Err(Dead),
                op if op.is_par() && !sl && !sr && yl != yr => return Err(Dead),
                TemporalOp::Choice if commit.is_none() => {
                    let (rl, rr) = (robot_in(lhs, y), robot_in(rhs, y));
                    if (rl && yr) || (rr && yl) {
                        return Err(Dead);
                    }
                    if rl {
                        commit = Some(Commit::Left);
                    } else if rr {
                        commit = Some(Commit::Right);
                    }
                }
                _ => {}
            }
            let l = step_y(*l, lhs, y)?;
            let r = step_y(*r, rhs, y)?;
            let (l, r) = match (*op, commit) {
                (TemporalOp::Choice, Some(Commit::Left)) if !matches!(r, AState::Killed(_)) => {
                    (l, kill(r, rhs))
                }
                (TemporalOp::Choice, Some(Commit::Right)) if !matches!(l, AState::Killed(_)) => {
                    (kill(l, lhs), r)
                }
                _ => (l, r),
            };
            Ok(AState::Bin {
                l: Box::new(l),
                r: Box::new(r),
                commit,
            })
        }
    }
}

/// Stepping interface over the compositional states.
#[derive(Debug, Clone)]
pub struct Semantics {
    root: Node,
    instances: u32,
}

impl Semantics {
    pub fn new(plan: &Plan) -> Self {
        Semantics {
            root: Node::from_plan(plan, 0),
            instances: plan.len() as u32,
        }
    }

    pub fn instances(&self) -> u32 {
        self.instances
    }

    pub fn initial(&self) -> AState {
        init(&self.root)
    }

    /// The successor state, or `None` for the dead state.
    pub fn step(&self, s: &AState, letter: &Letter) -> Option<AState> {
        if letter.x.keys().any(|id| letter.y.contains(id)) {
            return None;
        }
        let s = step_x(s.clone(), &self.root, &letter.x).ok()?;
        step_y(s, &self.root, &letter.y).ok()
    }

    pub fn is_accepting(&self, s: &AState) -> bool {
        finished(s, &self.root)
    }

    pub fn accepts(&self, word: &[Letter]) -> bool {
        let mut s = self.initial();
        for letter in word {
            match self.step(&s, letter) {
                Some(next) => s = next,
                None => return false,
            }
        }
        self.is_accepting(&s)
    }
}

/// Every letter over `n` instances: each instance is absent, initiated, or
/// terminated with one of the three statuses.
pub fn alphabet(n: u32) -> Vec<Letter> {
    let mut out = vec![Letter::empty()];
    for id in 0..n {
        let mut next = Vec::with_capacity(out.len() * 5);
        for l in &out {
            next.push(l.clone());
            let mut y = l.clone();
            y.y.insert(id);
            next.push(y);
            for st in ActionStatus::ALL {
                let mut x = l.clone();
                x.x.insert(id, st);
                next.push(x);
            }
        }
        out = next;
    }
    out
}

/// Explicit deterministic automaton. Missing transitions go to the dead state.
#[derive(Debug, Clone)]
pub struct EventAutomaton {
    pub letters: Vec<Letter>,
    pub states: Vec<AState>,
    pub initial: usize,
    pub accepting: BTreeSet<usize>,
    /// `(state, letter index) -> state`.
    pub transitions: HashMap<(usize, usize), usize>,
}

impl EventAutomaton {
    pub fn letter_index(&self, letter: &Letter) -> Option<usize> {
        self.letters.iter().position(|l| l == letter)
    }

    pub fn run(&self, word: &[Letter]) -> Option<usize> {
        let mut s = self.initial;
        for letter in word {
            let li = self.letter_index(letter)?;
            s = *self.transitions.get(&(s, li))?;
        }
        Some(s)
    }

    pub fn accepts(&self, word: &[Letter]) -> bool {
        self.run(word).is_some_and(|s| self.accepting.contains(&s))
    }

    /// Fewest letters from each state to an accepting state; `None` where
    /// acceptance is unreachable.
    pub fn distance_to_accept(&self) -> Vec<Option<usize>> {
        let mut reverse: HashMap<usize, Vec<usize>> = HashMap::new();
        for (&(from, _), &to) in &self.transitions {
            reverse.entry(to).or_default().push(from);
        }
        let mut dist = vec![None; self.states.len()];
        let mut queue = VecDeque::new();
        for &a in &self.accepting {
            dist[a] = Some(0);
            queue.push_back(a);
        }
        while let Some(s) = queue.pop_front() {
            let d = dist[s].unwrap_or(0);
            for &p in reverse.get(&s).into_iter().flatten() {
                if dist[p].is_none() {
                    dist[p] = Some(d + 1);
                    queue.push_back(p);
                }
            }
        }
        dist
    }

    /// All accepted words of length `1..=max_len` that use no empty letter.
    pub fn accepted_words(&self, max_len: usize) -> BTreeSet<Vec<Letter>> {
        let dist = self.distance_to_accept();
        let mut out = BTreeSet::new();
        let mut word = Vec::new();
        self.collect(self.initial, max_len, &dist, &mut word, &mut out);
        out
    }

    fn collect(
        &self,
        s: usize,
        budget: usize,
        dist: &[Option<usize>],
        word: &mut Vec<Letter>,
        out: &mut BTreeSet<Vec<Letter>>,
    ) {
        if self.accepting.contains(&s) && !word.is_empty() {
            out.insert(word.clone());
        }
        if budget == 0 {
            return;
        }
        for (li, letter) in self.letters.iter().enumerate() {
            if letter.is_empty() {
                continue;
            }
            let Some(&t) = self.transitions.get(&(s, li)) else {
                continue;
            };
            if dist[t].is_some_and(|d| d < budget) {
                word.push(letter.clone());
                self.collect(t, budget - 1, dist, word, out);
                word.pop();
            }
        }
    }
}

/// Materializes the reachable part of the automaton for `plan`.
pub fn build_automaton(plan: &Plan) -> EventAutomaton {
    let sem = Semantics::new(plan);
    let letters = alphabet(sem.instances());
    let mut index: HashMap<AState, usize> = HashMap::new();
    let mut states = vec![sem.initial()];
    index.insert(sem.initial(), 0);
    let mut transitions = HashMap::new();
    let mut queue = VecDeque::from([0usize]);
    while let Some(si) = queue.pop_front() {
        let s = states[si].clone();
        for (li, letter) in letters.iter().enumerate() {
            let Some(t) = sem.step(&s, letter) else {
                continue;
            };
            let ti = *index.entry(t.clone()).or_insert_with(|| {
                states.push(t);
                queue.push_back(states.len() - 1);
                states.len() - 1
            });
            transitions.insert((si, li), ti);
        }
    }
    let accepting = (0..states.len())
        .filter(|&i| sem.is_accepting(&states[i]))
        .collect();
    EventAutomaton {
        letters,
        states,
        initial: 0,
        accepting,
        transitions,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use resh_lang::parse_term;

    fn plan(src: &str) -> Plan {
        Plan::compile(&parse_term(src).unwrap())
    }

    #[test]
    fn timing_diagram_word_is_accepted() {
        let a = build_automaton(&plan("A => (B + C)"));
        let word = vec![
            Letter::start([0]),
            Letter::succeed([0]),
            Letter::start([1, 2]),
            Letter::succeed([1]),
            Letter::succeed([2]),
        ];
        assert!(a.accepts(&word));
        let early = vec![
            Letter::start([0]),
            Letter::start([1, 2]),
            Letter::succeed([0]),
            Letter::succeed([1, 2]),
        ];
        assert!(!a.accepts(&early));
    }

    #[test]
    fn single_action_with_stutter() {
        let a = build_automaton(&plan("A"));
        for gaps in 0..4 {
            let mut w = vec![Letter::start([0])];
            w.extend(std::iter::repeat_n(Letter::empty(), gaps));
            w.push(Letter::succeed([0]));
            assert!(a.accepts(&w));
        }
        assert!(!a.accepts(&[Letter::start([0])]));
        let words = a.accepted_words(6);
        assert_eq!(
            words,
            BTreeSet::from([vec![Letter::start([0]), Letter::succeed([0])]])
        );
    }

    #[test]
    fn alphabet_size() {
        assert_eq!(alphabet(0).len(), 1);
        assert_eq!(alphabet(3).len(), 125);
    }

    #[test]
    fn empty_letter_loops_everywhere() {
        let a = build_automaton(&plan("(A !& B) | C"));
        let e = a.letter_index(&Letter::empty()).unwrap();
        for s in 0..a.states.len() {
            assert_eq!(a.transitions.get(&(s, e)), Some(&s));
        }
    }
}
