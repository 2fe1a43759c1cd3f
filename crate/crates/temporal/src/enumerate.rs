//! Brute-force word enumeration over the operational semantics. Used as a
//! test oracle for the automaton.

use std::collections::{BTreeSet, HashMap};

use thiserror::Error;

use crate::exec::{ExecState, NodeStatus};
use crate::letter::{ActionStatus, Letter, Word};
use crate::plan::{InstanceId, Plan};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("word enumeration exceeded its budget of {0} letter applications")]
pub struct BudgetExceeded(pub usize);

pub const DEFAULT_BUDGET: usize = 5_000_000;

/// All words of length `1..=max_len` without empty letters that drive the
/// plan from its initial state to successful completion. Stuttering
/// (inserting empty letters) preserves acceptance, so this set determines
/// the full language up to that length.
pub fn enumerate_words(plan: &Plan, max_len: usize) -> Result<BTreeSet<Word>, BudgetExceeded> {
    enumerate_words_with_budget(plan, max_len, DEFAULT_BUDGET)
}

pub fn enumerate_words_with_budget(
    plan: &Plan,
    max_len: usize,
    budget: usize,
) -> Result<BTreeSet<Word>, BudgetExceeded> {
    let mut search = Search {
        plan,
        budget,
        spent: 0,
        successors: HashMap::new(),
        out: BTreeSet::new(),
    };
    let mut word = Vec::new();
    search.explore(&ExecState::new(plan), max_len, &mut word)?;
    Ok(search.out)
}

struct Search<'a> {
    plan: &'a Plan,
    budget: usize,
    spent: usize,
    successors: HashMap<ExecState, Vec<(Letter, ExecState)>>,
    out: BTreeSet<Word>,
}

impl Search<'_> {
    fn explore(&mut self, s: &ExecState, left: usize, word: &mut Word) -> Result<(), BudgetExceeded> {
        if s.is_finished() && !word.is_empty() {
            self.out.insert(word.clone());
        }
        if left == 0 {
            return Ok(());
        }
        let next = match self.successors.get(s) {
            Some(v) => v.clone(),
            None => {
                let v = self.expand(s)?;
                self.successors.insert(s.clone(), v.clone());
                v
            }
        };
        for (letter, t) in next {
            word.push(letter);
            self.explore(&t, left - 1, word)?;
            word.pop();
        }
        Ok(())
    }

    /// Tries every non-empty letter over the instances: each running one
    /// may stay, or end with any status; each unstarted one may start.
    fn expand(&mut self, s: &ExecState) -> Result<Vec<(Letter, ExecState)>, BudgetExceeded> {
        let mut options: Vec<(InstanceId, bool)> = Vec::new();
        for id in 0..self.plan.len() as InstanceId {
            match s.leaf_status(self.plan, id) {
                NodeStatus::Running => options.push((id, true)),
                NodeStatus::Unstarted => options.push((id, false)),
                _ => {}
            }
        }
        let mut letters = vec![Letter::empty()];
        for (id, running) in options {
            let mut next = Vec::new();
            for l in &letters {
                next.push(l.clone());
                if running {
                    for st in ActionStatus::ALL {
                        let mut x = l.clone();
                        x.x.insert(id, st);
                        next.push(x);
                    }
                } else {
                    let mut y = l.clone();
                    y.y.insert(id);
                    next.push(y);
                }
            }
            letters = next;
        }
        let mut out = Vec::new();
        for letter in letters.into_iter().filter(|l| !l.is_empty()) {
            self.spent += 1;
            if self.spent > self.budget {
                return Err(BudgetExceeded(self.budget));
            }
            let mut t = s.clone();
            if t.apply_letter(self.plan, &letter).is_ok() && t.status() != NodeStatus::Failed {
                out.push((letter, t));
            }
        }
        Ok(out)
    }
}

/// Keeps only robot-action events and drops letters left empty.
pub fn project_actions(plan: &Plan, word: &[Letter]) -> Word {
    word.iter()
        .map(|l| Letter {
            x: l
                .x
                .iter()
                .filter(|(id, _)| plan.leaf(**id).is_robot_action())
                .map(|(k, v)| (*k, *v))
                .collect(),
            y: l
                .y
                .iter()
                .copied()
                .filter(|id| plan.leaf(*id).is_robot_action())
                .collect(),
        })
        .filter(|l| !l.is_empty())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use resh_lang::parse_term;

    fn plan(src: &str) -> Plan {
        Plan::compile(&parse_term(src).unwrap())
    }

    #[test]
    fn choice_runs_exactly_one() {
        let p = plan("A | B");
        let words = enumerate_words(&p, 3).unwrap();
        assert_eq!(
            words,
            BTreeSet::from([
                vec![Letter::start([0]), Letter::succeed([0])],
                vec![Letter::start([1]), Letter::succeed([1])],
            ])
        );
    }

    #[test]
    fn actionless_term_projects_to_empty_word() {
        let p = plan("pause 1s => waitprop r.ok");
        let words = enumerate_words(&p, 6).unwrap();
        assert!(!words.is_empty());
        let projected: BTreeSet<Word> = words.iter().map(|w| project_actions(&p, w)).collect();
        assert_eq!(projected, BTreeSet::from([Vec::new()]));
    }

    #[test]
    fn and_versus_par_differs_only_in_shared_start() {
        let and = enumerate_words(&plan("A & B"), 6).unwrap();
        let par = enumerate_words(&plan("A + B"), 6).unwrap();
        assert!(par.is_subset(&and));
        for w in and.difference(&par) {
            let start_a = w.iter().position(|l| l.y.contains(&0)).unwrap();
            let start_b = w.iter().position(|l| l.y.contains(&1)).unwrap();
            assert_ne!(start_a, start_b);
        }
        for w in &par {
            let start_a = w.iter().position(|l| l.y.contains(&0)).unwrap();
            let start_b = w.iter().position(|l| l.y.contains(&1)).unwrap();
            assert_eq!(start_a, start_b);
        }
    }

    #[test]
    fn budget_is_enforced() {
        let p = plan("A & B & C");
        assert_eq!(
            enumerate_words_with_budget(&p, 6, 10),
            Err(BudgetExceeded(10))
        );
    }
}
