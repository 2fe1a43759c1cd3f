use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::plan::InstanceId;

/// How an action instance ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ActionStatus {
    Succeeded,
    Failed,
    Terminated,
}

impl ActionStatus {
    pub const ALL: [ActionStatus; 3] = [
        ActionStatus::Succeeded,
        ActionStatus::Failed,
        ActionStatus::Terminated,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ActionStatus::Succeeded => "succeeded",
            ActionStatus::Failed => "failed",
            ActionStatus::Terminated => "terminated",
        }
    }

    fn mark(self) -> &'static str {
        match self {
            ActionStatus::Succeeded => "ok",
            ActionStatus::Failed => "fail",
            ActionStatus::Terminated => "term",
        }
    }
}

impl fmt::Display for ActionStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One step of a timing-diagram word: terminations `x`, then initiations `y`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Letter {
    pub x: BTreeMap<InstanceId, ActionStatus>,
    pub y: BTreeSet<InstanceId>,
}

pub type Word = Vec<Letter>;

impl Letter {
    pub fn empty() -> Letter {
        Letter::default()
    }

    pub fn start(ids: impl IntoIterator<Item = InstanceId>) -> Letter {
        Letter {
            x: BTreeMap::new(),
            y: ids.into_iter().collect(),
        }
    }

    pub fn finish(ids: impl IntoIterator<Item = (InstanceId, ActionStatus)>) -> Letter {
        Letter {
            x: ids.into_iter().collect(),
            y: BTreeSet::new(),
        }
    }

    pub fn succeed(ids: impl IntoIterator<Item = InstanceId>) -> Letter {
        Letter::finish(ids.into_iter().map(|i| (i, ActionStatus::Succeeded)))
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty() && self.y.is_empty()
    }

    /// Renders as `<{a:ok},{b,c}>` using `label` for instance names.
    pub fn render(&self, label: impl Fn(InstanceId) -> String) -> String {
        let x: Vec<String> = self
            .x
            .iter()
            .map(|(id, st)| format!("{}:{}", label(*id), st.mark()))
            .collect();
        let y: Vec<String> = self.y.iter().map(|id| label(*id)).collect();
        format!("<{{{}}},{{{}}}>", x.join(","), y.join(","))
    }
}

impl fmt::Display for Letter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render(|id| id.to_string()))
    }
}

/// Renders a word letter by letter, separated by spaces.
pub fn render_word(word: &[Letter], label: impl Fn(InstanceId) -> String) -> String {
    word.iter()
        .map(|l| l.render(&label))
        .collect::<Vec<_>>()
        .join(" ")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn render_shape() {
        let names = ["A", "B", "C"];
        let word = vec![
            Letter::start([0]),
            Letter::succeed([0]),
            Letter::start([1, 2]),
        ];
        assert_eq!(
            render_word(&word, |i| names[i as usize].to_string()),
            "<{},{A}> <{A:ok},{}> <{},{B,C}>"
        );
    }
}
