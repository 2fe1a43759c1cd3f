//! Executable semantics of the Resh temporal operators.
//!
//! Two independent routes are provided: [`ExecState`], an operational status
//! tree advanced letter by letter, and [`build_automaton`], a compositional
//! automaton over `<X,Y>` letters. [`enumerate_words`] explores the
//! operational route exhaustively and serves as the oracle relating them.

pub mod automaton;
pub mod enumerate;
pub mod exec;
pub mod letter;
pub mod plan;

pub use automaton::{alphabet, build_automaton, AState, Commit, EventAutomaton, Semantics};
pub use enumerate::{
    enumerate_words, enumerate_words_with_budget, project_actions, BudgetExceeded,
};
pub use exec::{ChoiceTag, ExecState, IllegalLetter, LetterEffects, NodeStatus, Side, StartGroup};
pub use letter::{render_word, ActionStatus, Letter, Word};
pub use plan::{ExclusiveScope, InstanceId, LeafInfo, LeafKind, Plan, PlanNode, RobotBinding, Shape};
