//! Temporal engine: executes checked Resh programs against a dynamic
//! robot pool.
//!
//! The engine is a synchronous state machine. Feed it [`RuntimeEvent`]s,
//! call [`TemporalEngine::formulate`] when it is dirty, solve the returned
//! problem and hand the solution to [`TemporalEngine::apply_solution`].
//! Every call returns the [`Command`]s to carry out.

pub mod engine;
pub mod event;
pub mod task;

pub use engine::TemporalEngine;
pub use event::{Command, EngineError, GotoRequest, RuntimeEvent, TraceKind, TraceRecord};
pub use task::TaskInfo;
