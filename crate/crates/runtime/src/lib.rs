//! The Resh runtime: submissions, the interpreter loop over a simulated
//! pool, inject scripts, and the control server behind `resh serve`.

pub mod inject;
pub mod runtime;
pub mod serve;

pub use inject::{parse_inject, parse_value, InjectAction, InjectError, InjectLine, InjectScript, RobotRef};
pub use runtime::{
    default_pool, MapEstimator, RunSummary, Runtime, RuntimeConfig, RuntimeError, RUNTIME_SENDER,
};
pub use serve::{control, Server, ServerHandle};
