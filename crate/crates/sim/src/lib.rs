//! Simulated robots for tests, the CLI and the playground.
//!
//! A [`World`] holds mock robots configured from a pool file. The runtime
//! sends it `START_ACTION` / `CANCEL_ACTION` bodies and steps it; the world
//! answers with the messages real agents would send.

pub mod clock;
pub mod config;
pub mod world;

pub use clock::{ClockMode, SimClock};
pub use config::{
    load_pool, parse_pool, ActionScript, MockRobotConfig, PoolError, DEFAULT_DURATION_MS,
    POOL_FILE_VERSION,
};
pub use world::{MockRobot, Mutation, SimError, World, INJECT_SENDER, POSE_PERIOD_MS, TWIST_RATE};
