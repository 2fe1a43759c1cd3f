//! Chooses which eligible start groups launch and which robot runs each
//! action.
//!
//! The objective, maximized, is a large reward per launched group minus
//! estimated travel seconds minus a penalty for nearly empty batteries,
//! all in integer milliseconds.

pub mod model;
pub mod problem;
pub mod simplex;
pub mod solve;

pub use model::{Constraint, MixedIntegerModel, ModelVar, VarKind};
pub use problem::{
    feasible_pairs, objective, pair_cost, robot_can_do, validate, ActionRequest,
    OptimizationProblem, RobotChoice, RobotDescriptor, Solution, SolverKind, StartGroup,
    StraightLine, Target, TravelEstimator, VarSlot, GROUP_REWARD,
};
pub use simplex::{solve_lp, Lp, LpResult, LpRow, Sense};
pub use solve::{greedy_solve, solve, solve_with, SolverConfig};
