//! Path planning for a pool of mobile robots on an occupancy grid.

pub mod astar;
pub mod dispatch;
pub mod map;
pub mod plan;
pub mod track;
pub mod trajectory;

pub use astar::{estimate, grid_path, path_length, shortest_path, simplify};
pub use dispatch::{DispatchOut, Dispatcher};
pub use map::{Cell, MapError, Point, WorldMap};
pub use plan::{
    plan, remove_waypoint, MultipathSolution, PathError, PathProblem, PathRequest, PlannerConfig,
    RobotPlan, SAMPLE_DT, WAIT_STEP,
};
pub use track::{Conformance, ConformanceTracker};
pub use trajectory::{min_separation, Trajectory};
