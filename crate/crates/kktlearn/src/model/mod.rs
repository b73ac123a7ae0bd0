//! Trajectories, tasks, costs and constraint parameterizations.

mod cost;
mod demo;
mod param;
mod poly;
mod task;
mod trajectory;

pub use cost::{CostGradient, CostGroup, CostModel, Gamma};
pub use demo::Demonstration;
pub use param::{ConstraintParameterization, Family, Halfspace, THETA_BOUND_TOL};
pub use poly::{Monomial, Polynomial};
pub use task::{Dynamics, KnownConstraint, KnownEval, KnownRow, TaskSpec};
pub use trajectory::{Layout, Trajectory};
