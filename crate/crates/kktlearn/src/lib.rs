//! Learning hard constraints from locally-optimal demonstrations.
//!
//! Each demonstration's KKT conditions are encoded as mixed-integer linear
//! constraints over the unknown constraint parameters `theta` (and optionally
//! cost weights `gamma`). The feasible set of that program is then queried to
//! extract states that are safe or unsafe for every consistent parameter.

pub mod error;
pub mod extraction;
pub mod kkt;
pub mod learner;
pub mod milp_ir;
pub mod model;
pub mod planner;
pub mod problem;
pub mod scenarios;
pub mod solver;
pub mod synth;

pub use error::{Error, Result};
