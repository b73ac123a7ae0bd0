//! Certified synthetic demonstrations.

mod perturb;
mod qp;
mod sqp;

pub use perturb::{perturb, recover_controls};
pub use qp::{solve_qp, QpProblem, QpSolution};
pub use sqp::{synthesize, Hint, RouteHint, SynthOptions, Synthesized};
