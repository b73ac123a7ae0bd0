//! KKT encodings of demonstrations and a numeric residual check.

mod encode;
mod program;
mod residual;

pub use encode::{
    check_demo, encode_affine_relaxed, encode_union, suboptimal_objective, ConstituentVars,
    EncodingMode, KktBlock, ParamHandles, StateVars, TOL_ACTIVE,
};
pub use program::KktProgram;
pub use residual::{kkt_residual, refit_multipliers, KktMultipliers, ResidualReport};
