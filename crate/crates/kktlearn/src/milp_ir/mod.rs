//! Solver-agnostic MILP construction and LP text serialization.

mod encode;
mod lp_format;
mod model;

pub use encode::{
    add_abs_penalty, add_disjunction, add_disjunction_with, linearize_product, BigMConfig,
};
pub use lp_format::{fmt_num, to_lp_string};
pub use model::{valid_name, LinExpr, MilpModel, Row, Sense, VarId, VarKind, VarRole, Variable};
