//! Multi-demonstration recovery of constraint and cost parameters, and growth of
//! box-union parameterizations until the demonstrations can be explained.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kkt::{
    kkt_residual, refit_multipliers, EncodingMode, KktMultipliers, KktProgram, ResidualReport,
    TOL_ACTIVE,
};
use crate::milp_ir::BigMConfig;
use crate::model::{ConstraintParameterization, CostModel, Demonstration, Family};
use crate::solver::{audit_bigm, solve, MilpBackend, SolveOptions, SolveStatus};

/// Settings shared by learning, growth and extraction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LearnConfig {
    pub mode: EncodingMode,
    pub big_m: BigMConfig,
    pub solve: SolveOptions,
    /// Relative slack on the best penalty when querying in suboptimal mode.
    pub rho: f64,
}

impl Default for LearnConfig {
    fn default() -> Self {
        Self {
            mode: EncodingMode::Exact,
            big_m: BigMConfig::default(),
            solve: SolveOptions::default(),
            rho: 0.01,
        }
    }
}

pub const WITNESS_NOTE: &str =
    "theta is one feasible witness and depends on the solver; use query, sweep or volume for guarantees";

/// Result document of [`learn`].
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LearnResult {
    pub status: SolveStatus,
    /// `None` for families whose relaxed encoding does not recover theta.
    pub theta: Option<Vec<f64>>,
    pub gamma: Option<Vec<f64>>,
    /// Solver multipliers, or a refit on the truly active set when that certifies better.
    pub multipliers: Vec<KktMultipliers>,
    /// Residuals of each demonstration at the witness (not computed for relaxed families).
    pub residuals: Vec<Option<ResidualReport>>,
    /// Suboptimal mode: total and per-demonstration penalty.
    pub objective: Option<f64>,
    pub penalties: Vec<f64>,
    pub warnings: Vec<String>,
}

/// Builds the KKT program of `demos`; suboptimal mode installs the penalty objective.
pub fn build_program(
    demos: &[Demonstration],
    cost: &CostModel,
    param: &ConstraintParameterization,
    config: &LearnConfig,
) -> Result<KktProgram> {
    if let Some(n_x) = demos.first().map(|d| d.task.n_x) {
        param.validate(n_x)?;
        cost.validate(n_x)?;
    }
    let mut prog = KktProgram::new(param, cost, &config.big_m, config.mode)?;
    for d in demos {
        prog.add_demo(&d.trajectory, &d.task)?;
    }
    prog.finish()?;
    Ok(prog)
}

/// Recovers theta (and gamma when unknown) from the demonstrations.
///
/// Exact mode returns any point of the feasible set; on infeasibility the demonstrations are
/// re-solved in suboptimal mode and their penalties reported in the error.
pub fn learn(
    demos: &[Demonstration],
    cost: &CostModel,
    param: &ConstraintParameterization,
    backend: &dyn MilpBackend,
    config: &LearnConfig,
) -> Result<LearnResult> {
    let prog = build_program(demos, cost, param, config)?;
    let res = solve(&prog.model, backend, &config.solve);
    match res.status {
        SolveStatus::Optimal | SolveStatus::Feasible => {}
        SolveStatus::Infeasible => {
            let mut msg =
                String::from("no parameter in the box is consistent with the demonstrations");
            if config.mode == EncodingMode::Exact && !demos.is_empty() {
                let sub = LearnConfig {
                    mode: EncodingMode::Suboptimal,
                    ..config.clone()
                };
                if let Ok(r) = learn(demos, cost, param, backend, &sub) {
                    msg.push_str("; suboptimal penalties per demonstration:");
                    for (j, p) in r.penalties.iter().enumerate() {
                        msg.push_str(&format!(" d{j}={p:.6}"));
                    }
                }
                if param.is_union() {
                    msg.push_str("; consider growing the parameterization");
                }
            }
            return Err(Error::Infeasible(msg));
        }
        SolveStatus::Unbounded => {
            return Err(Error::Solver(format!(
                "unexpected unbounded program: {}",
                res.diagnostics
            )))
        }
        SolveStatus::TimeLimit => {
            return Err(Error::Solver(format!(
                "time limit reached: {}",
                res.diagnostics
            )))
        }
        SolveStatus::Error => return Err(Error::Solver(res.diagnostics)),
    }
    let values = res.values.as_deref().expect("solution present");
    let theta = prog.theta_values(values);
    let gamma = prog.gamma_values(values);
    let relaxed = matches!(param.family, Family::AffineInTheta { .. });
    let mut warnings = prog.warnings();
    warnings.extend(audit_bigm(&res, &prog.model, &config.big_m));
    warnings.push(WITNESS_NOTE.to_string());
    let mut multipliers = Vec::with_capacity(demos.len());
    let mut residuals = Vec::with_capacity(demos.len());
    for (d, b) in demos.iter().zip(&prog.blocks) {
        let mut m = b.multipliers(values, &d.task, param);
        let r = if relaxed {
            None
        } else {
            let raw = kkt_residual(
                &d.trajectory,
                &d.task,
                cost,
                gamma.as_deref(),
                param,
                &theta,
                &m,
            )?;
            // the encoding only sign-checks complementarity, so refit on the truly active set
            let g = gamma.as_deref().or(cost.known_gamma()).unwrap_or_default();
            let refit =
                refit_multipliers(&d.trajectory, &d.task, cost, g, param, &theta, TOL_ACTIVE)
                    .ok()
                    .and_then(|rm| {
                        let rr = kkt_residual(
                            &d.trajectory,
                            &d.task,
                            cost,
                            gamma.as_deref(),
                            param,
                            &theta,
                            &rm,
                        )
                        .ok()?;
                        Some((rm, rr))
                    });
            match refit {
                Some((rm, rr)) if rr.max() < raw.max() => {
                    m = rm;
                    Some(rr)
                }
                _ => Some(raw),
            }
        };
        multipliers.push(m);
        residuals.push(r);
    }
    let penalties: Vec<f64> = prog.penalties.iter().map(|p| p.eval(values)).collect();
    Ok(LearnResult {
        status: res.status,
        theta: (!relaxed).then_some(theta),
        gamma,
        multipliers,
        residuals,
        objective: (config.mode == EncodingMode::Suboptimal).then(|| res.objective.unwrap_or(0.0)),
        penalties,
        warnings,
    })
}

/// Result of [`grow`]: the smallest feasible number of boxes and its solution.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GrowResult {
    pub n_lower: usize,
    pub result: LearnResult,
    /// Attribution messages of the infeasible sizes, in order.
    pub infeasible: Vec<String>,
}

/// Tries `make(1)`, `make(2)`, ... up to `n_max` in exact mode and returns the first
/// parameterization that explains every demonstration.
pub fn grow(
    demos: &[Demonstration],
    cost: &CostModel,
    make: impl Fn(usize) -> ConstraintParameterization,
    n_max: usize,
    backend: &dyn MilpBackend,
    config: &LearnConfig,
) -> Result<GrowResult> {
    if n_max == 0 {
        return Err(Error::Spec("n_max must be at least 1".into()));
    }
    let exact = LearnConfig {
        mode: EncodingMode::Exact,
        ..config.clone()
    };
    let mut infeasible = Vec::new();
    for n in 1..=n_max {
        let param = make(n);
        if !param.is_union() {
            return Err(Error::Unsupported("growth needs a union family".into()));
        }
        match learn(demos, cost, &param, backend, &exact) {
            Ok(result) => {
                return Ok(GrowResult {
                    n_lower: n,
                    result,
                    infeasible,
                })
            }
            Err(Error::Infeasible(m)) => infeasible.push(format!("N={n}: {m}")),
            Err(e) => return Err(e),
        }
    }
    Err(Error::Infeasible(format!(
        "no parameterization with at most {n_max} sets explains the demonstrations"
    )))
}
