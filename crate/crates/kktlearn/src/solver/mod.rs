//! Pluggable MILP backends behind a subprocess boundary.

mod cbc;

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::milp_ir::{BigMConfig, MilpModel, VarKind, VarRole};

pub use cbc::{parse_binary_columns, parse_solution, CbcBackend, ParsedSolution, CBC_ENV};

/// Feasibility tolerance for the independent post-solve check.
pub const RECHECK_TOL: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolveStatus {
    Optimal,
    Feasible,
    Infeasible,
    Unbounded,
    TimeLimit,
    Error,
}

impl SolveStatus {
    pub fn has_solution(self) -> bool {
        matches!(self, SolveStatus::Optimal | SolveStatus::Feasible)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveOptions {
    /// Wall-clock limit in seconds.
    pub time_limit: Option<f64>,
    /// Relative optimality gap.
    pub mip_gap: Option<f64>,
    pub seed: u64,
    /// Let the backend run its MIP preprocessing.
    #[serde(default = "yes")]
    pub preprocess: bool,
}

fn yes() -> bool {
    true
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            time_limit: None,
            mip_gap: None,
            seed: 1,
            preprocess: true,
        }
    }
}

#[derive(Clone, Debug)]
pub struct SolveResult {
    pub status: SolveStatus,
    /// Values indexed by variable id; present only for Optimal/Feasible.
    pub values: Option<Vec<f64>>,
    pub objective: Option<f64>,
    pub time: Duration,
    pub diagnostics: String,
}

impl SolveResult {
    pub fn error(diagnostics: impl Into<String>, time: Duration) -> Self {
        Self {
            status: SolveStatus::Error,
            values: None,
            objective: None,
            time,
            diagnostics: diagnostics.into(),
        }
    }

    pub fn infeasible(diagnostics: impl Into<String>) -> Self {
        Self {
            status: SolveStatus::Infeasible,
            values: None,
            objective: None,
            time: Duration::ZERO,
            diagnostics: diagnostics.into(),
        }
    }

    /// Variable-name to value map.
    pub fn assignment(&self, model: &MilpModel) -> Option<BTreeMap<String, f64>> {
        self.values.as_ref().map(|vals| {
            model
                .vars()
                .iter()
                .zip(vals)
                .map(|(v, x)| (v.name.clone(), *x))
                .collect()
        })
    }
}

/// An external MILP solver.
pub trait MilpBackend: Send + Sync {
    fn name(&self) -> &str;
    /// Raw backend call; callers should go through [`solve`] for the independent re-check.
    fn solve_raw(&self, model: &MilpModel, options: &SolveOptions) -> SolveResult;
}

/// Registered adapter names.
pub const BACKENDS: &[&str] = &["cbc"];

pub fn backend_by_name(name: &str) -> Result<Box<dyn MilpBackend>> {
    match name {
        "cbc" => Ok(Box::new(CbcBackend::locate()?)),
        other => Err(Error::Solver(format!(
            "unknown solver backend {other:?}; available: {}",
            BACKENDS.join(", ")
        ))),
    }
}

/// Solves `model` and re-checks any returned assignment against every row and bound.
/// An assignment that fails the re-check triggers one retry without preprocessing.
pub fn solve(model: &MilpModel, backend: &dyn MilpBackend, options: &SolveOptions) -> SolveResult {
    let first = solve_once(model, backend, options);
    if first.status == SolveStatus::Error
        && first.diagnostics.contains(RECHECK_MARK)
        && options.preprocess
    {
        let retry = SolveOptions {
            preprocess: false,
            ..options.clone()
        };
        let mut second = solve_once(model, backend, &retry);
        second.diagnostics = format!(
            "retried without preprocessing after: {}\n{}",
            first.diagnostics, second.diagnostics
        );
        return second;
    }
    first
}

const RECHECK_MARK: &str = "fails the re-check";

fn solve_once(model: &MilpModel, backend: &dyn MilpBackend, options: &SolveOptions) -> SolveResult {
    let start = Instant::now();
    if let Some(row) = model.constant_conflict() {
        return SolveResult::infeasible(format!("row {row} has no variables and is violated"));
    }
    if model.num_vars() == 0 {
        let status = if model.objective().is_some() {
            SolveStatus::Optimal
        } else {
            SolveStatus::Feasible
        };
        return SolveResult {
            status,
            values: Some(Vec::new()),
            objective: model.objective().map(|o| o.constant),
            time: start.elapsed(),
            diagnostics: String::new(),
        };
    }
    let mut res = backend.solve_raw(model, options);
    if let Some(vals) = &res.values {
        let mut vals = vals.clone();
        // snap binaries that the backend reports within tolerance of an integer
        for (v, x) in model.vars().iter().zip(vals.iter_mut()) {
            if v.kind == VarKind::Binary && (*x - x.round()).abs() <= RECHECK_TOL {
                *x = x.round();
            }
        }
        let issues = model.check_assignment(&vals, RECHECK_TOL);
        if !issues.is_empty() {
            let mut msg = format!(
                "{} returned an assignment that {RECHECK_MARK}:",
                backend.name()
            );
            for i in issues.iter().take(10) {
                msg.push_str("\n  ");
                msg.push_str(i);
            }
            return SolveResult::error(msg, res.time);
        }
        res.objective = model.objective_value(&vals).or(res.objective);
        res.values = Some(vals);
    } else if res.status.has_solution() {
        return SolveResult::error(
            "backend reported a solution but returned no values",
            res.time,
        );
    }
    res
}

/// Warns about multipliers and product variables within 1% of their artificial bounds.
pub fn audit_bigm(result: &SolveResult, model: &MilpModel, config: &BigMConfig) -> Vec<String> {
    let Some(vals) = &result.values else {
        return Vec::new();
    };
    let mut out = Vec::new();
    for (v, x) in model.vars().iter().zip(vals) {
        let limit = match v.role {
            VarRole::Plain => continue,
            VarRole::Multiplier => config.lambda_max(),
            VarRole::Product => {
                if *x < 0.0 {
                    -config.m_lo
                } else {
                    config.m_hi
                }
            }
        };
        if limit > 0.0 && x.abs() >= 0.99 * limit {
            out.push(format!(
                "{} = {x} is within 1% of its bound {limit}; big-M may be too small",
                v.name
            ));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::milp_ir::{LinExpr, Sense};

    struct Fixed(SolveResult);

    impl MilpBackend for Fixed {
        fn name(&self) -> &str {
            "fixed"
        }
        fn solve_raw(&self, _: &MilpModel, _: &SolveOptions) -> SolveResult {
            self.0.clone()
        }
    }

    fn model() -> MilpModel {
        let mut m = MilpModel::new("t");
        let x = m.continuous("lam", 0.0, 100.0).unwrap();
        m.set_role(x, VarRole::Multiplier);
        m.add_row("r", &LinExpr::var(x), Sense::Ge, 1.0).unwrap();
        m
    }

    fn found(v: f64) -> SolveResult {
        SolveResult {
            status: SolveStatus::Feasible,
            values: Some(vec![v]),
            objective: None,
            time: Duration::ZERO,
            diagnostics: String::new(),
        }
    }

    #[test]
    fn recheck_rejects_bad_assignment() {
        let m = model();
        let r = solve(&m, &Fixed(found(0.5)), &SolveOptions::default());
        assert_eq!(r.status, SolveStatus::Error);
        let r = solve(&m, &Fixed(found(2.0)), &SolveOptions::default());
        assert_eq!(r.status, SolveStatus::Feasible);
    }

    #[test]
    fn audit_thresholds() {
        let m = model();
        let cfg = BigMConfig::default();
        assert!(audit_bigm(&found(3.0), &m, &cfg).is_empty());
        let w = audit_bigm(&found(99.5), &m, &cfg);
        assert_eq!(w.len(), 1);
        assert!(w[0].contains("lam"));
        assert!(audit_bigm(&SolveResult::infeasible(""), &m, &cfg).is_empty());
    }

    #[test]
    fn constant_conflict_short_circuits() {
        let mut m = MilpModel::new("t");
        m.add_row("bad", &LinExpr::constant(1.0), Sense::Le, 0.0)
            .unwrap();
        let r = solve(&m, &Fixed(found(0.0)), &SolveOptions::default());
        assert_eq!(r.status, SolveStatus::Infeasible);
    }
}
