//! Guaranteed safe and unsafe states from the feasible parameter set: point queries,
//! volume extraction, grid sweeps and safe boxes.

mod sweep;

use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kkt::{EncodingMode, KktProgram};
use crate::learner::{build_program, LearnConfig};
use crate::milp_ir::{add_disjunction_with, LinExpr, MilpModel, Sense, VarId};
use crate::model::{ConstraintParameterization, CostModel, Demonstration, Family};
use crate::solver::{solve, MilpBackend, SolveOptions, SolveStatus};

pub use sweep::{grid_points, grid_sweep, CellResult, GridSpec, SweepResult, SweepSummary};

/// Margin used when a cached witness decides a probe without a solve.
const WITNESS_MARGIN: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    GuaranteedSafe,
    GuaranteedUnsafe,
    Unsure,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::GuaranteedSafe => "GuaranteedSafe",
            Verdict::GuaranteedUnsafe => "GuaranteedUnsafe",
            Verdict::Unsure => "Unsure",
        }
    }
}

/// How a probe's outcome was established.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Certificate {
    /// A solve of the probe program with this status.
    Solver { status: SolveStatus },
    /// A feasible parameter found earlier already satisfies the probe.
    Witness { index: usize },
}

impl Certificate {
    fn feasible(&self) -> bool {
        match self {
            Certificate::Solver { status } => status.has_solution(),
            Certificate::Witness { .. } => true,
        }
    }

    fn infeasible(&self) -> bool {
        matches!(
            self,
            Certificate::Solver {
                status: SolveStatus::Infeasible
            }
        )
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QueryVerdict {
    pub point: Vec<f64>,
    pub verdict: Verdict,
    pub eps_strict: f64,
    /// Probe forcing `g(p, theta) >= eps_strict`.
    pub unsafe_probe: Certificate,
    /// Probe forcing `g(p, theta) <= 0`.
    pub safe_probe: Certificate,
    /// Set when a probe failed; the verdict is then Unsure.
    pub error: Option<String>,
    /// Set when the feasible set is the bounded-suboptimality set of the penalized program.
    pub suboptimal: bool,
}

/// A guaranteed-safe axis-aligned box.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SafeBox {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl SafeBox {
    pub fn contains(&self, p: &[f64]) -> bool {
        p.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .all(|(x, (lo, hi))| *x >= *lo && *x <= *hi)
    }

    pub fn contains_box(&self, other: &SafeBox) -> bool {
        self.contains(&other.lower) && self.contains(&other.upper)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VolumeResult {
    pub query: Vec<f64>,
    /// Infinity-norm distance to the nearest point that some feasible parameter marks unsafe;
    /// infinite when no such point exists in the region.
    pub eps: f64,
    pub witness: Option<Vec<f64>>,
    /// The query point itself is not guaranteed safe.
    pub not_safe: bool,
    pub status: SolveStatus,
}

/// The KKT program of a demonstration set, prepared for repeated probing.
pub struct Template {
    pub program: KktProgram,
    pub config: LearnConfig,
    /// Best penalty of the suboptimal program.
    pub best_penalty: Option<f64>,
    backend: Box<dyn MilpBackend>,
    witnesses: Mutex<Vec<Vec<f64>>>,
}

impl Template {
    /// Encodes the demonstrations. In suboptimal mode the penalized program is solved once and
    /// the feasible set becomes the parameters within `(1 + rho)` of the best penalty.
    pub fn new(
        demos: &[Demonstration],
        cost: &CostModel,
        param: &ConstraintParameterization,
        backend: Box<dyn MilpBackend>,
        config: &LearnConfig,
    ) -> Result<Self> {
        let mut program = build_program(demos, cost, param, config)?;
        let mut best_penalty = None;
        let mut witnesses = Vec::new();
        if config.mode == EncodingMode::Suboptimal {
            let res = solve(&program.model, backend.as_ref(), &config.solve);
            match res.status {
                SolveStatus::Optimal => {}
                SolveStatus::Infeasible => {
                    return Err(Error::Infeasible("penalized program is infeasible".into()))
                }
                _ => {
                    return Err(Error::Solver(format!(
                        "penalized program: {:?} {}",
                        res.status, res.diagnostics
                    )))
                }
            }
            let best = res.objective.unwrap_or(0.0).max(0.0);
            let obj = program.model.objective().cloned().unwrap_or_default();
            program.model.add_row(
                "subopt_cap",
                &obj,
                Sense::Le,
                (1.0 + config.rho) * best + 1e-7,
            )?;
            program.model.clear_objective();
            best_penalty = Some(best);
            witnesses.push(program.theta_values(res.values.as_deref().expect("optimal")));
        }
        Ok(Self {
            program,
            config: config.clone(),
            best_penalty,
            backend,
            witnesses: Mutex::new(witnesses),
        })
    }

    pub fn param(&self) -> &ConstraintParameterization {
        &self.program.param
    }

    pub fn eps(&self) -> f64 {
        self.program.config.eps_strict
    }

    pub fn backend(&self) -> &dyn MilpBackend {
        self.backend.as_ref()
    }

    pub fn num_witnesses(&self) -> usize {
        self.witnesses.lock().expect("witness lock").len()
    }

    fn witness_decides(&self, p: &[f64], want_unsafe: bool) -> Option<usize> {
        let eps = self.eps();
        let w = self.witnesses.lock().expect("witness lock");
        w.iter().position(|theta| {
            let g = self.param().value(p, theta);
            if want_unsafe {
                g >= eps + WITNESS_MARGIN
            } else {
                g <= -WITNESS_MARGIN
            }
        })
    }

    fn record_witness(&self, values: &[f64]) {
        let theta = self.program.theta_values(values);
        let mut w = self.witnesses.lock().expect("witness lock");
        if !w.contains(&theta) {
            w.push(theta);
        }
    }

    fn probe(&self, p: &[f64], want_unsafe: bool) -> Result<(Certificate, Option<String>)> {
        if let Some(index) = self.witness_decides(p, want_unsafe) {
            return Ok((Certificate::Witness { index }, None));
        }
        let mut model = self.program.model.clone();
        let exprs = violation_exprs(self.param(), &self.program.handles.theta, p, None)?;
        if want_unsafe {
            force_unsafe(
                &mut model,
                "probe",
                &exprs,
                self.eps(),
                self.program.config.m,
            )?;
        } else {
            force_safe(&mut model, "probe", &exprs, self.program.config.m)?;
        }
        let res = solve(&model, self.backend(), &self.config.solve);
        let error = match res.status {
            SolveStatus::Optimal | SolveStatus::Feasible | SolveStatus::Infeasible => None,
            s => Some(format!("{s:?}: {}", res.diagnostics)),
        };
        if let Some(v) = &res.values {
            self.record_witness(v);
        }
        Ok((Certificate::Solver { status: res.status }, error))
    }

    /// Classifies `p` as guaranteed safe, guaranteed unsafe or unsure.
    pub fn query(&self, p: &[f64]) -> Result<QueryVerdict> {
        if p.len() != self.param().dim_p() {
            return Err(Error::Dimension(format!(
                "query point has {} entries, expected {}",
                p.len(),
                self.param().dim_p()
            )));
        }
        let (unsafe_probe, e1) = self.probe(p, true)?;
        let (safe_probe, e2) = self.probe(p, false)?;
        let error = match (e1, e2) {
            (None, None) => None,
            (a, b) => Some([a, b].into_iter().flatten().collect::<Vec<_>>().join("; ")),
        };
        let verdict = if error.is_some() {
            Verdict::Unsure
        } else if unsafe_probe.infeasible() && safe_probe.infeasible() {
            return Err(Error::Contradiction(p.to_vec()));
        } else if unsafe_probe.infeasible() && safe_probe.feasible() {
            Verdict::GuaranteedSafe
        } else if safe_probe.infeasible() && unsafe_probe.feasible() {
            Verdict::GuaranteedUnsafe
        } else {
            Verdict::Unsure
        };
        Ok(QueryVerdict {
            point: p.to_vec(),
            verdict,
            eps_strict: self.eps(),
            unsafe_probe,
            safe_probe,
            error,
            suboptimal: self.config.mode == EncodingMode::Suboptimal,
        })
    }

    /// Largest infinity-norm ball around `p_query`, within `region`, that no feasible parameter
    /// marks unsafe (by at least `eps_strict`).
    pub fn extract_volume(&self, p_query: &[f64], region: &[(f64, f64)]) -> Result<VolumeResult> {
        let param = self.param();
        if !param.linear_in_p() {
            return Err(Error::Unsupported(format!(
                "volume extraction needs g linear in p ({} is not)",
                param.family_name()
            )));
        }
        if p_query.len() != param.dim_p() || region.len() != param.dim_p() {
            return Err(Error::Dimension(
                "query point or region has the wrong dimension".into(),
            ));
        }
        let mut model = self.program.model.clone();
        let eps_var = model.continuous("vol_eps", 0.0, f64::INFINITY)?;
        let mut near = Vec::with_capacity(region.len());
        for (d, &(lo, hi)) in region.iter().enumerate() {
            let v = model.continuous(&format!("vol_p{d}"), lo, hi)?;
            model.add_row(
                &format!("vol_up{d}"),
                &LinExpr::var(v).plus(eps_var, -1.0),
                Sense::Le,
                p_query[d],
            )?;
            model.add_row(
                &format!("vol_dn{d}"),
                &LinExpr::var(v).plus(eps_var, 1.0),
                Sense::Ge,
                p_query[d],
            )?;
            near.push(v);
        }
        let exprs = violation_exprs(param, &self.program.handles.theta, p_query, Some(&near))?;
        force_unsafe(&mut model, "vol", &exprs, self.eps(), self.program.config.m)?;
        model.set_objective(LinExpr::var(eps_var));
        let opts = SolveOptions {
            mip_gap: Some(0.0),
            ..self.config.solve.clone()
        };
        let res = solve(&model, self.backend(), &opts);
        match res.status {
            SolveStatus::Infeasible => Ok(VolumeResult {
                query: p_query.to_vec(),
                eps: f64::INFINITY,
                witness: None,
                not_safe: false,
                status: res.status,
            }),
            SolveStatus::Optimal => {
                let v = res.values.as_deref().expect("optimal");
                self.record_witness(v);
                let eps = v[eps_var.0].max(0.0);
                Ok(VolumeResult {
                    query: p_query.to_vec(),
                    eps,
                    witness: Some(near.iter().map(|n| v[n.0]).collect()),
                    not_safe: eps <= 1e-9,
                    status: res.status,
                })
            }
            s => Err(Error::Solver(format!(
                "volume extraction: {s:?} {}",
                res.diagnostics
            ))),
        }
    }

    /// Guaranteed-safe boxes grown around each seed, clipped to the region; seeds that are not
    /// guaranteed safe contribute nothing and boxes inside another box are dropped.
    pub fn extract_safe_boxes(
        &self,
        seeds: &[Vec<f64>],
        region: &[(f64, f64)],
    ) -> Result<Vec<SafeBox>> {
        let mut boxes: Vec<SafeBox> = Vec::new();
        for s in seeds {
            let v = self.extract_volume(s, region)?;
            if v.not_safe {
                continue;
            }
            // eps is measured to points with g >= eps_strict; points with 0 < g < eps_strict lie
            // within eps_strict of those for box faces, so pull back by that much and a little
            // more since the ball is open
            let margin = self.eps();
            let r = if v.eps.is_finite() {
                (v.eps - margin) * (1.0 - 1e-6) - 1e-7
            } else {
                f64::INFINITY
            };
            if r <= 0.0 {
                continue;
            }
            let b = SafeBox {
                lower: s
                    .iter()
                    .zip(region)
                    .map(|(x, (lo, _))| (x - r).max(*lo))
                    .collect(),
                upper: s
                    .iter()
                    .zip(region)
                    .map(|(x, (_, hi))| (x + r).min(*hi))
                    .collect(),
            };
            if boxes.iter().any(|o| o.contains_box(&b)) {
                continue;
            }
            boxes.retain(|o| !b.contains_box(o));
            boxes.push(b);
        }
        Ok(boxes)
    }
}

/// `g` as a max over sets of a min over faces of expressions linear in theta (and in the
/// constraint-state variables `near` when given). Single-constraint families give `[[g]]`.
fn violation_exprs(
    param: &ConstraintParameterization,
    theta: &[VarId],
    p: &[f64],
    near: Option<&[VarId]>,
) -> Result<Vec<Vec<LinExpr>>> {
    match &param.family {
        Family::BoxUnion { .. } | Family::HalfspaceUnion { .. } => {
            let faces = param.faces().expect("union family");
            Ok(faces
                .iter()
                .map(|poly| {
                    poly.iter()
                        .map(|h| {
                            let mut e = LinExpr::constant(h.offset);
                            for &(i, c) in &h.theta_coeffs {
                                e.add(theta[i], c);
                            }
                            for (d, a) in h.normal.iter().enumerate() {
                                match near {
                                    Some(n) => {
                                        if *a != 0.0 {
                                            e.add(n[d], -a);
                                        }
                                    }
                                    None => {
                                        e.add_const(-a * p[d]);
                                    }
                                }
                            }
                            e
                        })
                        .collect()
                })
                .collect())
        }
        Family::OffsetNonlinear { polynomial } => {
            let mut e = LinExpr::term(theta[0], -1.0);
            match near {
                None => {
                    e.add_const(polynomial.eval(p));
                }
                Some(n) => {
                    // affine polynomial: value at 0 plus gradient terms
                    let zero = vec![0.0; n.len()];
                    e.add_const(polynomial.eval(&zero));
                    for (d, g) in polynomial.grad(&zero).iter().enumerate() {
                        if *g != 0.0 {
                            e.add(n[d], *g);
                        }
                    }
                }
            }
            Ok(vec![vec![e]])
        }
        Family::AffineInTheta { features, base } => {
            if near.is_some() {
                return Err(Error::Unsupported(
                    "affine-in-theta constraints are bilinear in a free state".into(),
                ));
            }
            let mut e = LinExpr::constant(base.eval(p));
            for (i, f) in features.iter().enumerate() {
                let v = f.eval(p);
                if v != 0.0 {
                    e.add(theta[i], v);
                }
            }
            Ok(vec![vec![e]])
        }
    }
}

/// Range of a linear expression over the variable bounds of `model`.
fn expr_range(model: &MilpModel, e: &LinExpr) -> (f64, f64) {
    let (mut lo, mut hi) = (e.constant, e.constant);
    for &(v, c) in &e.terms {
        let var = model.var(v);
        let (a, b) = (c * var.lower, c * var.upper);
        lo += a.min(b);
        hi += a.max(b);
    }
    (lo, hi)
}

fn big_m(needed: f64, cap: f64) -> f64 {
    (needed.max(0.0) + 1.0).min(cap)
}

/// `g >= eps`: every face expression of some set is at least `eps`.
fn force_unsafe(
    model: &mut MilpModel,
    prefix: &str,
    exprs: &[Vec<LinExpr>],
    eps: f64,
    cap: f64,
) -> Result<()> {
    if exprs.len() == 1 {
        for (n, e) in exprs[0].iter().enumerate() {
            model.add_row(&format!("{prefix}_u_m0_n{n}"), e, Sense::Ge, eps)?;
        }
        return Ok(());
    }
    let mut any = LinExpr::new();
    for (m, set) in exprs.iter().enumerate() {
        let w = model.binary(&format!("{prefix}_u_w{m}"))?;
        for (n, e) in set.iter().enumerate() {
            let (lo, _) = expr_range(model, e);
            let big = big_m(eps - lo, cap);
            // e >= eps - M (1 - w)
            model.add_row(
                &format!("{prefix}_u_m{m}_n{n}"),
                &e.clone().plus(w, -big),
                Sense::Ge,
                eps - big,
            )?;
        }
        any.add(w, 1.0);
    }
    model.add_row(&format!("{prefix}_u_any"), &any, Sense::Ge, 1.0)
}

/// `g <= 0`: every set has a face expression at most zero.
fn force_safe(model: &mut MilpModel, prefix: &str, exprs: &[Vec<LinExpr>], cap: f64) -> Result<()> {
    for (m, set) in exprs.iter().enumerate() {
        if set.len() == 1 {
            model.add_row(&format!("{prefix}_s_m{m}"), &set[0], Sense::Le, 0.0)?;
            continue;
        }
        let rows: Vec<(LinExpr, f64, f64)> = set
            .iter()
            .map(|e| {
                let (_, hi) = expr_range(model, e);
                (e.scaled(-1.0), 0.0, big_m(hi, cap))
            })
            .collect();
        add_disjunction_with(model, &format!("{prefix}_s_m{m}"), &rows)?;
    }
    Ok(())
}
