use serde::{Deserialize, Serialize};

use super::residual::KktMultipliers;
use crate::error::{Error, Result};
use crate::milp_ir::{
    add_abs_penalty, add_disjunction_with, linearize_product, BigMConfig, LinExpr, MilpModel,
    Sense, VarId, VarRole,
};
use crate::model::{
    ConstraintParameterization, CostModel, Family, Gamma, Halfspace, TaskSpec, Trajectory,
};

/// Known rows with |g_k| above this are treated as inactive in exact mode.
pub const TOL_ACTIVE: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EncodingMode {
    /// Stationarity and complementarity hold exactly (feasibility program).
    Exact,
    /// Stationarity and complementarity residuals are penalized in an L1 objective.
    Suboptimal,
}

/// Decision variables shared by all demonstrations.
#[derive(Clone, Debug)]
pub struct ParamHandles {
    pub theta: Vec<VarId>,
    pub gamma: Option<Vec<VarId>>,
}

impl ParamHandles {
    /// Declares theta within its box and gamma within its box when unknown.
    pub fn declare(
        model: &mut MilpModel,
        param: &ConstraintParameterization,
        cost: &CostModel,
    ) -> Result<Self> {
        let theta = (0..param.dim_theta())
            .map(|i| {
                model.continuous(
                    &format!("theta{i}"),
                    param.theta_lower[i],
                    param.theta_upper[i],
                )
            })
            .collect::<Result<Vec<_>>>()?;
        let gamma = match &cost.gamma {
            Gamma::Known { .. } => None,
            Gamma::Unknown { lower, upper } => Some(
                (0..lower.len())
                    .map(|i| model.continuous(&format!("gamma{i}"), lower[i], upper[i]))
                    .collect::<Result<Vec<_>>>()?,
            ),
        };
        Ok(Self { theta, gamma })
    }

    /// `b(theta)` of a face as an expression.
    fn face_offset(&self, h: &Halfspace) -> LinExpr {
        let mut e = LinExpr::constant(h.offset);
        for &(i, c) in &h.theta_coeffs {
            e.add(self.theta[i], c);
        }
        e
    }
}

/// Variables attached to one constituent constraint at one constraint state.
#[derive(Clone, Debug)]
pub struct ConstituentVars {
    pub set: usize,
    pub face: usize,
    pub lambda: VarId,
    pub z_mult: VarId,
    pub z_slack: VarId,
    pub q: Option<VarId>,
    /// (dimension, L or l, R or r) for every stationarity product.
    pub products: Vec<(usize, VarId, VarId)>,
    pub slack: Option<VarId>,
}

#[derive(Clone, Debug)]
pub struct StateVars {
    pub t: usize,
    /// Binaries of the primal disjunction, one list per set.
    pub primal: Vec<Vec<VarId>>,
    pub constituents: Vec<ConstituentVars>,
}

/// Per-demonstration handles.
#[derive(Clone, Debug)]
pub struct KktBlock {
    pub demo: usize,
    pub lambda_known: Vec<Option<VarId>>,
    pub nu: Vec<VarId>,
    pub states: Vec<StateVars>,
    /// Relaxable residual expressions (suboptimal mode only).
    pub residuals: Vec<(String, LinExpr)>,
    pub warnings: Vec<String>,
}

impl KktBlock {
    /// Numeric multipliers in the layout of [`KktMultipliers`]; for unions the effective
    /// face multiplier is `q * lambda`.
    pub fn multipliers(
        &self,
        values: &[f64],
        task: &TaskSpec,
        param: &ConstraintParameterization,
    ) -> KktMultipliers {
        let mut m = KktMultipliers::zeros(task, param);
        for (r, v) in self.lambda_known.iter().enumerate() {
            m.lambda_known[r] = v.map_or(0.0, |v| values[v.0]);
        }
        m.nu = self.nu.iter().map(|v| values[v.0]).collect();
        for s in &self.states {
            for (k, c) in s.constituents.iter().enumerate() {
                let q = c.q.map_or(1.0, |q| values[q.0].round());
                m.lambda_unknown[s.t][k] = q * values[c.lambda.0];
            }
        }
        m
    }
}

/// Numerically checks the known primal conditions of a demonstration.
pub fn check_demo(demo: &Trajectory, task: &TaskSpec) -> Result<()> {
    let ev = task.eval_known(demo)?;
    if let Some(r) = ev.h.iter().position(|h| h.abs() > 1e-6) {
        return Err(Error::Spec(format!(
            "demonstration violates equality row {r} by {:e}",
            ev.h[r].abs()
        )));
    }
    if let Some(r) = ev.g.iter().position(|g| *g > 1e-6) {
        return Err(Error::Spec(format!(
            "demonstration violates known inequality row {r} by {:e}",
            ev.g[r]
        )));
    }
    Ok(())
}

/// Range of `b(theta)` over the theta box.
fn offset_range(h: &Halfspace, param: &ConstraintParameterization) -> (f64, f64) {
    let (mut lo, mut hi) = (h.offset, h.offset);
    for &(i, c) in &h.theta_coeffs {
        let (a, b) = (c * param.theta_lower[i], c * param.theta_upper[i]);
        lo += a.min(b);
        hi += a.max(b);
    }
    (lo, hi)
}

/// Big-M for a row whose relaxed side can reach `needed`: tight value plus margin, capped by `M`.
fn tight_m(needed: f64, config: &BigMConfig, what: &str, warnings: &mut Vec<String>) -> f64 {
    let m = needed.max(0.0) + 1.0;
    if m > config.m {
        warnings.push(format!(
            "{what}: needs big-M {m} above the configured {}",
            config.m
        ));
        config.m
    } else {
        m
    }
}

/// Stationarity rows and shared multiplier terms, before family-specific terms.
struct Common {
    stat: Vec<LinExpr>,
    block: KktBlock,
}

fn common_terms(
    model: &mut MilpModel,
    handles: &ParamHandles,
    j: usize,
    demo: &Trajectory,
    task: &TaskSpec,
    cost: &CostModel,
    config: &BigMConfig,
    mode: EncodingMode,
) -> Result<Common> {
    task.check_trajectory(demo)?;
    check_demo(demo, task)?;
    let ev = task.eval_known(demo)?;
    let grad = cost.gradient_terms(demo);
    let n = demo.layout().len();
    let mut stat: Vec<LinExpr> = vec![LinExpr::new(); n];
    match (&handles.gamma, cost.known_gamma()) {
        (Some(gv), _) => {
            for (g, coeff) in gv.iter().zip(&grad.coeffs) {
                for (s, &c) in stat.iter_mut().zip(coeff) {
                    if c != 0.0 {
                        s.add(*g, c);
                    }
                }
            }
        }
        (None, Some(w)) => {
            for (s, v) in stat.iter_mut().zip(grad.at(w)) {
                s.add_const(v);
            }
        }
        (None, None) => {
            return Err(Error::Spec(
                "unknown cost weights need gamma variables".into(),
            ))
        }
    }
    let mut residuals = Vec::new();
    let mut lambda_known = Vec::with_capacity(ev.g.len());
    for (r, &g) in ev.g.iter().enumerate() {
        if mode == EncodingMode::Exact && g.abs() > TOL_ACTIVE {
            lambda_known.push(None);
            continue;
        }
        let l = model.continuous(&format!("d{j}_lk{r}"), 0.0, config.lambda_max())?;
        model.set_role(l, VarRole::Multiplier);
        for (c, s) in stat.iter_mut().enumerate() {
            let d = ev.g_jacobian[(r, c)];
            if d != 0.0 {
                s.add(l, d);
            }
        }
        if mode == EncodingMode::Suboptimal && g != 0.0 {
            residuals.push((format!("d{j}_ck{r}"), LinExpr::term(l, g)));
        }
        lambda_known.push(Some(l));
    }
    let mut nu = Vec::with_capacity(ev.h.len());
    for r in 0..ev.h.len() {
        let v = model.free(&format!("d{j}_nu{r}"))?;
        for (c, s) in stat.iter_mut().enumerate() {
            let d = ev.h_jacobian[(r, c)];
            if d != 0.0 {
                s.add(v, d);
            }
        }
        nu.push(v);
    }
    Ok(Common {
        stat,
        block: KktBlock {
            demo: j,
            lambda_known,
            nu,
            states: Vec::new(),
            residuals,
            warnings: Vec::new(),
        },
    })
}

fn finish_stationarity(
    model: &mut MilpModel,
    mut c: Common,
    mode: EncodingMode,
) -> Result<KktBlock> {
    let j = c.block.demo;
    for (k, s) in c.stat.into_iter().enumerate() {
        let s = s.compact();
        match mode {
            EncodingMode::Exact => model.add_row(&format!("d{j}_st{k}"), &s, Sense::Eq, 0.0)?,
            EncodingMode::Suboptimal => {
                if !s.terms.is_empty() || s.constant != 0.0 {
                    c.block.residuals.push((format!("d{j}_st{k}"), s));
                }
            }
        }
    }
    Ok(c.block)
}

/// Adds the KKT conditions of demonstration `j` for union-of-offset families
/// (boxes, half-space polytopes) and the single nonlinear offset family.
#[allow(clippy::too_many_arguments)]
pub fn encode_union(
    model: &mut MilpModel,
    handles: &ParamHandles,
    j: usize,
    demo: &Trajectory,
    task: &TaskSpec,
    cost: &CostModel,
    param: &ConstraintParameterization,
    config: &BigMConfig,
    mode: EncodingMode,
) -> Result<KktBlock> {
    if matches!(param.family, Family::AffineInTheta { .. }) {
        return Err(Error::Unsupported(
            "affine-in-theta families use the relaxed encoding".into(),
        ));
    }
    let mut c = common_terms(model, handles, j, demo, task, cost, config, mode)?;
    let lay = demo.layout();
    let umax = config.lambda_max();
    let mut warnings = Vec::new();
    for t in 0..demo.horizon() {
        let p = param.constraint_state(demo, t);
        let pre = format!("d{j}_t{t}");
        let mut sv = StateVars {
            t,
            primal: Vec::new(),
            constituents: Vec::new(),
        };
        match &param.family {
            Family::OffsetNonlinear { polynomial } => {
                let gp = polynomial.eval(&p);
                let grad = param.grad_p(&p, &[0.0]).expect("single family");
                let th = handles.theta[0];
                // g = poly(p) - theta <= 0
                model.add_row(
                    &format!("{pre}_pf"),
                    &LinExpr::term(th, -1.0),
                    Sense::Le,
                    -gp,
                )?;
                let lam = model.continuous(&format!("{pre}_lam"), 0.0, umax)?;
                model.set_role(lam, VarRole::Multiplier);
                let z1 = model.binary(&format!("{pre}_za"))?;
                let z2 = model.binary(&format!("{pre}_zb"))?;
                model.add_row(
                    &format!("{pre}_ca"),
                    &LinExpr::var(lam).plus(z1, -umax),
                    Sense::Le,
                    0.0,
                )?;
                let m2 = tight_m(param.theta_upper[0] - gp, config, &pre, &mut warnings);
                let mut e = LinExpr::var(th).plus(z2, -m2);
                let slack = slack_var(model, &pre, mode, &mut e)?;
                model.add_row(&format!("{pre}_cb"), &e, Sense::Le, gp)?;
                model.add_row(
                    &format!("{pre}_cz"),
                    &LinExpr::var(z1).plus(z2, 1.0),
                    Sense::Le,
                    1.0,
                )?;
                for (d, &coord) in param.selector.iter().enumerate() {
                    if grad[d] != 0.0 {
                        c.stat[lay.state(t, coord)].add(lam, grad[d]);
                    }
                }
                if let Some(s) = slack {
                    c.block
                        .residuals
                        .push((format!("{pre}_sc"), LinExpr::var(s)));
                }
                sv.constituents.push(ConstituentVars {
                    set: 0,
                    face: 0,
                    lambda: lam,
                    z_mult: z1,
                    z_slack: z2,
                    q: None,
                    products: Vec::new(),
                    slack,
                });
            }
            _ => {
                let faces = param.faces().expect("union family");
                for (m, poly) in faces.iter().enumerate() {
                    // primal: some face of set m has p on its safe side
                    let rows: Vec<(LinExpr, f64, f64)> = poly
                        .iter()
                        .map(|h| {
                            let ap: f64 = h.normal.iter().zip(&p).map(|(a, x)| a * x).sum();
                            let (_, bmax) = offset_range(h, param);
                            let big = tight_m(bmax - ap, config, &pre, &mut warnings);
                            // a.p - b(theta) >= -M (1 - z)  <=>  -theta_part >= offset - a.p - M (1 - z)
                            let e = handles.face_offset(h).scaled(-1.0).plus_const(h.offset);
                            (e, h.offset - ap, big)
                        })
                        .collect();
                    sv.primal.push(add_disjunction_with(
                        model,
                        &format!("{pre}_m{m}_pf"),
                        &rows,
                    )?);
                    let mut qs = Vec::with_capacity(poly.len());
                    for (n, h) in poly.iter().enumerate() {
                        let fp = format!("{pre}_m{m}_n{n}");
                        let ap: f64 = h.normal.iter().zip(&p).map(|(a, x)| a * x).sum();
                        let (bmin, _) = offset_range(h, param);
                        let lam = model.continuous(&format!("{fp}_lam"), 0.0, umax)?;
                        model.set_role(lam, VarRole::Multiplier);
                        let z1 = model.binary(&format!("{fp}_za"))?;
                        let z2 = model.binary(&format!("{fp}_zb"))?;
                        let q = model.binary(&format!("{fp}_q"))?;
                        model.add_row(
                            &format!("{fp}_ca"),
                            &LinExpr::var(lam).plus(z1, -umax),
                            Sense::Le,
                            0.0,
                        )?;
                        // a.p - b(theta) <= M2 z2
                        let m2 = tight_m(ap - bmin, config, &fp, &mut warnings);
                        let mut e = handles
                            .face_offset(h)
                            .scaled(-1.0)
                            .plus_const(h.offset)
                            .plus(z2, -m2);
                        let slack = slack_var(model, &fp, mode, &mut e)?;
                        model.add_row(&format!("{fp}_cb"), &e, Sense::Le, h.offset - ap)?;
                        let pair = LinExpr::var(z1).plus(z2, 1.0).plus(q, 1.0);
                        model.add_row(&format!("{fp}_cz"), &pair, Sense::Le, 2.0)?;
                        let mut products = Vec::new();
                        for (d, &coord) in param.selector.iter().enumerate() {
                            let a = h.normal[d];
                            if a == 0.0 {
                                continue;
                            }
                            let l = model.continuous(
                                &format!("{fp}_L{d}"),
                                config.m_lo,
                                config.m_hi,
                            )?;
                            model.set_role(l, VarRole::Product);
                            model.add_row(
                                &format!("{fp}_Ldef{d}"),
                                &LinExpr::var(l).plus(lam, a),
                                Sense::Eq,
                                0.0,
                            )?;
                            let r = linearize_product(model, &format!("{fp}_R{d}"), q, l, config)?;
                            c.stat[lay.state(t, coord)].add(r, 1.0);
                            products.push((d, l, r));
                        }
                        if let Some(s) = slack {
                            c.block
                                .residuals
                                .push((format!("{fp}_sc"), LinExpr::var(s)));
                        }
                        qs.push(q);
                        sv.constituents.push(ConstituentVars {
                            set: m,
                            face: n,
                            lambda: lam,
                            z_mult: z1,
                            z_slack: z2,
                            q: Some(q),
                            products,
                            slack,
                        });
                    }
                    let any = LinExpr {
                        terms: qs.iter().map(|&q| (q, 1.0)).collect(),
                        constant: 0.0,
                    };
                    model.add_row(&format!("{pre}_m{m}_qany"), &any, Sense::Ge, 1.0)?;
                }
            }
        }
        c.block.states.push(sv);
    }
    c.block.warnings.extend(warnings);
    finish_stationarity(model, c, mode)
}

/// In suboptimal mode, relaxes a complementarity row `e <= rhs` to `e - s <= rhs` with `s >= 0`.
fn slack_var(
    model: &mut MilpModel,
    prefix: &str,
    mode: EncodingMode,
    e: &mut LinExpr,
) -> Result<Option<VarId>> {
    if mode == EncodingMode::Exact {
        return Ok(None);
    }
    let s = model.continuous(&format!("{prefix}_s"), 0.0, f64::INFINITY)?;
    e.add(s, -1.0);
    Ok(Some(s))
}

/// Adds the relaxed KKT conditions of demonstration `j` for a single affine-in-theta constraint:
/// the bilinear stationarity term becomes a bounded free variable gated by the multiplier indicator.
#[allow(clippy::too_many_arguments)]
pub fn encode_affine_relaxed(
    model: &mut MilpModel,
    handles: &ParamHandles,
    j: usize,
    demo: &Trajectory,
    task: &TaskSpec,
    cost: &CostModel,
    param: &ConstraintParameterization,
    config: &BigMConfig,
    mode: EncodingMode,
) -> Result<KktBlock> {
    let Family::AffineInTheta { features, base } = &param.family else {
        return Err(Error::Unsupported(format!(
            "{} is not affine in theta",
            param.family_name()
        )));
    };
    let mut c = common_terms(model, handles, j, demo, task, cost, config, mode)?;
    let lay = demo.layout();
    let umax = config.lambda_max();
    let mut warnings = Vec::new();
    for t in 0..demo.horizon() {
        let p = param.constraint_state(demo, t);
        let pre = format!("d{j}_t{t}");
        // g(p, theta) = psi0 + sum psi_i theta_i
        let psi0 = base.eval(&p);
        let mut g = LinExpr::constant(psi0);
        let mut neg_max = -psi0;
        for (i, f) in features.iter().enumerate() {
            let v = f.eval(&p);
            if v != 0.0 {
                g.add(handles.theta[i], v);
            }
            neg_max += (-v * param.theta_lower[i]).max(-v * param.theta_upper[i]);
        }
        model.add_row(&format!("{pre}_pf"), &g, Sense::Le, 0.0)?;
        let lam = model.continuous(&format!("{pre}_lam"), 0.0, umax)?;
        model.set_role(lam, VarRole::Multiplier);
        let z1 = model.binary(&format!("{pre}_za"))?;
        let z2 = model.binary(&format!("{pre}_zb"))?;
        model.add_row(
            &format!("{pre}_ca"),
            &LinExpr::var(lam).plus(z1, -umax),
            Sense::Le,
            0.0,
        )?;
        let m2 = tight_m(neg_max, config, &pre, &mut warnings);
        let mut e = g.scaled(-1.0).plus(z2, -m2);
        let slack = slack_var(model, &pre, mode, &mut e)?;
        model.add_row(&format!("{pre}_cb"), &e, Sense::Le, 0.0)?;
        model.add_row(
            &format!("{pre}_cz"),
            &LinExpr::var(z1).plus(z2, 1.0),
            Sense::Le,
            1.0,
        )?;
        let mut products = Vec::new();
        for (d, &coord) in param.selector.iter().enumerate() {
            let l = model.continuous(&format!("{pre}_l{d}"), config.m_lo, config.m_hi)?;
            model.set_role(l, VarRole::Product);
            let r = linearize_product(model, &format!("{pre}_r{d}"), z1, l, config)?;
            c.stat[lay.state(t, coord)].add(r, 1.0);
            products.push((d, l, r));
        }
        if let Some(s) = slack {
            c.block
                .residuals
                .push((format!("{pre}_sc"), LinExpr::var(s)));
        }
        c.block.states.push(StateVars {
            t,
            primal: Vec::new(),
            constituents: vec![ConstituentVars {
                set: 0,
                face: 0,
                lambda: lam,
                z_mult: z1,
                z_slack: z2,
                q: None,
                products,
                slack,
            }],
        });
    }
    c.block.warnings.extend(warnings);
    finish_stationarity(model, c, mode)
}

/// Turns the relaxable residuals of every block into L1 penalties and returns each
/// demonstration's penalty expression.
pub fn suboptimal_objective(model: &mut MilpModel, blocks: &[KktBlock]) -> Result<Vec<LinExpr>> {
    let mut per_demo = Vec::with_capacity(blocks.len());
    if model.objective().is_none() {
        model.set_objective(LinExpr::new());
    }
    for b in blocks {
        let mut total = LinExpr::new();
        for (name, expr) in &b.residuals {
            let contribution = add_abs_penalty(model, &format!("{name}_pen"), expr)?;
            total.add_expr(&contribution, 1.0);
        }
        per_demo.push(total.compact());
    }
    Ok(per_demo)
}
