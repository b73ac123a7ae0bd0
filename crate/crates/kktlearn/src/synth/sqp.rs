use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::qp::{solve_qp, QpProblem};
use crate::error::{Error, Result};
use crate::kkt::{kkt_residual, KktMultipliers, ResidualReport};
use crate::model::{ConstraintParameterization, CostModel, TaskSpec, Trajectory};

/// Which face, if any, a state must stay beyond.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Hint {
    Free,
    Face { set: usize, face: usize },
}

/// One hint per state; fixes the homotopy class of the forward problem for union obstacles.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RouteHint(pub Vec<Hint>);

impl RouteHint {
    pub fn free(horizon: usize) -> Self {
        Self(vec![Hint::Free; horizon])
    }

    /// Face hint on states `from..to`, free elsewhere.
    pub fn with_face(mut self, from: usize, to: usize, set: usize, face: usize) -> Self {
        for h in &mut self.0[from..to] {
            *h = Hint::Face { set, face };
        }
        self
    }
}

#[derive(Clone, Debug)]
pub struct SynthOptions {
    pub initial: Option<Trajectory>,
    pub max_iter: usize,
    /// Drop hints that hold a state on a face plane outside its set, and add hints for
    /// states that end up inside a set, re-solving until the route is consistent.
    pub refine_hints: bool,
    pub residual_tol: f64,
}

impl Default for SynthOptions {
    fn default() -> Self {
        Self {
            initial: None,
            max_iter: 200,
            refine_hints: true,
            residual_tol: 1e-6,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Synthesized {
    pub trajectory: Trajectory,
    pub multipliers: KktMultipliers,
    pub residual: ResidualReport,
    pub hint: RouteHint,
    pub cost: f64,
}

/// Unknown-constraint rows imposed in the forward problem: (state, constituent index).
fn constrained_rows(
    param: &ConstraintParameterization,
    hint: &RouteHint,
    faces: &Option<Vec<Vec<crate::model::Halfspace>>>,
) -> Result<Vec<(usize, usize)>> {
    let mut rows = Vec::new();
    match faces {
        Some(faces) => {
            let offsets: Vec<usize> = faces
                .iter()
                .scan(0, |acc, f| {
                    let o = *acc;
                    *acc += f.len();
                    Some(o)
                })
                .collect();
            for (t, h) in hint.0.iter().enumerate() {
                if let Hint::Face { set, face } = *h {
                    if set >= faces.len() || face >= faces[set].len() {
                        return Err(Error::Synthesis(format!(
                            "hint at state {t} names a missing face"
                        )));
                    }
                    rows.push((t, offsets[set] + face));
                }
            }
        }
        None => {
            let _ = param;
            rows.extend((0..hint.0.len()).map(|t| (t, 0)));
        }
    }
    Ok(rows)
}

struct Iterate {
    traj: Trajectory,
    mult: KktMultipliers,
}

fn merit(
    task: &TaskSpec,
    cost: &CostModel,
    gamma: &[f64],
    param: &ConstraintParameterization,
    theta: &[f64],
    rows: &[(usize, usize)],
    traj: &Trajectory,
    rho: f64,
) -> Result<f64> {
    let ev = task.eval_known(traj)?;
    let mut viol: f64 =
        ev.h.iter().map(|v| v.abs()).sum::<f64>() + ev.g.iter().map(|v| v.max(0.0)).sum::<f64>();
    for &(t, k) in rows {
        let p = param.constraint_state(traj, t);
        viol += param.constituent_values_and_grads(&p, theta)[k].2.max(0.0);
    }
    Ok(cost.value(traj, gamma) + rho * viol)
}

/// One SQP solve for a fixed hint.
fn sqp(
    task: &TaskSpec,
    cost: &CostModel,
    gamma: &[f64],
    param: &ConstraintParameterization,
    theta: &[f64],
    hint: &RouteHint,
    start: Trajectory,
    max_iter: usize,
) -> Result<Iterate> {
    let faces = param.faces();
    let rows = constrained_rows(param, hint, &faces)?;
    let lay = task.layout();
    let n = lay.len();
    let known_rows = task.known_rows();
    let nk = known_rows.len();
    let mut traj = start;
    let mut lam_known = vec![0.0; nk];
    let mut lam_rows = vec![0.0; rows.len()];
    for _ in 0..max_iter {
        let ev = task.eval_known(&traj)?;
        let mut g = cost.hessian(&traj, gamma);
        for (r, kr) in known_rows.iter().enumerate() {
            for (j, h) in task.known_row_hessian_diag(kr) {
                g[(j, j)] += lam_known[r] * h;
            }
        }
        let mut cons_rows = Vec::with_capacity(rows.len());
        for (i, &(t, k)) in rows.iter().enumerate() {
            let p = param.constraint_state(&traj, t);
            let (_, _, val, grad) = param.constituent_values_and_grads(&p, theta).swap_remove(k);
            if let Some(hp) = param.hessian_p(&p, theta) {
                for (a, &ca) in param.selector.iter().enumerate() {
                    for (b, &cb) in param.selector.iter().enumerate() {
                        g[(lay.state(t, ca), lay.state(t, cb))] += lam_rows[i] * hp[a][b];
                    }
                }
            }
            let mut c = DVector::zeros(n);
            for (d, &coord) in param.selector.iter().enumerate() {
                c[lay.state(t, coord)] = grad[d];
            }
            cons_rows.push((c, -val));
        }
        let a = DVector::from_vec(cost.gradient(&traj, gamma));
        let eq: Vec<(DVector<f64>, f64)> = (0..ev.h.len())
            .map(|r| (ev.h_jacobian.row(r).transpose().into_owned(), -ev.h[r]))
            .collect();
        let mut ineq: Vec<(DVector<f64>, f64)> = (0..nk)
            .map(|r| (ev.g_jacobian.row(r).transpose().into_owned(), -ev.g[r]))
            .collect();
        ineq.extend(cons_rows);
        let sol = solve_with_regularization(g, a, eq, ineq)?;
        let d = sol.x;
        let rho = 10.0
            * (1.0
                + sol
                    .mu
                    .iter()
                    .chain(sol.nu.iter())
                    .fold(0.0f64, |m, v| m.max(v.abs())));
        let xi = DVector::from_vec(traj.flatten());
        let step_norm = d.amax();
        let mut alpha = 1.0;
        let phi0 = merit(task, cost, gamma, param, theta, &rows, &traj, rho)?;
        let mut next = Trajectory::unflatten((&xi + &d).as_slice(), lay)?;
        if step_norm > 1e-6 {
            while alpha > 1e-8 {
                let cand = Trajectory::unflatten((&xi + alpha * &d).as_slice(), lay)?;
                if merit(task, cost, gamma, param, theta, &rows, &cand, rho)?
                    <= phi0 - 1e-10 * alpha
                {
                    next = cand;
                    break;
                }
                alpha *= 0.5;
            }
        }
        lam_known.copy_from_slice(&sol.mu[..nk]);
        lam_rows.copy_from_slice(&sol.mu[nk..]);
        traj = next;
        if step_norm <= 1e-12 || (alpha == 1.0 && step_norm <= 1e-10) {
            let mut mult = KktMultipliers::zeros(task, param);
            mult.lambda_known = lam_known;
            for (&(t, k), l) in rows.iter().zip(&lam_rows) {
                mult.lambda_unknown[t][k] = *l;
            }
            mult.nu = sol.nu;
            return Ok(Iterate { traj, mult });
        }
    }
    Err(Error::Synthesis(format!(
        "no convergence within {max_iter} iterations"
    )))
}

fn solve_with_regularization(
    g: DMatrix<f64>,
    a: DVector<f64>,
    eq: Vec<(DVector<f64>, f64)>,
    ineq: Vec<(DVector<f64>, f64)>,
) -> Result<super::qp::QpSolution> {
    let mut prob = QpProblem { g, a, eq, ineq };
    let scale = prob.g.amax().max(1.0);
    let mut delta = 0.0;
    loop {
        match solve_qp(&prob) {
            Err(Error::Synthesis(m)) if m.contains("positive definite") && delta < 1e6 * scale => {
                let bump = if delta == 0.0 { 1e-6 * scale } else { delta };
                for i in 0..prob.g.nrows() {
                    prob.g[(i, i)] += bump;
                }
                delta += bump;
            }
            other => return other,
        }
    }
}

/// Solves the forward problem in the homotopy class given by `hint` and certifies the result.
pub fn synthesize(
    task: &TaskSpec,
    cost: &CostModel,
    param: &ConstraintParameterization,
    theta: &[f64],
    hint: &RouteHint,
    options: &SynthOptions,
) -> Result<Synthesized> {
    task.validate()?;
    cost.validate(task.n_x)?;
    param.validate(task.n_x)?;
    let gamma = cost
        .known_gamma()
        .ok_or_else(|| Error::Synthesis("synthesis needs known cost weights".into()))?;
    if hint.0.len() != task.horizon {
        return Err(Error::Synthesis(format!(
            "hint has {} entries for horizon {}",
            hint.0.len(),
            task.horizon
        )));
    }
    if !param.theta_in_bounds(theta) {
        return Err(Error::ThetaOutOfBounds(format!("{theta:?}")));
    }
    let mut traj = match &options.initial {
        Some(t) => {
            task.check_trajectory(t)?;
            t.clone()
        }
        None => {
            let mut t = Trajectory::straight_line(&task.start, &task.goal, task.horizon);
            t.controls = vec![vec![0.0; task.n_u]; task.horizon - 1];
            t
        }
    };
    let mut hint = hint.clone();
    let faces = param.faces();
    let mut rounds = 0;
    loop {
        let it = sqp(
            task,
            cost,
            gamma,
            param,
            theta,
            &hint,
            traj,
            options.max_iter,
        )?;
        traj = it.traj;
        let mut changed = false;
        if let (Some(faces), true) = (&faces, options.refine_hints) {
            let offsets: Vec<usize> = faces
                .iter()
                .scan(0, |a, f| {
                    let o = *a;
                    *a += f.len();
                    Some(o)
                })
                .collect();
            for t in 0..task.horizon {
                let p = param.constraint_state(&traj, t);
                if let Hint::Face { set, face } = hint.0[t] {
                    let lam = it.mult.lambda_unknown[t][offsets[set] + face];
                    let outside = faces[set].iter().any(|h| h.violation(&p, theta) < -1e-9);
                    if lam > 1e-9 && outside {
                        hint.0[t] = Hint::Free;
                        changed = true;
                    }
                }
                if hint.0[t] == Hint::Free {
                    for (m, fs) in faces.iter().enumerate() {
                        let vals: Vec<f64> = fs.iter().map(|h| h.violation(&p, theta)).collect();
                        if vals.iter().all(|v| *v > 1e-9) {
                            let n = (0..vals.len())
                                .min_by(|&a, &b| vals[a].total_cmp(&vals[b]))
                                .unwrap();
                            hint.0[t] = Hint::Face { set: m, face: n };
                            changed = true;
                            break;
                        }
                    }
                }
            }
        }
        if !changed {
            let residual = kkt_residual(&traj, task, cost, None, param, theta, &it.mult)?;
            if !residual.certified(options.residual_tol) {
                return Err(Error::Synthesis(format!(
                    "KKT residual {:e} exceeds {:e} (stationarity {:e}, complementarity {:e}, primal {:e})",
                    residual.max(),
                    options.residual_tol,
                    residual.stationarity,
                    residual.complementarity,
                    residual.primal
                )));
            }
            let c = cost.value(&traj, gamma);
            return Ok(Synthesized {
                trajectory: traj,
                multipliers: it.mult,
                residual,
                hint,
                cost: c,
            });
        }
        rounds += 1;
        if rounds > 50 {
            return Err(Error::Synthesis(
                "route hint refinement did not settle".into(),
            ));
        }
    }
}
