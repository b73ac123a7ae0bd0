use serde::{Deserialize, Serialize};

use crate::error::{dim_err, Error, Result};
use crate::model::{ConstraintParameterization, CostModel, TaskSpec, Trajectory};

/// Numeric multipliers for one demonstration.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct KktMultipliers {
    /// One per known inequality row, in [`TaskSpec::known_rows`] order.
    pub lambda_known: Vec<f64>,
    /// Indexed `[t][constituent]`; constituents are faces in (set, face) order for
    /// union families and the single constraint otherwise.
    pub lambda_unknown: Vec<Vec<f64>>,
    /// One per equality row: dynamics, then start, then goal.
    pub nu: Vec<f64>,
}

impl KktMultipliers {
    pub fn zeros(task: &TaskSpec, param: &ConstraintParameterization) -> Self {
        Self {
            lambda_known: vec![0.0; task.known_rows().len()],
            lambda_unknown: vec![vec![0.0; param.num_constituents()]; task.horizon],
            nu: vec![0.0; task.num_equality_rows()],
        }
    }
}

/// Infinity norms of each KKT group.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    pub stationarity: f64,
    pub complementarity: f64,
    pub primal: f64,
    pub multiplier_negativity: f64,
    /// Full stationarity vector against the flattened trajectory.
    pub stationarity_vector: Vec<f64>,
}

impl ResidualReport {
    pub fn max(&self) -> f64 {
        self.stationarity
            .max(self.complementarity)
            .max(self.primal)
            .max(self.multiplier_negativity)
    }

    pub fn certified(&self, tol: f64) -> bool {
        self.max() <= tol
    }
}

/// Evaluates every KKT group for `demo` at `(theta, gamma)` with the given multipliers.
/// `gamma` defaults to the cost's known weights.
pub fn kkt_residual(
    demo: &Trajectory,
    task: &TaskSpec,
    cost: &CostModel,
    gamma: Option<&[f64]>,
    param: &ConstraintParameterization,
    theta: &[f64],
    mult: &KktMultipliers,
) -> Result<ResidualReport> {
    let ev = task.eval_known(demo)?;
    let gamma = match gamma.or(cost.known_gamma()) {
        Some(g) => g,
        None => return Err(Error::Spec("cost weights unknown and none supplied".into())),
    };
    if gamma.len() != cost.num_groups() {
        return dim_err("gamma length differs from the number of cost groups");
    }
    if theta.len() != param.dim_theta() {
        return dim_err("theta length differs from the parameterization");
    }
    let nc = param.num_constituents();
    if mult.lambda_known.len() != ev.g.len()
        || mult.nu.len() != ev.h.len()
        || mult.lambda_unknown.len() != task.horizon
        || mult.lambda_unknown.iter().any(|l| l.len() != nc)
    {
        return dim_err("multiplier shapes do not match the task and parameterization");
    }
    let lay = task.layout();
    let mut stat = cost.gradient(demo, gamma);
    let mut comp: f64 = 0.0;
    let mut primal: f64 = ev.h.iter().fold(0.0, |a, v| a.max(v.abs()));
    let mut neg: f64 = 0.0;
    for (r, (&g, &l)) in ev.g.iter().zip(&mult.lambda_known).enumerate() {
        primal = primal.max(g);
        neg = neg.max(-l);
        comp = comp.max((l * g).abs());
        for (j, s) in stat.iter_mut().enumerate() {
            *s += l * ev.g_jacobian[(r, j)];
        }
    }
    for (r, &nu) in mult.nu.iter().enumerate() {
        for (j, s) in stat.iter_mut().enumerate() {
            *s += nu * ev.h_jacobian[(r, j)];
        }
    }
    for t in 0..task.horizon {
        let p = param.constraint_state(demo, t);
        primal = primal.max(param.value(&p, theta));
        for (k, (_, _, val, grad)) in param
            .constituent_values_and_grads(&p, theta)
            .into_iter()
            .enumerate()
        {
            let l = mult.lambda_unknown[t][k];
            neg = neg.max(-l);
            comp = comp.max((l * val).abs());
            for (d, &coord) in param.selector.iter().enumerate() {
                stat[lay.state(t, coord)] += l * grad[d];
            }
        }
    }
    Ok(ResidualReport {
        stationarity: stat.iter().fold(0.0, |a, v| a.max(v.abs())),
        complementarity: comp,
        primal: primal.max(0.0),
        multiplier_negativity: neg.max(0.0),
        stationarity_vector: stat,
    })
}

/// Multipliers that minimize the stationarity norm at `theta` using only constraints that are
/// truly active at the demonstration: known rows with `|g| <= tol`, and unknown constituents
/// that sit on their face while the state is on the boundary of the unsafe set.
/// Encodings that only sign-check complementarity can return multipliers on inactive faces;
/// this recovers a witness whose complementarity residual is zero by construction.
pub fn refit_multipliers(
    demo: &Trajectory,
    task: &TaskSpec,
    cost: &CostModel,
    gamma: &[f64],
    param: &ConstraintParameterization,
    theta: &[f64],
    tol: f64,
) -> Result<KktMultipliers> {
    use crate::synth::{solve_qp, QpProblem};
    use nalgebra::{DMatrix, DVector};

    let ev = task.eval_known(demo)?;
    let lay = task.layout();
    let n = ev.h_jacobian.ncols();
    // columns of the stationarity map, tagged with where the multiplier goes
    enum Slot {
        Known(usize),
        Unknown(usize, usize),
        Nu(usize),
    }
    let mut cols: Vec<(Slot, DVector<f64>)> = Vec::new();
    for (r, g) in ev.g.iter().enumerate() {
        if g.abs() <= tol {
            cols.push((Slot::Known(r), ev.g_jacobian.row(r).transpose()));
        }
    }
    for t in 0..task.horizon {
        let p = param.constraint_state(demo, t);
        if param.value(&p, theta) < -tol {
            continue;
        }
        for (k, (_, _, val, grad)) in param
            .constituent_values_and_grads(&p, theta)
            .into_iter()
            .enumerate()
        {
            if val.abs() > tol {
                continue;
            }
            let mut c = DVector::zeros(n);
            for (d, &coord) in param.selector.iter().enumerate() {
                c[lay.state(t, coord)] = grad[d];
            }
            cols.push((Slot::Unknown(t, k), c));
        }
    }
    for r in 0..ev.h.len() {
        cols.push((Slot::Nu(r), ev.h_jacobian.row(r).transpose()));
    }
    let a = DMatrix::from_fn(n, cols.len(), |i, j| cols[j].1[i]);
    let c = DVector::from_vec(cost.gradient(demo, gamma));
    let mut g = a.transpose() * &a;
    let ridge = 1e-12 * g.diagonal().amax().max(1.0);
    for i in 0..g.nrows() {
        g[(i, i)] += ridge;
    }
    let nonneg: Vec<(DVector<f64>, f64)> = cols
        .iter()
        .enumerate()
        .filter(|(_, (s, _))| !matches!(s, Slot::Nu(_)))
        .map(|(j, _)| {
            let mut e = DVector::zeros(cols.len());
            e[j] = -1.0;
            (e, 0.0)
        })
        .collect();
    let sol = solve_qp(&QpProblem {
        g,
        a: a.transpose() * c,
        eq: Vec::new(),
        ineq: nonneg,
    })?;
    let mut m = KktMultipliers::zeros(task, param);
    for ((slot, _), &v) in cols.iter().zip(sol.x.iter()) {
        match *slot {
            Slot::Known(r) => m.lambda_known[r] = v.max(0.0),
            Slot::Unknown(t, k) => m.lambda_unknown[t][k] = v.max(0.0),
            Slot::Nu(r) => m.nu[r] = v,
        }
    }
    Ok(m)
}
