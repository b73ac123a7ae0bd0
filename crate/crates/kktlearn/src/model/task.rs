use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::trajectory::{Layout, Trajectory};
use crate::error::{dim_err, Error, Result};

/// Affine time-invariant update `x_{t+1} = A x_t + B u_t + c`, matrices stored row-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dynamics {
    pub a: Vec<Vec<f64>>,
    pub b: Vec<Vec<f64>>,
    pub c: Vec<f64>,
}

impl Dynamics {
    /// Single integrator `x_{t+1} = x_t + u_t`.
    pub fn single_integrator(n: usize) -> Self {
        let eye: Vec<Vec<f64>> = (0..n)
            .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect();
        Self {
            a: eye.clone(),
            b: eye,
            c: vec![0.0; n],
        }
    }

    pub fn step(&self, x: &[f64], u: &[f64]) -> Vec<f64> {
        (0..self.c.len())
            .map(|i| {
                let ax: f64 = self.a[i].iter().zip(x).map(|(a, x)| a * x).sum();
                let bu: f64 = self.b[i].iter().zip(u).map(|(b, u)| b * u).sum();
                ax + bu + self.c[i]
            })
            .collect()
    }
}

/// Smooth known inequality families, all written as `g_k <= 0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum KnownConstraint {
    /// `|u_t|^2 <= bound^2` for every control.
    ControlNormSquared { bound: f64 },
    /// `lower <= x_t[coord] <= upper` for every state.
    StateBox {
        coord: usize,
        #[serde(default)]
        lower: Option<f64>,
        #[serde(default)]
        upper: Option<f64>,
    },
    /// `lower <= u_t[coord] <= upper` for every control.
    ControlBox {
        coord: usize,
        #[serde(default)]
        lower: Option<f64>,
        #[serde(default)]
        upper: Option<f64>,
    },
}

/// Identifies one scalar known-inequality row.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct KnownRow {
    pub constraint: usize,
    pub t: usize,
    /// 0 for a norm or lower-bound row, 1 for an upper-bound row.
    pub side: usize,
}

/// The known parts of the forward problem.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub n_x: usize,
    pub n_u: usize,
    pub horizon: usize,
    pub dynamics: Dynamics,
    pub start: Vec<f64>,
    pub goal: Vec<f64>,
    #[serde(default)]
    pub known_constraints: Vec<KnownConstraint>,
}

/// Values and exact Jacobians of every known row at a trajectory.
#[derive(Clone, Debug)]
pub struct KnownEval {
    pub h: Vec<f64>,
    pub g: Vec<f64>,
    pub h_jacobian: DMatrix<f64>,
    pub g_jacobian: DMatrix<f64>,
}

impl TaskSpec {
    pub fn layout(&self) -> Layout {
        Layout::new(self.horizon, self.n_x, self.n_u)
    }

    pub fn with_endpoints(&self, start: Vec<f64>, goal: Vec<f64>) -> Self {
        Self {
            start,
            goal,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Spec(m));
        if self.horizon < 2 {
            return bad(format!("horizon must be at least 2, got {}", self.horizon));
        }
        if self.n_x == 0 {
            return bad("n_x must be positive".into());
        }
        let d = &self.dynamics;
        if d.a.len() != self.n_x || d.a.iter().any(|r| r.len() != self.n_x) {
            return bad(format!("dynamics.a must be {0}x{0}", self.n_x));
        }
        if d.b.len() != self.n_x || d.b.iter().any(|r| r.len() != self.n_u) {
            return bad(format!("dynamics.b must be {}x{}", self.n_x, self.n_u));
        }
        if d.c.len() != self.n_x {
            return bad(format!("dynamics.c must have length {}", self.n_x));
        }
        if self.start.len() != self.n_x || self.goal.len() != self.n_x {
            return bad(format!("start and goal must have length {}", self.n_x));
        }
        for (i, k) in self.known_constraints.iter().enumerate() {
            match *k {
                KnownConstraint::ControlNormSquared { bound } => {
                    if !(bound.is_finite() && bound >= 0.0) {
                        return bad(format!(
                            "known_constraints[{i}].bound must be finite and nonnegative"
                        ));
                    }
                }
                KnownConstraint::StateBox { coord, .. } if coord >= self.n_x => {
                    return bad(format!("known_constraints[{i}].coord out of range"));
                }
                KnownConstraint::ControlBox { coord, .. } if coord >= self.n_u => {
                    return bad(format!("known_constraints[{i}].coord out of range"));
                }
                _ => {}
            }
        }
        Ok(())
    }

    pub fn check_trajectory(&self, traj: &Trajectory) -> Result<()> {
        traj.validate()?;
        if traj.horizon() != self.horizon || traj.n_x() != self.n_x || traj.n_u() != self.n_u {
            return dim_err(format!(
                "trajectory is T={} n_x={} n_u={} but task is T={} n_x={} n_u={}",
                traj.horizon(),
                traj.n_x(),
                traj.n_u(),
                self.horizon,
                self.n_x,
                self.n_u
            ));
        }
        Ok(())
    }

    pub fn num_equality_rows(&self) -> usize {
        (self.horizon - 1) * self.n_x + 2 * self.n_x
    }

    /// Scalar known-inequality rows in evaluation order.
    pub fn known_rows(&self) -> Vec<KnownRow> {
        let mut rows = Vec::new();
        for (ci, k) in self.known_constraints.iter().enumerate() {
            match k {
                KnownConstraint::ControlNormSquared { .. } => {
                    for t in 0..self.horizon - 1 {
                        rows.push(KnownRow {
                            constraint: ci,
                            t,
                            side: 0,
                        });
                    }
                }
                KnownConstraint::StateBox { lower, upper, .. }
                | KnownConstraint::ControlBox { lower, upper, .. } => {
                    let steps = if matches!(k, KnownConstraint::StateBox { .. }) {
                        self.horizon
                    } else {
                        self.horizon - 1
                    };
                    for t in 0..steps {
                        if lower.is_some() {
                            rows.push(KnownRow {
                                constraint: ci,
                                t,
                                side: 0,
                            });
                        }
                        if upper.is_some() {
                            rows.push(KnownRow {
                                constraint: ci,
                                t,
                                side: 1,
                            });
                        }
                    }
                }
            }
        }
        rows
    }

    /// Equality residuals h (dynamics, then start, then goal), known inequality values g,
    /// and their Jacobians with respect to the flattened trajectory.
    pub fn eval_known(&self, traj: &Trajectory) -> Result<KnownEval> {
        self.check_trajectory(traj)?;
        let lay = self.layout();
        let n = lay.len();
        let (nx, nu, big_t) = (self.n_x, self.n_u, self.horizon);
        let m_eq = self.num_equality_rows();
        let mut h = vec![0.0; m_eq];
        let mut hj = DMatrix::zeros(m_eq, n);
        for t in 0..big_t - 1 {
            let pred = self.dynamics.step(&traj.states[t], &traj.controls[t]);
            for i in 0..nx {
                let r = t * nx + i;
                h[r] = traj.states[t + 1][i] - pred[i];
                hj[(r, lay.state(t + 1, i))] += 1.0;
                for j in 0..nx {
                    hj[(r, lay.state(t, j))] -= self.dynamics.a[i][j];
                }
                for j in 0..nu {
                    hj[(r, lay.control(t, j))] -= self.dynamics.b[i][j];
                }
            }
        }
        let base = (big_t - 1) * nx;
        for i in 0..nx {
            h[base + i] = traj.states[0][i] - self.start[i];
            hj[(base + i, lay.state(0, i))] = 1.0;
            h[base + nx + i] = traj.states[big_t - 1][i] - self.goal[i];
            hj[(base + nx + i, lay.state(big_t - 1, i))] = 1.0;
        }

        let rows = self.known_rows();
        let mut g = vec![0.0; rows.len()];
        let mut gj = DMatrix::zeros(rows.len(), n);
        for (r, row) in rows.iter().enumerate() {
            match self.known_constraints[row.constraint] {
                KnownConstraint::ControlNormSquared { bound } => {
                    let u = &traj.controls[row.t];
                    g[r] = u.iter().map(|v| v * v).sum::<f64>() - bound * bound;
                    for (j, v) in u.iter().enumerate() {
                        gj[(r, lay.control(row.t, j))] = 2.0 * v;
                    }
                }
                KnownConstraint::StateBox {
                    coord,
                    lower,
                    upper,
                } => {
                    let v = traj.states[row.t][coord];
                    let col = lay.state(row.t, coord);
                    box_row(row.side, v, lower, upper, &mut g[r], &mut gj[(r, col)]);
                }
                KnownConstraint::ControlBox {
                    coord,
                    lower,
                    upper,
                } => {
                    let v = traj.controls[row.t][coord];
                    let col = lay.control(row.t, coord);
                    box_row(row.side, v, lower, upper, &mut g[r], &mut gj[(r, col)]);
                }
            }
        }
        Ok(KnownEval {
            h,
            g,
            h_jacobian: hj,
            g_jacobian: gj,
        })
    }

    /// Hessian of the known inequality row `r` (nonzero only for norm rows).
    pub fn known_row_hessian_diag(&self, row: &KnownRow) -> Vec<(usize, f64)> {
        match self.known_constraints[row.constraint] {
            KnownConstraint::ControlNormSquared { .. } => {
                let lay = self.layout();
                (0..self.n_u)
                    .map(|j| (lay.control(row.t, j), 2.0))
                    .collect()
            }
            _ => Vec::new(),
        }
    }
}

fn box_row(side: usize, v: f64, lower: Option<f64>, upper: Option<f64>, g: &mut f64, d: &mut f64) {
    if side == 0 {
        *g = lower.unwrap_or(f64::NEG_INFINITY) - v;
        *d = -1.0;
    } else {
        *g = v - upper.unwrap_or(f64::INFINITY);
        *d = 1.0;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn task(t: usize) -> TaskSpec {
        TaskSpec {
            n_x: 2,
            n_u: 2,
            horizon: t,
            dynamics: Dynamics::single_integrator(2),
            start: vec![0.0, 0.0],
            goal: vec![3.0, 0.0],
            known_constraints: vec![KnownConstraint::ControlNormSquared { bound: 1.0 }],
        }
    }

    #[test]
    fn straight_line_satisfies_dynamics() {
        let tk = task(4);
        let traj = Trajectory::straight_line(&tk.start, &tk.goal, 4);
        let ev = tk.eval_known(&traj).unwrap();
        assert_eq!(ev.h.len(), 3 * 2 + 4);
        assert!(ev.h.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn perturbed_state_hits_two_dynamics_blocks() {
        let tk = task(4);
        let mut traj = Trajectory::straight_line(&tk.start, &tk.goal, 4);
        traj.states[1][1] += 0.3;
        let ev = tk.eval_known(&traj).unwrap();
        let nonzero: Vec<f64> = ev.h.iter().copied().filter(|v| v.abs() > 1e-12).collect();
        assert_eq!(nonzero.len(), 2);
        assert!(nonzero.iter().all(|v| (v.abs() - 0.3).abs() < 1e-12));
    }

    #[test]
    fn norm_row_value_and_gradient() {
        let tk = TaskSpec {
            horizon: 2,
            ..task(2)
        };
        let traj =
            Trajectory::new(vec![vec![0.0, 0.0], vec![0.6, 0.8]], vec![vec![0.6, 0.8]]).unwrap();
        let ev = tk.eval_known(&traj).unwrap();
        assert!(ev.g[0].abs() < 1e-12);
        let lay = tk.layout();
        assert!((ev.g_jacobian[(0, lay.control(0, 0))] - 1.2).abs() < 1e-12);
        assert!((ev.g_jacobian[(0, lay.control(0, 1))] - 1.6).abs() < 1e-12);
    }

    #[test]
    fn box_rows_follow_declaration() {
        let mut tk = task(3);
        tk.known_constraints = vec![KnownConstraint::StateBox {
            coord: 1,
            lower: Some(-1.0),
            upper: None,
        }];
        assert_eq!(tk.known_rows().len(), 3);
        let traj = Trajectory::straight_line(&tk.start, &tk.goal, 3);
        let ev = tk.eval_known(&traj).unwrap();
        assert!(ev.g.iter().all(|v| (*v + 1.0).abs() < 1e-12));
    }

    #[test]
    fn validate_catches_bad_matrix() {
        let mut tk = task(3);
        tk.dynamics.b = vec![vec![1.0]];
        assert!(tk.validate().is_err());
    }
}
