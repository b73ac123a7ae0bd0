use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::trajectory::Trajectory;
use crate::error::{Error, Result};

fn default_exponent() -> u32 {
    2
}

/// One term family `sum_t (r_{t+1} - r_t)^exponent` over state coordinate `coord`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CostGroup {
    pub coord: usize,
    #[serde(default = "default_exponent")]
    pub exponent: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Gamma {
    Known { values: Vec<f64> },
    Unknown { lower: Vec<f64>, upper: Vec<f64> },
}

/// `c(xi, gamma) = sum_g gamma_g sum_t (x_{t+1}[coord_g] - x_t[coord_g])^{exponent_g}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CostModel {
    pub groups: Vec<CostGroup>,
    pub gamma: Gamma,
}

/// The cost gradient as an affine function of gamma: `constant + sum_g gamma_g coeffs[g]`.
#[derive(Clone, Debug, PartialEq)]
pub struct CostGradient {
    pub constant: Vec<f64>,
    pub coeffs: Vec<Vec<f64>>,
}

impl CostGradient {
    pub fn at(&self, gamma: &[f64]) -> Vec<f64> {
        let mut g = self.constant.clone();
        for (w, c) in gamma.iter().zip(&self.coeffs) {
            for (gi, ci) in g.iter_mut().zip(c) {
                *gi += w * ci;
            }
        }
        g
    }
}

impl CostModel {
    /// Squared-difference path length over the listed coordinates with known weights.
    pub fn quadratic(coords: &[usize], weights: &[f64]) -> Self {
        Self {
            groups: coords
                .iter()
                .map(|&coord| CostGroup { coord, exponent: 2 })
                .collect(),
            gamma: Gamma::Known {
                values: weights.to_vec(),
            },
        }
    }

    pub fn num_groups(&self) -> usize {
        self.groups.len()
    }

    pub fn known_gamma(&self) -> Option<&[f64]> {
        match &self.gamma {
            Gamma::Known { values } => Some(values),
            Gamma::Unknown { .. } => None,
        }
    }

    pub fn with_known(&self, values: Vec<f64>) -> Self {
        Self {
            groups: self.groups.clone(),
            gamma: Gamma::Known { values },
        }
    }

    pub fn validate(&self, n_x: usize) -> Result<()> {
        let bad = |m: String| Err(Error::Spec(m));
        if self.groups.is_empty() {
            return bad("cost needs at least one group".into());
        }
        for (i, g) in self.groups.iter().enumerate() {
            if g.coord >= n_x {
                return bad(format!("cost.groups[{i}].coord out of range"));
            }
            if g.exponent < 2 || g.exponent % 2 != 0 {
                return bad(format!(
                    "cost.groups[{i}].exponent must be even and at least 2"
                ));
            }
        }
        let n = self.groups.len();
        match &self.gamma {
            Gamma::Known { values } => {
                if values.len() != n {
                    return bad(format!("cost.gamma.values must have length {n}"));
                }
            }
            Gamma::Unknown { lower, upper } => {
                if lower.len() != n || upper.len() != n {
                    return bad(format!("cost.gamma bounds must have length {n}"));
                }
                for i in 0..n {
                    if !(lower[i].is_finite() && upper[i].is_finite() && lower[i] <= upper[i]) {
                        return bad(format!(
                            "cost.gamma box entry {i} must be finite with lower <= upper"
                        ));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn value(&self, traj: &Trajectory, gamma: &[f64]) -> f64 {
        let mut c = 0.0;
        for (g, w) in self.groups.iter().zip(gamma) {
            for pair in traj.states.windows(2) {
                c += w * (pair[1][g.coord] - pair[0][g.coord]).powi(g.exponent as i32);
            }
        }
        c
    }

    /// Per-group gradient coefficient vectors with respect to the flattened trajectory.
    pub fn gradient_terms(&self, traj: &Trajectory) -> CostGradient {
        let lay = traj.layout();
        let coeffs = self
            .groups
            .iter()
            .map(|g| {
                let mut v = vec![0.0; lay.len()];
                let e = g.exponent as i32;
                for t in 0..traj.horizon() - 1 {
                    let d = traj.states[t + 1][g.coord] - traj.states[t][g.coord];
                    let dd = e as f64 * d.powi(e - 1);
                    v[lay.state(t + 1, g.coord)] += dd;
                    v[lay.state(t, g.coord)] -= dd;
                }
                v
            })
            .collect();
        CostGradient {
            constant: vec![0.0; lay.len()],
            coeffs,
        }
    }

    pub fn gradient(&self, traj: &Trajectory, gamma: &[f64]) -> Vec<f64> {
        self.gradient_terms(traj).at(gamma)
    }

    pub fn hessian(&self, traj: &Trajectory, gamma: &[f64]) -> DMatrix<f64> {
        let lay = traj.layout();
        let mut h = DMatrix::zeros(lay.len(), lay.len());
        for (g, w) in self.groups.iter().zip(gamma) {
            let e = g.exponent as i32;
            for t in 0..traj.horizon() - 1 {
                let d = traj.states[t + 1][g.coord] - traj.states[t][g.coord];
                let k = w * (e * (e - 1)) as f64 * d.powi(e - 2);
                let (a, b) = (lay.state(t, g.coord), lay.state(t + 1, g.coord));
                h[(a, a)] += k;
                h[(b, b)] += k;
                h[(a, b)] -= k;
                h[(b, a)] -= k;
            }
        }
        h
    }
}
