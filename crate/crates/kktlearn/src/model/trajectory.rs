use serde::{Deserialize, Serialize};

use crate::error::{dim_err, Result};

/// Index map for the flattened decision vector `[x_1..x_T, u_1..u_{T-1}]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Layout {
    pub horizon: usize,
    pub n_x: usize,
    pub n_u: usize,
}

impl Layout {
    pub fn new(horizon: usize, n_x: usize, n_u: usize) -> Self {
        Self { horizon, n_x, n_u }
    }

    pub fn len(&self) -> usize {
        self.horizon * self.n_x + (self.horizon - 1) * self.n_u
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Position of coordinate `i` of state `t` (zero-based).
    pub fn state(&self, t: usize, i: usize) -> usize {
        t * self.n_x + i
    }

    /// Position of coordinate `i` of control `t` (zero-based).
    pub fn control(&self, t: usize, i: usize) -> usize {
        self.horizon * self.n_x + t * self.n_u + i
    }
}

/// States `x_1..x_T` and controls `u_1..u_{T-1}` with unit time step.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub states: Vec<Vec<f64>>,
    pub controls: Vec<Vec<f64>>,
}

impl Trajectory {
    pub fn new(states: Vec<Vec<f64>>, controls: Vec<Vec<f64>>) -> Result<Self> {
        let traj = Self { states, controls };
        traj.validate()?;
        Ok(traj)
    }

    pub fn validate(&self) -> Result<()> {
        if self.states.len() < 2 {
            return dim_err(format!(
                "horizon must be at least 2, got {}",
                self.states.len()
            ));
        }
        if self.controls.len() + 1 != self.states.len() {
            return dim_err(format!(
                "{} states need {} controls, got {}",
                self.states.len(),
                self.states.len() - 1,
                self.controls.len()
            ));
        }
        let n_x = self.states[0].len();
        if let Some(t) = self.states.iter().position(|x| x.len() != n_x) {
            return dim_err(format!(
                "state {t} has dimension {} instead of {n_x}",
                self.states[t].len()
            ));
        }
        let n_u = self.controls[0].len();
        if let Some(t) = self.controls.iter().position(|u| u.len() != n_u) {
            return dim_err(format!(
                "control {t} has dimension {} instead of {n_u}",
                self.controls[t].len()
            ));
        }
        Ok(())
    }

    pub fn horizon(&self) -> usize {
        self.states.len()
    }

    pub fn n_x(&self) -> usize {
        self.states[0].len()
    }

    pub fn n_u(&self) -> usize {
        self.controls.first().map_or(0, |u| u.len())
    }

    pub fn layout(&self) -> Layout {
        Layout::new(self.horizon(), self.n_x(), self.n_u())
    }

    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.layout().len());
        for x in &self.states {
            out.extend_from_slice(x);
        }
        for u in &self.controls {
            out.extend_from_slice(u);
        }
        out
    }

    pub fn unflatten(xi: &[f64], layout: Layout) -> Result<Self> {
        if layout.horizon < 2 {
            return dim_err("horizon must be at least 2");
        }
        if xi.len() != layout.len() {
            return dim_err(format!(
                "flat vector has length {} but layout needs {}",
                xi.len(),
                layout.len()
            ));
        }
        let split = layout.horizon * layout.n_x;
        let states = xi[..split]
            .chunks(layout.n_x.max(1))
            .map(|c| c.to_vec())
            .collect::<Vec<_>>();
        let controls = if layout.n_u == 0 {
            vec![Vec::new(); layout.horizon - 1]
        } else {
            xi[split..].chunks(layout.n_u).map(|c| c.to_vec()).collect()
        };
        Trajectory::new(states, controls)
    }

    /// Straight line between two states with the controls of a single integrator.
    pub fn straight_line(start: &[f64], goal: &[f64], horizon: usize) -> Self {
        let n = horizon - 1;
        let states: Vec<Vec<f64>> = (0..horizon)
            .map(|t| {
                let s = t as f64 / n as f64;
                start
                    .iter()
                    .zip(goal)
                    .map(|(a, b)| a + s * (b - a))
                    .collect()
            })
            .collect();
        let controls = states
            .windows(2)
            .map(|w| w[1].iter().zip(&w[0]).map(|(b, a)| b - a).collect())
            .collect();
        Self { states, controls }
    }
}
