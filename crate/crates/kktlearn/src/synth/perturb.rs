use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::model::{ConstraintParameterization, TaskSpec, Trajectory};

/// Recovers controls from states through the affine dynamics, failing if the states
/// are not reachable exactly.
pub fn recover_controls(task: &TaskSpec, states: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let d = &task.dynamics;
    let b = DMatrix::from_fn(task.n_x, task.n_u, |i, j| d.b[i][j]);
    let svd = b.clone().svd(true, true);
    let mut controls = Vec::with_capacity(states.len() - 1);
    for t in 0..states.len() - 1 {
        let drift = d.step(&states[t], &vec![0.0; task.n_u]);
        let rhs = DVector::from_iterator(
            task.n_x,
            states[t + 1].iter().zip(&drift).map(|(x, f)| x - f),
        );
        let u = svd
            .solve(&rhs, 1e-12)
            .map_err(|m| Error::Synthesis(m.to_string()))?;
        let res = (&b * &u - &rhs).amax();
        if res > 1e-9 {
            return Err(Error::Synthesis(format!(
                "state {} is not reachable from state {t} (residual {res:e})",
                t + 1
            )));
        }
        controls.push(u.iter().copied().collect());
    }
    Ok(controls)
}

/// Adds seeded Gaussian noise of standard deviation `sigma` to interior states, keeps the
/// endpoints, re-derives controls, and rejects results that leave the safe or known sets.
pub fn perturb(
    demo: &Trajectory,
    task: &TaskSpec,
    param: &ConstraintParameterization,
    theta_true: &[f64],
    sigma: f64,
    seed: u64,
) -> Result<Trajectory> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::Synthesis(format!(
            "sigma must be finite and nonnegative, got {sigma}"
        )));
    }
    task.check_trajectory(demo)?;
    if sigma == 0.0 {
        return Ok(demo.clone());
    }
    let normal = Normal::new(0.0, sigma).map_err(|e| Error::Synthesis(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut states = demo.states.clone();
    let last = states.len() - 1;
    for x in &mut states[1..last] {
        for v in x.iter_mut() {
            *v += normal.sample(&mut rng);
        }
    }
    let controls = recover_controls(task, &states)?;
    let out = Trajectory::new(states, controls)?;
    for t in 0..out.horizon() {
        let p = param.constraint_state(&out, t);
        if param.value(&p, theta_true) > 0.0 {
            return Err(Error::Synthesis(format!(
                "perturbed state {t} entered the unsafe set"
            )));
        }
    }
    let ev = task.eval_known(&out)?;
    if let Some(r) = ev.g.iter().position(|g| *g > 1e-9) {
        return Err(Error::Synthesis(format!(
            "perturbed trajectory violates known row {r}"
        )));
    }
    Ok(out)
}
