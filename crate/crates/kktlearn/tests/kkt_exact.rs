use kktlearn::kkt::{kkt_residual, EncodingMode, KktProgram};
use kktlearn::milp_ir::BigMConfig;
use kktlearn::model::{ConstraintParameterization, CostModel, Dynamics, TaskSpec, Trajectory};
use kktlearn::solver::{solve, CbcBackend, SolveOptions, SolveStatus};

fn task() -> TaskSpec {
    TaskSpec {
        n_x: 2,
        n_u: 2,
        horizon: 3,
        dynamics: Dynamics::single_integrator(2),
        start: vec![0.0, 0.0],
        goal: vec![2.0, 0.0],
        known_constraints: vec![],
    }
}

fn demo() -> Trajectory {
    Trajectory::new(
        vec![vec![0.0, 0.0], vec![1.0, 0.5], vec![2.0, 0.0]],
        vec![vec![1.0, 0.5], vec![1.0, -0.5]],
    )
    .unwrap()
}

/// Brute-force loose-KKT check at the single interior state: the cost pull must lie in the
/// cone spanned by `-a` over faces whose normal side is not strictly violated, and the
/// state must sit outside the open box.
fn oracle(theta: &[f64]) -> bool {
    let p = [1.0, 0.5];
    // 2 (x1 - x0) - 2 (x2 - x1)
    let pull = [
        2.0 * (p[0] - 0.0) - 2.0 * (2.0 - p[0]),
        2.0 * (p[1] - 0.0) - 2.0 * (0.0 - p[1]),
    ];
    let target = [-pull[0], -pull[1]];
    let faces: [([f64; 2], f64); 4] = [
        ([-1.0, 0.0], -theta[0]),
        ([1.0, 0.0], theta[1]),
        ([0.0, -1.0], -theta[2]),
        ([0.0, 1.0], theta[3]),
    ];
    let outside = faces
        .iter()
        .any(|(a, b)| a[0] * p[0] + a[1] * p[1] >= b - 1e-9);
    if !outside {
        return false;
    }
    let dirs: Vec<[f64; 2]> = faces
        .iter()
        .filter(|(a, b)| a[0] * p[0] + a[1] * p[1] - b <= 1e-9)
        .map(|(a, _)| [-a[0], -a[1]])
        .collect();
    let norm = (target[0] * target[0] + target[1] * target[1]).sqrt();
    if norm < 1e-12 {
        return true;
    }
    for (i, d) in dirs.iter().enumerate() {
        let cross = d[0] * target[1] - d[1] * target[0];
        if cross.abs() < 1e-12 && d[0] * target[0] + d[1] * target[1] > 0.0 {
            return true;
        }
        for e in &dirs[i + 1..] {
            let det = d[0] * e[1] - d[1] * e[0];
            if det.abs() < 1e-12 {
                continue;
            }
            let l1 = (target[0] * e[1] - target[1] * e[0]) / det;
            let l2 = (d[0] * target[1] - d[1] * target[0]) / det;
            if l1 >= -1e-12 && l2 >= -1e-12 {
                return true;
            }
        }
    }
    false
}

fn milp_feasible(theta: &[f64]) -> Option<bool> {
    let cbc = CbcBackend::locate().ok()?;
    let mut param = ConstraintParameterization::box_union(1, vec![0, 1], -5.0, 5.0);
    param.theta_lower = theta.to_vec();
    param.theta_upper = theta.to_vec();
    let cost = CostModel::quadratic(&[0, 1], &[1.0, 1.0]);
    let mut prog =
        KktProgram::new(&param, &cost, &BigMConfig::default(), EncodingMode::Exact).unwrap();
    prog.add_demo(&demo(), &task()).unwrap();
    prog.finish().unwrap();
    let r = solve(&prog.model, &cbc, &SolveOptions::default());
    match r.status {
        SolveStatus::Infeasible => Some(false),
        s if s.has_solution() => {
            let vals = r.values.unwrap();
            let mult = prog.blocks[0].multipliers(&vals, &task(), &param);
            let res = kkt_residual(&demo(), &task(), &cost, None, &param, theta, &mult).unwrap();
            assert!(res.stationarity <= 1e-6, "{res:?}");
            Some(true)
        }
        other => panic!("unexpected status {other:?}: {}", r.diagnostics),
    }
}

#[test]
fn feasible_set_matches_oracle_on_grid() {
    if CbcBackend::locate().is_err() {
        eprintln!("cbc not found; skipping");
        return;
    }
    let mut feasible = 0;
    for &ux in &[0.6, 0.8, 1.0, 1.2, 1.5] {
        for &uy in &[0.3, 0.45, 0.5, 0.7, 1.0] {
            let theta = [0.5, ux, 0.2, uy];
            let expected = oracle(&theta);
            // closed form: top face active, or the top face hides the state while the right face exposes it
            assert_eq!(
                expected,
                uy == 0.5 || (uy >= 0.5 && ux <= 1.0),
                "oracle at {theta:?}"
            );
            assert_eq!(milp_feasible(&theta), Some(expected), "theta {theta:?}");
            feasible += expected as usize;
        }
    }
    assert!(feasible > 0 && feasible < 25);
}
