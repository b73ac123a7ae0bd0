use kktlearn::kkt::kkt_residual;
use kktlearn::model::{
    ConstraintParameterization, CostModel, Dynamics, KnownConstraint, TaskSpec, Trajectory,
};
use kktlearn::synth::{perturb, synthesize, Hint, RouteHint, SynthOptions};

fn task(horizon: usize) -> TaskSpec {
    TaskSpec {
        n_x: 2,
        n_u: 2,
        horizon,
        dynamics: Dynamics::single_integrator(2),
        start: vec![0.0, 0.0],
        goal: vec![4.0, 0.0],
        known_constraints: vec![KnownConstraint::ControlNormSquared { bound: 1.0 }],
    }
}

fn obstacle() -> (ConstraintParameterization, Vec<f64>) {
    (
        ConstraintParameterization::box_union(1, vec![0, 1], -5.0, 9.0),
        vec![1.5, 2.5, -0.5, 0.5],
    )
}

fn cost() -> CostModel {
    CostModel::quadratic(&[0, 1], &[1.0, 1.0])
}

#[test]
fn free_hint_gives_straight_line() {
    let tk = task(9);
    let (param, _) = obstacle();
    let far = vec![7.0, 8.0, 7.0, 8.0];
    let s = synthesize(
        &tk,
        &cost(),
        &param,
        &far,
        &RouteHint::free(9),
        &SynthOptions::default(),
    )
    .unwrap();
    let line = Trajectory::straight_line(&tk.start, &tk.goal, 9);
    for (a, b) in s.trajectory.states.iter().zip(&line.states) {
        assert!((a[0] - b[0]).abs() < 1e-9 && (a[1] - b[1]).abs() < 1e-9);
    }
    assert!(s.residual.certified(1e-9));
}

#[test]
fn above_hint_grazes_top_face() {
    let tk = task(11);
    let (param, theta) = obstacle();
    // top face of the single box is face index 3
    let hint = RouteHint::free(11).with_face(3, 8, 0, 3);
    let s = synthesize(
        &tk,
        &cost(),
        &param,
        &theta,
        &hint,
        &SynthOptions::default(),
    )
    .unwrap();
    let on_top: Vec<usize> = (0..11)
        .filter(|&t| (s.trajectory.states[t][1] - 0.5).abs() < 1e-9)
        .collect();
    assert!(!on_top.is_empty());
    for &t in &on_top {
        let x = s.trajectory.states[t][0];
        if x > 1.5 && x < 2.5 {
            assert!(s.multipliers.lambda_unknown[t][3] >= 0.0);
        }
    }
    assert!(on_top
        .iter()
        .any(|&t| s.multipliers.lambda_unknown[t][3] > 1e-6));
    let r = kkt_residual(
        &s.trajectory,
        &tk,
        &cost(),
        None,
        &param,
        &theta,
        &s.multipliers,
    )
    .unwrap();
    assert!(r.certified(1e-6), "{r:?}");
}

#[test]
fn below_hint_mirrors_above() {
    let tk = task(11);
    let (param, theta) = obstacle();
    let above = synthesize(
        &tk,
        &cost(),
        &param,
        &theta,
        &RouteHint::free(11).with_face(3, 8, 0, 3),
        &SynthOptions::default(),
    )
    .unwrap();
    let below = synthesize(
        &tk,
        &cost(),
        &param,
        &theta,
        &RouteHint::free(11).with_face(3, 8, 0, 2),
        &SynthOptions::default(),
    )
    .unwrap();
    for (a, b) in above.trajectory.states.iter().zip(&below.trajectory.states) {
        assert!((a[0] - b[0]).abs() < 1e-9);
        assert!((a[1] + b[1]).abs() < 1e-9);
    }
    assert!(below.residual.certified(1e-6));
    assert!((above.cost - below.cost).abs() < 1e-9);
}

#[test]
fn hints_inside_obstacle_are_added() {
    let tk = task(11);
    let (param, theta) = obstacle();
    // no hints at all: refinement must push the states out of the box
    let s = synthesize(
        &tk,
        &cost(),
        &param,
        &theta,
        &RouteHint::free(11),
        &SynthOptions::default(),
    )
    .unwrap();
    for t in 0..11 {
        let p = param.constraint_state(&s.trajectory, t);
        assert!(param.value(&p, &theta) <= 1e-9);
    }
    assert!(s.hint.0.iter().any(|h| matches!(h, Hint::Face { .. })));
}

#[test]
fn perturb_is_seeded_and_pins_endpoints() {
    let tk = task(9);
    let (param, _) = obstacle();
    let far = vec![7.0, 8.0, 7.0, 8.0];
    let s = synthesize(
        &tk,
        &cost(),
        &param,
        &far,
        &RouteHint::free(9),
        &SynthOptions::default(),
    )
    .unwrap();
    assert_eq!(
        perturb(&s.trajectory, &tk, &param, &far, 0.0, 1).unwrap(),
        s.trajectory
    );
    let a = perturb(&s.trajectory, &tk, &param, &far, 0.05, 7).unwrap();
    let b = perturb(&s.trajectory, &tk, &param, &far, 0.05, 7).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.states[0], s.trajectory.states[0]);
    assert_eq!(a.states[8], s.trajectory.states[8]);
    assert!(tk.eval_known(&a).unwrap().h.iter().all(|h| h.abs() < 1e-12));
}

#[test]
fn perturb_rejects_unsafe_result() {
    let tk = task(11);
    let (param, theta) = obstacle();
    let s = synthesize(
        &tk,
        &cost(),
        &param,
        &theta,
        &RouteHint::free(11).with_face(3, 8, 0, 3),
        &SynthOptions::default(),
    )
    .unwrap();
    // large noise pushes grazing states into the box for some seed
    let failures = (0..20)
        .filter(|&seed| perturb(&s.trajectory, &tk, &param, &theta, 0.2, seed).is_err())
        .count();
    assert!(failures > 0);
}
