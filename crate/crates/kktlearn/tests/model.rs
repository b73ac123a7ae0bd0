use kktlearn::model::*;
use kktlearn::problem::Problem;
use kktlearn::scenarios;
use proptest::prelude::*;

fn rel_close(analytic: f64, numeric: f64) -> bool {
    (analytic - numeric).abs() <= 1e-6 * analytic.abs().max(numeric.abs()).max(1.0)
}

/// Five-point central difference of `f` along coordinate `k`.
fn fd5(x: &[f64], k: usize, f: impl Fn(&[f64]) -> f64) -> f64 {
    let h = 1e-4;
    let at = |s: f64| {
        let mut y = x.to_vec();
        y[k] += s * h;
        f(&y)
    };
    (8.0 * (at(1.0) - at(-1.0)) - (at(2.0) - at(-2.0))) / (12.0 * h)
}

fn traj_from(values: &[f64], horizon: usize, n_x: usize, n_u: usize) -> Trajectory {
    let states = (0..horizon)
        .map(|t| values[t * n_x..(t + 1) * n_x].to_vec())
        .collect();
    let off = horizon * n_x;
    let controls = (0..horizon - 1)
        .map(|t| values[off + t * n_u..off + (t + 1) * n_u].to_vec())
        .collect();
    Trajectory::new(states, controls).unwrap()
}

fn task(horizon: usize) -> TaskSpec {
    TaskSpec {
        n_x: 2,
        n_u: 2,
        horizon,
        dynamics: Dynamics::single_integrator(2),
        start: vec![0.0, 0.0],
        goal: vec![1.0, 1.0],
        known_constraints: vec![
            KnownConstraint::ControlNormSquared { bound: 1.0 },
            KnownConstraint::StateBox {
                coord: 1,
                lower: Some(-2.0),
                upper: Some(3.0),
            },
            KnownConstraint::ControlBox {
                coord: 0,
                lower: None,
                upper: Some(0.5),
            },
        ],
    }
}

proptest! {
    #[test]
    fn flatten_round_trip(
        (horizon, n_x, n_u, values) in (2usize..6, 1usize..4, 1usize..3).prop_flat_map(|(t, nx, nu)| {
            (Just(t), Just(nx), Just(nu), prop::collection::vec(-10.0f64..10.0, t * nx + (t - 1) * nu))
        })
    ) {
        let tr = traj_from(&values, horizon, n_x, n_u);
        let flat = tr.flatten();
        prop_assert_eq!(&flat, &values);
        prop_assert_eq!(Trajectory::unflatten(&flat, tr.layout()).unwrap(), tr);
    }

    #[test]
    fn known_jacobians_match_finite_differences(values in prop::collection::vec(-1.5f64..1.5, 4 * 2 + 3 * 2)) {
        let task = task(4);
        let tr = traj_from(&values, 4, 2, 2);
        let ev = task.eval_known(&tr).unwrap();
        let eval = |v: &[f64]| task.eval_known(&traj_from(v, 4, 2, 2)).unwrap();
        for k in 0..values.len() {
            for r in 0..ev.h.len() {
                let fd = fd5(&values, k, |v| eval(v).h[r]);
                prop_assert!(rel_close(ev.h_jacobian[(r, k)], fd), "h row {} col {}", r, k);
            }
            for r in 0..ev.g.len() {
                let fd = fd5(&values, k, |v| eval(v).g[r]);
                prop_assert!(rel_close(ev.g_jacobian[(r, k)], fd), "g row {} col {}", r, k);
            }
        }
    }

    #[test]
    fn cost_gradient_matches_finite_differences(
        values in prop::collection::vec(-1.0f64..1.0, 4 * 2 + 3 * 2),
        gamma in prop::collection::vec(0.001f64..2.0, 20),
    ) {
        let cost = CostModel { groups: scenarios::set_b_groups(), gamma: Gamma::Known { values: gamma.clone() } };
        let tr = traj_from(&values, 4, 2, 2);
        let grad = cost.gradient(&tr, &gamma);
        for k in 0..values.len() {
            let fd = fd5(&values, k, |v| cost.value(&traj_from(v, 4, 2, 2), &gamma));
            prop_assert!(rel_close(grad[k], fd), "coordinate {}: {} vs {}", k, grad[k], fd);
        }
    }

    #[test]
    fn constraint_gradients_match_finite_differences(p in prop::collection::vec(-2.0f64..2.0, 2), t in -1.0f64..1.0) {
        let families = [
            (scenarios::planar_boxes(2, [(-3.0, 3.0), (-3.0, 3.0)]), vec![-1.0, 0.5, -0.5, 1.0, 0.2, 1.2, -1.0, 2.0]),
            (ConstraintParameterization {
                family: Family::OffsetNonlinear { polynomial: scenarios::nonlinear_polynomial() },
                theta_lower: vec![-10.0],
                theta_upper: vec![10.0],
                selector: vec![0, 1],
            }, vec![2.0 + t]),
            (scenarios::ellipse_param(), vec![0.3 * t, 1.0, 0.5]),
        ];
        for (param, theta) in &families {
            for (k, (_, _, _, grad)) in param.constituent_values_and_grads(&p, theta).into_iter().enumerate() {
                for d in 0..2 {
                    let fd = fd5(&p, d, |q| param.constituent_values_and_grads(q, theta)[k].2);
                    prop_assert!(rel_close(grad[d], fd), "{} constituent {} dim {}", param.family_name(), k, d);
                }
            }
        }
    }

    #[test]
    fn p_gradient_does_not_depend_on_theta(p in prop::collection::vec(-2.0f64..2.0, 2), a in -1.0f64..1.0, b in -1.0f64..1.0) {
        let boxes = scenarios::planar_boxes(1, [(-3.0, 3.0), (-3.0, 3.0)]);
        let g1 = boxes.constituent_values_and_grads(&p, &[a, 1.0, b, 1.5]);
        let g2 = boxes.constituent_values_and_grads(&p, &[-2.0, a + 2.0, -1.0, b + 2.0]);
        for (x, y) in g1.iter().zip(&g2) {
            prop_assert_eq!(&x.3, &y.3);
        }
        let half = ConstraintParameterization {
            family: Family::HalfspaceUnion {
                polytopes: vec![vec![Halfspace { normal: vec![1.0, 1.0], offset: 0.5, theta_coeffs: vec![(0, 1.0)] }]],
            },
            theta_lower: vec![-5.0],
            theta_upper: vec![5.0],
            selector: vec![0, 1],
        };
        prop_assert_eq!(half.grad_p(&p, &[a]), half.grad_p(&p, &[b]));
        let nl = ConstraintParameterization {
            family: Family::OffsetNonlinear { polynomial: scenarios::nonlinear_polynomial() },
            theta_lower: vec![-10.0],
            theta_upper: vec![10.0],
            selector: vec![0, 1],
        };
        prop_assert_eq!(nl.grad_p(&p, &[a]), nl.grad_p(&p, &[b]));
    }

    #[test]
    fn single_families_are_affine_in_theta(p in prop::collection::vec(-2.0f64..2.0, 2), s in 0.0f64..1.0) {
        let e = scenarios::ellipse_param();
        let t1 = [0.2, 1.0, 0.3];
        let t2 = [-0.5, 1.8, 1.2];
        let mix: Vec<f64> = t1.iter().zip(&t2).map(|(a, b)| s * a + (1.0 - s) * b).collect();
        let lhs = e.value(&p, &mix);
        let rhs = s * e.value(&p, &t1) + (1.0 - s) * e.value(&p, &t2);
        prop_assert!((lhs - rhs).abs() <= 1e-9);
    }
}

#[test]
fn scenario_problem_round_trips_through_json() {
    let p = scenarios::build("fig2-left").unwrap();
    let text = p.to_json().unwrap();
    assert_eq!(Problem::from_json(&text).unwrap(), p);
}

#[test]
fn schema_errors_name_the_field() {
    let p = scenarios::build("fig2-left").unwrap();
    let mut doc: serde_json::Value = serde_json::from_str(&p.to_json().unwrap()).unwrap();
    doc["task"]["horizon"] = serde_json::json!("five");
    let e = Problem::from_json(&doc.to_string())
        .unwrap_err()
        .to_string();
    assert!(e.contains("task.horizon"), "{e}");

    let mut doc: serde_json::Value = serde_json::from_str(&p.to_json().unwrap()).unwrap();
    doc["surprise"] = serde_json::json!(1);
    let e = Problem::from_json(&doc.to_string())
        .unwrap_err()
        .to_string();
    assert!(e.contains("surprise"), "{e}");
}

#[test]
fn validation_rejects_demo_with_wrong_horizon() {
    let mut p = scenarios::build("fig2-left").unwrap();
    p.demonstrations[0].states.pop();
    p.demonstrations[0].controls.pop();
    let e = Problem::from_json(&p.to_json().unwrap())
        .unwrap_err()
        .to_string();
    assert!(e.contains("demonstrations[0]"), "{e}");
}
