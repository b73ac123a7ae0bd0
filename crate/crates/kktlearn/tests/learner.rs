use kktlearn::kkt::EncodingMode;
use kktlearn::learner::*;
use kktlearn::model::{ConstraintParameterization, Demonstration};
use kktlearn::scenarios;
use kktlearn::solver::CbcBackend;
use kktlearn::Error;

fn cbc() -> CbcBackend {
    CbcBackend::locate().expect("cbc available")
}

/// Independent point-in-box check with the per-dimension layout `[lo0, hi0, lo1, hi1]`.
fn strictly_inside(theta: &[f64], p: &[f64]) -> bool {
    p.iter()
        .enumerate()
        .all(|(d, x)| *x > theta[2 * d] + 1e-9 && *x < theta[2 * d + 1] - 1e-9)
}

#[test]
fn center_witness_is_consistent() {
    let p = scenarios::build("fig2-center").unwrap();
    let demos = p.demos().unwrap();
    let r = learn(
        &demos,
        &p.cost,
        &p.parameterization,
        &cbc(),
        &LearnConfig::default(),
    )
    .unwrap();
    let theta = r.theta.as_ref().unwrap();
    assert!(p.parameterization.theta_in_bounds(theta));
    for d in &p.demonstrations {
        for s in &d.states {
            assert!(
                !strictly_inside(theta, s),
                "witness box {theta:?} swallows demo state {s:?}"
            );
        }
    }
    for res in &r.residuals {
        assert!(res.as_ref().unwrap().max() <= 1e-6);
    }
    assert!(r.warnings.iter().any(|w| w == WITNESS_NOTE));
    // both demonstrations load both faces of their corner, pinning the box
    for (a, b) in theta.iter().zip(scenarios::CENTER_BOX) {
        assert!((a - b).abs() <= 1e-6, "{theta:?}");
    }
}

#[test]
fn one_box_cannot_explain_two_obstacles() {
    let p = scenarios::build("growth").unwrap();
    let demos = p.demos().unwrap();
    let one = scenarios::planar_boxes(1, [(-1.0, 5.0), (-3.0, 3.0)]);
    match learn(&demos, &p.cost, &one, &cbc(), &LearnConfig::default()) {
        Err(Error::Infeasible(m)) => {
            assert!(m.contains("suboptimal penalties"), "{m}");
            assert!(m.contains("growing"), "{m}");
        }
        other => panic!("expected infeasible, got {other:?}"),
    }
}

#[test]
fn growth_finds_two_boxes_and_stays_feasible_above() {
    let p = scenarios::build("growth").unwrap();
    let demos = p.demos().unwrap();
    let make = |n| scenarios::planar_boxes(n, [(-1.0, 5.0), (-3.0, 3.0)]);
    let g = grow(&demos, &p.cost, make, 3, &cbc(), &LearnConfig::default()).unwrap();
    assert_eq!(g.n_lower, 2);
    assert_eq!(g.infeasible.len(), 1);
    assert!(learn(&demos, &p.cost, &make(3), &cbc(), &LearnConfig::default()).is_ok());
    assert!(matches!(
        grow(&demos, &p.cost, make, 1, &cbc(), &LearnConfig::default()),
        Err(Error::Infeasible(_))
    ));
}

#[test]
fn suboptimal_objective_vanishes_on_exact_demos() {
    let p = scenarios::build("fig2-left").unwrap();
    let cfg = LearnConfig {
        mode: EncodingMode::Suboptimal,
        ..LearnConfig::default()
    };
    let r = learn(
        &p.demos().unwrap(),
        &p.cost,
        &p.parameterization,
        &cbc(),
        &cfg,
    )
    .unwrap();
    assert!(r.objective.unwrap() <= 1e-6, "{:?}", r.objective);
    assert!(r.penalties.iter().all(|v| *v <= 1e-6));
}

#[test]
fn positive_weights_are_recovered_with_the_box() {
    let p = scenarios::build("cost-set-b").unwrap();
    let r = learn(
        &p.demos().unwrap(),
        &p.cost,
        &p.parameterization,
        &cbc(),
        &LearnConfig::default(),
    )
    .unwrap();
    let gamma = r.gamma.unwrap();
    assert_eq!(gamma.len(), 20);
    assert!(gamma.iter().all(|g| *g >= 0.001 - 1e-9));
    for res in &r.residuals {
        assert!(res.as_ref().unwrap().max() <= 1e-6);
    }
}

#[test]
fn relaxed_family_reports_no_theta() {
    let p = scenarios::build("ellipse").unwrap();
    let r = learn(
        &p.demos().unwrap(),
        &p.cost,
        &p.parameterization,
        &cbc(),
        &LearnConfig::default(),
    )
    .unwrap();
    assert!(r.theta.is_none());
    assert!(r.residuals.iter().all(Option::is_none));
}

#[test]
fn no_demonstrations_is_trivially_feasible() {
    let p = scenarios::build("fig2-center").unwrap();
    let r = learn(
        &[] as &[Demonstration],
        &p.cost,
        &p.parameterization,
        &cbc(),
        &LearnConfig::default(),
    )
    .unwrap();
    assert!(p
        .parameterization
        .theta_in_bounds(r.theta.as_ref().unwrap()));
}

#[test]
fn demo_violating_the_truth_box_bounds_is_rejected() {
    let p = scenarios::build("fig2-center").unwrap();
    let narrow = ConstraintParameterization {
        theta_lower: vec![0.0; 4],
        theta_upper: vec![0.0; 4],
        ..p.parameterization.clone()
    };
    // theta pinned to a degenerate box at the origin cannot produce the observed kinks
    assert!(matches!(
        learn(
            &p.demos().unwrap(),
            &p.cost,
            &narrow,
            &cbc(),
            &LearnConfig::default()
        ),
        Err(Error::Infeasible(_))
    ));
}
