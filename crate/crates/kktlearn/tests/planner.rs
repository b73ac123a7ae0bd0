use kktlearn::extraction::{SafeBox, Template};
use kktlearn::learner::LearnConfig;
use kktlearn::planner::*;
use kktlearn::scenarios;
use kktlearn::solver::CbcBackend;
use kktlearn::Error;

fn bx(lower: [f64; 2], upper: [f64; 2]) -> SafeBox {
    SafeBox {
        lower: lower.to_vec(),
        upper: upper.to_vec(),
    }
}

fn corridor() -> Vec<SafeBox> {
    vec![
        bx([0.0, 0.0], [1.0, 1.0]),
        bx([0.8, 0.4], [3.0, 0.6]),
        bx([2.8, 0.0], [4.0, 1.0]),
    ]
}

fn inside_any(boxes: &[SafeBox], p: &[f64]) -> bool {
    boxes
        .iter()
        .any(|b| (0..2).all(|d| p[d] >= b.lower[d] - 1e-12 && p[d] <= b.upper[d] + 1e-12))
}

#[test]
fn path_threads_a_corridor() {
    let boxes = corridor();
    let p = plan(&[0.5, 0.9], &[3.5, 0.1], &boxes, 0.1).unwrap();
    assert!(p.guarantee);
    assert_eq!(p.path[0], vec![0.5, 0.9]);
    assert_eq!(p.path.last().unwrap(), &vec![3.5, 0.1]);
    for w in p.path.windows(2) {
        for k in 0..=100 {
            let s = k as f64 / 100.0;
            let q = [
                w[0][0] + s * (w[1][0] - w[0][0]),
                w[0][1] + s * (w[1][1] - w[0][1]),
            ];
            assert!(inside_any(&boxes, &q), "{q:?} leaves the corridor");
        }
    }
    let straight = ((3.0f64).powi(2) + 0.8f64.powi(2)).sqrt();
    assert!(p.length >= straight - 1e-9);
}

#[test]
fn endpoints_outside_or_disconnected_fail() {
    let boxes = corridor();
    assert!(matches!(
        plan(&[2.0, 0.9], &[3.5, 0.5], &boxes, 0.1),
        Err(Error::Planning(_))
    ));
    let split = vec![bx([0.0, 0.0], [1.0, 1.0]), bx([2.0, 0.0], [3.0, 1.0])];
    assert!(matches!(
        plan(&[0.5, 0.5], &[2.5, 0.5], &split, 0.1),
        Err(Error::Planning(_))
    ));
}

#[test]
fn trajectory_checks_cover_all_three_outcomes() {
    let safe = corridor();
    let obstacle = vec![bx([1.5, 1.0], [2.5, 2.0])];
    let through = vec![vec![0.5, 0.5], vec![3.5, 0.5]];
    assert_eq!(
        check_safety(&through, &safe, &obstacle, 0.05),
        TrajectoryVerdict::GuaranteedSafe
    );
    let above = vec![vec![0.5, 0.5], vec![2.0, 1.5], vec![3.5, 0.5]];
    assert_eq!(
        check_safety(&above, &safe, &obstacle, 0.05),
        TrajectoryVerdict::IntersectsUnsafe
    );
    let below = vec![vec![0.5, 0.5], vec![2.0, -0.5], vec![3.5, 0.5]];
    assert_eq!(
        check_safety(&below, &safe, &obstacle, 0.05),
        TrajectoryVerdict::NotDefinitelyUnsafe
    );
}

#[test]
fn plan_on_extracted_boxes_avoids_the_true_obstacle() {
    let p = scenarios::build("fig2-center").unwrap();
    let cbc = Box::new(CbcBackend::locate().expect("cbc available"));
    let t = Template::new(
        &p.demos().unwrap(),
        &p.cost,
        &p.parameterization,
        cbc,
        &LearnConfig::default(),
    )
    .unwrap();
    let region = [(0.0, 4.0), (-2.0, 2.0)];
    let seeds: Vec<Vec<f64>> = [
        (0.5, -1.5),
        (0.5, 0.0),
        (0.5, 1.5),
        (2.0, -1.5),
        (2.0, 1.5),
        (3.5, -1.5),
        (3.5, 1.5),
    ]
    .iter()
    .map(|&(x, y)| vec![x, y])
    .collect();
    let boxes = t.extract_safe_boxes(&seeds, &region).unwrap();
    let route = plan(&[0.5, -1.5], &[3.5, 1.5], &boxes, 0.05).unwrap();
    assert!(route.guarantee);
    let truth = [bx([1.5, -0.5], [2.5, 0.5])];
    for q in sample_polyline(&route.path, 0.01) {
        let b = &truth[0];
        let strictly = (0..2).all(|d| q[d] > b.lower[d] && q[d] < b.upper[d]);
        assert!(!strictly, "{q:?} inside the obstacle");
    }
    assert_eq!(
        check_safety(&route.path, &boxes, &truth, 0.01),
        TrajectoryVerdict::GuaranteedSafe
    );
}
