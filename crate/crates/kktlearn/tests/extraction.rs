use kktlearn::extraction::*;
use kktlearn::learner::LearnConfig;
use kktlearn::model::Demonstration;
use kktlearn::problem::Problem;
use kktlearn::scenarios;
use kktlearn::solver::CbcBackend;

fn template(p: &Problem, demos: &[Demonstration]) -> Template {
    let cbc = Box::new(CbcBackend::locate().expect("cbc available"));
    Template::new(
        demos,
        &p.cost,
        &p.parameterization,
        cbc,
        &LearnConfig::default(),
    )
    .unwrap()
}

fn center() -> (Problem, Template) {
    let p = scenarios::build("fig2-center").unwrap();
    let t = template(&p, &p.demos().unwrap());
    (p, t)
}

/// Independent box test against `[x_lo, x_hi, y_lo, y_hi]`.
fn in_open_box(b: &[f64], p: &[f64]) -> bool {
    p[0] > b[0] && p[0] < b[1] && p[1] > b[2] && p[1] < b[3]
}

#[test]
fn no_demonstrations_leave_everything_unsure() {
    let p = scenarios::build("fig2-center").unwrap();
    let t = template(&p, &[]);
    let grid = GridSpec::square(vec![(0.0, 4.0), (-2.0, 2.0)], 3);
    let r = grid_sweep(&t, &grid, None, 1).unwrap();
    assert_eq!(r.count(Verdict::Unsure), 9);
}

#[test]
fn center_queries_classify_inside_and_far_points() {
    let (_, t) = center();
    let inside = t.query(&[2.0, 0.0]).unwrap();
    assert_eq!(inside.verdict, Verdict::GuaranteedUnsafe);
    assert!(inside.error.is_none());
    assert_eq!(
        t.query(&[0.2, -1.8]).unwrap().verdict,
        Verdict::GuaranteedSafe
    );
    assert!(t.query(&[1.0]).is_err());
}

#[test]
fn safe_boxes_are_sound_and_consistent_with_queries() {
    let (_, t) = center();
    let region = [(0.0, 4.0), (-2.0, 2.0)];
    assert!(t
        .extract_safe_boxes(&[vec![2.0, 0.0]], &region)
        .unwrap()
        .is_empty());

    let seeds = [vec![0.5, 0.0], vec![0.5, 0.2], vec![0.5, 0.0]];
    let boxes = t.extract_safe_boxes(&seeds, &region).unwrap();
    // overlapping boxes are both kept, a repeated one is dropped
    assert_eq!(boxes.len(), 2);

    let single = t.extract_safe_boxes(&seeds[..1], &region).unwrap();
    let b = &single[0];
    // distance from the seed to the obstacle is 1
    let r = b.upper[0] - 0.5;
    assert!((1.0 - 2e-4..=1.0).contains(&r), "radius {r}");
    assert!(b.upper[0] <= scenarios::CENTER_BOX[0]);
    for (x, y) in [
        (0.0, 0.0),
        (0.25, 0.5),
        (1.4, -0.9),
        (b.upper[0], b.upper[1]),
    ] {
        assert!(!in_open_box(&scenarios::CENTER_BOX, &[x, y]));
        let mid = [0.5 + 0.9 * (x - 0.5), 0.9 * y];
        assert_eq!(
            t.query(&mid).unwrap().verdict,
            Verdict::GuaranteedSafe,
            "{mid:?}"
        );
    }
}

#[test]
fn more_demonstrations_never_shrink_the_guarantees() {
    let p = scenarios::build("fig2-center").unwrap();
    let demos = p.demos().unwrap();
    let grid = GridSpec::square(vec![(0.0, 4.0), (-2.0, 2.0)], 9);
    let few = grid_sweep(&template(&p, &demos[..1]), &grid, None, 1).unwrap();
    let all = grid_sweep(&template(&p, &demos), &grid, None, 1).unwrap();
    for (a, b) in few.cells.iter().zip(&all.cells) {
        if a.verdict != Verdict::Unsure {
            assert_eq!(a.verdict, b.verdict, "{:?}", a.point);
        }
    }
    assert!(all.count(Verdict::Unsure) <= few.count(Verdict::Unsure));
}

#[test]
fn sweep_table_lists_every_cell() {
    let (p, t) = center();
    let grid = GridSpec::square(vec![(0.0, 4.0), (-2.0, 2.0)], 3);
    let r = grid_sweep(&t, &grid, p.truth.as_deref(), 1).unwrap();
    let table = r.to_table();
    let lines: Vec<&str> = table.lines().collect();
    assert_eq!(lines[0], "p0 p1 verdict truth");
    assert_eq!(lines.len(), 10);
    assert!(lines.contains(&"2 0 GuaranteedUnsafe unsafe"), "{table}");
    assert!(lines.contains(&"0 -2 GuaranteedSafe safe"), "{table}");
    assert_eq!(r.summary.violations, Some(0));
}
