//! Canned 2D experiments built from synthesized demonstrations.

use crate::error::{Error, Result};
use crate::extraction::GridSpec;
use crate::milp_ir::BigMConfig;
use crate::model::{
    ConstraintParameterization, CostGroup, CostModel, Dynamics, Family, Gamma, KnownConstraint,
    Polynomial, TaskSpec, Trajectory,
};
use crate::problem::Problem;
use crate::synth::{synthesize, RouteHint, SynthOptions};

pub const NAMES: &[&str] = &[
    "fig2-center",
    "fig2-left",
    "cost-set-a",
    "cost-set-b",
    "nonlinear",
    "growth",
    "ellipse",
];

/// Plotted region of the planar box scenarios.
pub const REGION: [(f64, f64); 2] = [(0.0, 4.0), (-2.0, 2.0)];
/// Box extents may leave the plotted region so that border cells are not safe by construction.
pub const THETA_BOX: [(f64, f64); 2] = [(-1.0, 5.0), (-3.0, 3.0)];

pub fn build(name: &str) -> Result<Problem> {
    match name {
        "fig2-center" => center(),
        "fig2-left" => left(),
        "cost-set-a" => cost_set_a(),
        "cost-set-b" => cost_set_b(),
        "nonlinear" => nonlinear(),
        "growth" => growth(),
        "ellipse" => ellipse(),
        other => Err(Error::Spec(format!(
            "unknown scenario {other:?}; available: {}",
            NAMES.join(", ")
        ))),
    }
}

/// Planar single integrator with `|u| <= 1`.
pub fn planar_task(start: [f64; 2], goal: [f64; 2], horizon: usize) -> TaskSpec {
    TaskSpec {
        n_x: 2,
        n_u: 2,
        horizon,
        dynamics: Dynamics::single_integrator(2),
        start: start.to_vec(),
        goal: goal.to_vec(),
        known_constraints: vec![KnownConstraint::ControlNormSquared { bound: 1.0 }],
    }
}

/// Box union over the planar state with every box's extents bounded by `region`.
pub fn planar_boxes(boxes: usize, region: [(f64, f64); 2]) -> ConstraintParameterization {
    let mut p = ConstraintParameterization::box_union(boxes, vec![0, 1], 0.0, 0.0);
    for m in 0..boxes {
        for (d, &(lo, hi)) in region.iter().enumerate() {
            for side in 0..2 {
                let i = 2 * (m * 2 + d) + side;
                p.theta_lower[i] = lo;
                p.theta_upper[i] = hi;
            }
        }
    }
    p
}

fn path_length_cost() -> CostModel {
    CostModel::quadratic(&[0, 1], &[1.0, 1.0])
}

/// Synthesizes one demonstration with hints added only where the straight line is unsafe.
pub fn demo(
    start: [f64; 2],
    goal: [f64; 2],
    horizon: usize,
    cost: &CostModel,
    param: &ConstraintParameterization,
    theta: &[f64],
) -> Result<Trajectory> {
    let task = planar_task(start, goal, horizon);
    let s = synthesize(
        &task,
        cost,
        param,
        theta,
        &RouteHint::free(horizon),
        &SynthOptions::default(),
    )?;
    Ok(s.trajectory)
}

fn grid41() -> GridSpec {
    GridSpec::square(REGION.to_vec(), 41)
}

fn problem(
    name: &str,
    cost: CostModel,
    param: ConstraintParameterization,
    truth: Vec<f64>,
    demos: Vec<Trajectory>,
) -> Problem {
    let first = &demos[0];
    let task = planar_task(
        [first.states[0][0], first.states[0][1]],
        [
            first.states[first.horizon() - 1][0],
            first.states[first.horizon() - 1][1],
        ],
        first.horizon(),
    );
    Problem {
        name: name.to_string(),
        task,
        cost,
        parameterization: param,
        demonstrations: demos,
        truth: Some(truth),
        grid: Some(grid41()),
        big_m: BigMConfig::default(),
    }
}

pub const CENTER_BOX: [f64; 4] = [1.5, 2.5, -0.5, 0.5];

/// Two demonstrations wrapping opposite corners of one box: each loads both faces of its corner.
fn center_demos(cost: &CostModel) -> Result<Vec<Trajectory>> {
    let param = planar_boxes(1, THETA_BOX);
    Ok(vec![
        demo([1.0, -1.0], [2.5, 1.5], 10, cost, &param, &CENTER_BOX)?,
        demo([3.0, 1.0], [1.5, -1.5], 10, cost, &param, &CENTER_BOX)?,
    ])
}

fn center() -> Result<Problem> {
    let cost = path_length_cost();
    let demos = center_demos(&cost)?;
    Ok(problem(
        "fig2-center",
        cost,
        planar_boxes(1, THETA_BOX),
        CENTER_BOX.to_vec(),
        demos,
    ))
}

pub const LEFT_BOX: [f64; 4] = [1.5, 2.5, -1.0, 0.4];

/// Demonstrations bent only at one middle state each, which a flat obstacle explains.
fn left() -> Result<Problem> {
    let cost = path_length_cost();
    let param = planar_boxes(1, THETA_BOX);
    let demos = vec![
        demo([0.55, 0.0], [3.45, 0.0], 5, &cost, &param, &LEFT_BOX)?,
        demo([0.55, 0.2], [3.45, 0.2], 5, &cost, &param, &LEFT_BOX)?,
    ];
    Ok(problem("fig2-left", cost, param, LEFT_BOX.to_vec(), demos))
}

/// Set A: quadratic weights that may be negative.
fn cost_set_a() -> Result<Problem> {
    let demos = center_demos(&path_length_cost())?;
    let cost = CostModel {
        groups: vec![
            CostGroup {
                coord: 0,
                exponent: 2,
            },
            CostGroup {
                coord: 1,
                exponent: 2,
            },
        ],
        gamma: Gamma::Unknown {
            lower: vec![-5.0; 2],
            upper: vec![5.0; 2],
        },
    };
    Ok(problem(
        "cost-set-a",
        cost,
        planar_boxes(1, THETA_BOX),
        CENTER_BOX.to_vec(),
        demos,
    ))
}

/// Set B groups: exponents 2k for k = 1..10, x groups then y groups.
pub fn set_b_groups() -> Vec<CostGroup> {
    (0..2)
        .flat_map(|coord| {
            (1..=10).map(move |k| CostGroup {
                coord,
                exponent: 2 * k,
            })
        })
        .collect()
}

/// Weights used to synthesize the Set B demonstrations: the quadratic term dominates.
pub fn set_b_truth() -> Vec<f64> {
    (0..2)
        .flat_map(|_| (1..=10).map(|k| if k == 1 { 1.0 } else { 0.001 }))
        .collect()
}

/// Set B: twenty positive weights on even powers of the step.
fn cost_set_b() -> Result<Problem> {
    let groups = set_b_groups();
    let known = CostModel {
        groups: groups.clone(),
        gamma: Gamma::Known {
            values: set_b_truth(),
        },
    };
    let demos = center_demos(&known)?;
    let cost = CostModel {
        groups,
        gamma: Gamma::Unknown {
            lower: vec![0.001; 20],
            upper: vec![5.0; 20],
        },
    };
    Ok(problem(
        "cost-set-b",
        cost,
        planar_boxes(1, THETA_BOX),
        CENTER_BOX.to_vec(),
        demos,
    ))
}

/// `2(x^4 + y^4) - 5(x^3 + y^3) + 5(x - 1)^3 + 5(y + 1)^3`, expanded.
pub fn nonlinear_polynomial() -> Polynomial {
    Polynomial::new(vec![
        (2.0, vec![4, 0]),
        (2.0, vec![0, 4]),
        (-15.0, vec![2, 0]),
        (15.0, vec![1, 0]),
        (15.0, vec![0, 2]),
        (15.0, vec![0, 1]),
    ])
}

pub const NONLINEAR_REGION: [(f64, f64); 2] = [(-2.0, 3.0), (-3.0, 2.0)];

fn nonlinear() -> Result<Problem> {
    let cost = path_length_cost();
    let param = ConstraintParameterization {
        family: Family::OffsetNonlinear {
            polynomial: nonlinear_polynomial(),
        },
        theta_lower: vec![-10.0],
        theta_upper: vec![10.0],
        selector: vec![0, 1],
    };
    let truth = [2.0];
    let demos = vec![
        demo([-1.5, 0.05], [2.05, -0.15], 12, &cost, &param, &truth)?,
        demo([-1.45, -0.85], [1.85, -0.75], 12, &cost, &param, &truth)?,
    ];
    let mut p = problem("nonlinear", cost, param, truth.to_vec(), demos);
    p.grid = Some(GridSpec::square(NONLINEAR_REGION.to_vec(), 41));
    Ok(p)
}

pub const GROWTH_BOXES: [f64; 8] = [1.0, 1.5, -0.5, 0.5, 2.5, 3.0, -0.5, 0.5];

/// Two obstacles: one demonstration wraps each, a third runs between them.
fn growth() -> Result<Problem> {
    let cost = path_length_cost();
    let truth_param = planar_boxes(2, THETA_BOX);
    let demos = vec![
        demo(
            [0.5, -1.0],
            [1.9, 1.5],
            10,
            &cost,
            &truth_param,
            &GROWTH_BOXES,
        )?,
        demo(
            [3.5, 1.0],
            [2.1, -1.5],
            10,
            &cost,
            &truth_param,
            &GROWTH_BOXES,
        )?,
        demo(
            [2.0, -1.8],
            [2.0, 1.8],
            10,
            &cost,
            &truth_param,
            &GROWTH_BOXES,
        )?,
    ];
    Ok(problem(
        "growth",
        cost,
        planar_boxes(2, THETA_BOX),
        GROWTH_BOXES.to_vec(),
        demos,
    ))
}

/// Ellipse-complement family `g = -(0.5 x^2 + 2 y^2) + 2 b1 x + 2 b2 y - c`, unsafe inside.
pub fn ellipse_param() -> ConstraintParameterization {
    ConstraintParameterization {
        family: Family::AffineInTheta {
            features: vec![
                Polynomial::new(vec![(2.0, vec![1, 0])]),
                Polynomial::new(vec![(2.0, vec![0, 1])]),
                Polynomial::new(vec![(-1.0, vec![0, 0])]),
            ],
            base: Polynomial::new(vec![(-0.5, vec![2, 0]), (-2.0, vec![0, 2])]),
        },
        theta_lower: vec![-1.0, -1.0, -1.0],
        theta_upper: vec![1.0, 2.0, 2.0],
        selector: vec![0, 1],
    }
}

pub const ELLIPSE_THETA: [f64; 3] = [0.0, 1.1, 0.505];

fn ellipse() -> Result<Problem> {
    let cost = path_length_cost();
    let param = ellipse_param();
    let demos = vec![
        demo([-1.5, 0.7], [1.5, 0.7], 9, &cost, &param, &ELLIPSE_THETA)?,
        demo([-1.5, 0.4], [1.5, 0.4], 9, &cost, &param, &ELLIPSE_THETA)?,
    ];
    let mut p = problem("ellipse", cost, param, ELLIPSE_THETA.to_vec(), demos);
    p.grid = Some(GridSpec::square(vec![(-2.0, 2.0), (-1.0, 2.0)], 21));
    Ok(p)
}
