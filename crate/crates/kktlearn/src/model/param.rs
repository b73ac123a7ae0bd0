use serde::{Deserialize, Serialize};

use super::poly::Polynomial;
use super::trajectory::Trajectory;
use crate::error::{Error, Result};

/// A half-space `normal . p >= offset + sum coef * theta[idx]` describing the safe side of one face.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Halfspace {
    pub normal: Vec<f64>,
    #[serde(default)]
    pub offset: f64,
    #[serde(default)]
    pub theta_coeffs: Vec<(usize, f64)>,
}

impl Halfspace {
    pub fn offset_at(&self, theta: &[f64]) -> f64 {
        self.offset
            + self
                .theta_coeffs
                .iter()
                .map(|&(i, c)| c * theta[i])
                .sum::<f64>()
    }

    /// `b(theta) - a . p`: positive on the unsafe side of the face.
    pub fn violation(&self, p: &[f64], theta: &[f64]) -> f64 {
        self.offset_at(theta) - self.normal.iter().zip(p).map(|(a, x)| a * x).sum::<f64>()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Family {
    /// Union of axis-aligned boxes. For box m and dimension d the extents are
    /// `theta[2*(m*dims + d)]` (lower) and `theta[2*(m*dims + d) + 1]` (upper).
    BoxUnion { boxes: usize },
    /// Union of polytopes, each the intersection of unsafe sides of its faces.
    HalfspaceUnion { polytopes: Vec<Vec<Halfspace>> },
    /// `g(p, theta) = sum_i theta_i * features_i(p) + base(p)`.
    AffineInTheta {
        features: Vec<Polynomial>,
        base: Polynomial,
    },
    /// `g(p, theta) = polynomial(p) - theta_0`.
    OffsetNonlinear { polynomial: Polynomial },
}

/// Unknown constraint `g(p, theta) <= 0` on constraint states `p` selected from each state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstraintParameterization {
    #[serde(flatten)]
    pub family: Family,
    pub theta_lower: Vec<f64>,
    pub theta_upper: Vec<f64>,
    /// State coordinates forming the constraint state.
    pub selector: Vec<usize>,
}

/// Tolerance used when checking that theta lies in its box.
pub const THETA_BOUND_TOL: f64 = 1e-9;

impl ConstraintParameterization {
    pub fn box_union(boxes: usize, selector: Vec<usize>, lower: f64, upper: f64) -> Self {
        let n = boxes * selector.len() * 2;
        Self {
            family: Family::BoxUnion { boxes },
            theta_lower: vec![lower; n],
            theta_upper: vec![upper; n],
            selector,
        }
    }

    pub fn dim_p(&self) -> usize {
        self.selector.len()
    }

    pub fn dim_theta(&self) -> usize {
        self.theta_lower.len()
    }

    pub fn family_name(&self) -> &'static str {
        match self.family {
            Family::BoxUnion { .. } => "box_union",
            Family::HalfspaceUnion { .. } => "halfspace_union",
            Family::AffineInTheta { .. } => "affine_in_theta",
            Family::OffsetNonlinear { .. } => "offset_nonlinear",
        }
    }

    /// Union families share the face representation; nonlinear and affine families do not.
    pub fn is_union(&self) -> bool {
        matches!(
            self.family,
            Family::BoxUnion { .. } | Family::HalfspaceUnion { .. }
        )
    }

    /// True when g is linear in p so p may itself be a decision variable.
    pub fn linear_in_p(&self) -> bool {
        match &self.family {
            Family::BoxUnion { .. } | Family::HalfspaceUnion { .. } => true,
            Family::OffsetNonlinear { polynomial } => polynomial.is_affine(),
            Family::AffineInTheta { features, base } => {
                features.iter().all(|f| f.arity() == 0) && base.is_affine()
            }
        }
    }

    pub fn validate(&self, n_x: usize) -> Result<()> {
        let bad = |m: String| Err(Error::Spec(m));
        if self.selector.is_empty() {
            return bad("parameterization.selector must not be empty".into());
        }
        if let Some(i) = self.selector.iter().position(|&s| s >= n_x) {
            return bad(format!("parameterization.selector[{i}] out of range"));
        }
        if self.theta_lower.len() != self.theta_upper.len() {
            return bad("theta_lower and theta_upper differ in length".into());
        }
        for i in 0..self.dim_theta() {
            let (l, u) = (self.theta_lower[i], self.theta_upper[i]);
            if !(l.is_finite() && u.is_finite() && l <= u) {
                return bad(format!(
                    "theta box entry {i} must be finite with lower <= upper"
                ));
            }
        }
        let d = self.dim_p();
        let need = match &self.family {
            Family::BoxUnion { boxes } => {
                if *boxes == 0 {
                    return bad("box_union needs at least one box".into());
                }
                boxes * d * 2
            }
            Family::HalfspaceUnion { polytopes } => {
                if polytopes.is_empty() || polytopes.iter().any(|p| p.is_empty()) {
                    return bad("halfspace_union needs nonempty polytopes".into());
                }
                for (m, poly) in polytopes.iter().enumerate() {
                    for (n, h) in poly.iter().enumerate() {
                        if h.normal.len() != d {
                            return bad(format!("polytopes[{m}][{n}].normal must have length {d}"));
                        }
                        if h.theta_coeffs.iter().any(|&(i, _)| i >= self.dim_theta()) {
                            return bad(format!(
                                "polytopes[{m}][{n}].theta_coeffs index out of range"
                            ));
                        }
                    }
                }
                self.dim_theta()
            }
            Family::AffineInTheta { features, base } => {
                if features
                    .iter()
                    .chain(std::iter::once(base))
                    .any(|f| f.arity() > d)
                {
                    return bad(
                        "polynomial refers to more variables than the selector provides".into(),
                    );
                }
                features.len()
            }
            Family::OffsetNonlinear { polynomial } => {
                if polynomial.arity() > d {
                    return bad(
                        "polynomial refers to more variables than the selector provides".into(),
                    );
                }
                1
            }
        };
        if need != self.dim_theta() {
            return bad(format!(
                "{} expects {need} theta entries, bounds give {}",
                self.family_name(),
                self.dim_theta()
            ));
        }
        Ok(())
    }

    pub fn theta_in_bounds(&self, theta: &[f64]) -> bool {
        theta.len() == self.dim_theta()
            && theta
                .iter()
                .zip(self.theta_lower.iter().zip(&self.theta_upper))
                .all(|(t, (l, u))| *t >= l - THETA_BOUND_TOL && *t <= u + THETA_BOUND_TOL)
    }

    /// Constraint state of state `t`.
    pub fn constraint_state(&self, traj: &Trajectory, t: usize) -> Vec<f64> {
        self.selector.iter().map(|&i| traj.states[t][i]).collect()
    }

    /// Faces grouped per simple set, for union families.
    pub fn faces(&self) -> Option<Vec<Vec<Halfspace>>> {
        match &self.family {
            Family::BoxUnion { boxes } => {
                let d = self.dim_p();
                Some(
                    (0..*boxes)
                        .map(|m| {
                            let mut faces = Vec::with_capacity(2 * d);
                            for k in 0..d {
                                let mut e = vec![0.0; d];
                                e[k] = -1.0;
                                let lo = 2 * (m * d + k);
                                faces.push(Halfspace {
                                    normal: e.clone(),
                                    offset: 0.0,
                                    theta_coeffs: vec![(lo, -1.0)],
                                });
                                e[k] = 1.0;
                                faces.push(Halfspace {
                                    normal: e,
                                    offset: 0.0,
                                    theta_coeffs: vec![(lo + 1, 1.0)],
                                });
                            }
                            faces
                        })
                        .collect(),
                )
            }
            Family::HalfspaceUnion { polytopes } => Some(polytopes.clone()),
            _ => None,
        }
    }

    /// `g(p, theta)` without the bounds check.
    pub fn value(&self, p: &[f64], theta: &[f64]) -> f64 {
        match &self.family {
            Family::BoxUnion { .. } | Family::HalfspaceUnion { .. } => {
                let faces = self.faces().expect("union family");
                faces
                    .iter()
                    .map(|poly| {
                        poly.iter()
                            .map(|h| h.violation(p, theta))
                            .fold(f64::INFINITY, f64::min)
                    })
                    .fold(f64::NEG_INFINITY, f64::max)
            }
            Family::AffineInTheta { features, base } => {
                base.eval(p)
                    + features
                        .iter()
                        .zip(theta)
                        .map(|(f, t)| t * f.eval(p))
                        .sum::<f64>()
            }
            Family::OffsetNonlinear { polynomial } => polynomial.eval(p) - theta[0],
        }
    }

    /// `g(p, theta)`; positive exactly on the unsafe set.
    pub fn eval(&self, p: &[f64], theta: &[f64]) -> Result<f64> {
        if p.len() != self.dim_p() {
            return Err(Error::Dimension(format!(
                "constraint state has length {} instead of {}",
                p.len(),
                self.dim_p()
            )));
        }
        if !self.theta_in_bounds(theta) {
            return Err(Error::ThetaOutOfBounds(format!("{theta:?}")));
        }
        Ok(self.value(p, theta))
    }

    pub fn is_unsafe(&self, p: &[f64], theta: &[f64]) -> bool {
        self.value(p, theta) > 0.0
    }

    /// Gradient of g in p for single-constraint families.
    pub fn grad_p(&self, p: &[f64], theta: &[f64]) -> Option<Vec<f64>> {
        match &self.family {
            Family::AffineInTheta { features, base } => {
                let mut g = pad(base.grad(p), p.len());
                for (f, t) in features.iter().zip(theta) {
                    for (gi, fi) in g.iter_mut().zip(pad(f.grad(p), p.len())) {
                        *gi += t * fi;
                    }
                }
                Some(g)
            }
            Family::OffsetNonlinear { polynomial } => Some(pad(polynomial.grad(p), p.len())),
            _ => None,
        }
    }

    /// Hessian of g in p for single-constraint families.
    pub fn hessian_p(&self, p: &[f64], theta: &[f64]) -> Option<Vec<Vec<f64>>> {
        match &self.family {
            Family::AffineInTheta { features, base } => {
                let mut h = base.hessian(p);
                for (f, t) in features.iter().zip(theta) {
                    let hf = f.hessian(p);
                    for (r, rf) in h.iter_mut().zip(hf) {
                        for (a, b) in r.iter_mut().zip(rf) {
                            *a += t * b;
                        }
                    }
                }
                Some(h)
            }
            Family::OffsetNonlinear { polynomial } => Some(polynomial.hessian(p)),
            _ => None,
        }
    }

    /// Per-constraint gradients of the constituent functions, (group, member) ordered,
    /// used by the KKT residual: union faces give `-normal`, single families give `grad_p`.
    pub fn constituent_values_and_grads(
        &self,
        p: &[f64],
        theta: &[f64],
    ) -> Vec<(usize, usize, f64, Vec<f64>)> {
        match self.faces() {
            Some(faces) => faces
                .iter()
                .enumerate()
                .flat_map(|(m, poly)| {
                    poly.iter().enumerate().map(move |(n, h)| {
                        (
                            m,
                            n,
                            h.violation(p, theta),
                            h.normal.iter().map(|a| -a).collect(),
                        )
                    })
                })
                .collect(),
            None => vec![(
                0,
                0,
                self.value(p, theta),
                self.grad_p(p, theta).expect("single family"),
            )],
        }
    }

    pub fn num_constituents(&self) -> usize {
        self.faces().map_or(1, |f| f.iter().map(|p| p.len()).sum())
    }
}

fn pad(mut v: Vec<f64>, n: usize) -> Vec<f64> {
    v.resize(n, 0.0);
    v
}
