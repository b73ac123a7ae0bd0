//! Dense convex QP solver: equality elimination through a null-space basis,
//! then the dual active-set method of Goldfarb and Idnani on the reduced problem.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// `minimize 1/2 x'Gx + a'x  s.t.  E x = f,  C x <= d`.
#[derive(Clone, Debug)]
pub struct QpProblem {
    pub g: DMatrix<f64>,
    pub a: DVector<f64>,
    pub eq: Vec<(DVector<f64>, f64)>,
    pub ineq: Vec<(DVector<f64>, f64)>,
}

/// Solution with multipliers in the convention `Gx + a + E'nu + C'mu = 0`, `mu >= 0`.
#[derive(Clone, Debug)]
pub struct QpSolution {
    pub x: DVector<f64>,
    pub nu: Vec<f64>,
    pub mu: Vec<f64>,
    pub iterations: usize,
}

const RANK_TOL: f64 = 1e-10;

/// Orthonormal basis of the null space of the rows of `e`, plus a least-squares particular solution.
fn eliminate(n: usize, eq: &[(DVector<f64>, f64)]) -> Result<(DVector<f64>, DMatrix<f64>)> {
    if eq.is_empty() {
        return Ok((DVector::zeros(n), DMatrix::identity(n, n)));
    }
    let e = DMatrix::from_fn(eq.len(), n, |i, j| eq[i].0[j]);
    let f = DVector::from_iterator(eq.len(), eq.iter().map(|r| r.1));
    let svd = e.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let x0 = svd
        .solve(&f, RANK_TOL * smax.max(1.0))
        .map_err(|m| Error::Synthesis(m.to_string()))?;
    let res = (&e * &x0 - &f).amax();
    if res > 1e-9 * (1.0 + f.amax()) {
        return Err(Error::Synthesis(format!(
            "equality constraints are inconsistent (residual {res:e})"
        )));
    }
    // pad to a square matrix so the SVD exposes a full right singular basis
    let rows = eq.len().max(n);
    let padded = DMatrix::from_fn(rows, n, |i, j| if i < eq.len() { e[(i, j)] } else { 0.0 });
    let full = padded.svd(false, true);
    let v_t = full.v_t.expect("requested right singular vectors");
    let cols: Vec<usize> = (0..n)
        .filter(|&i| full.singular_values[i] <= RANK_TOL * smax.max(1.0))
        .collect();
    let z = DMatrix::from_fn(n, cols.len(), |i, j| v_t[(cols[j], i)]);
    Ok((x0, z))
}

/// Goldfarb-Idnani on `min 1/2 y'Qy + f'y  s.t.  n_j'y >= b_j`; returns y and multipliers.
fn dual_active_set(
    q: &DMatrix<f64>,
    f: &DVector<f64>,
    cons: &[(DVector<f64>, f64)],
) -> Result<(DVector<f64>, Vec<f64>, usize)> {
    let ny = q.nrows();
    let chol = q
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Synthesis("reduced Hessian is not positive definite".into()))?;
    let qinv = |v: &DVector<f64>| chol.solve(v);
    let mut y = -qinv(f);
    let mut active: Vec<usize> = Vec::new();
    let mut u: Vec<f64> = Vec::new();
    let max_iter = 50 * (cons.len() + ny) + 100;
    let mut iters = 0;
    let slack = |y: &DVector<f64>, j: usize| cons[j].0.dot(y) - cons[j].1;
    loop {
        // most violated inactive constraint
        let mut p = None;
        let mut worst = 0.0;
        for j in 0..cons.len() {
            if active.contains(&j) {
                continue;
            }
            let s = slack(&y, j);
            let tol = 1e-11 * (1.0 + cons[j].1.abs() + cons[j].0.amax() * y.amax());
            if s < -tol && s < worst {
                worst = s;
                p = Some(j);
            }
        }
        let Some(p) = p else { break };
        let np = &cons[p].0;
        let mut up = 0.0;
        loop {
            iters += 1;
            if iters > max_iter {
                return Err(Error::Synthesis(
                    "active-set iteration limit reached".into(),
                ));
            }
            let qnp = qinv(np);
            let k = active.len();
            let (z, r) = if k == 0 {
                (qnp.clone(), DVector::zeros(0))
            } else {
                let nmat = DMatrix::from_fn(ny, k, |i, j| cons[active[j]].0[i]);
                let qn = DMatrix::from_fn(ny, k, |i, j| qinv(&cons[active[j]].0)[i]);
                let s = nmat.transpose() * &qn;
                let rhs = nmat.transpose() * &qnp;
                let r = s
                    .clone()
                    .lu()
                    .solve(&rhs)
                    .or_else(|| s.clone().pseudo_inverse(1e-14).ok().map(|pi| pi * &rhs))
                    .ok_or_else(|| Error::Synthesis("singular active-set system".into()))?;
                (&qnp - qn * &r, r)
            };
            let mut t1 = f64::INFINITY;
            let mut drop = None;
            for i in 0..k {
                if r[i] > 1e-14 {
                    let ratio = u[i] / r[i];
                    if ratio < t1 {
                        t1 = ratio;
                        drop = Some(i);
                    }
                }
            }
            let zn = z.dot(np);
            let dependent = z.amax() <= 1e-12 * qnp.amax().max(1e-300);
            let sp = slack(&y, p);
            let t2 = if dependent || zn <= 0.0 {
                f64::INFINITY
            } else {
                -sp / zn
            };
            let t = t1.min(t2);
            if !t.is_finite() {
                return Err(Error::Synthesis(
                    "inequality constraints are infeasible".into(),
                ));
            }
            for i in 0..k {
                u[i] -= t * r[i];
            }
            up += t;
            if t2.is_finite() {
                y += t * &z;
            }
            if t2 <= t1 {
                active.push(p);
                u.push(up);
                break;
            }
            let i = drop.expect("partial step has a blocking constraint");
            active.remove(i);
            u.remove(i);
        }
    }
    let mut mult = vec![0.0; cons.len()];
    for (&j, &uj) in active.iter().zip(&u) {
        mult[j] = uj.max(0.0);
    }
    Ok((y, mult, iters))
}

/// Solves a strictly convex (on the equality null space) QP.
pub fn solve_qp(p: &QpProblem) -> Result<QpSolution> {
    let n = p.a.len();
    let (x0, z) = eliminate(n, &p.eq)?;
    let ny = z.ncols();
    let (x, mu, iterations) = if ny == 0 {
        for (c, d) in &p.ineq {
            if c.dot(&x0) > d + 1e-9 {
                return Err(Error::Synthesis(
                    "unique equality solution violates an inequality".into(),
                ));
            }
        }
        (x0.clone(), vec![0.0; p.ineq.len()], 0)
    } else {
        let zt = z.transpose();
        let q = &zt * &p.g * &z;
        let q = (&q + q.transpose()) * 0.5;
        let f = &zt * (&p.g * &x0 + &p.a);
        let cons: Vec<(DVector<f64>, f64)> = p
            .ineq
            .iter()
            .map(|(c, d)| (-(&zt * c), -(d - c.dot(&x0))))
            .collect();
        let (y, mu, it) = dual_active_set(&q, &f, &cons)?;
        (&x0 + &z * y, mu, it)
    };
    // equality multipliers from E'nu = -(Gx + a + C'mu)
    let mut rhs = -(&p.g * &x + &p.a);
    for ((c, _), m) in p.ineq.iter().zip(&mu) {
        rhs -= *m * c;
    }
    let nu = if p.eq.is_empty() {
        Vec::new()
    } else {
        let et = DMatrix::from_fn(n, p.eq.len(), |i, j| p.eq[j].0[i]);
        let svd = et.svd(true, true);
        let smax = svd.singular_values.max().max(1.0);
        let nu = svd
            .solve(&rhs, RANK_TOL * smax)
            .map_err(|m| Error::Synthesis(m.to_string()))?;
        nu.iter().copied().collect()
    };
    Ok(QpSolution {
        x,
        nu,
        mu,
        iterations,
    })
}
