use serde::{Deserialize, Serialize};

/// `coef * prod_i p_i^{powers_i}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Monomial {
    pub coef: f64,
    pub powers: Vec<u32>,
}

/// Sparse multivariate polynomial.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Polynomial {
    pub terms: Vec<Monomial>,
}

fn pow(x: f64, k: u32) -> f64 {
    x.powi(k as i32)
}

impl Polynomial {
    pub fn new(terms: Vec<(f64, Vec<u32>)>) -> Self {
        Self {
            terms: terms
                .into_iter()
                .map(|(coef, powers)| Monomial { coef, powers })
                .collect(),
        }
    }

    pub fn constant(c: f64, dims: usize) -> Self {
        Self::new(vec![(c, vec![0; dims])])
    }

    /// Largest variable count any term refers to.
    pub fn arity(&self) -> usize {
        self.terms.iter().map(|m| m.powers.len()).max().unwrap_or(0)
    }

    pub fn is_affine(&self) -> bool {
        self.terms.iter().all(|m| m.powers.iter().sum::<u32>() <= 1)
    }

    pub fn eval(&self, p: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|m| {
                m.coef
                    * m.powers
                        .iter()
                        .zip(p)
                        .map(|(&k, &x)| pow(x, k))
                        .product::<f64>()
            })
            .sum()
    }

    pub fn grad(&self, p: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; p.len()];
        for m in &self.terms {
            for (i, &ki) in m.powers.iter().enumerate() {
                if ki == 0 {
                    continue;
                }
                let mut v = m.coef * ki as f64 * pow(p[i], ki - 1);
                for (j, &kj) in m.powers.iter().enumerate() {
                    if j != i {
                        v *= pow(p[j], kj);
                    }
                }
                g[i] += v;
            }
        }
        g
    }

    pub fn hessian(&self, p: &[f64]) -> Vec<Vec<f64>> {
        let n = p.len();
        let mut h = vec![vec![0.0; n]; n];
        for m in &self.terms {
            for i in 0..m.powers.len() {
                for j in 0..m.powers.len() {
                    let mut powers = m.powers.clone();
                    let mut c = m.coef;
                    for &k in &[i, j] {
                        if powers[k] == 0 {
                            c = 0.0;
                            break;
                        }
                        c *= powers[k] as f64;
                        powers[k] -= 1;
                    }
                    if c != 0.0 {
                        h[i][j] += c * powers
                            .iter()
                            .zip(p)
                            .map(|(&k, &x)| pow(x, k))
                            .product::<f64>();
                    }
                }
            }
        }
        h
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eval_grad_hessian_of_cubic() {
        // x^3 y + 2y
        let q = Polynomial::new(vec![(1.0, vec![3, 1]), (2.0, vec![0, 1])]);
        let p = [2.0, -1.0];
        assert_eq!(q.eval(&p), -8.0 - 2.0);
        assert_eq!(q.grad(&p), vec![-12.0, 10.0]);
        let h = q.hessian(&p);
        assert_eq!(h[0][0], -12.0);
        assert_eq!(h[0][1], 12.0);
        assert_eq!(h[1][0], 12.0);
        assert_eq!(h[1][1], 0.0);
    }
}
