use serde::{Deserialize, Serialize};

use super::model::{LinExpr, MilpModel, Sense, VarId, VarRole};
use crate::error::{Error, Result};

/// Big-M constants and the strict-inequality margin.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BigMConfig {
    pub m: f64,
    pub m_lo: f64,
    pub m_hi: f64,
    pub eps_strict: f64,
}

impl Default for BigMConfig {
    fn default() -> Self {
        Self {
            m: 1e4,
            m_lo: -100.0,
            m_hi: 100.0,
            eps_strict: 1e-4,
        }
    }
}

impl BigMConfig {
    /// Bound on multipliers, `U_lambda = max(-M_lo, M_hi)`.
    pub fn lambda_max(&self) -> f64 {
        self.m_hi.max(-self.m_lo)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.m > 0.0 && self.m.is_finite()) {
            return Err(Error::Spec("big-M must be positive and finite".into()));
        }
        if !(self.m_lo <= 0.0 && self.m_hi >= 0.0 && self.m_lo.is_finite() && self.m_hi.is_finite())
        {
            return Err(Error::Spec(
                "product bounds must satisfy M_lo <= 0 <= M_hi".into(),
            ));
        }
        if !(self.eps_strict > 0.0) {
            return Err(Error::Spec("eps_strict must be positive".into()));
        }
        Ok(())
    }
}

/// Adds `expr_n >= rhs_n - M_n (1 - z_n)` for each row and `sum z >= 1`; returns the binaries.
pub fn add_disjunction_with(
    model: &mut MilpModel,
    prefix: &str,
    rows: &[(LinExpr, f64, f64)],
) -> Result<Vec<VarId>> {
    if rows.is_empty() {
        return Err(Error::Model(format!("disjunction {prefix} has no rows")));
    }
    let mut zs = Vec::with_capacity(rows.len());
    for (n, (expr, rhs, big_m)) in rows.iter().enumerate() {
        let z = model.binary(&format!("{prefix}_z{n}"))?;
        let mut e = expr.clone();
        e.add(z, -big_m);
        model.add_row(&format!("{prefix}_r{n}"), &e, Sense::Ge, rhs - big_m)?;
        zs.push(z);
    }
    let sum = LinExpr {
        terms: zs.iter().map(|&z| (z, 1.0)).collect(),
        constant: 0.0,
    };
    model.add_row(&format!("{prefix}_any"), &sum, Sense::Ge, 1.0)?;
    Ok(zs)
}

/// Disjunction with the global big-M of `config`.
pub fn add_disjunction(
    model: &mut MilpModel,
    prefix: &str,
    rows: &[(LinExpr, f64)],
    config: &BigMConfig,
) -> Result<Vec<VarId>> {
    let rows: Vec<(LinExpr, f64, f64)> = rows
        .iter()
        .map(|(e, r)| (e.clone(), *r, config.m))
        .collect();
    add_disjunction_with(model, prefix, &rows)
}

/// Introduces `R = q * L` for binary `q` and `L` bounded in `[M_lo, M_hi]`, exactly.
pub fn linearize_product(
    model: &mut MilpModel,
    name: &str,
    q: VarId,
    l: VarId,
    config: &BigMConfig,
) -> Result<VarId> {
    let lv = model.var(l);
    if !(lv.lower.is_finite() && lv.upper.is_finite()) {
        return Err(Error::Model(format!(
            "product operand {} is unbounded",
            lv.name
        )));
    }
    if lv.lower < config.m_lo - 1e-12 || lv.upper > config.m_hi + 1e-12 {
        return Err(Error::Model(format!(
            "product operand {} has bounds [{}, {}] outside [{}, {}]",
            lv.name, lv.lower, lv.upper, config.m_lo, config.m_hi
        )));
    }
    let (lo, hi) = (config.m_lo, config.m_hi);
    let r = model.continuous(name, lo.min(0.0), hi)?;
    model.set_role(r, VarRole::Product);
    let rv = LinExpr::var(r);
    model.add_row(
        &format!("{name}_qlo"),
        &rv.clone().plus(q, -lo),
        Sense::Ge,
        0.0,
    )?;
    model.add_row(
        &format!("{name}_qhi"),
        &rv.clone().plus(q, -hi),
        Sense::Le,
        0.0,
    )?;
    model.add_row(
        &format!("{name}_llo"),
        &rv.clone().plus(l, -1.0).plus(q, -hi),
        Sense::Ge,
        -hi,
    )?;
    model.add_row(
        &format!("{name}_lhi"),
        &rv.clone().plus(l, -1.0).plus(q, -lo),
        Sense::Le,
        -lo,
    )?;
    model.add_row(
        &format!("{name}_lhi2"),
        &rv.plus(l, -1.0).plus(q, hi),
        Sense::Le,
        hi,
    )?;
    Ok(r)
}

/// Adds `s+ - s- = expr`, puts `s+ + s-` into the objective and returns that contribution.
pub fn add_abs_penalty(model: &mut MilpModel, name: &str, expr: &LinExpr) -> Result<LinExpr> {
    let sp = model.continuous(&format!("{name}_sp"), 0.0, f64::INFINITY)?;
    let sm = model.continuous(&format!("{name}_sm"), 0.0, f64::INFINITY)?;
    let mut e = expr.clone();
    e.add(sp, -1.0).add(sm, 1.0);
    model.add_row(name, &e, Sense::Eq, 0.0)?;
    let contribution = LinExpr::var(sp).plus(sm, 1.0);
    model.add_to_objective(&contribution);
    Ok(contribution)
}
