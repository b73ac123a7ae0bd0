use std::collections::HashMap;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VarId(pub usize);

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VarKind {
    Continuous,
    Binary,
}

/// What a variable stands for, so post-solve audits know which bounds are artificial.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VarRole {
    Plain,
    Multiplier,
    Product,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Variable {
    pub name: String,
    pub kind: VarKind,
    pub lower: f64,
    pub upper: f64,
    pub role: VarRole,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sense {
    Le,
    Eq,
    Ge,
}

/// Sparse affine expression.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LinExpr {
    pub terms: Vec<(VarId, f64)>,
    pub constant: f64,
}

impl LinExpr {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn var(v: VarId) -> Self {
        Self {
            terms: vec![(v, 1.0)],
            constant: 0.0,
        }
    }

    pub fn term(v: VarId, c: f64) -> Self {
        Self {
            terms: vec![(v, c)],
            constant: 0.0,
        }
    }

    pub fn constant(c: f64) -> Self {
        Self {
            terms: Vec::new(),
            constant: c,
        }
    }

    pub fn add(&mut self, v: VarId, c: f64) -> &mut Self {
        self.terms.push((v, c));
        self
    }

    pub fn add_const(&mut self, c: f64) -> &mut Self {
        self.constant += c;
        self
    }

    pub fn add_expr(&mut self, other: &LinExpr, scale: f64) -> &mut Self {
        self.terms
            .extend(other.terms.iter().map(|&(v, c)| (v, c * scale)));
        self.constant += other.constant * scale;
        self
    }

    pub fn plus(mut self, v: VarId, c: f64) -> Self {
        self.terms.push((v, c));
        self
    }

    pub fn plus_const(mut self, c: f64) -> Self {
        self.constant += c;
        self
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            terms: self.terms.iter().map(|&(v, c)| (v, c * s)).collect(),
            constant: self.constant * s,
        }
    }

    pub fn eval(&self, values: &[f64]) -> f64 {
        self.constant
            + self
                .terms
                .iter()
                .map(|&(v, c)| c * values[v.0])
                .sum::<f64>()
    }

    /// Merges repeated variables (keeping first-appearance order) and drops zero coefficients.
    pub fn compact(&self) -> Self {
        let mut order: Vec<VarId> = Vec::new();
        let mut acc: HashMap<VarId, f64> = HashMap::new();
        for &(v, c) in &self.terms {
            if let Some(x) = acc.get_mut(&v) {
                *x += c;
            } else {
                order.push(v);
                acc.insert(v, c);
            }
        }
        Self {
            terms: order
                .into_iter()
                .map(|v| (v, acc[&v]))
                .filter(|&(_, c)| c != 0.0)
                .collect(),
            constant: self.constant,
        }
    }
}

/// A linear row `sum terms (sense) rhs`.
#[derive(Clone, Debug, PartialEq)]
pub struct Row {
    pub name: String,
    pub terms: Vec<(VarId, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

impl Row {
    pub fn activity(&self, values: &[f64]) -> f64 {
        self.terms.iter().map(|&(v, c)| c * values[v.0]).sum()
    }

    pub fn violation(&self, values: &[f64]) -> f64 {
        let a = self.activity(values);
        match self.sense {
            Sense::Le => (a - self.rhs).max(0.0),
            Sense::Ge => (self.rhs - a).max(0.0),
            Sense::Eq => (a - self.rhs).abs(),
        }
    }
}

/// Solver-agnostic mixed-integer linear program with a minimized objective.
#[derive(Clone, Debug, Default)]
pub struct MilpModel {
    pub name: String,
    vars: Vec<Variable>,
    rows: Vec<Row>,
    objective: Option<LinExpr>,
    names: HashMap<String, usize>,
    row_names: HashMap<String, usize>,
    constant_conflict: Option<String>,
}

/// Characters allowed in names; everything else is reserved by the text format.
pub fn valid_name(name: &str) -> bool {
    let mut chars = name.chars();
    let Some(first) = chars.next() else {
        return false;
    };
    if !(first.is_ascii_alphabetic() || first == '_') {
        return false;
    }
    if matches!(first, 'e' | 'E')
        && name[1..].starts_with(|c: char| c.is_ascii_digit() || c == 'e' || c == 'E')
    {
        return false;
    }
    name.len() <= 255
        && name
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '.')
}

impl MilpModel {
    pub fn new(name: &str) -> Self {
        Self {
            name: name.to_string(),
            ..Default::default()
        }
    }

    pub fn vars(&self) -> &[Variable] {
        &self.vars
    }

    pub fn rows(&self) -> &[Row] {
        &self.rows
    }

    pub fn var(&self, v: VarId) -> &Variable {
        &self.vars[v.0]
    }

    pub fn num_vars(&self) -> usize {
        self.vars.len()
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn objective(&self) -> Option<&LinExpr> {
        self.objective.as_ref()
    }

    pub fn var_by_name(&self, name: &str) -> Option<VarId> {
        self.names.get(name).map(|&i| VarId(i))
    }

    /// Name of a row whose terms all vanished but whose constant part is violated.
    pub fn constant_conflict(&self) -> Option<&str> {
        self.constant_conflict.as_deref()
    }

    pub fn add_var(&mut self, name: &str, kind: VarKind, lower: f64, upper: f64) -> Result<VarId> {
        if !valid_name(name) {
            return Err(Error::Model(format!(
                "variable name {name:?} contains reserved characters"
            )));
        }
        if self.names.contains_key(name) || self.row_names.contains_key(name) {
            return Err(Error::Model(format!("duplicate name {name:?}")));
        }
        if lower.is_nan() || upper.is_nan() || lower > upper {
            return Err(Error::Model(format!(
                "variable {name:?} has bounds [{lower}, {upper}]"
            )));
        }
        let (lower, upper) = match kind {
            VarKind::Binary => {
                if lower < 0.0 || upper > 1.0 {
                    return Err(Error::Model(format!(
                        "binary {name:?} must have bounds within [0, 1]"
                    )));
                }
                (lower.ceil(), upper.floor())
            }
            VarKind::Continuous => (lower, upper),
        };
        let id = self.vars.len();
        self.vars.push(Variable {
            name: name.to_string(),
            kind,
            lower,
            upper,
            role: VarRole::Plain,
        });
        self.names.insert(name.to_string(), id);
        Ok(VarId(id))
    }

    pub fn continuous(&mut self, name: &str, lower: f64, upper: f64) -> Result<VarId> {
        self.add_var(name, VarKind::Continuous, lower, upper)
    }

    pub fn free(&mut self, name: &str) -> Result<VarId> {
        self.add_var(name, VarKind::Continuous, f64::NEG_INFINITY, f64::INFINITY)
    }

    pub fn binary(&mut self, name: &str) -> Result<VarId> {
        self.add_var(name, VarKind::Binary, 0.0, 1.0)
    }

    pub fn set_role(&mut self, v: VarId, role: VarRole) {
        self.vars[v.0].role = role;
    }

    pub fn set_bounds(&mut self, v: VarId, lower: f64, upper: f64) -> Result<()> {
        if lower.is_nan() || upper.is_nan() || lower > upper {
            return Err(Error::Model(format!(
                "bounds [{lower}, {upper}] for {:?}",
                self.vars[v.0].name
            )));
        }
        self.vars[v.0].lower = lower;
        self.vars[v.0].upper = upper;
        Ok(())
    }

    /// Adds `expr (sense) rhs`; the expression's constant moves to the right-hand side.
    pub fn add_row(&mut self, name: &str, expr: &LinExpr, sense: Sense, rhs: f64) -> Result<()> {
        if !valid_name(name) {
            return Err(Error::Model(format!(
                "row name {name:?} contains reserved characters"
            )));
        }
        if self.names.contains_key(name) || self.row_names.contains_key(name) {
            return Err(Error::Model(format!("duplicate name {name:?}")));
        }
        if let Some(&(v, _)) = expr.terms.iter().find(|(v, _)| v.0 >= self.vars.len()) {
            return Err(Error::Model(format!(
                "row {name:?} references undeclared variable {}",
                v.0
            )));
        }
        if !rhs.is_finite()
            || !expr.constant.is_finite()
            || expr.terms.iter().any(|(_, c)| !c.is_finite())
        {
            return Err(Error::Model(format!(
                "row {name:?} has a non-finite coefficient"
            )));
        }
        let e = expr.compact();
        let rhs = rhs - e.constant;
        if e.terms.is_empty() {
            let ok = match sense {
                Sense::Le => 0.0 <= rhs + 1e-9,
                Sense::Ge => 0.0 >= rhs - 1e-9,
                Sense::Eq => rhs.abs() <= 1e-9,
            };
            if !ok && self.constant_conflict.is_none() {
                self.constant_conflict = Some(name.to_string());
            }
            return Ok(());
        }
        self.row_names.insert(name.to_string(), self.rows.len());
        self.rows.push(Row {
            name: name.to_string(),
            terms: e.terms,
            sense,
            rhs,
        });
        Ok(())
    }

    pub fn set_objective(&mut self, expr: LinExpr) {
        self.objective = Some(expr.compact());
    }

    pub fn clear_objective(&mut self) {
        self.objective = None;
    }

    pub fn add_to_objective(&mut self, expr: &LinExpr) {
        let mut obj = self.objective.take().unwrap_or_default();
        obj.add_expr(expr, 1.0);
        self.objective = Some(obj.compact());
    }

    pub fn objective_value(&self, values: &[f64]) -> Option<f64> {
        self.objective.as_ref().map(|o| o.eval(values))
    }

    /// Independent feasibility check: bounds, integrality and every row within `tol`.
    pub fn check_assignment(&self, values: &[f64], tol: f64) -> Vec<String> {
        let mut issues = Vec::new();
        if values.len() != self.vars.len() {
            issues.push(format!(
                "assignment has {} values for {} variables",
                values.len(),
                self.vars.len()
            ));
            return issues;
        }
        if let Some(r) = &self.constant_conflict {
            issues.push(format!("row {r} is constant and violated"));
        }
        for (v, x) in self.vars.iter().zip(values) {
            if !x.is_finite() || *x < v.lower - tol || *x > v.upper + tol {
                issues.push(format!(
                    "{} = {x} outside [{}, {}]",
                    v.name, v.lower, v.upper
                ));
            }
            if v.kind == VarKind::Binary && (x - x.round()).abs() > tol {
                issues.push(format!("{} = {x} is not integral", v.name));
            }
        }
        for r in &self.rows {
            let viol = r.violation(values);
            if viol > tol {
                issues.push(format!("row {} violated by {viol:e}", r.name));
            }
        }
        issues
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_are_checked() {
        let mut m = MilpModel::new("t");
        assert!(m.continuous("x", 0.0, 1.0).is_ok());
        assert!(m.continuous("x", 0.0, 1.0).is_err());
        assert!(m.continuous("a b", 0.0, 1.0).is_err());
        assert!(m.continuous("1x", 0.0, 1.0).is_err());
        assert!(m.continuous("e12", 0.0, 1.0).is_err());
        assert!(m.continuous("eps", 0.0, 1.0).is_ok());
        let x = m.var_by_name("x").unwrap();
        assert!(m.add_row("x", &LinExpr::var(x), Sense::Le, 1.0).is_err());
    }

    #[test]
    fn constant_moves_to_rhs_and_terms_merge() {
        let mut m = MilpModel::new("t");
        let x = m.continuous("x", 0.0, 10.0).unwrap();
        let e = LinExpr::term(x, 1.0).plus(x, 2.0).plus_const(4.0);
        m.add_row("r", &e, Sense::Le, 10.0).unwrap();
        assert_eq!(m.rows()[0].terms, vec![(x, 3.0)]);
        assert_eq!(m.rows()[0].rhs, 6.0);
    }

    #[test]
    fn empty_violated_row_is_recorded() {
        let mut m = MilpModel::new("t");
        m.add_row("ok", &LinExpr::constant(1.0), Sense::Le, 2.0)
            .unwrap();
        assert!(m.constant_conflict().is_none());
        m.add_row("bad", &LinExpr::constant(3.0), Sense::Le, 2.0)
            .unwrap();
        assert_eq!(m.constant_conflict(), Some("bad"));
    }

    #[test]
    fn check_assignment_flags_rows_and_bounds() {
        let mut m = MilpModel::new("t");
        let x = m.continuous("x", 0.0, 1.0).unwrap();
        let z = m.binary("z").unwrap();
        m.add_row("r", &LinExpr::var(x).plus(z, 1.0), Sense::Ge, 1.5)
            .unwrap();
        assert!(m.check_assignment(&[0.5, 1.0], 1e-6).is_empty());
        assert_eq!(m.check_assignment(&[0.5, 0.5], 1e-6).len(), 2);
        assert_eq!(m.check_assignment(&[2.0, 1.0], 1e-6).len(), 1);
    }
}
