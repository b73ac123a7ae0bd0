//! Writer for the LP text format subset understood by common MILP solvers:
//! `Minimize`, `Subject To`, `Bounds`, `Binaries`, `End`, linear terms only.

use std::fmt::Write;

use super::model::{MilpModel, Sense, VarId, VarKind};
use crate::error::{Error, Result};

const TERMS_PER_LINE: usize = 8;

/// Decimal text that parses back to the same `f64`.
pub fn fmt_num(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    let a = v.abs();
    if (1e-4..1e15).contains(&a) {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

fn write_terms(out: &mut String, model: &MilpModel, terms: &[(VarId, f64)]) {
    for (k, &(v, c)) in terms.iter().enumerate() {
        if k > 0 && k % TERMS_PER_LINE == 0 {
            out.push_str("\n   ");
        }
        let name = &model.var(v).name;
        if k == 0 {
            if c < 0.0 {
                let _ = write!(out, "- {} {name}", fmt_num(-c));
            } else {
                let _ = write!(out, "{} {name}", fmt_num(c));
            }
        } else if c < 0.0 {
            let _ = write!(out, " - {} {name}", fmt_num(-c));
        } else {
            let _ = write!(out, " + {} {name}", fmt_num(c));
        }
    }
}

/// Serializes `model`; variables and rows appear in insertion order.
pub fn to_lp_string(model: &MilpModel) -> Result<String> {
    for v in model.vars() {
        if !super::model::valid_name(&v.name) {
            return Err(Error::Model(format!(
                "variable name {:?} contains reserved characters",
                v.name
            )));
        }
    }
    let mut out = String::new();
    if !model.name.is_empty() {
        let _ = writeln!(out, "\\ {}", model.name.replace('\n', " "));
    }
    out.push_str("Minimize\n obj: ");
    match model.objective() {
        Some(obj) if !obj.terms.is_empty() => write_terms(&mut out, model, &obj.terms),
        _ => {
            if let Some(first) = model.vars().first() {
                let _ = write!(out, "0 {}", first.name);
            }
        }
    }
    out.push_str("\nSubject To\n");
    for row in model.rows() {
        let _ = write!(out, " {}: ", row.name);
        write_terms(&mut out, model, &row.terms);
        let op = match row.sense {
            Sense::Le => "<=",
            Sense::Eq => "=",
            Sense::Ge => ">=",
        };
        let _ = writeln!(out, " {op} {}", fmt_num(row.rhs));
    }
    out.push_str("Bounds\n");
    for v in model.vars() {
        let (lo, hi) = (v.lower, v.upper);
        if v.kind == VarKind::Binary {
            if lo == hi {
                let _ = writeln!(out, " {} = {}", v.name, fmt_num(lo));
            }
            continue;
        }
        let line = match (lo.is_finite(), hi.is_finite()) {
            (false, false) => format!(" {} free", v.name),
            (true, false) => format!(" {} >= {}", v.name, fmt_num(lo)),
            (false, true) => format!(" -inf <= {} <= {}", v.name, fmt_num(hi)),
            (true, true) if lo == hi => format!(" {} = {}", v.name, fmt_num(lo)),
            (true, true) => format!(" {} <= {} <= {}", fmt_num(lo), v.name, fmt_num(hi)),
        };
        out.push_str(&line);
        out.push('\n');
    }
    let binaries: Vec<&str> = model
        .vars()
        .iter()
        .filter(|v| v.kind == VarKind::Binary)
        .map(|v| v.name.as_str())
        .collect();
    if !binaries.is_empty() {
        out.push_str("Binaries\n");
        for chunk in binaries.chunks(TERMS_PER_LINE) {
            let _ = writeln!(out, " {}", chunk.join(" "));
        }
    }
    out.push_str("End\n");
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::milp_ir::model::LinExpr;

    #[test]
    fn numbers_round_trip() {
        for v in [0.1, -2.5, 1e-9, 123456789.125, 1e20, -7e-5, 1.0 / 3.0] {
            assert_eq!(fmt_num(v).parse::<f64>().unwrap(), v);
        }
        assert_eq!(fmt_num(-0.0), "0");
        assert_eq!(fmt_num(2.0), "2");
    }

    #[test]
    fn long_rows_wrap() {
        let mut m = MilpModel::new("w");
        let vs: Vec<_> = (0..20)
            .map(|i| m.continuous(&format!("x{i}"), 0.0, 1.0).unwrap())
            .collect();
        let e = LinExpr {
            terms: vs.iter().map(|&v| (v, 1.0)).collect(),
            constant: 0.0,
        };
        m.add_row("r", &e, Sense::Le, 3.0).unwrap();
        let text = to_lp_string(&m).unwrap();
        let row_lines = text
            .lines()
            .skip_while(|l| !l.starts_with(" r:"))
            .take_while(|l| !l.starts_with("Bounds"))
            .count();
        assert_eq!(row_lines, 3);
    }

    #[test]
    fn deterministic_output() {
        let build = || {
            let mut m = MilpModel::new("d");
            let x = m.continuous("x", -1.0, 2.0).unwrap();
            let z = m.binary("z").unwrap();
            m.add_row("r", &LinExpr::var(x).plus(z, -3.0), Sense::Ge, 0.25)
                .unwrap();
            m.set_objective(LinExpr::var(x));
            to_lp_string(&m).unwrap()
        };
        assert_eq!(build(), build());
    }
}
