//! Adapter for the COIN-OR CBC command-line solver.
//!
//! The model is written as LP text; CBC writes two solution files: a text file
//! (`-solu`) with the termination status and names, and a binary file
//! (`-saveSolution`) with full-precision values. The binary layout is
//! `i32 nrows, i32 ncols, f64 objective, f64 row_activity[nrows],
//! f64 row_dual[nrows], f64 col_value[ncols], f64 col_dual[ncols]` (native endian).

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use super::{MilpBackend, SolveOptions, SolveResult, SolveStatus};
use crate::error::{Error, Result};
use crate::milp_ir::{to_lp_string, MilpModel};

/// Environment variable naming the CBC executable.
pub const CBC_ENV: &str = "KKTLEARN_CBC";

const FALLBACK_GLOBS: &[&str] = &["/usr/local/lib", "/usr/lib"];

#[derive(Clone, Debug)]
pub struct CbcBackend {
    pub executable: PathBuf,
}

/// Contents of a CBC text solution file.
#[derive(Clone, Debug, PartialEq)]
pub struct ParsedSolution {
    pub status: SolveStatus,
    pub status_line: String,
    pub objective: Option<f64>,
    pub rows: Vec<(String, f64)>,
    pub columns: Vec<(String, f64)>,
}

fn map_status(line: &str) -> SolveStatus {
    let head = line
        .split(" - ")
        .next()
        .unwrap_or("")
        .trim()
        .to_ascii_lowercase();
    if head.starts_with("optimal") {
        SolveStatus::Optimal
    } else if head.contains("infeasible") {
        SolveStatus::Infeasible
    } else if head.contains("unbounded") {
        SolveStatus::Unbounded
    } else if head.starts_with("stopped") {
        SolveStatus::TimeLimit
    } else {
        SolveStatus::Error
    }
}

/// Parses the text solution; the first `nrows` entries are rows, the rest columns.
pub fn parse_solution(text: &str, nrows: usize) -> Result<ParsedSolution> {
    let mut lines = text.lines();
    let status_line = lines
        .next()
        .ok_or_else(|| Error::Solver("empty solution file".into()))?
        .trim()
        .to_string();
    let status = map_status(&status_line);
    let objective = status_line
        .rsplit("objective value")
        .next()
        .filter(|_| status_line.contains("objective value"))
        .and_then(|s| s.trim().parse::<f64>().ok());
    let mut entries = Vec::new();
    for line in lines {
        let line = line.trim().trim_start_matches("**").trim();
        if line.is_empty() {
            continue;
        }
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks.len() < 3 {
            return Err(Error::Solver(format!("malformed solution line {line:?}")));
        }
        let value = toks[2]
            .parse::<f64>()
            .map_err(|_| Error::Solver(format!("bad value in line {line:?}")))?;
        entries.push((toks[1].to_string(), value));
    }
    if entries.len() < nrows {
        return Err(Error::Solver(format!(
            "solution lists {} entries but the model has {nrows} rows",
            entries.len()
        )));
    }
    let columns = entries.split_off(nrows);
    Ok(ParsedSolution {
        status,
        status_line,
        objective,
        rows: entries,
        columns,
    })
}

/// Column values from the binary solution file.
pub fn parse_binary_columns(bytes: &[u8]) -> Result<Vec<f64>> {
    let bad = || Error::Solver("truncated binary solution".into());
    let i32_at = |o: usize| -> Result<i32> {
        Ok(i32::from_ne_bytes(
            bytes.get(o..o + 4).ok_or_else(bad)?.try_into().unwrap(),
        ))
    };
    let nrows = i32_at(0)?;
    let ncols = i32_at(4)?;
    if nrows < 0 || ncols < 0 {
        return Err(Error::Solver("negative sizes in binary solution".into()));
    }
    let (nrows, ncols) = (nrows as usize, ncols as usize);
    let start = 16 + 16 * nrows;
    (0..ncols)
        .map(|j| {
            let o = start + 8 * j;
            Ok(f64::from_ne_bytes(
                bytes.get(o..o + 8).ok_or_else(bad)?.try_into().unwrap(),
            ))
        })
        .collect()
}

fn find_on_path(name: &str) -> Option<PathBuf> {
    let path = std::env::var_os("PATH")?;
    std::env::split_paths(&path)
        .map(|d| d.join(name))
        .find(|p| p.is_file())
}

fn find_bundled() -> Option<PathBuf> {
    // pip's `pulp` ships a CBC binary under .../pulp/solverdir/cbc/linux/<arch>/cbc
    let arch = if cfg!(target_arch = "aarch64") {
        "arm64"
    } else {
        "i64"
    };
    for root in FALLBACK_GLOBS {
        let Ok(entries) = std::fs::read_dir(root) else {
            continue;
        };
        let mut dirs: Vec<PathBuf> = entries.flatten().map(|e| e.path()).collect();
        dirs.sort();
        for d in dirs {
            if !d
                .file_name()
                .is_some_and(|n| n.to_string_lossy().starts_with("python3"))
            {
                continue;
            }
            for site in ["dist-packages", "site-packages"] {
                let p = d
                    .join(site)
                    .join("pulp/solverdir/cbc/linux")
                    .join(arch)
                    .join("cbc");
                if p.is_file() {
                    return Some(p);
                }
            }
        }
    }
    None
}

impl CbcBackend {
    pub fn new(executable: impl Into<PathBuf>) -> Self {
        Self {
            executable: executable.into(),
        }
    }

    /// `$KKTLEARN_CBC`, then `cbc` on `PATH`, then a CBC bundled with a Python `pulp` install.
    pub fn locate() -> Result<Self> {
        if let Some(p) = std::env::var_os(CBC_ENV) {
            let p = PathBuf::from(p);
            if p.is_file() {
                return Ok(Self::new(p));
            }
            return Err(Error::Solver(format!(
                "{CBC_ENV} points to {} which does not exist",
                p.display()
            )));
        }
        find_on_path("cbc")
            .or_else(find_bundled)
            .map(Self::new)
            .ok_or_else(|| Error::Solver(format!("no CBC executable found; set {CBC_ENV}")))
    }

    fn run(
        &self,
        model: &MilpModel,
        options: &SolveOptions,
        dir: &Path,
    ) -> Result<(SolveStatus, Option<Vec<f64>>, Option<f64>)> {
        let lp = dir.join("model.lp");
        let solu = dir.join("model.sol");
        let bin = dir.join("model.bin");
        std::fs::write(&lp, to_lp_string(model)?)?;
        let seed = (options.seed % 2_000_000_000).max(1).to_string();
        let mut cmd = Command::new(&self.executable);
        cmd.arg(&lp)
            .args([
                "-threads",
                "1",
                "-randomSeed",
                &seed,
                "-randomCbcSeed",
                &seed,
            ])
            .args(["-integerTolerance", "1e-9", "-primalTolerance", "1e-9"]);
        if let Some(t) = options.time_limit {
            cmd.args(["-sec", &format!("{t}")]);
        }
        if !options.preprocess {
            cmd.args(["-preprocess", "off"]);
        }
        if let Some(g) = options.mip_gap {
            cmd.args(["-ratioGap", &format!("{g}")]);
        }
        cmd.args(["-printingOptions", "all", "-solve", "-solu"])
            .arg(&solu)
            .arg("-saveSolution")
            .arg(&bin);
        let out = cmd.output().map_err(|e| {
            Error::Solver(format!(
                "failed to start {}: {e}",
                self.executable.display()
            ))
        })?;
        let text = std::fs::read_to_string(&solu).map_err(|_| {
            let log = String::from_utf8_lossy(&out.stdout);
            let tail: Vec<&str> = log.lines().rev().take(15).collect();
            Error::Solver(format!(
                "CBC wrote no solution (exit {:?}); log tail:\n{}\n{}",
                out.status.code(),
                tail.into_iter().rev().collect::<Vec<_>>().join("\n"),
                String::from_utf8_lossy(&out.stderr)
            ))
        })?;
        let parsed = parse_solution(&text, model.num_rows())?;
        let mut status = parsed.status;
        if status == SolveStatus::Error {
            return Err(Error::Solver(format!(
                "unrecognized CBC status {:?}",
                parsed.status_line
            )));
        }
        if status == SolveStatus::Optimal && model.objective().is_none() {
            status = SolveStatus::Feasible;
        }
        if !status.has_solution() {
            return Ok((status, None, None));
        }
        let exact = std::fs::read(&bin)
            .ok()
            .and_then(|b| parse_binary_columns(&b).ok());
        let mut values = vec![0.0; model.num_vars()];
        let mut seen = vec![false; model.num_vars()];
        for (j, (name, v)) in parsed.columns.iter().enumerate() {
            let id = model
                .var_by_name(name)
                .ok_or_else(|| Error::Solver(format!("CBC reported unknown column {name:?}")))?;
            values[id.0] = match &exact {
                Some(ex) if ex.len() == parsed.columns.len() => ex[j],
                _ => *v,
            };
            seen[id.0] = true;
        }
        if let Some(i) = seen.iter().position(|s| !s) {
            return Err(Error::Solver(format!(
                "CBC omitted column {}",
                model.vars()[i].name
            )));
        }
        Ok((status, Some(values), parsed.objective))
    }
}

impl MilpBackend for CbcBackend {
    fn name(&self) -> &str {
        "cbc"
    }

    fn solve_raw(&self, model: &MilpModel, options: &SolveOptions) -> SolveResult {
        let start = Instant::now();
        let dir = match tempfile::Builder::new().prefix("kktlearn-cbc").tempdir() {
            Ok(d) => d,
            Err(e) => {
                return SolveResult::error(
                    format!("cannot create scratch directory: {e}"),
                    start.elapsed(),
                )
            }
        };
        match self.run(model, options, dir.path()) {
            Ok((status, values, objective)) => SolveResult {
                status,
                values,
                objective,
                time: start.elapsed(),
                diagnostics: String::new(),
            },
            Err(e) => SolveResult::error(e.to_string(), start.elapsed()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn status_lines() {
        assert_eq!(
            map_status("Optimal - objective value 0.5"),
            SolveStatus::Optimal
        );
        assert_eq!(
            map_status("Infeasible - objective value 0"),
            SolveStatus::Infeasible
        );
        assert_eq!(
            map_status("Integer infeasible - objective value 0"),
            SolveStatus::Infeasible
        );
        assert_eq!(
            map_status("Unbounded - objective value 0"),
            SolveStatus::Unbounded
        );
        assert_eq!(
            map_status("Stopped on time - objective value 3"),
            SolveStatus::TimeLimit
        );
        assert_eq!(map_status("garbage"), SolveStatus::Error);
    }

    #[test]
    fn binary_layout() {
        let mut b = Vec::new();
        b.extend_from_slice(&1i32.to_ne_bytes());
        b.extend_from_slice(&2i32.to_ne_bytes());
        for v in [9.0f64, 1.0, 2.0, 0.1, 0.2, 3.0, 4.0] {
            b.extend_from_slice(&v.to_ne_bytes());
        }
        assert_eq!(parse_binary_columns(&b).unwrap(), vec![0.1, 0.2]);
        assert!(parse_binary_columns(&b[..30]).is_err());
    }
}
