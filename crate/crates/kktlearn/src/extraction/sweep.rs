use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::{Template, Verdict};
use crate::error::{Error, Result};

/// A regular grid with endpoints included: `resolution[d]` points spanning `region[d]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub region: Vec<(f64, f64)>,
    pub resolution: Vec<usize>,
}

impl GridSpec {
    pub fn square(region: Vec<(f64, f64)>, n: usize) -> Self {
        let d = region.len();
        Self {
            region,
            resolution: vec![n; d],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.region.is_empty() || self.region.len() != self.resolution.len() {
            return Err(Error::Spec(
                "grid region and resolution must be non-empty and of equal length".into(),
            ));
        }
        for (&(lo, hi), &n) in self.region.iter().zip(&self.resolution) {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) || n == 0 || (n == 1 && lo != hi) {
                return Err(Error::Spec(format!(
                    "bad grid axis [{lo}, {hi}] with {n} points"
                )));
            }
        }
        Ok(())
    }

    pub fn coord(&self, d: usize, i: usize) -> f64 {
        let (lo, hi) = self.region[d];
        let n = self.resolution[d];
        if n == 1 {
            lo
        } else {
            lo + (hi - lo) * i as f64 / (n - 1) as f64
        }
    }

    pub fn len(&self) -> usize {
        self.resolution.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Multi-index of flat cell `k`; the first axis varies slowest.
    pub fn index(&self, mut k: usize) -> Vec<usize> {
        let mut idx = vec![0; self.resolution.len()];
        for d in (0..idx.len()).rev() {
            idx[d] = k % self.resolution[d];
            k /= self.resolution[d];
        }
        idx
    }

    pub fn point(&self, idx: &[usize]) -> Vec<f64> {
        idx.iter()
            .enumerate()
            .map(|(d, &i)| self.coord(d, i))
            .collect()
    }

    /// Index of the grid point nearest to `p`, clamped to the region.
    pub fn nearest(&self, p: &[f64]) -> Vec<usize> {
        p.iter()
            .enumerate()
            .map(|(d, &x)| {
                let (lo, hi) = self.region[d];
                let n = self.resolution[d];
                if n == 1 || hi == lo {
                    return 0;
                }
                let k = ((x - lo) / (hi - lo) * (n - 1) as f64).round();
                k.clamp(0.0, (n - 1) as f64) as usize
            })
            .collect()
    }
}

pub fn grid_points(spec: &GridSpec) -> Vec<Vec<f64>> {
    (0..spec.len())
        .map(|k| spec.point(&spec.index(k)))
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub index: Vec<usize>,
    pub point: Vec<f64>,
    pub verdict: Verdict,
    /// True unsafety `g(p, theta*) > 0` when ground truth is known.
    pub truth_unsafe: Option<bool>,
    /// False for cells whose truth changes within one grid step.
    pub scored: bool,
    pub error: Option<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub cells: usize,
    pub guaranteed_safe: usize,
    pub guaranteed_unsafe: usize,
    pub unsure: usize,
    pub errors: usize,
    pub scored: usize,
    /// Fraction of scored truly safe cells claimed safe.
    pub coverage_safe: Option<f64>,
    /// Fraction of scored truly unsafe cells claimed unsafe.
    pub coverage_unsafe: Option<f64>,
    /// Fraction of scored safe claims that are truly safe.
    pub accuracy_safe: Option<f64>,
    pub accuracy_unsafe: Option<f64>,
    /// Claims contradicted by the truth over all cells: safe claims with `g >= eps`,
    /// unsafe claims with `g <= 0`.
    pub violations: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub grid: GridSpec,
    pub cells: Vec<CellResult>,
    pub summary: SweepSummary,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        1.0
    } else {
        num as f64 / den as f64
    }
}

impl SweepResult {
    /// One whitespace-separated row per cell: coordinates, verdict, truth (or `-`).
    pub fn to_table(&self) -> String {
        let dims = self.grid.region.len();
        let mut out = String::new();
        let head: Vec<String> = (0..dims).map(|d| format!("p{d}")).collect();
        out.push_str(&format!("{} verdict truth\n", head.join(" ")));
        for c in &self.cells {
            let coords: Vec<String> = c.point.iter().map(|x| format!("{x}")).collect();
            let truth = match c.truth_unsafe {
                Some(true) => "unsafe",
                Some(false) => "safe",
                None => "-",
            };
            out.push_str(&format!(
                "{} {} {}\n",
                coords.join(" "),
                c.verdict.as_str(),
                truth
            ));
        }
        out
    }

    pub fn count(&self, v: Verdict) -> usize {
        self.cells.iter().filter(|c| c.verdict == v).count()
    }
}

/// Queries every grid point, using `jobs` worker threads; scores against `truth` when given.
pub fn grid_sweep(
    template: &Template,
    grid: &GridSpec,
    truth: Option<&[f64]>,
    jobs: usize,
) -> Result<SweepResult> {
    grid.validate()?;
    let param = template.param();
    if grid.region.len() != param.dim_p() {
        return Err(Error::Dimension(
            "grid dimension differs from the constraint space".into(),
        ));
    }
    if let Some(t) = truth {
        if !param.theta_in_bounds(t) {
            return Err(Error::ThetaOutOfBounds("ground-truth theta".into()));
        }
    }
    let n = grid.len();
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<Result<CellResult>>>> = Mutex::new((0..n).map(|_| None).collect());
    let worker = || loop {
        let k = next.fetch_add(1, Ordering::Relaxed);
        if k >= n {
            break;
        }
        let index = grid.index(k);
        let point = grid.point(&index);
        let r = template.query(&point).map(|q| CellResult {
            index,
            point,
            verdict: q.verdict,
            truth_unsafe: None,
            scored: false,
            error: q.error,
        });
        let failed = r.is_err();
        slots.lock().expect("slot lock")[k] = Some(r);
        if failed {
            next.store(n, Ordering::Relaxed);
        }
    };
    std::thread::scope(|s| {
        for _ in 0..jobs.max(1) {
            s.spawn(worker);
        }
    });
    let mut cells = Vec::with_capacity(n);
    for r in slots.into_inner().expect("slot lock").into_iter().flatten() {
        cells.push(r?)
    }
    if cells.len() != n {
        return Err(Error::Solver("grid sweep stopped early".into()));
    }
    let eps = template.eps();
    let mut summary = SweepSummary {
        cells: n,
        guaranteed_safe: cells
            .iter()
            .filter(|c| c.verdict == Verdict::GuaranteedSafe)
            .count(),
        guaranteed_unsafe: cells
            .iter()
            .filter(|c| c.verdict == Verdict::GuaranteedUnsafe)
            .count(),
        unsure: cells
            .iter()
            .filter(|c| c.verdict == Verdict::Unsure)
            .count(),
        errors: cells.iter().filter(|c| c.error.is_some()).count(),
        ..Default::default()
    };
    if let Some(theta) = truth {
        let unsafe_at = |p: &[f64]| param.value(p, theta) > 0.0;
        let mut violations = 0;
        for c in &mut cells {
            let g = param.value(&c.point, theta);
            c.truth_unsafe = Some(g > 0.0);
            match c.verdict {
                Verdict::GuaranteedSafe if g >= eps => violations += 1,
                Verdict::GuaranteedUnsafe if g <= 0.0 => violations += 1,
                _ => {}
            }
            c.scored = neighbours(grid, &c.index)
                .iter()
                .all(|q| unsafe_at(&grid.point(q)) == (g > 0.0));
        }
        let scored: Vec<&CellResult> = cells.iter().filter(|c| c.scored).collect();
        let true_safe = scored
            .iter()
            .filter(|c| c.truth_unsafe == Some(false))
            .count();
        let true_unsafe = scored.len() - true_safe;
        let safe_hit = scored
            .iter()
            .filter(|c| c.truth_unsafe == Some(false) && c.verdict == Verdict::GuaranteedSafe)
            .count();
        let unsafe_hit = scored
            .iter()
            .filter(|c| c.truth_unsafe == Some(true) && c.verdict == Verdict::GuaranteedUnsafe)
            .count();
        let safe_claims = scored
            .iter()
            .filter(|c| c.verdict == Verdict::GuaranteedSafe)
            .count();
        let unsafe_claims = scored
            .iter()
            .filter(|c| c.verdict == Verdict::GuaranteedUnsafe)
            .count();
        summary.scored = scored.len();
        summary.coverage_safe = Some(ratio(safe_hit, true_safe));
        summary.coverage_unsafe = Some(ratio(unsafe_hit, true_unsafe));
        summary.accuracy_safe = Some(ratio(safe_hit, safe_claims));
        summary.accuracy_unsafe = Some(ratio(unsafe_hit, unsafe_claims));
        summary.violations = Some(violations);
    }
    Ok(SweepResult {
        grid: grid.clone(),
        cells,
        summary,
    })
}

/// All grid indices within one step along every axis, including diagonals.
fn neighbours(grid: &GridSpec, idx: &[usize]) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    for (d, &i) in idx.iter().enumerate() {
        let lo = i.saturating_sub(1);
        let hi = (i + 1).min(grid.resolution[d] - 1);
        out = out
            .into_iter()
            .flat_map(|prefix| {
                (lo..=hi).map(move |j| {
                    let mut v = prefix.clone();
                    v.push(j);
                    v
                })
            })
            .collect();
    }
    out
}
