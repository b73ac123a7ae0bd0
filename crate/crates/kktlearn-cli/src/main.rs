use std::collections::HashSet;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use kktlearn::extraction::{
    grid_points, grid_sweep, GridSpec, SafeBox, SweepResult, Template, Verdict,
};
use kktlearn::kkt::EncodingMode;
use kktlearn::learner::{grow, learn, LearnConfig};
use kktlearn::model::{ConstraintParameterization, Family};
use kktlearn::planner::{check_safety, plan};
use kktlearn::problem::Problem;
use kktlearn::scenarios;
use kktlearn::solver::{backend_by_name, CbcBackend, MilpBackend, BACKENDS};
use kktlearn::synth::{perturb, synthesize, RouteHint, SynthOptions};
use kktlearn::{Error, Result};
use serde_json::json;

#[derive(Parser)]
#[command(
    name = "kktlearn",
    version,
    about = "Learn constraints from locally-optimal demonstrations"
)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Seed for the solver and for demonstration noise.
    #[arg(long, global = true, default_value_t = 1)]
    seed: u64,
    /// Worker threads for grid sweeps.
    #[arg(long, global = true, default_value_t = 1)]
    jobs: usize,
    /// Backend name (`cbc`) or path to a CBC executable.
    #[arg(long, global = true, default_value = "cbc")]
    solver: String,
    /// Solver time limit per program, seconds.
    #[arg(long, global = true)]
    time_limit: Option<f64>,
    /// Override the indicator big-M.
    #[arg(long, global = true)]
    big_m: Option<f64>,
    /// Override the lower product bound M_lo.
    #[arg(long, global = true, allow_hyphen_values = true)]
    m_lo: Option<f64>,
    /// Override the upper product bound M_hi.
    #[arg(long, global = true)]
    m_hi: Option<f64>,
    /// Override the strictness margin of the unsafe probe.
    #[arg(long, global = true)]
    eps_strict: Option<f64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Exact,
    Suboptimal,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize a locally-optimal demonstration under the problem's true theta and append it.
    Synth {
        problem: PathBuf,
        #[arg(long, value_parser = parse_vec, allow_hyphen_values = true)]
        from: std::vec::Vec<f64>,
        #[arg(long, value_parser = parse_vec, allow_hyphen_values = true)]
        to: std::vec::Vec<f64>,
        /// Number of states (default: the problem's horizon).
        #[arg(long)]
        horizon: Option<usize>,
        /// Standard deviation of noise added to interior states.
        #[arg(long, default_value_t = 0.0)]
        sigma: f64,
        /// Output problem file (default: overwrite the input).
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Recover one consistent theta (and gamma), or grow a box union until feasible.
    Learn {
        problem: PathBuf,
        #[arg(long, value_enum, default_value = "exact")]
        mode: Mode,
        /// Grow the number of boxes up to this many.
        #[arg(long)]
        n_max: Option<usize>,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Classify one constraint-space point.
    Query {
        problem: PathBuf,
        #[arg(long, value_parser = parse_vec, allow_hyphen_values = true)]
        point: std::vec::Vec<f64>,
        #[arg(long, value_enum, default_value = "exact")]
        mode: Mode,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Classify every point of a grid.
    Sweep {
        problem: PathBuf,
        #[command(flatten)]
        grid: GridArgs,
        #[arg(long, value_enum, default_value = "exact")]
        mode: Mode,
        /// Per-cell table output.
        #[arg(long)]
        table: Option<PathBuf>,
        /// Summary document output.
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Extract guaranteed-safe boxes around seed points.
    Volume {
        problem: PathBuf,
        /// Seed point; repeatable.
        #[arg(long = "at", value_parser = parse_vec, allow_hyphen_values = true)]
        at: Vec<std::vec::Vec<f64>>,
        /// Use every point of the grid as a seed as well.
        #[arg(long)]
        grid_seeds: bool,
        #[command(flatten)]
        grid: GridArgs,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Plan through a box-list document.
    Plan {
        boxes: PathBuf,
        #[arg(long, value_parser = parse_vec, allow_hyphen_values = true)]
        from: std::vec::Vec<f64>,
        #[arg(long, value_parser = parse_vec, allow_hyphen_values = true)]
        to: std::vec::Vec<f64>,
        #[arg(long, default_value_t = 0.1)]
        resolution: f64,
        /// Waypoint table output.
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Check demonstrations against the true theta, or a waypoint file against box lists.
    Verify {
        /// Problem file whose demonstrations are checked under its truth.
        #[arg(long)]
        problem: Option<PathBuf>,
        /// Waypoint table (one point per line).
        #[arg(long)]
        path: Option<PathBuf>,
        #[arg(long)]
        safe: Option<PathBuf>,
        #[arg(long)]
        unsafe_boxes: Option<PathBuf>,
        #[arg(long, default_value_t = 0.05)]
        spacing: f64,
    },
    /// Run a canned experiment end to end and compare with its expected summary.
    Reproduce {
        #[arg(value_parser = ["fig2-center", "fig2-left", "cost-sets", "nonlinear"])]
        name: String,
        /// Directory for the problem files and sweep tables.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
}

#[derive(Args)]
struct GridArgs {
    /// Grid region as lo:hi per axis, comma-separated (default: the problem's grid).
    #[arg(long, allow_hyphen_values = true)]
    region: Option<String>,
    /// Points per axis.
    #[arg(long)]
    resolution: Option<usize>,
}

fn parse_vec(s: &str) -> std::result::Result<Vec<f64>, String> {
    s.split(',')
        .map(|x| x.trim().parse::<f64>().map_err(|e| format!("{x:?}: {e}")))
        .collect()
}

fn parse_region(s: &str) -> Result<Vec<(f64, f64)>> {
    s.split(',')
        .map(|axis| {
            let (lo, hi) = axis
                .split_once(':')
                .ok_or_else(|| Error::Spec(format!("region axis {axis:?} is not lo:hi")))?;
            let p = |x: &str| {
                x.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Spec(format!("region {x:?}: {e}")))
            };
            Ok((p(lo)?, p(hi)?))
        })
        .collect()
}

impl GridArgs {
    fn resolve(&self, problem: &Problem) -> Result<GridSpec> {
        let base = problem.grid.clone();
        let region = match (&self.region, &base) {
            (Some(r), _) => parse_region(r)?,
            (None, Some(g)) => g.region.clone(),
            (None, None) => {
                return Err(Error::Spec("no grid in the problem; pass --region".into()))
            }
        };
        let resolution = match (self.resolution, &base) {
            (Some(n), _) => vec![n; region.len()],
            (None, Some(g)) if g.region.len() == region.len() => g.resolution.clone(),
            _ => vec![41; region.len()],
        };
        let g = GridSpec { region, resolution };
        g.validate()?;
        Ok(g)
    }
}

impl Global {
    fn backend(&self) -> Result<Box<dyn MilpBackend>> {
        if BACKENDS.contains(&self.solver.as_str()) {
            backend_by_name(&self.solver)
        } else {
            Ok(Box::new(CbcBackend::new(PathBuf::from(&self.solver))))
        }
    }

    fn config(&self, problem: &Problem, mode: Mode) -> Result<LearnConfig> {
        let mut c = LearnConfig {
            big_m: problem.big_m,
            ..LearnConfig::default()
        };
        c.mode = match mode {
            Mode::Exact => EncodingMode::Exact,
            Mode::Suboptimal => EncodingMode::Suboptimal,
        };
        c.solve.seed = self.seed;
        c.solve.time_limit = self.time_limit;
        if let Some(m) = self.big_m {
            c.big_m.m = m;
        }
        if let Some(m) = self.m_lo {
            c.big_m.m_lo = m;
        }
        if let Some(m) = self.m_hi {
            c.big_m.m_hi = m;
        }
        if let Some(e) = self.eps_strict {
            c.big_m.eps_strict = e;
        }
        c.big_m.validate()?;
        Ok(c)
    }
}

fn emit(doc: &serde_json::Value, out: Option<&Path>) -> Result<()> {
    let text = serde_json::to_string_pretty(doc)? + "\n";
    match out {
        Some(p) => std::fs::write(p, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn template(problem: &Problem, global: &Global, mode: Mode) -> Result<Template> {
    let config = global.config(problem, mode)?;
    Template::new(
        &problem.demos()?,
        &problem.cost,
        &problem.parameterization,
        global.backend()?,
        &config,
    )
}

/// Exit status per failure class.
fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Infeasible(_) | Error::Contradiction(_) => 2,
        Error::Solver(_) => 3,
        Error::Spec(_)
        | Error::Dimension(_)
        | Error::ThetaOutOfBounds(_)
        | Error::Json(_)
        | Error::Model(_) => 4,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn run(cli: &Cli) -> Result<u8> {
    let g = &cli.global;
    match &cli.command {
        Command::Synth {
            problem,
            from,
            to,
            horizon,
            sigma,
            out,
        } => {
            let mut p = Problem::load(problem)?;
            let theta = p
                .truth
                .clone()
                .ok_or_else(|| Error::Spec("synthesis needs `truth` in the problem".into()))?;
            let mut task = p.task.with_endpoints(from.clone(), to.clone());
            task.horizon = horizon.unwrap_or(task.horizon);
            let s = synthesize(
                &task,
                &p.cost,
                &p.parameterization,
                &theta,
                &RouteHint::free(task.horizon),
                &SynthOptions::default(),
            )?;
            let traj = if *sigma > 0.0 {
                perturb(
                    &s.trajectory,
                    &task,
                    &p.parameterization,
                    &theta,
                    *sigma,
                    g.seed,
                )?
            } else {
                s.trajectory
            };
            p.demonstrations.push(traj);
            p.validate()?;
            p.save(out.as_deref().unwrap_or(problem))?;
            eprintln!("residual {:.3e}, cost {:.6}", s.residual.max(), s.cost);
            Ok(0)
        }
        Command::Learn {
            problem,
            mode,
            n_max,
            out,
        } => {
            let p = Problem::load(problem)?;
            let config = g.config(&p, *mode)?;
            let backend = g.backend()?;
            let demos = p.demos()?;
            let doc = match n_max {
                Some(n) => {
                    if !matches!(p.parameterization.family, Family::BoxUnion { .. }) {
                        return Err(Error::Unsupported("--n-max needs a box union".into()));
                    }
                    let base = p.parameterization.clone();
                    let r = grow(
                        &demos,
                        &p.cost,
                        |k| resize_union(&base, k),
                        *n,
                        backend.as_ref(),
                        &config,
                    )?;
                    json!({ "n_lower": r.n_lower, "infeasible": r.infeasible, "result": r.result })
                }
                None => serde_json::to_value(learn(
                    &demos,
                    &p.cost,
                    &p.parameterization,
                    backend.as_ref(),
                    &config,
                )?)?,
            };
            emit(&doc, out.as_deref())?;
            Ok(0)
        }
        Command::Query {
            problem,
            point,
            mode,
            out,
        } => {
            let p = Problem::load(problem)?;
            let t = template(&p, g, *mode)?;
            let q = t.query(point)?;
            println!("{}", q.verdict.as_str());
            if let Some(o) = out {
                emit(&serde_json::to_value(&q)?, Some(o))?;
            }
            Ok(0)
        }
        Command::Sweep {
            problem,
            grid,
            mode,
            table,
            out,
        } => {
            let p = Problem::load(problem)?;
            let spec = grid.resolve(&p)?;
            let t = template(&p, g, *mode)?;
            let r = grid_sweep(&t, &spec, p.truth.as_deref(), g.jobs)?;
            if let Some(path) = table {
                std::fs::write(path, r.to_table())?;
            }
            emit(&serde_json::to_value(&r.summary)?, out.as_deref())?;
            Ok(0)
        }
        Command::Volume {
            problem,
            at,
            grid_seeds,
            grid,
            out,
        } => {
            let p = Problem::load(problem)?;
            let spec = grid.resolve(&p)?;
            let mut seeds = at.clone();
            if *grid_seeds {
                seeds.extend(grid_points(&spec));
            }
            if seeds.is_empty() {
                return Err(Error::Spec(
                    "no seed points; pass --at or --grid-seeds".into(),
                ));
            }
            let t = template(&p, g, Mode::Exact)?;
            let boxes = t.extract_safe_boxes(&seeds, &spec.region)?;
            emit(&json!({ "boxes": boxes }), out.as_deref())?;
            Ok(0)
        }
        Command::Plan {
            boxes,
            from,
            to,
            resolution,
            out,
        } => {
            let b = load_boxes(boxes)?;
            let pl = plan(from, to, &b, *resolution)?;
            let mut text = String::new();
            for w in &pl.path {
                text.push_str(
                    &w.iter()
                        .map(|x| format!("{x}"))
                        .collect::<Vec<_>>()
                        .join(" "),
                );
                text.push('\n');
            }
            match out {
                Some(o) => std::fs::write(o, &text)?,
                None => print!("{text}"),
            }
            eprintln!("length {:.6}, guarantee {}", pl.length, pl.guarantee);
            Ok(0)
        }
        Command::Verify {
            problem,
            path,
            safe,
            unsafe_boxes,
            spacing,
        } => {
            let mut code = 0;
            if let Some(pf) = problem {
                code = code.max(verify_demos(&Problem::load(pf)?, g)?);
            }
            if let Some(pf) = path {
                let pts = load_points(pf)?;
                let s = match safe {
                    Some(f) => load_boxes(f)?,
                    None => Vec::new(),
                };
                let u = match unsafe_boxes {
                    Some(f) => load_boxes(f)?,
                    None => Vec::new(),
                };
                println!("{}", check_safety(&pts, &s, &u, *spacing).as_str());
            }
            if problem.is_none() && path.is_none() {
                return Err(Error::Spec("pass --problem and/or --path".into()));
            }
            Ok(code)
        }
        Command::Reproduce { name, out_dir } => reproduce(name, out_dir.as_deref(), g),
    }
}

/// The same box union with `n` boxes, each taking the bounds of the first.
fn resize_union(base: &ConstraintParameterization, n: usize) -> ConstraintParameterization {
    let per = 2 * base.dim_p();
    let mut p = base.clone();
    p.family = Family::BoxUnion { boxes: n };
    p.theta_lower = (0..n)
        .flat_map(|_| base.theta_lower[..per].to_vec())
        .collect();
    p.theta_upper = (0..n)
        .flat_map(|_| base.theta_upper[..per].to_vec())
        .collect();
    p
}

/// Fixes theta to the truth and checks that the KKT program stays feasible.
fn verify_demos(p: &Problem, g: &Global) -> Result<u8> {
    let theta = p
        .truth
        .clone()
        .ok_or_else(|| Error::Spec("verification needs `truth` in the problem".into()))?;
    let mut param = p.parameterization.clone();
    param.theta_lower = theta.clone();
    param.theta_upper = theta;
    let config = g.config(p, Mode::Exact)?;
    match learn(&p.demos()?, &p.cost, &param, g.backend()?.as_ref(), &config) {
        Ok(r) => {
            for (j, res) in r.residuals.iter().enumerate() {
                match res {
                    Some(res) => println!("demo {j}: consistent, residual {:.3e}", res.max()),
                    None => println!("demo {j}: consistent"),
                }
            }
            Ok(0)
        }
        Err(Error::Infeasible(m)) => {
            println!("demonstrations are not locally optimal under the true theta: {m}");
            Ok(2)
        }
        Err(e) => Err(e),
    }
}

fn load_boxes(path: &Path) -> Result<Vec<SafeBox>> {
    #[derive(serde::Deserialize)]
    struct Doc {
        boxes: Vec<SafeBox>,
    }
    let text = std::fs::read_to_string(path)?;
    let doc: Doc = serde_json::from_str(&text)?;
    Ok(doc.boxes)
}

fn load_points(path: &Path) -> Result<Vec<Vec<f64>>> {
    let text = std::fs::read_to_string(path)?;
    text.lines()
        .filter(|l| !l.trim().is_empty() && !l.trim_start().starts_with('#'))
        .map(|l| {
            l.split_whitespace()
                .map(|x| {
                    x.parse::<f64>()
                        .map_err(|e| Error::Spec(format!("waypoint {x:?}: {e}")))
                })
                .collect()
        })
        .collect()
}

/// Grid cells nearest to some demonstration state.
fn demo_cells(p: &Problem, grid: &GridSpec) -> HashSet<Vec<usize>> {
    p.demonstrations
        .iter()
        .flat_map(|d| {
            d.states.iter().map(|s| {
                let q: Vec<f64> = p.parameterization.selector.iter().map(|&i| s[i]).collect();
                grid.nearest(&q)
            })
        })
        .collect()
}

struct Check {
    label: String,
    pass: bool,
}

fn full_recovery(label: &str, r: &SweepResult) -> Check {
    let s = &r.summary;
    let one = |v: Option<f64>| v == Some(1.0);
    Check {
        label: format!(
            "{label}: coverage {:?}/{:?}, accuracy {:?}/{:?}, violations {:?}",
            s.coverage_safe, s.coverage_unsafe, s.accuracy_safe, s.accuracy_unsafe, s.violations
        ),
        pass: one(s.coverage_safe)
            && one(s.coverage_unsafe)
            && one(s.accuracy_safe)
            && one(s.accuracy_unsafe)
            && s.violations == Some(0)
            && s.errors == 0,
    }
}

fn nothing_learned(label: &str, p: &Problem, r: &SweepResult) -> Check {
    let cells = demo_cells(p, &r.grid);
    let stray = r
        .cells
        .iter()
        .filter(|c| c.verdict == Verdict::GuaranteedSafe && !cells.contains(&c.index))
        .count();
    let gu = r.count(Verdict::GuaranteedUnsafe);
    Check {
        label: format!("{label}: {gu} unsafe cells, {stray} safe cells off the demonstrations"),
        pass: gu == 0 && stray == 0 && r.summary.errors == 0,
    }
}

fn reproduce(name: &str, out_dir: Option<&Path>, g: &Global) -> Result<u8> {
    let runs: Vec<&str> = match name {
        "cost-sets" => vec!["cost-set-a", "cost-set-b"],
        other => vec![other],
    };
    let mut checks = Vec::new();
    for scenario in runs {
        let p = scenarios::build(scenario)?;
        let grid = p.grid.clone().expect("canned scenarios carry a grid");
        let t = template(&p, g, Mode::Exact)?;
        let r = grid_sweep(&t, &grid, p.truth.as_deref(), g.jobs)?;
        if let Some(dir) = out_dir {
            std::fs::create_dir_all(dir)?;
            p.save(&dir.join(format!("{scenario}.json")))?;
            std::fs::write(dir.join(format!("{scenario}.grid.txt")), r.to_table())?;
            std::fs::write(
                dir.join(format!("{scenario}.summary.json")),
                serde_json::to_string_pretty(&r.summary)? + "\n",
            )?;
        }
        checks.push(match scenario {
            "fig2-left" | "cost-set-a" => nothing_learned(scenario, &p, &r),
            _ => full_recovery(scenario, &r),
        });
    }
    let mut ok = true;
    for c in &checks {
        println!("{} {}", if c.pass { "PASS" } else { "FAIL" }, c.label);
        ok &= c.pass;
    }
    Ok(if ok { 0 } else { 1 })
}
