use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use kktlearn::scenarios;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kktlearn"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn scenario_file(dir: &Path, name: &str) -> PathBuf {
    let path = dir.join(format!("{name}.json"));
    scenarios::build(name).unwrap().save(&path).unwrap();
    path
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn malformed_problem_exits_with_4() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(&path, "{ \"task\": 3 }").unwrap();
    let o = run(&["learn", s(&path)]);
    assert_eq!(o.status.code(), Some(4), "{}", stderr(&o));
    assert!(stderr(&o).contains("task"));
}

#[test]
fn too_few_boxes_exits_with_2_and_growth_recovers() {
    let dir = tempfile::tempdir().unwrap();
    let mut p = scenarios::build("growth").unwrap();
    p.parameterization = scenarios::planar_boxes(1, [(-1.0, 5.0), (-3.0, 3.0)]);
    p.truth = None;
    let path = dir.path().join("one.json");
    p.save(&path).unwrap();

    let o = run(&["learn", s(&path)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("growing"), "{}", stderr(&o));

    let out = dir.path().join("grown.json");
    let o = run(&["learn", s(&path), "--n-max", "3", "-o", s(&out)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let doc: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(doc["n_lower"], 2);
}

#[test]
fn query_inside_the_center_obstacle_is_unsafe() {
    let dir = tempfile::tempdir().unwrap();
    let path = scenario_file(dir.path(), "fig2-center");
    let o = run(&["query", s(&path), "--point", "2,0"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(stdout(&o).trim(), "GuaranteedUnsafe");
    let o = run(&["query", s(&path), "--point", "0.2,-1.8"]);
    assert_eq!(stdout(&o).trim(), "GuaranteedSafe");
    let o = run(&["query", s(&path), "--point", "2"]);
    assert_eq!(o.status.code(), Some(4));
}

#[test]
fn learn_output_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let path = scenario_file(dir.path(), "fig2-center");
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    assert!(run(&["learn", s(&path), "-o", s(&a)]).status.success());
    assert!(run(&["learn", s(&path), "-o", s(&b)]).status.success());
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn synth_then_verify_accepts_the_new_demonstration() {
    let dir = tempfile::tempdir().unwrap();
    let path = scenario_file(dir.path(), "fig2-center");
    // demonstrations share the task horizon
    let o = run(&[
        "synth",
        s(&path),
        "--from",
        "0.5,-1.5",
        "--to",
        "3.5,1.5",
        "--horizon",
        "12",
    ]);
    assert_eq!(o.status.code(), Some(4), "{}", stderr(&o));
    let o = run(&["synth", s(&path), "--from", "0.5,-1.5", "--to", "3.5,1.5"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let p = kktlearn::problem::Problem::load(&path).unwrap();
    assert_eq!(p.demonstrations.len(), 3);
    let o = run(&["verify", "--problem", s(&path)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("demo 2: consistent"), "{}", stdout(&o));
}

#[test]
fn volume_boxes_feed_the_planner() {
    let dir = tempfile::tempdir().unwrap();
    let path = scenario_file(dir.path(), "fig2-center");
    let boxes = dir.path().join("boxes.json");
    let o = run(&[
        "volume",
        s(&path),
        "--at",
        "0.5,-1.5",
        "--at",
        "0.5,0",
        "--at",
        "0.5,1.5",
        "--at",
        "2,1.5",
        "--at",
        "3.5,1.5",
        "-o",
        s(&boxes),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let o = run(&[
        "plan",
        s(&boxes),
        "--from",
        "0.5,-1.5",
        "--to",
        "3.5,1.5",
        "--resolution",
        "0.05",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stderr(&o).contains("guarantee true"), "{}", stderr(&o));
    let o = run(&["plan", s(&boxes), "--from", "2,0", "--to", "3.5,1.5"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn reproduce_left_passes() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&[
        "reproduce",
        "fig2-left",
        "--out-dir",
        s(dir.path()),
        "--jobs",
        "2",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}{}", stdout(&o), stderr(&o));
    assert!(stdout(&o).starts_with("PASS"), "{}", stdout(&o));
    assert!(dir.path().join("fig2-left.grid.txt").exists());
    assert!(dir.path().join("fig2-left.summary.json").exists());
}
