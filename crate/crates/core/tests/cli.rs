use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn tfc(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tfc")).args(args).current_dir(dir).output().expect("binary runs")
}

fn ok(args: &[&str], dir: &Path) -> String {
    let out = tfc(args, dir);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn json(path: PathBuf) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn education(dir: &Path) {
    ok(
        &[
            "generate",
            "education",
            "--students",
            "7",
            "--projects",
            "3",
            "--seed",
            "4",
            "--out",
            "edu.tfc",
            "--metadata",
            "edu.json",
        ],
        dir,
    );
}

#[test]
fn generate_is_deterministic_and_loads_back() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    ok(&["generate", "synth-tf", "--seed", "1", "--out", "a.tfc"], d);
    ok(&["generate", "synth-tf", "--seed", "1", "--out", "b.tfc"], d);
    let a = std::fs::read(d.join("a.tfc")).unwrap();
    assert_eq!(a, std::fs::read(d.join("b.tfc")).unwrap());
    let inst = tfc::io::load_instance(&d.join("a.tfc")).unwrap();
    assert_eq!((inst.num_nodes(), inst.num_tasks()), (1000, 10));
}

#[test]
fn company_default_size() {
    let dir = TempDir::new().unwrap();
    ok(&["generate", "company", "--seed", "2", "--out", "c.tfc"], dir.path());
    let inst = tfc::io::load_instance(&dir.path().join("c.tfc")).unwrap();
    assert_eq!((inst.num_nodes(), inst.num_tasks()), (4000, 4));
    assert_eq!(inst.capacities(), &[1000; 4]);
}

#[test]
fn exact_solve_reports_unit_ratio_and_evaluate_agrees() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    education(d);
    ok(&["solve", "--instance", "edu.tfc", "--algorithm", "exact", "--report", "r.json", "--assignment", "x.txt"], d);
    let report = json(d.join("r.json"));
    assert_eq!(report["schema"], "tfc-report/1");
    assert_eq!(report["results"]["approximation_ratio"]["value"], 1.0);
    assert_eq!(report["config"]["options"]["algorithm"], "exact");

    ok(&["evaluate", "--instance", "edu.tfc", "x.txt", "--metadata", "edu.json", "--out", "e.json"], d);
    let eval = json(d.join("e.json"));
    assert_eq!(eval["assignments"][0]["objective"], report["results"]["objective"]);
    assert!(eval["assignments"][0]["quality"]["rank"]["avg"].as_f64().unwrap() >= 1.0);
}

#[test]
fn randomized_report_has_runs_and_threshold() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    education(d);
    ok(&["solve", "--instance", "edu.tfc", "--repetitions", "50", "--seed", "3", "--report", "r.json"], d);
    let r = json(d.join("r.json"));
    assert_eq!(r["results"]["runs"].as_array().unwrap().len(), 50);
    let relax = &r["results"]["relaxation"];
    assert_eq!(relax["kind"], "l2");
    let threshold = relax["guarantee_threshold"].as_f64().unwrap();
    assert_eq!(threshold, 0.75 * relax["value"].as_f64().unwrap());
    assert!(r["results"]["objective_summary"]["avg"].as_f64().is_some());
}

#[test]
fn full_sparsify_matches_plain_results() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    education(d);
    ok(&["solve", "--instance", "edu.tfc", "--repetitions", "5", "--report", "plain.json"], d);
    ok(&["solve", "--instance", "edu.tfc", "--repetitions", "5", "--sparsify", "1", "--report", "sparse.json"], d);
    let (a, b) = (json(d.join("plain.json")), json(d.join("sparse.json")));
    for key in ["objective", "assignment", "runs", "relaxation"] {
        assert_eq!(a["results"][key], b["results"][key], "{key}");
    }
}

#[test]
fn evaluate_keeps_input_order_and_rejects_infeasible() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    education(d);
    ok(&["solve", "--instance", "edu.tfc", "--algorithm", "greedy", "--report", "g.json", "--assignment", "g.txt"], d);
    ok(&["solve", "--instance", "edu.tfc", "--algorithm", "random", "--report", "r.json", "--assignment", "r.txt"], d);
    ok(&["evaluate", "--instance", "edu.tfc", "r.txt", "g.txt", "--out", "e.json"], d);
    let e = json(d.join("e.json"));
    assert_eq!(e["assignments"][0]["path"], "r.txt");
    assert_eq!(e["assignments"][1]["objective"], json(d.join("g.json"))["results"]["objective"]);

    let text = std::fs::read_to_string(d.join("g.txt")).unwrap();
    let inst = tfc::io::load_instance(&d.join("edu.tfc")).unwrap();
    let crowded = text
        .lines()
        .map(|l| match l.split_once(' ') {
            Some((node, _)) if !l.starts_with('#') => format!("{node} {}", inst.task_ids()[0]),
            _ => l.to_string(),
        })
        .collect::<Vec<_>>()
        .join("\n");
    std::fs::write(d.join("bad.txt"), crowded).unwrap();
    let out = tfc(&["evaluate", "--instance", "edu.tfc", "bad.txt"], d);
    assert_eq!(out.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&out.stderr).contains("over capacity"));
}

#[test]
fn sweep_rows_and_determinism() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    education(d);
    let args = ["sweep", "--instance", "edu.tfc", "--alphas", "0,0.5,1,2,10", "--algorithms", "exact,greedy", "--out"];
    ok(&[&args[..], &["s1.tsv"]].concat(), d);
    ok(&[&args[..], &["s2.tsv"]].concat(), d);
    let s1 = std::fs::read_to_string(d.join("s1.tsv")).unwrap();
    assert_eq!(s1, std::fs::read_to_string(d.join("s2.tsv")).unwrap());
    let rows: Vec<&str> = s1.lines().skip(3).collect();
    assert_eq!(rows.iter().filter(|r| r.split('\t').nth(2) == Some("exact")).count(), 5);
    assert_eq!(rows.len(), 10);
    assert!(s1.lines().nth(1).unwrap().starts_with("# config "));
}

#[test]
fn exit_codes() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    education(d);
    assert_eq!(tfc(&["solve", "--instance", "edu.tfc", "--alpha", "1", "--lambda", "1"], d).status.code(), Some(2));
    assert_eq!(tfc(&["solve", "--instance", "edu.tfc", "--repetitions", "0"], d).status.code(), Some(2));
    assert_eq!(tfc(&["solve", "--instance", "missing.tfc"], d).status.code(), Some(1));
    std::fs::write(d.join("broken.tfc"), "# tfc-instance v1\nalpha 1\n[nodes]\na\n[tasks]\nt x\n").unwrap();
    let out = tfc(&["solve", "--instance", "broken.tfc"], d);
    assert_eq!(out.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 6"));
    let limited = tfc(&["solve", "--instance", "edu.tfc", "--max-lp-iterations", "1", "--report", "l.json"], d);
    assert_eq!(limited.status.code(), Some(3));
    let timed = tfc(&["solve", "--instance", "edu.tfc", "--lp-time-limit", "0", "--report", "t.json"], d);
    assert_eq!(timed.status.code(), Some(3));
    assert_eq!(tfc(&["solve", "--instance", "edu.tfc", "--lp-time-limit", "-1"], d).status.code(), Some(2));
}
