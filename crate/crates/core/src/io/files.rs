//! Assignment files, JSON reports and sweep tables.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use super::{read_to_string, write_atomic, IoError};
use crate::eval::SweepPoint;
use crate::model::{feasible, Assignment, Instance, ModelError};

pub const ASSIGNMENT_HEADER: &str = "# tfc-assignment v1";
pub const SWEEP_HEADER: &str = "# tfc-sweep v1";

/// `<node> <task>` per line after the header, every node exactly once.
pub fn parse_assignment(text: &str, inst: &Instance) -> Result<Assignment, IoError> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
    match lines.find(|(_, l)| !l.is_empty()) {
        Some((_, ASSIGNMENT_HEADER)) => {}
        Some((n, other)) => return Err(IoError::parse(n, format!("expected `{ASSIGNMENT_HEADER}`, found `{other}`"))),
        None => return Err(IoError::parse(1, "empty file")),
    }
    let mut task_of: Vec<Option<usize>> = vec![None; inst.num_nodes()];
    for (n, line) in lines {
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        let [node, task] = fields.as_slice() else {
            return Err(IoError::parse(n, "expected `<node> <task>`"));
        };
        let v = inst.node_index(node).ok_or_else(|| IoError::parse(n, format!("unknown node `{node}`")))?;
        let t = inst.task_index(task).ok_or_else(|| IoError::parse(n, format!("unknown task `{task}`")))?;
        if task_of[v].replace(t).is_some() {
            return Err(IoError::parse(n, format!("node `{node}` assigned twice")));
        }
    }
    if let Some(v) = task_of.iter().position(Option::is_none) {
        return Err(IoError::Invalid(format!("node `{}` has no task", inst.node_ids()[v])));
    }
    let a = Assignment::new(task_of.into_iter().map(Option::unwrap).collect());
    let report = feasible(inst, &a);
    if !report.is_feasible() {
        return Err(ModelError::Infeasible(report.violations).into());
    }
    Ok(a)
}

pub fn load_assignment(path: &Path, inst: &Instance) -> Result<Assignment, IoError> {
    parse_assignment(&read_to_string(path)?, inst)
}

pub fn write_assignment(inst: &Instance, a: &Assignment) -> String {
    let mut out = format!("{ASSIGNMENT_HEADER}\n");
    for (v, &t) in a.tasks().iter().enumerate() {
        writeln!(out, "{} {}", inst.node_ids()[v], inst.task_ids()[t]).unwrap();
    }
    out
}

pub fn save_assignment(inst: &Instance, a: &Assignment, path: &Path) -> Result<(), IoError> {
    write_atomic(path, write_assignment(inst, a).as_bytes())
}

/// Pretty JSON with a trailing newline, written atomically.
pub fn save_report<T: Serialize>(report: &T, path: &Path) -> Result<(), IoError> {
    let mut text = serde_json::to_string_pretty(report)?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

pub fn load_report<T: DeserializeOwned>(path: &Path) -> Result<T, IoError> {
    Ok(serde_json::from_str(&read_to_string(path)?)?)
}

/// Tab-separated table, one row per (α, algorithm), preceded by the header line and
/// a `# config` comment line.
pub fn write_sweep(points: &[SweepPoint], config_echo: &str) -> String {
    let mut out = format!("{SWEEP_HEADER}\n# config {config_echo}\n");
    out.push_str("alpha\tlambda\talgorithm\tF_R\tF_G\tF\tstatus\n");
    let mut seen = HashSet::new();
    for p in points {
        for r in &p.results {
            debug_assert!(seen.insert((p.alpha.to_bits(), r.algorithm.clone())));
            let (fr, fg, f, status) = match &r.outcome {
                Ok(b) => (
                    b.task_satisfaction.to_string(),
                    b.social_satisfaction.to_string(),
                    b.total.to_string(),
                    "ok".to_string(),
                ),
                Err(e) => {
                    ("NaN".into(), "NaN".into(), "NaN".into(), format!("error: {}", e.replace(['\t', '\n'], " ")))
                }
            };
            writeln!(out, "{}\t{}\t{}\t{fr}\t{fg}\t{f}\t{status}", p.alpha, p.lambda, r.algorithm).unwrap();
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Balance;

    fn inst() -> Instance {
        Instance::from_indexed(3, vec![2, 1], vec![(0, 1, 1.0)], vec![(0, 0, 1.0)], Balance::Lambda(1.0)).unwrap()
    }

    #[test]
    fn assignment_round_trip() {
        let inst = inst();
        let a = Assignment::new(vec![0, 1, 0]);
        let text = write_assignment(&inst, &a);
        assert_eq!(text, "# tfc-assignment v1\nv0 t0\nv1 t1\nv2 t0\n");
        assert_eq!(parse_assignment(&text, &inst).unwrap(), a);
    }

    #[test]
    fn over_capacity_names_the_task() {
        let err = parse_assignment("# tfc-assignment v1\nv0 t1\nv1 t1\nv2 t0\n", &inst()).unwrap_err();
        assert!(err.to_string().contains("task `t1` over capacity"), "{err}");
        let err = parse_assignment("# tfc-assignment v1\nv0 t1\nv2 t0\n", &inst()).unwrap_err();
        assert!(err.to_string().contains("`v1`"), "{err}");
    }
}
