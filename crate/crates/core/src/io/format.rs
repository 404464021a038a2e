//! Canonical instance text format.
//!
//! ```text
//! # tfc-instance v1
//! alpha 10
//! [nodes]
//! ann
//! bob
//! [tasks]
//! web 2
//! [edges]
//! ann bob 1
//! [preferences]
//! ann web 0.5
//! ```
//!
//! Exactly one of `alpha <α>` or `lambda <λ>` precedes the sections. Fields are
//! separated by whitespace; blank lines and `#` comments after the header are
//! ignored. [`write_instance`] emits sections in this order with edges in stored
//! order and preferences by node, then task.

use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;
use std::path::Path;

use super::{read_to_string, write_atomic, IoError};
use crate::model::{Balance, ConflictEdge, Instance};

pub const INSTANCE_HEADER: &str = "# tfc-instance v1";

#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
enum Section {
    Preamble,
    Nodes,
    Tasks,
    Edges,
    Preferences,
}

fn number<T: std::str::FromStr>(line: usize, field: &str, what: &str) -> Result<T, IoError> {
    field.parse().map_err(|_| IoError::parse(line, format!("invalid {what} `{field}`")))
}

pub fn parse_instance(text: &str) -> Result<Instance, IoError> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
    match lines.find(|(_, l)| !l.is_empty()) {
        Some((_, INSTANCE_HEADER)) => {}
        Some((n, other)) => return Err(IoError::parse(n, format!("expected `{INSTANCE_HEADER}`, found `{other}`"))),
        None => return Err(IoError::parse(1, "empty file")),
    }
    let mut section = Section::Preamble;
    let mut seen_sections = HashSet::new();
    let mut balance: Option<Balance> = None;
    let mut node_ids: Vec<String> = Vec::new();
    let mut node_index: HashMap<String, usize> = HashMap::new();
    let mut task_ids: Vec<String> = Vec::new();
    let mut task_index: HashMap<String, usize> = HashMap::new();
    let mut capacities = Vec::new();
    let mut edges = Vec::new();
    let mut edge_set = HashSet::new();
    let mut prefs = Vec::new();
    let mut pref_set = HashSet::new();

    for (n, line) in lines {
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if line.starts_with('[') {
            section = match line {
                "[nodes]" => Section::Nodes,
                "[tasks]" => Section::Tasks,
                "[edges]" => Section::Edges,
                "[preferences]" => Section::Preferences,
                other => return Err(IoError::parse(n, format!("unknown section `{other}`"))),
            };
            if !seen_sections.insert(section) {
                return Err(IoError::parse(n, format!("section `{line}` repeated")));
            }
            let needs = matches!(section, Section::Edges | Section::Preferences);
            if needs && !(seen_sections.contains(&Section::Nodes) && seen_sections.contains(&Section::Tasks)) {
                return Err(IoError::parse(n, "[nodes] and [tasks] must come before edges and preferences"));
            }
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        let node =
            |id: &str| node_index.get(id).copied().ok_or_else(|| IoError::parse(n, format!("unknown node `{id}`")));
        let task =
            |id: &str| task_index.get(id).copied().ok_or_else(|| IoError::parse(n, format!("unknown task `{id}`")));
        match (section, fields.as_slice()) {
            (Section::Preamble, [key @ ("alpha" | "lambda"), value]) => {
                if balance.is_some() {
                    return Err(IoError::parse(n, "only one of `alpha` and `lambda` may be given"));
                }
                let x: f64 = number(n, value, key)?;
                balance = Some(if *key == "alpha" { Balance::Alpha(x) } else { Balance::Lambda(x) });
            }
            (Section::Nodes, [id]) => {
                if node_index.insert(id.to_string(), node_ids.len()).is_some() {
                    return Err(IoError::parse(n, format!("duplicate node `{id}`")));
                }
                node_ids.push(id.to_string());
            }
            (Section::Tasks, [id, cap]) => {
                if task_index.insert(id.to_string(), task_ids.len()).is_some() {
                    return Err(IoError::parse(n, format!("duplicate task `{id}`")));
                }
                task_ids.push(id.to_string());
                capacities.push(number::<usize>(n, cap, "capacity")?);
            }
            (Section::Edges, [a, b, w]) => {
                let (u, v) = (node(a)?, node(b)?);
                if u == v {
                    return Err(IoError::parse(n, format!("self-loop on `{a}`")));
                }
                if !edge_set.insert((u.min(v), u.max(v))) {
                    return Err(IoError::parse(n, format!("duplicate edge `{a}` `{b}`")));
                }
                let weight: f64 = number(n, w, "weight")?;
                if !(weight.is_finite() && weight >= 0.0) {
                    return Err(IoError::parse(n, format!("weight must be finite and non-negative, got {w}")));
                }
                edges.push(ConflictEdge { u, v, weight });
            }
            (Section::Preferences, [a, t, c]) => {
                let (v, t) = (node(a)?, task(t)?);
                if !pref_set.insert((v, t)) {
                    return Err(IoError::parse(n, format!("duplicate preference for `{a}`")));
                }
                let c: f64 = number(n, c, "preference")?;
                if !(0.0..=1.0).contains(&c) {
                    return Err(IoError::parse(n, format!("preference must lie in [0, 1], got {c}")));
                }
                prefs.push((v, t, c));
            }
            (s, f) => {
                let expected = match s {
                    Section::Preamble => "`alpha <value>` or `lambda <value>`",
                    Section::Nodes => "`<node>`",
                    Section::Tasks => "`<task> <capacity>`",
                    Section::Edges => "`<node> <node> <weight>`",
                    Section::Preferences => "`<node> <task> <value>`",
                };
                return Err(IoError::parse(n, format!("expected {expected}, found {} fields", f.len())));
            }
        }
    }
    let balance = balance.ok_or_else(|| IoError::Invalid("missing `alpha` or `lambda` line".into()))?;
    Ok(Instance::new(node_ids, task_ids, capacities, edges, prefs, balance)?)
}

pub fn load_instance(path: &Path) -> Result<Instance, IoError> {
    parse_instance(&read_to_string(path)?)
}

pub fn write_instance(inst: &Instance) -> String {
    let mut out = String::new();
    out.push_str(INSTANCE_HEADER);
    out.push('\n');
    match inst.balance() {
        Balance::Alpha(a) => writeln!(out, "alpha {a}").unwrap(),
        Balance::Lambda(l) => writeln!(out, "lambda {l}").unwrap(),
    }
    out.push_str("[nodes]\n");
    for id in inst.node_ids() {
        writeln!(out, "{id}").unwrap();
    }
    out.push_str("[tasks]\n");
    for (id, cap) in inst.task_ids().iter().zip(inst.capacities()) {
        writeln!(out, "{id} {cap}").unwrap();
    }
    out.push_str("[edges]\n");
    let ids = inst.node_ids();
    for e in inst.edges() {
        writeln!(out, "{} {} {}", ids[e.u], ids[e.v], e.weight).unwrap();
    }
    out.push_str("[preferences]\n");
    for (v, t, c) in inst.preference_triples() {
        writeln!(out, "{} {} {c}", ids[v], inst.task_ids()[t]).unwrap();
    }
    out
}

pub fn save_instance(inst: &Instance, path: &Path) -> Result<(), IoError> {
    write_atomic(path, write_instance(inst).as_bytes())
}
