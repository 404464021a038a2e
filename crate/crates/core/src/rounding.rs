//! Pipage rounding of fractional assignments.
//!
//! The fractional entries of `y` form a bipartite support graph between nodes and
//! tasks. Each step picks a cycle (or, in a forest, a path between two degree-1
//! vertices), splits its edges into alternating classes `M1`/`M2`, and shifts mass
//! `+ε` on `M1` and `−ε` on `M2` (or the reverse) until some entry becomes 0 or 1.
//! Row sums never change; column sums change only at path endpoints, which are
//! tasks with a single fractional entry, so integer capacities stay respected.

use std::collections::HashMap;

use rand::Rng;
use thiserror::Error;

use crate::model::{feasible, Assignment, FractionalSolution, Instance, ModelError, Violation};

/// Entries within this distance of 0 or 1 count as integral.
pub const INTEGRALITY_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum RoundingError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("pipage step would overload task `{task}` to {load}")]
    CapacityExceeded { task: String, load: f64 },
    #[error("no improving pipage candidate: F went from {before} to {after}")]
    NotImproving { before: f64, after: f64 },
    #[error("rounded solution is infeasible: {0:?}")]
    Infeasible(Vec<Violation>),
    #[error("support has a node with a single fractional entry (node {0})")]
    DanglingNode(usize),
}

/// A vertex of the support graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Vertex {
    Node(usize),
    Task(usize),
}

/// The bipartite graph of fractional entries of `y`.
#[derive(Debug, Clone)]
pub struct FractionalSupport {
    by_node: Vec<Vec<usize>>,
    by_task: Vec<Vec<usize>>,
    edges: usize,
}

impl FractionalSupport {
    pub fn build(y: &FractionalSolution) -> Self {
        let mut by_node = vec![Vec::new(); y.num_nodes()];
        let mut by_task = vec![Vec::new(); y.num_tasks()];
        let mut edges = 0;
        for v in 0..y.num_nodes() {
            for (t, &val) in y.row(v).iter().enumerate() {
                if is_fractional(val) {
                    by_node[v].push(t);
                    by_task[t].push(v);
                    edges += 1;
                }
            }
        }
        FractionalSupport { by_node, by_task, edges }
    }

    pub fn num_edges(&self) -> usize {
        self.edges
    }

    pub fn is_empty(&self) -> bool {
        self.edges == 0
    }

    pub fn contains(&self, v: usize, t: usize) -> bool {
        self.by_node[v].contains(&t)
    }

    pub fn tasks_of(&self, v: usize) -> &[usize] {
        &self.by_node[v]
    }

    pub fn nodes_of(&self, t: usize) -> &[usize] {
        &self.by_task[t]
    }

    pub fn degree(&self, x: Vertex) -> usize {
        match x {
            Vertex::Node(v) => self.by_node[v].len(),
            Vertex::Task(t) => self.by_task[t].len(),
        }
    }

    fn neighbors(&self, x: Vertex) -> impl Iterator<Item = Vertex> + '_ {
        let (nodes, tasks): (&[usize], &[usize]) = match x {
            Vertex::Node(v) => (&[], &self.by_node[v]),
            Vertex::Task(t) => (&self.by_task[t], &[]),
        };
        nodes.iter().map(|&v| Vertex::Node(v)).chain(tasks.iter().map(|&t| Vertex::Task(t)))
    }

    fn remove(&mut self, v: usize, t: usize) {
        if let Some(i) = self.by_node[v].iter().position(|&x| x == t) {
            self.by_node[v].swap_remove(i);
            let j = self.by_task[t].iter().position(|&x| x == v).expect("support adjacency out of sync");
            self.by_task[t].swap_remove(j);
            self.edges -= 1;
        }
    }

    fn vertices(&self) -> impl Iterator<Item = Vertex> + '_ {
        (0..self.by_node.len()).map(Vertex::Node).chain((0..self.by_task.len()).map(Vertex::Task))
    }
}

fn is_fractional(v: f64) -> bool {
    v > INTEGRALITY_TOLERANCE && v < 1.0 - INTEGRALITY_TOLERANCE
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WalkKind {
    Cycle,
    Path,
}

/// An alternating walk in the support. `edges[i]` is `(node, task)`; edges at even
/// positions form `M1`, odd positions `M2`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Walk {
    pub kind: WalkKind,
    pub vertices: Vec<Vertex>,
    pub edges: Vec<(usize, usize)>,
}

impl Walk {
    fn from_vertices(kind: WalkKind, vertices: Vec<Vertex>) -> Self {
        let hops = match kind {
            WalkKind::Cycle => vertices.len(),
            WalkKind::Path => vertices.len() - 1,
        };
        let edges = (0..hops)
            .map(|i| match (vertices[i], vertices[(i + 1) % vertices.len()]) {
                (Vertex::Node(v), Vertex::Task(t)) | (Vertex::Task(t), Vertex::Node(v)) => (v, t),
                _ => unreachable!("support graph is bipartite"),
            })
            .collect();
        Walk { kind, vertices, edges }
    }

    pub fn m1(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().copied().step_by(2)
    }

    pub fn m2(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().copied().skip(1).step_by(2)
    }
}

/// Finds a cycle by depth-first search from the lowest-index vertex, or else a path
/// between two degree-1 vertices. `None` on an empty support.
pub fn find_walk(support: &FractionalSupport) -> Option<Walk> {
    if support.is_empty() {
        return None;
    }
    find_cycle(support).or_else(|| find_path(support))
}

fn vertex_key(x: Vertex, n: usize) -> usize {
    match x {
        Vertex::Node(v) => v,
        Vertex::Task(t) => n + t,
    }
}

fn find_cycle(support: &FractionalSupport) -> Option<Walk> {
    let n = support.by_node.len();
    let total = n + support.by_task.len();
    let mut visited = vec![false; total];
    let mut on_stack = vec![false; total];
    let mut parent: Vec<Option<Vertex>> = vec![None; total];
    for start in support.vertices() {
        if visited[vertex_key(start, n)] || support.degree(start) == 0 {
            continue;
        }
        // Iterative DFS keeping the neighbor cursor per frame.
        let mut stack: Vec<(Vertex, usize)> = vec![(start, 0)];
        visited[vertex_key(start, n)] = true;
        on_stack[vertex_key(start, n)] = true;
        while let Some(&mut (x, ref mut cursor)) = stack.last_mut() {
            let next = support.neighbors(x).nth(*cursor);
            *cursor += 1;
            match next {
                None => {
                    on_stack[vertex_key(x, n)] = false;
                    stack.pop();
                }
                Some(y) if Some(y) == parent[vertex_key(x, n)] => {}
                Some(y) if on_stack[vertex_key(y, n)] => {
                    let mut cycle = vec![x];
                    let mut cur = x;
                    while cur != y {
                        cur = parent[vertex_key(cur, n)].expect("cycle closes on the stack");
                        cycle.push(cur);
                    }
                    cycle.reverse();
                    return Some(Walk::from_vertices(WalkKind::Cycle, cycle));
                }
                Some(y) if !visited[vertex_key(y, n)] => {
                    visited[vertex_key(y, n)] = true;
                    on_stack[vertex_key(y, n)] = true;
                    parent[vertex_key(y, n)] = Some(x);
                    stack.push((y, 0));
                }
                Some(_) => {}
            }
        }
    }
    None
}

fn find_path(support: &FractionalSupport) -> Option<Walk> {
    let start = support.vertices().find(|&x| support.degree(x) == 1)?;
    let mut path = vec![start];
    let mut prev: Option<Vertex> = None;
    let mut cur = start;
    loop {
        let next = support.neighbors(cur).find(|&y| Some(y) != prev);
        match next {
            Some(y) => {
                prev = Some(cur);
                cur = y;
                path.push(y);
            }
            None => break,
        }
    }
    Some(Walk::from_vertices(WalkKind::Path, path))
}

/// Largest steps along `walk` that keep `y` in `[0,1]`: `(plus, minus)` where the
/// plus move raises `M1` and lowers `M2`.
pub fn step_bounds(y: &FractionalSolution, walk: &Walk) -> (f64, f64) {
    let mut plus = f64::INFINITY;
    let mut minus = f64::INFINITY;
    for (v, t) in walk.m1() {
        let val = y.get(v, t);
        plus = plus.min(1.0 - val);
        minus = minus.min(val);
    }
    for (v, t) in walk.m2() {
        let val = y.get(v, t);
        plus = plus.min(val);
        minus = minus.min(1.0 - val);
    }
    (plus, minus)
}

/// Change of `F` when `y` moves by `sign·eps` along `walk` (M1 up for `sign = 1`).
fn delta_f(inst: &Instance, y: &FractionalSolution, walk: &Walk, sign: f64, eps: f64) -> f64 {
    let mut delta: HashMap<(usize, usize), f64> = HashMap::with_capacity(walk.edges.len());
    for (i, &(v, t)) in walk.edges.iter().enumerate() {
        let d = if i % 2 == 0 { sign * eps } else { -sign * eps };
        *delta.entry((v, t)).or_insert(0.0) += d;
    }
    let lambda = inst.lambda();
    let mut change = 0.0;
    for (&(v, t), &d) in &delta {
        change += lambda * inst.preference(v, t) * d;
        let mut exposure = 0.0;
        for &(u, w) in inst.neighbors(v) {
            exposure += w * y.get(u, t);
            if u < v {
                if let Some(&du) = delta.get(&(u, t)) {
                    change -= w * du * d;
                }
            }
        }
        change -= d * exposure;
    }
    change
}

fn apply(y: &mut FractionalSolution, support: &mut FractionalSupport, walk: &Walk, sign: f64, eps: f64) {
    for (i, &(v, t)) in walk.edges.iter().enumerate() {
        let d = if i % 2 == 0 { sign * eps } else { -sign * eps };
        let mut val = y.get(v, t) + d;
        if val <= INTEGRALITY_TOLERANCE {
            val = 0.0;
        } else if val >= 1.0 - INTEGRALITY_TOLERANCE {
            val = 1.0;
        }
        y.set(v, t, val);
    }
    for &(v, t) in &walk.edges {
        if !is_fractional(y.get(v, t)) {
            support.remove(v, t);
        }
    }
}

/// Snaps near-integral entries and restores exact unit row sums.
fn prepare(inst: &Instance, y: &FractionalSolution) -> Result<FractionalSolution, RoundingError> {
    y.check(inst)?;
    let mut y = y.clone();
    for v in 0..y.num_nodes() {
        let row = y.row_mut(v);
        for val in row.iter_mut() {
            if *val <= INTEGRALITY_TOLERANCE {
                *val = 0.0;
            } else if *val >= 1.0 - INTEGRALITY_TOLERANCE {
                *val = 1.0;
            }
        }
        let sum: f64 = row.iter().sum();
        let residual = 1.0 - sum;
        if residual != 0.0 {
            let target = (0..row.len())
                .filter(|&t| is_fractional(row[t]))
                .max_by(|&a, &b| row[a].total_cmp(&row[b]))
                .or_else(|| (0..row.len()).max_by(|&a, &b| row[a].total_cmp(&row[b])))
                .expect("instance has at least one task");
            row[target] = (row[target] + residual).clamp(0.0, 1.0);
        }
    }
    Ok(y)
}

fn check_endpoints(inst: &Instance, y: &FractionalSolution, walk: &Walk) -> Result<(), RoundingError> {
    if walk.kind == WalkKind::Cycle {
        return Ok(());
    }
    let sums = y.column_sums();
    for end in [walk.vertices[0], *walk.vertices.last().unwrap()] {
        match end {
            Vertex::Task(t) => {
                let cap = inst.capacities()[t] as f64;
                if sums[t] > cap + crate::model::FEASIBILITY_TOLERANCE {
                    return Err(RoundingError::CapacityExceeded { task: inst.task_ids()[t].clone(), load: sums[t] });
                }
            }
            Vertex::Node(v) => return Err(RoundingError::DanglingNode(v)),
        }
    }
    Ok(())
}

fn finish(inst: &Instance, y: &FractionalSolution) -> Result<Assignment, RoundingError> {
    let a = y.to_assignment(0.0).ok_or_else(|| RoundingError::Infeasible(vec![]))?;
    let report = feasible(inst, &a);
    if report.is_feasible() {
        Ok(a)
    } else {
        Err(RoundingError::Infeasible(report.violations))
    }
}

/// Result of a rounding run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rounded {
    pub assignment: Assignment,
    pub steps: usize,
}

/// Deterministic pipage rounding. Each step keeps the candidate with the larger `F`
/// (the minus move on ties); that value is never below the current one.
pub fn pipage_round(inst: &Instance, y: &FractionalSolution) -> Result<Assignment, RoundingError> {
    pipage_round_traced(inst, y).map(|r| r.assignment)
}

pub fn pipage_round_traced(inst: &Instance, y: &FractionalSolution) -> Result<Rounded, RoundingError> {
    let mut y = prepare(inst, y)?;
    let mut support = FractionalSupport::build(&y);
    let mut steps = 0;
    let mut value = crate::model::evaluate_unchecked(inst, &y).total;
    while let Some(walk) = find_walk(&support) {
        let (plus, minus) = step_bounds(&y, &walk);
        let gain_plus = delta_f(inst, &y, &walk, 1.0, plus);
        let gain_minus = delta_f(inst, &y, &walk, -1.0, minus);
        let (sign, eps, gain) = if gain_plus > gain_minus { (1.0, plus, gain_plus) } else { (-1.0, minus, gain_minus) };
        let tol = 1e-9 * value.abs().max(1.0);
        if gain < -tol {
            return Err(RoundingError::NotImproving { before: value, after: value + gain });
        }
        apply(&mut y, &mut support, &walk, sign, eps);
        check_endpoints(inst, &y, &walk)?;
        value += gain;
        steps += 1;
    }
    Ok(Rounded { assignment: finish(inst, &y)?, steps })
}

/// Randomized pipage rounding: the plus move is taken with probability
/// `minus / (plus + minus)`, which keeps `E[x] = y`. Never evaluates `F`.
pub fn randomized_pipage_round<R: Rng + ?Sized>(
    inst: &Instance,
    y: &FractionalSolution,
    rng: &mut R,
) -> Result<Assignment, RoundingError> {
    randomized_pipage_round_traced(inst, y, rng).map(|r| r.assignment)
}

pub fn randomized_pipage_round_traced<R: Rng + ?Sized>(
    inst: &Instance,
    y: &FractionalSolution,
    rng: &mut R,
) -> Result<Rounded, RoundingError> {
    let mut y = prepare(inst, y)?;
    let mut support = FractionalSupport::build(&y);
    let mut steps = 0;
    while let Some(walk) = find_walk(&support) {
        let (plus, minus) = step_bounds(&y, &walk);
        let take_plus = rng.gen::<f64>() * (plus + minus) < minus;
        let (sign, eps) = if take_plus { (1.0, plus) } else { (-1.0, minus) };
        apply(&mut y, &mut support, &walk, sign, eps);
        check_endpoints(inst, &y, &walk)?;
        steps += 1;
    }
    Ok(Rounded { assignment: finish(inst, &y)?, steps })
}

/// Randomized pipage seeded from `(seed, repetition)`.
pub fn randomized_pipage_round_seeded(
    inst: &Instance,
    y: &FractionalSolution,
    seed: u64,
    repetition: u64,
) -> Result<Assignment, RoundingError> {
    let mut rng = crate::rng::split(seed, crate::rng::stream::ROUNDING + repetition);
    randomized_pipage_round(inst, y, &mut rng)
}
