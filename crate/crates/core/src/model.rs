//! Instances, assignments and exact evaluation of the team-formation objective
//!
//! `F(x) = λ·Σ c_vt x_vt + Σ_(u,v) w_uv (1 − Σ_t x_ut x_vt)`
//!
//! The same evaluator serves integral assignments and fractional points of the
//! assignment polytope.

use std::collections::{HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Slack allowed on row and column sums of fractional solutions.
pub const FEASIBILITY_TOLERANCE: f64 = 1e-7;

/// How the preference weight λ is specified.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Balance {
    /// λ given directly.
    Lambda(f64),
    /// Balancing factor α, resolved as `λ = α · w(E) / |V|` (that is `α · d_avg / 2`).
    Alpha(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConflictEdge {
    pub u: usize,
    pub v: usize,
    pub weight: f64,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("instance needs at least one node and one task")]
    Empty,
    #[error("duplicate node id `{0}`")]
    DuplicateNode(String),
    #[error("duplicate task id `{0}`")]
    DuplicateTask(String),
    #[error("unknown node `{0}`")]
    UnknownNode(String),
    #[error("unknown task `{0}`")]
    UnknownTask(String),
    #[error("invalid identifier `{0}`: ids must be non-empty and contain no whitespace or commas")]
    InvalidId(String),
    #[error("self-loop on node `{0}`")]
    SelfLoop(String),
    #[error("duplicate conflict edge `{0}`-`{1}`")]
    DuplicateEdge(String, String),
    #[error("conflict weight {weight} on `{u}`-`{v}` must be finite and non-negative")]
    InvalidWeight { u: String, v: String, weight: f64 },
    #[error("preference c({node},{task}) = {value} outside [0,1]")]
    InvalidPreference { node: String, task: String, value: f64 },
    #[error("duplicate preference for (`{0}`, `{1}`)")]
    DuplicatePreference(String, String),
    #[error("{0} must be finite and non-negative, got {1}")]
    InvalidBalance(&'static str, f64),
    #[error("total capacity {capacity} is below the number of individuals {nodes}")]
    InsufficientCapacity { capacity: usize, nodes: usize },
    #[error("expected a {expected_nodes}x{expected_tasks} solution, got {nodes}x{tasks}")]
    DimensionMismatch { expected_nodes: usize, expected_tasks: usize, nodes: usize, tasks: usize },
    #[error("infeasible solution: {}", join_violations(.0))]
    Infeasible(Vec<Violation>),
}

fn join_violations(v: &[Violation]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("; ")
}

/// A single violated constraint, named by the ids of the instance.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    /// Integral assignment references a task index that does not exist.
    UnknownTask { node: String, task: usize },
    /// `Σ_t x_vt ≠ 1`.
    RowSum { node: String, sum: f64 },
    /// `Σ_v x_vt > p_t`.
    OverCapacity { task: String, load: f64, capacity: usize },
    /// A fractional entry outside `[0, 1]`.
    OutOfRange { node: String, task: String, value: f64 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::UnknownTask { node, task } => write!(f, "node `{node}` assigned to unknown task index {task}"),
            Violation::RowSum { node, sum } => write!(f, "node `{node}` has row sum {sum} (expected 1)"),
            Violation::OverCapacity { task, load, capacity } => {
                write!(f, "task `{task}` over capacity: load {load} > {capacity}")
            }
            Violation::OutOfRange { node, task, value } => {
                write!(f, "x({node},{task}) = {value} outside [0,1]")
            }
        }
    }
}

/// A validated team-formation instance. Immutable after construction.
#[derive(Debug, Clone)]
pub struct Instance {
    node_ids: Vec<String>,
    task_ids: Vec<String>,
    capacities: Vec<usize>,
    edges: Vec<ConflictEdge>,
    preferences: Vec<Vec<(usize, f64)>>,
    balance: Balance,
    lambda: f64,
    adjacency: Vec<Vec<(usize, f64)>>,
    node_index: HashMap<String, usize>,
    task_index: HashMap<String, usize>,
}

fn valid_id(id: &str) -> bool {
    !id.is_empty() && !id.chars().any(|c| c.is_whitespace() || c == ',' || c == '#')
}

impl Instance {
    /// Index-based constructor. Nodes are named `v0, v1, ...` and tasks `t0, t1, ...`.
    pub fn from_indexed(
        num_nodes: usize,
        capacities: Vec<usize>,
        edges: Vec<(usize, usize, f64)>,
        preferences: Vec<(usize, usize, f64)>,
        balance: Balance,
    ) -> Result<Self, ModelError> {
        let node_ids = (0..num_nodes).map(|i| format!("v{i}")).collect();
        let task_ids = (0..capacities.len()).map(|t| format!("t{t}")).collect();
        let edges = edges.into_iter().map(|(u, v, weight)| ConflictEdge { u, v, weight }).collect();
        Self::new(node_ids, task_ids, capacities, edges, preferences, balance)
    }

    /// Builds and validates an instance from dense indices.
    pub fn new(
        node_ids: Vec<String>,
        task_ids: Vec<String>,
        capacities: Vec<usize>,
        edges: Vec<ConflictEdge>,
        preferences: Vec<(usize, usize, f64)>,
        balance: Balance,
    ) -> Result<Self, ModelError> {
        let n = node_ids.len();
        let k = task_ids.len();
        if n == 0 || k == 0 {
            return Err(ModelError::Empty);
        }
        assert_eq!(capacities.len(), k, "one capacity per task");

        let mut node_index = HashMap::with_capacity(n);
        for (i, id) in node_ids.iter().enumerate() {
            if !valid_id(id) {
                return Err(ModelError::InvalidId(id.clone()));
            }
            if node_index.insert(id.clone(), i).is_some() {
                return Err(ModelError::DuplicateNode(id.clone()));
            }
        }
        let mut task_index = HashMap::with_capacity(k);
        for (t, id) in task_ids.iter().enumerate() {
            if !valid_id(id) {
                return Err(ModelError::InvalidId(id.clone()));
            }
            if task_index.insert(id.clone(), t).is_some() {
                return Err(ModelError::DuplicateTask(id.clone()));
            }
        }
        let capacity: usize = capacities.iter().sum();
        if capacity < n {
            return Err(ModelError::InsufficientCapacity { capacity, nodes: n });
        }

        let mut seen = HashSet::with_capacity(edges.len());
        let mut adjacency = vec![Vec::new(); n];
        for e in &edges {
            if e.u >= n {
                return Err(ModelError::UnknownNode(format!("#{}", e.u)));
            }
            if e.v >= n {
                return Err(ModelError::UnknownNode(format!("#{}", e.v)));
            }
            if e.u == e.v {
                return Err(ModelError::SelfLoop(node_ids[e.u].clone()));
            }
            if !(e.weight.is_finite() && e.weight >= 0.0) {
                return Err(ModelError::InvalidWeight {
                    u: node_ids[e.u].clone(),
                    v: node_ids[e.v].clone(),
                    weight: e.weight,
                });
            }
            if !seen.insert((e.u.min(e.v), e.u.max(e.v))) {
                return Err(ModelError::DuplicateEdge(node_ids[e.u].clone(), node_ids[e.v].clone()));
            }
            adjacency[e.u].push((e.v, e.weight));
            adjacency[e.v].push((e.u, e.weight));
        }

        let mut prefs = vec![Vec::new(); n];
        for (v, t, c) in preferences {
            if v >= n {
                return Err(ModelError::UnknownNode(format!("#{v}")));
            }
            if t >= k {
                return Err(ModelError::UnknownTask(format!("#{t}")));
            }
            if !(0.0..=1.0).contains(&c) {
                return Err(ModelError::InvalidPreference {
                    node: node_ids[v].clone(),
                    task: task_ids[t].clone(),
                    value: c,
                });
            }
            prefs[v].push((t, c));
        }
        for (v, row) in prefs.iter_mut().enumerate() {
            row.sort_by_key(|&(t, _)| t);
            if let Some(w) = row.windows(2).find(|w| w[0].0 == w[1].0) {
                return Err(ModelError::DuplicatePreference(node_ids[v].clone(), task_ids[w[0].0].clone()));
            }
        }

        let mut inst = Instance {
            node_ids,
            task_ids,
            capacities,
            edges,
            preferences: prefs,
            balance,
            lambda: 0.0,
            adjacency,
            node_index,
            task_index,
        };
        inst.lambda = inst.resolve_lambda(balance)?;
        Ok(inst)
    }

    fn resolve_lambda(&self, balance: Balance) -> Result<f64, ModelError> {
        match balance {
            Balance::Lambda(l) if l.is_finite() && l >= 0.0 => Ok(l),
            Balance::Lambda(l) => Err(ModelError::InvalidBalance("lambda", l)),
            Balance::Alpha(a) if a.is_finite() && a >= 0.0 => {
                Ok(a * self.total_conflict_weight() / self.num_nodes() as f64)
            }
            Balance::Alpha(a) => Err(ModelError::InvalidBalance("alpha", a)),
        }
    }

    pub fn num_nodes(&self) -> usize {
        self.node_ids.len()
    }

    pub fn num_tasks(&self) -> usize {
        self.task_ids.len()
    }

    pub fn node_ids(&self) -> &[String] {
        &self.node_ids
    }

    pub fn task_ids(&self) -> &[String] {
        &self.task_ids
    }

    pub fn node_index(&self, id: &str) -> Option<usize> {
        self.node_index.get(id).copied()
    }

    pub fn task_index(&self, id: &str) -> Option<usize> {
        self.task_index.get(id).copied()
    }

    pub fn capacities(&self) -> &[usize] {
        &self.capacities
    }

    pub fn edges(&self) -> &[ConflictEdge] {
        &self.edges
    }

    /// Conflict neighbours of `v` with edge weights.
    pub fn neighbors(&self, v: usize) -> &[(usize, f64)] {
        &self.adjacency[v]
    }

    /// Weighted conflict degree of `v`.
    pub fn conflict_degree(&self, v: usize) -> f64 {
        self.adjacency[v].iter().map(|&(_, w)| w).sum()
    }

    /// Non-zero preferences of `v`, sorted by task.
    pub fn preferences_of(&self, v: usize) -> &[(usize, f64)] {
        &self.preferences[v]
    }

    pub fn preference(&self, v: usize, t: usize) -> f64 {
        let row = &self.preferences[v];
        row.binary_search_by_key(&t, |&(s, _)| s).map(|i| row[i].1).unwrap_or(0.0)
    }

    /// Dense preference row of `v`.
    pub fn preference_row(&self, v: usize) -> Vec<f64> {
        let mut row = vec![0.0; self.num_tasks()];
        for &(t, c) in &self.preferences[v] {
            row[t] = c;
        }
        row
    }

    /// All non-zero preferences as `(node, task, c)` triples in node order.
    pub fn preference_triples(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.preferences.iter().enumerate().flat_map(|(v, row)| row.iter().map(move |&(t, c)| (v, t, c)))
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn balance(&self) -> Balance {
        self.balance
    }

    /// `w(E_G)`, the sum of all conflict weights.
    pub fn total_conflict_weight(&self) -> f64 {
        self.edges.iter().map(|e| e.weight).sum()
    }

    /// Same instance with a different balance setting (λ re-resolved).
    pub fn with_balance(&self, balance: Balance) -> Result<Self, ModelError> {
        let mut out = self.clone();
        out.lambda = out.resolve_lambda(balance)?;
        out.balance = balance;
        Ok(out)
    }

    /// Same instance with the conflict edge list replaced. λ stays at its current
    /// resolved value.
    pub fn with_edges(&self, edges: Vec<ConflictEdge>) -> Result<Self, ModelError> {
        Instance::new(
            self.node_ids.clone(),
            self.task_ids.clone(),
            self.capacities.clone(),
            edges,
            self.preference_triples().collect(),
            Balance::Lambda(self.lambda),
        )
    }
}

/// An integral assignment: `task_of[v]` is the task of individual `v`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Assignment {
    task_of: Vec<usize>,
}

impl Assignment {
    pub fn new(task_of: Vec<usize>) -> Self {
        Assignment { task_of }
    }

    /// Builds an assignment and rejects it unless it is feasible for `inst`.
    pub fn checked(inst: &Instance, task_of: Vec<usize>) -> Result<Self, ModelError> {
        let a = Assignment { task_of };
        let report = feasible(inst, &a);
        if report.is_feasible() {
            Ok(a)
        } else {
            Err(ModelError::Infeasible(report.violations))
        }
    }

    pub fn task_of(&self, v: usize) -> usize {
        self.task_of[v]
    }

    pub fn tasks(&self) -> &[usize] {
        &self.task_of
    }

    pub fn len(&self) -> usize {
        self.task_of.len()
    }

    pub fn is_empty(&self) -> bool {
        self.task_of.is_empty()
    }

    /// Number of individuals per task.
    pub fn loads(&self, num_tasks: usize) -> Vec<usize> {
        let mut loads = vec![0; num_tasks];
        for &t in &self.task_of {
            if t < num_tasks {
                loads[t] += 1;
            }
        }
        loads
    }
}

/// A point `y` of the relaxed assignment polytope, stored row-major (`node × task`).
#[derive(Debug, Clone, PartialEq)]
pub struct FractionalSolution {
    nodes: usize,
    tasks: usize,
    values: Vec<f64>,
}

impl FractionalSolution {
    pub fn new(nodes: usize, tasks: usize, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), nodes * tasks, "values must be nodes x tasks");
        FractionalSolution { nodes, tasks, values }
    }

    pub fn zeros(nodes: usize, tasks: usize) -> Self {
        Self::new(nodes, tasks, vec![0.0; nodes * tasks])
    }

    pub fn from_assignment(a: &Assignment, tasks: usize) -> Self {
        let mut y = Self::zeros(a.len(), tasks);
        for (v, &t) in a.tasks().iter().enumerate() {
            y.set(v, t, 1.0);
        }
        y
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes
    }

    pub fn num_tasks(&self) -> usize {
        self.tasks
    }

    #[inline]
    pub fn get(&self, v: usize, t: usize) -> f64 {
        self.values[v * self.tasks + t]
    }

    #[inline]
    pub fn set(&mut self, v: usize, t: usize, value: f64) {
        self.values[v * self.tasks + t] = value;
    }

    pub fn row(&self, v: usize) -> &[f64] {
        &self.values[v * self.tasks..(v + 1) * self.tasks]
    }

    pub fn row_mut(&mut self, v: usize) -> &mut [f64] {
        &mut self.values[v * self.tasks..(v + 1) * self.tasks]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn column_sums(&self) -> Vec<f64> {
        let mut sums = vec![0.0; self.tasks];
        for v in 0..self.nodes {
            for (s, y) in sums.iter_mut().zip(self.row(v)) {
                *s += y;
            }
        }
        sums
    }

    /// Returns the integral assignment if every row is a unit vector (within `tol`).
    pub fn to_assignment(&self, tol: f64) -> Option<Assignment> {
        let mut task_of = Vec::with_capacity(self.nodes);
        for v in 0..self.nodes {
            let row = self.row(v);
            let mut chosen = None;
            for (t, &y) in row.iter().enumerate() {
                if (y - 1.0).abs() <= tol {
                    if chosen.is_some() {
                        return None;
                    }
                    chosen = Some(t);
                } else if y.abs() > tol {
                    return None;
                }
            }
            task_of.push(chosen?);
        }
        Some(Assignment::new(task_of))
    }

    /// Checks the relaxed constraints with [`FEASIBILITY_TOLERANCE`].
    pub fn check(&self, inst: &Instance) -> Result<(), ModelError> {
        check_dimensions(inst, self.nodes, self.tasks)?;
        let v = fractional_violations(inst, self);
        if v.is_empty() {
            Ok(())
        } else {
            Err(ModelError::Infeasible(v))
        }
    }
}

/// Objective value split into its two terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveBreakdown {
    /// `F_R = Σ c_vt x_vt`
    pub task_satisfaction: f64,
    /// `F_G = Σ w_uv (1 − Σ_t x_ut x_vt)`
    pub social_satisfaction: f64,
    pub lambda: f64,
    /// `λ·F_R + F_G`
    pub total: f64,
}

impl ObjectiveBreakdown {
    fn new(lambda: f64, task_satisfaction: f64, social_satisfaction: f64) -> Self {
        ObjectiveBreakdown {
            task_satisfaction,
            social_satisfaction,
            lambda,
            total: lambda * task_satisfaction + social_satisfaction,
        }
    }
}

/// Anything `F` can be evaluated on.
pub trait Solution {
    fn num_nodes(&self) -> usize;
    /// Task dimension, when the representation carries one.
    fn num_tasks(&self) -> Option<usize>;
    /// `x_vt`
    fn value(&self, v: usize, t: usize) -> f64;
    /// `Σ_t x_ut x_vt`
    fn overlap(&self, u: usize, v: usize) -> f64;
    fn violations(&self, inst: &Instance) -> Vec<Violation>;
}

impl Solution for Assignment {
    fn num_nodes(&self) -> usize {
        self.task_of.len()
    }

    fn num_tasks(&self) -> Option<usize> {
        None
    }

    fn value(&self, v: usize, t: usize) -> f64 {
        if self.task_of[v] == t {
            1.0
        } else {
            0.0
        }
    }

    fn overlap(&self, u: usize, v: usize) -> f64 {
        if self.task_of[u] == self.task_of[v] {
            1.0
        } else {
            0.0
        }
    }

    fn violations(&self, inst: &Instance) -> Vec<Violation> {
        integral_violations(inst, self)
    }
}

impl Solution for FractionalSolution {
    fn num_nodes(&self) -> usize {
        self.nodes
    }

    fn num_tasks(&self) -> Option<usize> {
        Some(self.tasks)
    }

    fn value(&self, v: usize, t: usize) -> f64 {
        self.get(v, t)
    }

    fn overlap(&self, u: usize, v: usize) -> f64 {
        self.row(u).iter().zip(self.row(v)).map(|(a, b)| a * b).sum()
    }

    fn violations(&self, inst: &Instance) -> Vec<Violation> {
        fractional_violations(inst, self)
    }
}

fn check_dimensions(inst: &Instance, nodes: usize, tasks: usize) -> Result<(), ModelError> {
    if nodes != inst.num_nodes() || tasks != inst.num_tasks() {
        return Err(ModelError::DimensionMismatch {
            expected_nodes: inst.num_nodes(),
            expected_tasks: inst.num_tasks(),
            nodes,
            tasks,
        });
    }
    Ok(())
}

fn integral_violations(inst: &Instance, x: &Assignment) -> Vec<Violation> {
    let mut out = Vec::new();
    let k = inst.num_tasks();
    for (v, &t) in x.tasks().iter().enumerate() {
        if t >= k {
            out.push(Violation::UnknownTask { node: inst.node_ids[v].clone(), task: t });
        }
    }
    for (t, &load) in x.loads(k).iter().enumerate() {
        if load > inst.capacities[t] {
            out.push(Violation::OverCapacity {
                task: inst.task_ids[t].clone(),
                load: load as f64,
                capacity: inst.capacities[t],
            });
        }
    }
    out
}

fn fractional_violations(inst: &Instance, y: &FractionalSolution) -> Vec<Violation> {
    let mut out = Vec::new();
    for v in 0..y.nodes {
        let row = y.row(v);
        for (t, &val) in row.iter().enumerate() {
            if !(-FEASIBILITY_TOLERANCE..=1.0 + FEASIBILITY_TOLERANCE).contains(&val) {
                out.push(Violation::OutOfRange {
                    node: inst.node_ids[v].clone(),
                    task: inst.task_ids[t].clone(),
                    value: val,
                });
            }
        }
        let sum: f64 = row.iter().sum();
        if (sum - 1.0).abs() > FEASIBILITY_TOLERANCE {
            out.push(Violation::RowSum { node: inst.node_ids[v].clone(), sum });
        }
    }
    for (t, load) in y.column_sums().into_iter().enumerate() {
        if load > inst.capacities[t] as f64 + FEASIBILITY_TOLERANCE {
            out.push(Violation::OverCapacity { task: inst.task_ids[t].clone(), load, capacity: inst.capacities[t] });
        }
    }
    out
}

/// Result of [`feasible`]: empty `violations` means feasible.
#[derive(Debug, Clone, PartialEq)]
pub struct Feasibility {
    pub violations: Vec<Violation>,
}

impl Feasibility {
    pub fn is_feasible(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks the assignment and capacity constraints for an integral assignment.
pub fn feasible(inst: &Instance, x: &Assignment) -> Feasibility {
    if x.len() != inst.num_nodes() {
        // A wrong-length assignment cannot give every individual exactly one task.
        let violations =
            inst.node_ids.iter().skip(x.len()).map(|id| Violation::RowSum { node: id.clone(), sum: 0.0 }).collect();
        return Feasibility { violations };
    }
    Feasibility { violations: integral_violations(inst, x) }
}

/// Evaluates `F` and its decomposition, rejecting mis-sized or infeasible input.
pub fn evaluate<S: Solution>(inst: &Instance, x: &S) -> Result<ObjectiveBreakdown, ModelError> {
    check_dimensions(inst, x.num_nodes(), x.num_tasks().unwrap_or(inst.num_tasks()))?;
    let violations = x.violations(inst);
    if !violations.is_empty() {
        return Err(ModelError::Infeasible(violations));
    }
    Ok(evaluate_unchecked(inst, x))
}

/// Evaluates `F` without feasibility checks. Dimensions must match.
pub fn evaluate_unchecked<S: Solution>(inst: &Instance, x: &S) -> ObjectiveBreakdown {
    let task: f64 = inst.preference_triples().map(|(v, t, c)| c * x.value(v, t)).sum();
    let social: f64 = inst.edges.iter().map(|e| e.weight * (1.0 - x.overlap(e.u, e.v))).sum();
    ObjectiveBreakdown::new(inst.lambda, task, social)
}

/// `w(E_G)`.
pub fn total_conflict_weight(inst: &Instance) -> f64 {
    inst.total_conflict_weight()
}
