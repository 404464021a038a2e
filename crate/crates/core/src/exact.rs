//! Exact optimum for small instances by branch and bound.
//!
//! Individuals are fixed one at a time in order of decreasing conflict degree; each
//! is tried on tasks in order of decreasing `λc`. A prefix is pruned when
//! `partial + λ·Σ max_t c + (weight of undecided edges)` cannot reach the incumbent.
//! Among optimal assignments the lexicographically smallest (by node index) wins.

use thiserror::Error;

use crate::model::{evaluate, Assignment, Instance};

/// Default node budget for [`solve_exact`].
pub const DEFAULT_NODE_BUDGET: u64 = 50_000_000;

/// Largest `|T|^|V|` for which plain enumeration is attempted.
pub const ENUMERATION_LIMIT: u64 = 10_000_000;

#[derive(Debug, Clone, PartialEq)]
pub struct ExactSolution {
    pub assignment: Assignment,
    pub value: f64,
    pub nodes_explored: u64,
}

#[derive(Debug, Error)]
pub enum ExactError {
    #[error("search budget of {budget} nodes exhausted; incumbent {incumbent_value:?}, upper bound {upper_bound}")]
    BudgetExceeded { budget: u64, incumbent: Option<Assignment>, incumbent_value: Option<f64>, upper_bound: f64 },
    #[error("|T|^|V| exceeds the enumeration limit of {ENUMERATION_LIMIT}")]
    TooLarge,
    #[error("instance has no feasible assignment")]
    NoFeasibleAssignment,
}

fn same_value(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1.0)
}

/// `true` if `(value, x)` should replace `(best, incumbent)`.
fn improves(value: f64, x: &[usize], best: Option<(f64, &[usize])>) -> bool {
    match best {
        None => true,
        Some((b, inc)) => {
            if same_value(value, b) {
                x < inc
            } else {
                value > b
            }
        }
    }
}

struct Search<'a> {
    inst: &'a Instance,
    order: Vec<usize>,
    task_order: Vec<Vec<usize>>,
    /// `suffix_pref[d]`: λ·Σ max_t c over `order[d..]`.
    suffix_pref: Vec<f64>,
    task_of: Vec<usize>,
    load: Vec<usize>,
    partial: f64,
    undecided: f64,
    best: Option<(f64, Vec<usize>)>,
    nodes: u64,
    budget: u64,
}

const UNASSIGNED: usize = usize::MAX;

impl<'a> Search<'a> {
    fn new(inst: &'a Instance, budget: u64) -> Self {
        let n = inst.num_nodes();
        let k = inst.num_tasks();
        let lambda = inst.lambda();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| inst.conflict_degree(b).total_cmp(&inst.conflict_degree(a)).then(a.cmp(&b)));
        let task_order = (0..n)
            .map(|v| {
                let mut ts: Vec<usize> = (0..k).collect();
                ts.sort_by(|&a, &b| {
                    (lambda * inst.preference(v, b)).total_cmp(&(lambda * inst.preference(v, a))).then(a.cmp(&b))
                });
                ts
            })
            .collect();
        let mut suffix_pref = vec![0.0; n + 1];
        for d in (0..n).rev() {
            let v = order[d];
            let best = (0..k).map(|t| lambda * inst.preference(v, t)).fold(0.0f64, f64::max);
            suffix_pref[d] = suffix_pref[d + 1] + best;
        }
        Search {
            inst,
            order,
            task_order,
            suffix_pref,
            task_of: vec![UNASSIGNED; n],
            load: vec![0; k],
            partial: 0.0,
            undecided: inst.total_conflict_weight(),
            best: None,
            nodes: 0,
            budget,
        }
    }

    fn bound(&self, depth: usize) -> f64 {
        self.partial + self.suffix_pref[depth] + self.undecided
    }

    fn prunable(&self, depth: usize) -> bool {
        match &self.best {
            None => false,
            Some((b, _)) => self.bound(depth) < *b && !same_value(self.bound(depth), *b),
        }
    }

    /// Returns `false` when the budget ran out.
    fn run(&mut self, depth: usize) -> bool {
        self.nodes += 1;
        if self.nodes > self.budget {
            return false;
        }
        if depth == self.order.len() {
            let value = self.partial;
            if improves(value, &self.task_of, self.best.as_ref().map(|(b, x)| (*b, x.as_slice()))) {
                self.best = Some((value, self.task_of.clone()));
            }
            return true;
        }
        if self.prunable(depth) {
            return true;
        }
        let v = self.order[depth];
        let lambda = self.inst.lambda();
        for i in 0..self.task_order[v].len() {
            let t = self.task_order[v][i];
            if self.load[t] >= self.inst.capacities()[t] {
                continue;
            }
            let (saved_partial, saved_undecided) = (self.partial, self.undecided);
            self.partial += lambda * self.inst.preference(v, t);
            for &(u, w) in self.inst.neighbors(v) {
                let tu = self.task_of[u];
                if tu != UNASSIGNED {
                    self.undecided -= w;
                    if tu != t {
                        self.partial += w;
                    }
                }
            }
            self.task_of[v] = t;
            self.load[t] += 1;
            let ok = self.run(depth + 1);
            self.load[t] -= 1;
            self.task_of[v] = UNASSIGNED;
            self.partial = saved_partial;
            self.undecided = saved_undecided;
            if !ok {
                return false;
            }
        }
        true
    }
}

fn finish(inst: &Instance, task_of: Vec<usize>, nodes: u64) -> ExactSolution {
    let assignment = Assignment::new(task_of);
    let value = evaluate(inst, &assignment).expect("search only builds feasible assignments").total;
    ExactSolution { assignment, value, nodes_explored: nodes }
}

/// Branch and bound with at most `budget` search nodes. When the budget runs out
/// and `|T|^|V|` is within [`ENUMERATION_LIMIT`], falls back to enumeration.
pub fn solve_exact(inst: &Instance, budget: u64) -> Result<ExactSolution, ExactError> {
    let mut search = Search::new(inst, budget);
    let root_bound = search.bound(0);
    if search.run(0) {
        return match search.best {
            Some((_, x)) => Ok(finish(inst, x, search.nodes)),
            None => Err(ExactError::NoFeasibleAssignment),
        };
    }
    if enumeration_size(inst).is_some() {
        return enumerate_optimum(inst);
    }
    let (incumbent_value, incumbent) = match search.best {
        Some((v, x)) => (Some(v), Some(Assignment::new(x))),
        None => (None, None),
    };
    Err(ExactError::BudgetExceeded { budget, incumbent, incumbent_value, upper_bound: root_bound })
}

/// `|T|^|V|` if it does not exceed [`ENUMERATION_LIMIT`].
pub fn enumeration_size(inst: &Instance) -> Option<u64> {
    let k = inst.num_tasks() as u64;
    let mut total: u64 = 1;
    for _ in 0..inst.num_nodes() {
        total = total.checked_mul(k)?;
        if total > ENUMERATION_LIMIT {
            return None;
        }
    }
    Some(total)
}

/// Plain enumeration of every assignment in lexicographic order.
pub fn enumerate_optimum(inst: &Instance) -> Result<ExactSolution, ExactError> {
    let total = enumeration_size(inst).ok_or(ExactError::TooLarge)?;
    let (n, k) = (inst.num_nodes(), inst.num_tasks());
    let mut x = vec![0usize; n];
    let mut best: Option<(f64, Vec<usize>)> = None;
    for _ in 0..total {
        let mut load = vec![0usize; k];
        for &t in &x {
            load[t] += 1;
        }
        if load.iter().zip(inst.capacities()).all(|(l, c)| l <= c) {
            let value = crate::model::evaluate_unchecked(inst, &Assignment::new(x.clone())).total;
            if improves(value, &x, best.as_ref().map(|(b, y)| (*b, y.as_slice()))) {
                best = Some((value, x.clone()));
            }
        }
        // Increment as a base-k counter, last node fastest.
        for i in (0..n).rev() {
            x[i] += 1;
            if x[i] < k {
                break;
            }
            x[i] = 0;
        }
    }
    match best {
        Some((_, x)) => Ok(finish(inst, x, total)),
        None => Err(ExactError::NoFeasibleAssignment),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Balance;

    /// u, v, z with c(u,t1) = 1 − ε, c(v,t2) = ε, one conflict (v,z) of weight W,
    /// capacities (1, 2).
    fn greedy_trap(w: f64, eps: f64) -> Instance {
        let prefs = vec![(0, 0, 1.0 - eps), (1, 1, eps)];
        Instance::from_indexed(3, vec![1, 2], vec![(1, 2, w)], prefs, Balance::Lambda(1.0)).unwrap()
    }

    #[test]
    fn counterexample_optimum() {
        let inst = greedy_trap(100.0, 0.1);
        let s = solve_exact(&inst, DEFAULT_NODE_BUDGET).unwrap();
        assert!((s.value - 100.1).abs() < 1e-12);
        assert_eq!(s.assignment.tasks(), &[1, 1, 0]);
    }

    #[test]
    fn no_signal_returns_lexicographically_smallest() {
        let inst = Instance::from_indexed(3, vec![2, 2], vec![], vec![], Balance::Lambda(0.0)).unwrap();
        let s = solve_exact(&inst, DEFAULT_NODE_BUDGET).unwrap();
        assert_eq!(s.value, 0.0);
        assert_eq!(s.assignment.tasks(), &[0, 0, 1]);
    }

    #[test]
    fn budget_exhaustion_is_reported() {
        let edges: Vec<_> = (0..12).flat_map(|u| ((u + 1)..12).map(move |v| (u, v, 1.0))).collect();
        let inst = Instance::from_indexed(12, vec![3; 4], edges, vec![], Balance::Lambda(0.0)).unwrap();
        match solve_exact(&inst, 10) {
            Err(ExactError::BudgetExceeded { upper_bound, .. }) => assert_eq!(upper_bound, 66.0),
            other => panic!("expected budget error, got {other:?}"),
        }
    }

    #[test]
    fn bound_dominates_every_completion() {
        let edges = vec![(0, 1, 1.0), (1, 2, 2.0), (0, 2, 0.5), (2, 3, 1.5)];
        let prefs = vec![(0, 0, 1.0), (1, 1, 0.5), (2, 0, 0.25), (3, 1, 1.0)];
        let inst = Instance::from_indexed(4, vec![2, 2], edges, prefs, Balance::Lambda(0.8)).unwrap();
        let search = Search::new(&inst, u64::MAX);
        // Every prefix of the search order on every full assignment.
        let all = enumerate_all(&inst);
        for x in &all {
            let mut s = Search::new(&inst, u64::MAX);
            for depth in 0..=4 {
                let prefix: Vec<usize> = search.order[..depth].to_vec();
                let best_completion = all
                    .iter()
                    .filter(|y| prefix.iter().all(|&v| y[v] == x[v]))
                    .map(|y| crate::model::evaluate_unchecked(&inst, &Assignment::new(y.clone())).total)
                    .fold(f64::NEG_INFINITY, f64::max);
                assert!(s.bound(depth) >= best_completion - 1e-12);
                if depth < 4 {
                    let v = search.order[depth];
                    let t = x[v];
                    s.partial += inst.lambda() * inst.preference(v, t);
                    for &(u, w) in inst.neighbors(v) {
                        if s.task_of[u] != UNASSIGNED {
                            s.undecided -= w;
                            if s.task_of[u] != t {
                                s.partial += w;
                            }
                        }
                    }
                    s.task_of[v] = t;
                }
            }
        }
    }

    fn enumerate_all(inst: &Instance) -> Vec<Vec<usize>> {
        let (n, k) = (inst.num_nodes(), inst.num_tasks());
        let mut out = Vec::new();
        for code in 0..k.pow(n as u32) {
            let x: Vec<usize> = (0..n).map(|i| code / k.pow(i as u32) % k).collect();
            if crate::model::feasible(inst, &Assignment::new(x.clone())).is_feasible() {
                out.push(x);
            }
        }
        out
    }
}
