//! Greedy and uniformly random assignment baselines.

use rand::Rng;

use crate::model::{Assignment, Instance};
use crate::rng;

/// One greedy decision and the increase in partial `F` it produced.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GreedyStep {
    pub node: usize,
    pub task: usize,
    pub gain: f64,
}

/// Repeatedly assigns the (individual, non-full task) pair with the largest increase
/// in `F`. On a partial assignment an edge counts as cut only once both endpoints
/// sit on different tasks. Ties go to the smallest `(node, task)`.
pub fn greedy(inst: &Instance) -> Assignment {
    greedy_with_trace(inst).0
}

pub fn greedy_with_trace(inst: &Instance) -> (Assignment, Vec<GreedyStep>) {
    let (n, k) = (inst.num_nodes(), inst.num_tasks());
    let lambda = inst.lambda();
    let mut task_of: Vec<Option<usize>> = vec![None; n];
    let mut remaining = inst.capacities().to_vec();
    // assigned[v]: weight from v to assigned neighbors; on_task[v*k+t]: the part on task t.
    let mut assigned = vec![0.0; n];
    let mut on_task = vec![0.0; n * k];
    let mut trace = Vec::with_capacity(n);
    for _ in 0..n {
        let mut best: Option<GreedyStep> = None;
        for v in (0..n).filter(|&v| task_of[v].is_none()) {
            for t in (0..k).filter(|&t| remaining[t] > 0) {
                let gain = lambda * inst.preference(v, t) + assigned[v] - on_task[v * k + t];
                if best.is_none_or(|b| gain > b.gain) {
                    best = Some(GreedyStep { node: v, task: t, gain });
                }
            }
        }
        let step = best.expect("total capacity covers every individual");
        task_of[step.node] = Some(step.task);
        remaining[step.task] -= 1;
        for &(u, w) in inst.neighbors(step.node) {
            assigned[u] += w;
            on_task[u * k + step.task] += w;
        }
        trace.push(step);
    }
    (Assignment::new(task_of.into_iter().map(|t| t.unwrap()).collect()), trace)
}

/// Each individual in index order picks uniformly among tasks with room left.
pub fn random_assign(inst: &Instance, seed: u64) -> Assignment {
    let mut rng = rng::split(seed, rng::stream::RANDOM_BASELINE);
    random_assign_with(inst, &mut rng)
}

pub fn random_assign_with<R: Rng + ?Sized>(inst: &Instance, rng: &mut R) -> Assignment {
    let mut remaining = inst.capacities().to_vec();
    let mut open: Vec<usize> = (0..inst.num_tasks()).filter(|&t| remaining[t] > 0).collect();
    let mut task_of = Vec::with_capacity(inst.num_nodes());
    for _ in 0..inst.num_nodes() {
        let i = rng::index(rng, open.len());
        let t = open[i];
        task_of.push(t);
        remaining[t] -= 1;
        if remaining[t] == 0 {
            open.remove(i);
        }
    }
    Assignment::new(task_of)
}
