//! Test-side oracles: objective formulas and exhaustive search written directly
//! from the definitions, independent of the library's evaluators.

#![allow(dead_code)]

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use tfc::model::{Assignment, Balance, FractionalSolution, Instance};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(1.0)
}

/// Random instance with `2..=max_nodes` individuals and `1..=max_tasks` tasks whose
/// capacities cover everyone.
pub fn random_instance<R: Rng>(rng: &mut R, max_nodes: usize, max_tasks: usize) -> Instance {
    let n = rng.gen_range(2..=max_nodes);
    let k = rng.gen_range(1..=max_tasks);
    random_instance_sized(rng, n, k)
}

pub fn random_instance_sized<R: Rng>(rng: &mut R, n: usize, k: usize) -> Instance {
    let mut caps: Vec<usize> = (0..k).map(|_| rng.gen_range(0..=n.div_ceil(k) + 1)).collect();
    while caps.iter().sum::<usize>() < n {
        let t = rng.gen_range(0..k);
        caps[t] += 1;
    }
    let density = rng.gen_range(0.2..0.8);
    let mut edges = Vec::new();
    for u in 0..n {
        for v in (u + 1)..n {
            if rng.gen_bool(density) {
                edges.push((u, v, rng.gen_range(0.05..2.0)));
            }
        }
    }
    let mut prefs = Vec::new();
    for v in 0..n {
        for t in 0..k {
            if rng.gen_bool(0.6) {
                prefs.push((v, t, rng.gen_range(0.0..=1.0)));
            }
        }
    }
    let balance = if rng.gen_bool(0.5) {
        Balance::Lambda(rng.gen_range(0.0..2.0))
    } else {
        Balance::Alpha(rng.gen_range(0.0..4.0))
    };
    Instance::from_indexed(n, caps, edges, prefs, balance).unwrap()
}

/// Uniformly shuffled capacity slots, one per individual.
pub fn random_assignment<R: Rng>(rng: &mut R, inst: &Instance) -> Assignment {
    let mut slots: Vec<usize> =
        inst.capacities().iter().enumerate().flat_map(|(t, &c)| std::iter::repeat_n(t, c)).collect();
    slots.shuffle(rng);
    slots.truncate(inst.num_nodes());
    Assignment::new(slots)
}

/// Convex combination of up to `parts` random feasible assignments.
pub fn random_fractional<R: Rng>(rng: &mut R, inst: &Instance, parts: usize) -> FractionalSolution {
    let m = rng.gen_range(1..=parts);
    let weights: Vec<f64> = (0..m).map(|_| rng.gen_range(0.05..1.0)).collect();
    let total: f64 = weights.iter().sum();
    let (n, k) = (inst.num_nodes(), inst.num_tasks());
    let mut y = FractionalSolution::zeros(n, k);
    for w in weights {
        let a = random_assignment(rng, inst);
        for v in 0..n {
            let t = a.task_of(v);
            y.set(v, t, y.get(v, t) + w / total);
        }
    }
    y
}

pub fn integral(a: &Assignment, k: usize) -> FractionalSolution {
    let mut y = FractionalSolution::zeros(a.len(), k);
    for (v, &t) in a.tasks().iter().enumerate() {
        y.set(v, t, 1.0);
    }
    y
}

fn linear_term(inst: &Instance, y: &FractionalSolution) -> f64 {
    let mut s = 0.0;
    for v in 0..inst.num_nodes() {
        for t in 0..inst.num_tasks() {
            s += inst.preference(v, t) * y.get(v, t);
        }
    }
    inst.lambda() * s
}

/// `λ Σ c y + Σ_uv w (1 − Σ_t y_ut y_vt)`
pub fn oracle_f(inst: &Instance, y: &FractionalSolution) -> f64 {
    let social: f64 = inst
        .edges()
        .iter()
        .map(|e| e.weight * (1.0 - (0..inst.num_tasks()).map(|t| y.get(e.u, t) * y.get(e.v, t)).sum::<f64>()))
        .sum();
    linear_term(inst, y) + social
}

/// `λ Σ c y + Σ_uv w min(1, min_t (2 − y_ut − y_vt))`
pub fn oracle_l1(inst: &Instance, y: &FractionalSolution) -> f64 {
    let social: f64 = inst
        .edges()
        .iter()
        .map(|e| {
            let inner =
                (0..inst.num_tasks()).map(|t| 2.0 - y.get(e.u, t) - y.get(e.v, t)).fold(f64::INFINITY, f64::min);
            e.weight * inner.min(1.0)
        })
        .sum();
    linear_term(inst, y) + social
}

/// `λ Σ c y + Σ_uv w Σ_t min(1, y_ut + y_vt) − w(E)`
pub fn oracle_l2(inst: &Instance, y: &FractionalSolution) -> f64 {
    let social: f64 = inst
        .edges()
        .iter()
        .map(|e| {
            e.weight * ((0..inst.num_tasks()).map(|t| (y.get(e.u, t) + y.get(e.v, t)).min(1.0)).sum::<f64>() - 1.0)
        })
        .sum();
    linear_term(inst, y) + social
}

/// Exhaustive search over capacity-feasible assignments: best value and one
/// maximizer.
pub fn oracle_optimum(inst: &Instance) -> (f64, Vec<usize>) {
    fn go(inst: &Instance, v: usize, x: &mut Vec<usize>, load: &mut [usize], best: &mut (f64, Vec<usize>)) {
        if v == inst.num_nodes() {
            let f = oracle_f(inst, &integral(&Assignment::new(x.clone()), inst.num_tasks()));
            if f > best.0 {
                *best = (f, x.clone());
            }
            return;
        }
        for t in 0..inst.num_tasks() {
            if load[t] < inst.capacities()[t] {
                load[t] += 1;
                x.push(t);
                go(inst, v + 1, x, load, best);
                x.pop();
                load[t] -= 1;
            }
        }
    }
    let mut best = (f64::NEG_INFINITY, Vec::new());
    go(inst, 0, &mut Vec::new(), &mut vec![0; inst.num_tasks()], &mut best);
    best
}

/// Every individual on exactly one existing task and no task over capacity.
pub fn feasible(inst: &Instance, a: &Assignment) -> bool {
    if a.len() != inst.num_nodes() {
        return false;
    }
    let mut load = vec![0usize; inst.num_tasks()];
    for &t in a.tasks() {
        if t >= inst.num_tasks() {
            return false;
        }
        load[t] += 1;
    }
    load.iter().zip(inst.capacities()).all(|(l, c)| l <= c)
}

pub fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}
