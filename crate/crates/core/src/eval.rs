//! Quality metrics, approximation ratios, the balancing check and α sweeps.

use std::collections::HashSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::io::{Gender, RankingData};
use crate::model::{Assignment, Balance, FractionalSolution, Instance, ObjectiveBreakdown};
use crate::solve::{solve, Algorithm, SolveOptions};

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("no ranking for node `{0}`")]
    MissingRanking(String),
    #[error("project `{0}` missing from the ranking data")]
    MissingProject(String),
    #[error("reference value {reference} is not positive while F = {value}")]
    DegenerateReference { reference: f64, value: f64 },
    #[error("assignment has {got} entries for {expected} nodes")]
    Length { expected: usize, got: usize },
}

/// Max, mean and population standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub max: f64,
    pub avg: f64,
    pub std: f64,
}

impl Summary {
    pub fn of(values: &[f64]) -> Self {
        if values.is_empty() {
            return Summary { max: 0.0, avg: 0.0, std: 0.0 };
        }
        let n = values.len() as f64;
        let avg = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|x| (x - avg) * (x - avg)).sum::<f64>() / n;
        let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Summary { max, avg, std: var.sqrt() }
    }
}

/// `rank` summarizes the rank each individual gives their task; `friends` the
/// number of friends sharing their task.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QualityMetrics {
    pub rank: Summary,
    pub friends: Summary,
}

/// Ranks and friend counts, matched to the instance by node and task ids.
pub fn quality_metrics(inst: &Instance, rankings: &RankingData, x: &Assignment) -> Result<QualityMetrics, EvalError> {
    let n = inst.num_nodes();
    if x.len() != n {
        return Err(EvalError::Length { expected: n, got: x.len() });
    }
    let student: Vec<usize> = inst
        .node_ids()
        .iter()
        .map(|id| rankings.students.iter().position(|s| s == id).ok_or_else(|| EvalError::MissingRanking(id.clone())))
        .collect::<Result<_, _>>()?;
    let project: Vec<usize> = inst
        .task_ids()
        .iter()
        .map(|id| rankings.projects.iter().position(|p| p == id).ok_or_else(|| EvalError::MissingProject(id.clone())))
        .collect::<Result<_, _>>()?;
    let ranks: Vec<f64> = (0..n).map(|v| rankings.rank(student[v], project[x.task_of(v)]) as f64).collect();

    let mut node_of = vec![usize::MAX; rankings.students.len()];
    for (v, &s) in student.iter().enumerate() {
        node_of[s] = v;
    }
    let pairs: HashSet<(usize, usize)> = rankings
        .friends
        .iter()
        .map(|&(a, b)| (node_of[a], node_of[b]))
        .filter(|&(u, v)| u != usize::MAX && v != usize::MAX && u != v)
        .map(|(u, v)| (u.min(v), u.max(v)))
        .collect();
    let mut together = vec![0.0; n];
    for &(u, v) in &pairs {
        if x.task_of(u) == x.task_of(v) {
            together[u] += 1.0;
            together[v] += 1.0;
        }
    }
    Ok(QualityMetrics { rank: Summary::of(&ranks), friends: Summary::of(&together) })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RatioMode {
    /// Against the exact optimum.
    Exact,
    /// Against a relaxation optimum; the ratio is a lower bound on the true one.
    LpBound,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ApproximationRatio {
    pub mode: RatioMode,
    pub reference: f64,
    pub value: f64,
    /// `true` when `value` only bounds the ratio from below.
    pub lower_bound: bool,
}

/// `F(x) / reference`. A zero reference with `F = 0` gives 1.
pub fn approximation_ratio(value: f64, reference: f64, mode: RatioMode) -> Result<ApproximationRatio, EvalError> {
    let ratio = if reference > 0.0 {
        value / reference
    } else if value == 0.0 && reference == 0.0 {
        1.0
    } else {
        return Err(EvalError::DegenerateReference { reference, value });
    };
    Ok(ApproximationRatio { mode, reference, value: ratio, lower_bound: mode == RatioMode::LpBound })
}

/// Whether λ is large enough for the ¾ guarantee of randomized rounding on L2.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BalancingReport {
    pub lambda: f64,
    /// `w(E) / |V|`
    pub threshold: f64,
    /// `λ ≥ w(E)/|V|`, sufficient when every `c ≤ 1`.
    pub sufficient: bool,
    /// `λ Σ c y − w(E)` at the given fractional point.
    pub exact_margin: Option<f64>,
    /// `exact_margin ≥ 0`.
    pub exact: Option<bool>,
}

pub fn check_balancing(inst: &Instance, y: Option<&FractionalSolution>) -> BalancingReport {
    let w = inst.total_conflict_weight();
    let threshold = w / inst.num_nodes() as f64;
    let exact_margin = y.map(|y| {
        let linear: f64 = inst.preference_triples().map(|(v, t, c)| c * y.get(v, t)).sum();
        inst.lambda() * linear - w
    });
    BalancingReport {
        lambda: inst.lambda(),
        threshold,
        sufficient: inst.lambda() >= threshold,
        exact_margin,
        exact: exact_margin.map(|m| m >= 0.0),
    }
}

/// Mean over tasks of `|male% − female%|`, in percentage points; empty tasks skipped.
pub fn average_gender_gap(gender: &[Gender], x: &Assignment, num_tasks: usize) -> f64 {
    let mut male = vec![0usize; num_tasks];
    let mut total = vec![0usize; num_tasks];
    for (v, &t) in x.tasks().iter().enumerate() {
        total[t] += 1;
        if gender[v] == Gender::Male {
            male[t] += 1;
        }
    }
    let gaps: Vec<f64> = (0..num_tasks)
        .filter(|&t| total[t] > 0)
        .map(|t| {
            let m = male[t] as f64 / total[t] as f64;
            100.0 * (m - (1.0 - m)).abs()
        })
        .collect();
    gaps.iter().sum::<f64>() / gaps.len().max(1) as f64
}

/// Fraction of individuals whose task differs between `before` and `after`.
pub fn changed_fraction(before: &Assignment, after: &Assignment) -> f64 {
    let moved = before.tasks().iter().zip(after.tasks()).filter(|(a, b)| a != b).count();
    moved as f64 / before.len().max(1) as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub algorithm: String,
    pub outcome: Result<ObjectiveBreakdown, String>,
}

/// One α of a sweep: `F_R`, `F_G` and `F` of each algorithm's best assignment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub alpha: f64,
    pub lambda: f64,
    pub results: Vec<SweepResult>,
}

/// Runs every algorithm at every α. Points run in parallel and come back in the
/// order of `alphas`; a failing run is recorded and the sweep continues.
pub fn alpha_sweep(inst: &Instance, alphas: &[f64], algorithms: &[Algorithm], opts: &SolveOptions) -> Vec<SweepPoint> {
    alphas
        .par_iter()
        .map(|&alpha| {
            let at = match inst.with_balance(Balance::Alpha(alpha)) {
                Ok(i) => i,
                Err(e) => {
                    let results = algorithms
                        .iter()
                        .map(|a| SweepResult { algorithm: a.to_string(), outcome: Err(e.to_string()) })
                        .collect();
                    return SweepPoint { alpha, lambda: f64::NAN, results };
                }
            };
            let results = algorithms
                .iter()
                .map(|&algorithm| {
                    let run = SolveOptions { algorithm, ..opts.clone() };
                    let outcome = solve(&at, &run).map(|r| r.results.objective).map_err(|e| e.to_string());
                    SweepResult { algorithm: algorithm.to_string(), outcome }
                })
                .collect();
            SweepPoint { alpha, lambda: at.lambda(), results }
        })
        .collect()
}
