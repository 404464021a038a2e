//! Relax, round and evaluate: one entry point for every algorithm.

use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::baselines::{greedy, random_assign};
use crate::eval::{self, ApproximationRatio, BalancingReport, EvalError, RatioMode, Summary};
use crate::exact::{self, ExactError};
use crate::model::{evaluate, Assignment, Balance, FractionalSolution, Instance, ModelError, ObjectiveBreakdown};
use crate::relax::{self, LpStatus, RelaxError, RelaxationKind, SimplexOptions};
use crate::rounding::{self, RoundingError};
use crate::speedups::{self, SpeedupError};

pub const REPORT_SCHEMA: &str = "tfc-report/1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    Exact,
    PipageL1,
    RpipageL2,
    Greedy,
    Random,
}

impl Algorithm {
    pub const ALL: [Algorithm; 5] =
        [Algorithm::Exact, Algorithm::PipageL1, Algorithm::RpipageL2, Algorithm::Greedy, Algorithm::Random];

    pub fn relaxation(self) -> Option<RelaxationKind> {
        match self {
            Algorithm::PipageL1 => Some(RelaxationKind::L1),
            Algorithm::RpipageL2 => Some(RelaxationKind::L2),
            _ => None,
        }
    }

    pub fn is_randomized(self) -> bool {
        matches!(self, Algorithm::RpipageL2 | Algorithm::Random)
    }

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Exact => "exact",
            Algorithm::PipageL1 => "pipage-l1",
            Algorithm::RpipageL2 => "rpipage-l2",
            Algorithm::Greedy => "greedy",
            Algorithm::Random => "random",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == s.to_ascii_lowercase())
            .ok_or_else(|| format!("unknown algorithm `{s}` (expected exact, pipage-l1, rpipage-l2, greedy or random)"))
    }
}

/// What the approximation ratio is measured against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReferenceMode {
    /// Exact for the exact solver; the relaxation optimum for LP algorithms without
    /// speedups; otherwise none.
    Auto,
    None,
    Exact,
    LpBound,
}

impl FromStr for ReferenceMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "auto" => Ok(ReferenceMode::Auto),
            "none" => Ok(ReferenceMode::None),
            "exact" => Ok(ReferenceMode::Exact),
            "lp-bound" => Ok(ReferenceMode::LpBound),
            other => Err(format!("unknown reference `{other}` (expected auto, none, exact or lp-bound)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveOptions {
    pub algorithm: Algorithm,
    pub seed: u64,
    /// Runs of a randomized algorithm; run `r` of random uses seed `seed + r`, run
    /// `r` of randomized rounding uses rounding stream `r`.
    pub repetitions: usize,
    /// Sparsify retention probability.
    pub sparsify: Option<f64>,
    /// Compact with this maximum supernode size.
    pub compact: Option<usize>,
    pub reference: ReferenceMode,
    pub max_lp_iterations: Option<usize>,
    /// Seconds from the start of the solve after which the LP stops where it is.
    #[serde(default)]
    pub lp_time_limit: Option<f64>,
    pub exact_budget: u64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            algorithm: Algorithm::RpipageL2,
            seed: 0,
            repetitions: 1,
            sparsify: None,
            compact: None,
            reference: ReferenceMode::Auto,
            max_lp_iterations: None,
            lp_time_limit: None,
            exact_budget: exact::DEFAULT_NODE_BUDGET,
        }
    }
}

#[derive(Debug, Error)]
pub enum SolveError {
    #[error("invalid options: {0}")]
    Options(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Relax(#[from] RelaxError),
    #[error(transparent)]
    Rounding(#[from] RoundingError),
    #[error(transparent)]
    Exact(#[from] ExactError),
    #[error(transparent)]
    Speedup(#[from] SpeedupError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

impl SolveError {
    /// Which limit stopped the LP before it found a feasible point, if any.
    pub fn lp_limit(&self) -> Option<LpStatus> {
        let lp = match self {
            SolveError::Relax(RelaxError::Lp(e)) | SolveError::Speedup(SpeedupError::Relax(RelaxError::Lp(e))) => e,
            _ => return None,
        };
        match lp {
            relax::LpError::IterationLimit(_) => Some(LpStatus::IterationLimit),
            relax::LpError::TimeLimit(_) => Some(LpStatus::TimeLimit),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceSummary {
    pub nodes: usize,
    pub tasks: usize,
    pub edges: usize,
    pub total_conflict_weight: f64,
    pub balance: Balance,
    pub lambda: f64,
}

impl InstanceSummary {
    pub fn of(inst: &Instance) -> Self {
        InstanceSummary {
            nodes: inst.num_nodes(),
            tasks: inst.num_tasks(),
            edges: inst.edges().len(),
            total_conflict_weight: inst.total_conflict_weight(),
            balance: inst.balance(),
            lambda: inst.lambda(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportConfig {
    pub instance_path: Option<String>,
    pub instance: InstanceSummary,
    pub options: SolveOptions,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub repetition: usize,
    pub objective: ObjectiveBreakdown,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelaxationSummary {
    pub kind: RelaxationKind,
    /// Relaxation optimum on the instance actually solved (after speedups).
    pub value: f64,
    pub iterations: usize,
    pub status: LpStatus,
    /// ½ for L1 with pipage, ¾ for L2 with randomized pipage (conditional on balancing).
    pub guarantee_factor: f64,
    pub guarantee_threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeedupSummary {
    pub retained_edges: Option<usize>,
    pub supernodes: Option<usize>,
    pub compaction_ignored_conflict_weight: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportResults {
    /// Best run, evaluated on the original instance.
    pub objective: ObjectiveBreakdown,
    pub best_repetition: usize,
    /// `(node, task)` of the best run, in node order.
    pub assignment: Vec<(String, String)>,
    pub runs: Vec<RunRecord>,
    pub objective_summary: Summary,
    pub relaxation: Option<RelaxationSummary>,
    pub approximation_ratio: Option<ApproximationRatio>,
    pub balancing: BalancingReport,
    pub speedups: Option<SpeedupSummary>,
    pub exact_nodes_explored: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub speedup_seconds: f64,
    pub relax_seconds: f64,
    /// Rounding, or the whole run for algorithms without a relaxation.
    pub assign_seconds: f64,
    pub total_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub schema: String,
    pub config: ReportConfig,
    pub results: ReportResults,
    pub timings: Timings,
}

impl SolveReport {
    pub fn best_assignment(&self, inst: &Instance) -> Result<Assignment, SolveError> {
        let tasks = self
            .results
            .assignment
            .iter()
            .map(|(_, t)| {
                inst.task_index(t).ok_or_else(|| SolveError::Options(format!("unknown task `{t}` in report")))
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Assignment::new(tasks))
    }

    /// The relaxation stopped on its iteration budget or deadline.
    pub fn lp_hit_limit(&self) -> bool {
        self.results.relaxation.as_ref().is_some_and(|r| r.status.is_limit())
    }
}

fn validate(opts: &SolveOptions) -> Result<(), SolveError> {
    if opts.repetitions == 0 {
        return Err(SolveError::Options("repetitions must be at least 1".into()));
    }
    if let Some(p) = opts.sparsify {
        if !(p > 0.0 && p <= 1.0) {
            return Err(SolveError::Options(format!("sparsify probability must lie in (0, 1], got {p}")));
        }
    }
    if opts.compact.is_some() && opts.algorithm.relaxation().is_none() {
        return Err(SolveError::Options(format!("compact needs an LP-based algorithm, not {}", opts.algorithm)));
    }
    if let Some(t) = opts.lp_time_limit {
        if !(t >= 0.0 && t.is_finite()) {
            return Err(SolveError::Options(format!(
                "LP time limit must be a finite non-negative number of seconds, got {t}"
            )));
        }
    }
    if opts.compact == Some(0) {
        return Err(SolveError::Options("supernode size must be positive".into()));
    }
    Ok(())
}

struct Relaxed {
    y: FractionalSolution,
    summary: RelaxationSummary,
}

pub fn solve(inst: &Instance, opts: &SolveOptions) -> Result<SolveReport, SolveError> {
    validate(opts)?;
    let start = Instant::now();
    let simplex = SimplexOptions {
        max_iterations: opts.max_lp_iterations,
        deadline: opts.lp_time_limit.map(|t| start + Duration::from_secs_f64(t)),
        ..SimplexOptions::default()
    };

    let work = match opts.sparsify {
        Some(p) => speedups::sparsify(inst, p, opts.seed)?,
        None => inst.clone(),
    };
    let mut speedup = (opts.sparsify.is_some() || opts.compact.is_some()).then(|| SpeedupSummary {
        retained_edges: opts.sparsify.map(|_| work.edges().len()),
        supernodes: None,
        compaction_ignored_conflict_weight: None,
    });
    let speedup_seconds = start.elapsed().as_secs_f64();

    let relax_start = Instant::now();
    let relaxed = match opts.algorithm.relaxation() {
        None => None,
        Some(kind) => {
            let (y, value, iterations, status) = match opts.compact {
                Some(target) => {
                    let partition = speedups::compact_partition(&work, target);
                    let r = speedups::compact_solve_with(&work, &partition, kind, &simplex)?;
                    if let Some(s) = speedup.as_mut() {
                        s.supernodes = Some(r.num_supernodes);
                        s.compaction_ignored_conflict_weight = Some(r.ignored_conflict_weight);
                    }
                    (r.solution, r.compact_objective, r.iterations, r.status)
                }
                None => {
                    let r = relax::solve_relaxation_with(&work, kind, &simplex)?;
                    (r.solution, r.objective_value, r.iterations, r.status)
                }
            };
            let factor = match kind {
                RelaxationKind::L1 => 0.5,
                RelaxationKind::L2 => 0.75,
            };
            Some(Relaxed {
                y,
                summary: RelaxationSummary {
                    kind,
                    value,
                    iterations,
                    status,
                    guarantee_factor: factor,
                    guarantee_threshold: factor * value,
                },
            })
        }
    };
    let relax_seconds = relax_start.elapsed().as_secs_f64();

    let assign_start = Instant::now();
    let mut exact_nodes = None;
    let assignments: Vec<Assignment> = match opts.algorithm {
        Algorithm::Exact => {
            let s = exact::solve_exact(&work, opts.exact_budget)?;
            exact_nodes = Some(s.nodes_explored);
            vec![s.assignment]
        }
        Algorithm::Greedy => vec![greedy(&work)],
        Algorithm::Random => {
            (0..opts.repetitions).map(|r| random_assign(&work, opts.seed.wrapping_add(r as u64))).collect()
        }
        Algorithm::PipageL1 => {
            let y = &relaxed.as_ref().unwrap().y;
            vec![rounding::pipage_round(inst, y)?]
        }
        Algorithm::RpipageL2 => {
            let y = &relaxed.as_ref().unwrap().y;
            (0..opts.repetitions)
                .into_par_iter()
                .map(|r| rounding::randomized_pipage_round_seeded(inst, y, opts.seed, r as u64))
                .collect::<Result<Vec<_>, _>>()?
        }
    };
    let assign_seconds = assign_start.elapsed().as_secs_f64();

    let mut runs = Vec::with_capacity(assignments.len());
    for (r, a) in assignments.iter().enumerate() {
        runs.push(RunRecord { repetition: r, objective: evaluate(inst, a)? });
    }
    let best = runs
        .iter()
        .enumerate()
        .fold(0, |b, (i, run)| if run.objective.total > runs[b].objective.total { i } else { b });
    let objective = runs[best].objective;
    let totals: Vec<f64> = runs.iter().map(|r| r.objective.total).collect();

    let no_speedups = opts.sparsify.is_none() && opts.compact.is_none();
    let lp_bound =
        relaxed.as_ref().filter(|r| no_speedups && r.summary.status == LpStatus::Optimal).map(|r| r.summary.value);
    let approximation_ratio = match opts.reference {
        ReferenceMode::None => None,
        ReferenceMode::Auto => match (opts.algorithm, lp_bound) {
            (Algorithm::Exact, _) if no_speedups => {
                Some(eval::approximation_ratio(objective.total, objective.total, RatioMode::Exact)?)
            }
            (_, Some(bound)) => Some(eval::approximation_ratio(objective.total, bound, RatioMode::LpBound)?),
            _ => None,
        },
        ReferenceMode::Exact => {
            let optimum = exact::solve_exact(inst, opts.exact_budget)?.value;
            Some(eval::approximation_ratio(objective.total, optimum, RatioMode::Exact)?)
        }
        ReferenceMode::LpBound => {
            let bound = match lp_bound {
                Some(b) => b,
                None => relax::solve_relaxation_with(inst, RelaxationKind::L2, &simplex)?.objective_value,
            };
            Some(eval::approximation_ratio(objective.total, bound, RatioMode::LpBound)?)
        }
    };

    let balancing = eval::check_balancing(inst, relaxed.as_ref().map(|r| &r.y));
    let assignment = assignments[best]
        .tasks()
        .iter()
        .enumerate()
        .map(|(v, &t)| (inst.node_ids()[v].clone(), inst.task_ids()[t].clone()))
        .collect();

    Ok(SolveReport {
        schema: REPORT_SCHEMA.to_string(),
        config: ReportConfig { instance_path: None, instance: InstanceSummary::of(inst), options: opts.clone() },
        results: ReportResults {
            objective,
            best_repetition: best,
            assignment,
            runs,
            objective_summary: Summary::of(&totals),
            relaxation: relaxed.map(|r| r.summary),
            approximation_ratio,
            balancing,
            speedups: speedup,
            exact_nodes_explored: exact_nodes,
        },
        timings: Timings {
            speedup_seconds,
            relax_seconds,
            assign_seconds,
            total_seconds: start.elapsed().as_secs_f64(),
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> Instance {
        let edges = vec![(0, 1, 1.0), (1, 2, 2.0), (0, 2, 0.5), (2, 3, 1.5), (3, 4, 1.0)];
        let prefs = vec![(0, 0, 1.0), (1, 1, 0.5), (2, 0, 0.25), (3, 1, 1.0), (4, 2, 0.75)];
        Instance::from_indexed(5, vec![2, 2, 2], edges, prefs, Balance::Alpha(1.0)).unwrap()
    }

    #[test]
    fn names_round_trip() {
        for a in Algorithm::ALL {
            assert_eq!(a.to_string().parse::<Algorithm>().unwrap(), a);
            assert_eq!(serde_json::to_string(&a).unwrap(), format!("\"{a}\""));
        }
    }

    #[test]
    fn every_algorithm_runs() {
        let inst = small();
        for algorithm in Algorithm::ALL {
            let r = solve(&inst, &SolveOptions { algorithm, repetitions: 3, ..SolveOptions::default() }).unwrap();
            assert_eq!(r.results.assignment.len(), 5);
            assert_eq!(r.best_assignment(&inst).map(|a| evaluate(&inst, &a).unwrap()).unwrap(), r.results.objective);
        }
        let exact = solve(&inst, &SolveOptions { algorithm: Algorithm::Exact, ..SolveOptions::default() }).unwrap();
        assert_eq!(exact.results.approximation_ratio.unwrap().value, 1.0);
    }

    #[test]
    fn option_validation() {
        let inst = small();
        let bad = [
            SolveOptions { repetitions: 0, ..SolveOptions::default() },
            SolveOptions { sparsify: Some(0.0), ..SolveOptions::default() },
            SolveOptions { algorithm: Algorithm::Greedy, compact: Some(4), ..SolveOptions::default() },
        ];
        for o in bad {
            assert!(matches!(solve(&inst, &o), Err(SolveError::Options(_))));
        }
    }

    #[test]
    fn full_sparsify_leaves_results_unchanged() {
        let inst = small();
        let base = SolveOptions { repetitions: 4, seed: 9, ..SolveOptions::default() };
        let a = solve(&inst, &base).unwrap();
        let b = solve(&inst, &SolveOptions { sparsify: Some(1.0), ..base }).unwrap();
        assert_eq!(a.results.runs, b.results.runs);
        assert_eq!(a.results.assignment, b.results.assignment);
    }
}
