//! Concave relaxations of the team-formation objective and their exact LP
//! linearizations, solved by the bundled simplex engine.

mod lp_format;
mod lu;
mod program;
pub mod simplex;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use lp_format::write_lp;
pub use program::{RelaxationInput, RelaxationProgram};
pub use simplex::{LinearProgram, LpError, LpSolution, LpStatus, Sense, SimplexOptions};

use crate::model::{FractionalSolution, Instance, ModelError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RelaxationKind {
    L1,
    L2,
}

impl fmt::Display for RelaxationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RelaxationKind::L1 => "l1",
            RelaxationKind::L2 => "l2",
        })
    }
}

impl FromStr for RelaxationKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "l1" => Ok(RelaxationKind::L1),
            "l2" => Ok(RelaxationKind::L2),
            other => Err(format!("unknown relaxation `{other}` (expected l1 or l2)")),
        }
    }
}

#[derive(Debug, Error)]
pub enum RelaxError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Lp(#[from] LpError),
}

/// Outcome of solving a relaxation. `objective_value` is the relaxation evaluated
/// at `solution`, constant offset included.
#[derive(Debug, Clone)]
pub struct LpResult {
    pub solution: FractionalSolution,
    pub objective_value: f64,
    pub iterations: usize,
    pub status: LpStatus,
}

/// `λ Σ c y + Σ_e w · min(1, min_t (2 − y_ut − y_vt))`.
pub fn eval_l1(inst: &Instance, y: &FractionalSolution) -> Result<f64, ModelError> {
    y.check(inst)?;
    Ok(eval_unchecked(inst, RelaxationKind::L1, y))
}

/// `λ Σ c y − w(E) + Σ_e Σ_t w · min(1, y_ut + y_vt)`.
pub fn eval_l2(inst: &Instance, y: &FractionalSolution) -> Result<f64, ModelError> {
    y.check(inst)?;
    Ok(eval_unchecked(inst, RelaxationKind::L2, y))
}

pub fn eval_relaxation(inst: &Instance, kind: RelaxationKind, y: &FractionalSolution) -> Result<f64, ModelError> {
    y.check(inst)?;
    Ok(eval_unchecked(inst, kind, y))
}

/// Relaxation value without feasibility checks.
pub fn eval_unchecked(inst: &Instance, kind: RelaxationKind, y: &FractionalSolution) -> f64 {
    let k = inst.num_tasks();
    let mut linear = 0.0;
    for (v, t, c) in inst.preference_triples() {
        linear += c * y.get(v, t);
    }
    let mut pairs = 0.0;
    for e in inst.edges() {
        let (ru, rv) = (y.row(e.u), y.row(e.v));
        pairs += match kind {
            RelaxationKind::L1 => e.weight * (0..k).map(|t| 2.0 - ru[t] - rv[t]).fold(1.0f64, f64::min),
            RelaxationKind::L2 => e.weight * ((0..k).map(|t| (ru[t] + rv[t]).min(1.0)).sum::<f64>() - 1.0),
        };
    }
    inst.lambda() * linear + pairs
}

pub fn build_program(inst: &Instance, kind: RelaxationKind) -> RelaxationProgram {
    RelaxationProgram::from_instance(inst, kind)
}

pub fn solve_relaxation(inst: &Instance, kind: RelaxationKind) -> Result<LpResult, RelaxError> {
    solve_relaxation_with(inst, kind, &SimplexOptions::default())
}

pub fn solve_relaxation_with(
    inst: &Instance,
    kind: RelaxationKind,
    opts: &SimplexOptions,
) -> Result<LpResult, RelaxError> {
    let input = RelaxationInput::from_instance(inst);
    let result = solve_input(&input, kind, opts)?;
    result.solution.check(inst)?;
    Ok(result)
}

/// Solves the size-weighted program over supernodes. The solution is indexed by
/// supernode; unrolling to individuals is the caller's job.
pub fn solve_compact_relaxation(
    input: &RelaxationInput,
    kind: RelaxationKind,
    opts: &SimplexOptions,
) -> Result<LpResult, RelaxError> {
    solve_input(input, kind, opts)
}

/// Conflict rows are generated lazily: a restricted program without them
/// overestimates the relaxation, and once `y` violates none of the omitted rows its
/// optimum is optimal for the full program.
fn solve_input(input: &RelaxationInput, kind: RelaxationKind, opts: &SimplexOptions) -> Result<LpResult, RelaxError> {
    let (n, k) = (input.num_units, input.num_tasks);
    let full_size = {
        let p = RelaxationProgram::build_size(input, kind);
        p.0 + p.1
    };
    let mut budget = opts.max_iterations.unwrap_or(50 * full_size);
    let mut active: Vec<(usize, usize)> = Vec::new();
    let mut is_active = vec![false; input.edges.len() * k];
    let mut iterations = 0;
    loop {
        let lp_program = program::excess_form(input, kind, &active);
        let round_opts = SimplexOptions { max_iterations: Some(budget.max(1)), ..opts.clone() };
        let lp = simplex::solve(&lp_program, &round_opts)?;
        iterations += lp.iterations;
        budget = budget.saturating_sub(lp.iterations);
        let values: Vec<f64> = lp.x[..n * k].iter().map(|y| y.clamp(0.0, 1.0)).collect();
        let before = active.len();
        if lp.status == LpStatus::Optimal {
            for (e, &(u, v, _)) in input.edges.iter().enumerate() {
                for t in 0..k {
                    if !is_active[e * k + t] && values[u * k + t] + values[v * k + t] - 1.0 > VIOLATION_TOLERANCE {
                        is_active[e * k + t] = true;
                        active.push((e, t));
                    }
                }
            }
        }
        if active.len() == before {
            let objective_value = input.evaluate(kind, &values);
            return Ok(LpResult {
                solution: FractionalSolution::new(n, k, values),
                objective_value,
                iterations,
                status: lp.status,
            });
        }
    }
}

/// Omitted conflict rows violated by at most this much are left out.
const VIOLATION_TOLERANCE: f64 = 1e-9;

/// Auxiliary values implied by `y`: `min(1, min_t(2 − y_ut − y_vt))` per edge for
/// L1, `min(1, y_ut + y_vt)` per edge and task for L2.
pub fn auxiliary_values(program: &RelaxationProgram, input: &RelaxationInput, y: &[f64]) -> Vec<f64> {
    let k = input.num_tasks;
    let mut out = Vec::with_capacity(program.num_variables() - input.num_units * k);
    for &(u, v, _) in &input.edges {
        match program.kind() {
            RelaxationKind::L1 => out.push((0..k).map(|t| 2.0 - y[u * k + t] - y[v * k + t]).fold(1.0f64, f64::min)),
            RelaxationKind::L2 => out.extend((0..k).map(|t| (y[u * k + t] + y[v * k + t]).min(1.0))),
        }
    }
    debug_assert_eq!(out.len(), program.num_edges() * if program.kind() == RelaxationKind::L1 { 1 } else { k });
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{evaluate, Balance};

    fn two_by_two(lambda: f64) -> Instance {
        Instance::from_indexed(2, vec![2, 2], vec![(0, 1, 1.0)], vec![], Balance::Lambda(lambda)).unwrap()
    }

    #[test]
    fn symmetric_point_values() {
        let inst = two_by_two(0.0);
        let y = FractionalSolution::new(2, 2, vec![0.5; 4]);
        assert_eq!(eval_l1(&inst, &y).unwrap(), 1.0);
        let f = evaluate(&inst, &y).unwrap().total;
        assert_eq!(f, 0.5);
        assert_eq!(f, 0.5 * eval_l1(&inst, &y).unwrap());
    }

    #[test]
    fn same_task_l2_equals_f() {
        let inst = Instance::from_indexed(
            2,
            vec![2],
            vec![(0, 1, 1.0)],
            vec![(0, 0, 0.5), (1, 0, 0.25)],
            Balance::Lambda(2.0),
        )
        .unwrap();
        let y = FractionalSolution::new(2, 1, vec![1.0, 1.0]);
        let s = 2.0 * 0.75;
        assert_eq!(eval_l2(&inst, &y).unwrap(), s);
        assert_eq!(evaluate(&inst, &y).unwrap().total, s);
    }

    #[test]
    fn l2_scalar_identity_on_binary_points() {
        for x in [0.0f64, 1.0] {
            for y in [0.0f64, 1.0] {
                assert_eq!(1.0 - (1.0 - x) * (1.0 - y), (x + y).min(1.0));
            }
        }
    }

    #[test]
    fn eval_rejects_infeasible_points() {
        let inst = two_by_two(0.0);
        let y = FractionalSolution::new(2, 2, vec![0.5, 0.2, 0.5, 0.5]);
        assert!(eval_l1(&inst, &y).is_err());
        assert!(eval_l2(&inst, &FractionalSolution::zeros(3, 2)).is_err());
    }

    #[test]
    fn four_cycle_max_cut() {
        let edges = vec![(0, 1, 1.0), (1, 2, 1.0), (2, 3, 1.0), (3, 0, 1.0)];
        let inst = Instance::from_indexed(4, vec![4, 4], edges, vec![], Balance::Lambda(0.0)).unwrap();
        for kind in [RelaxationKind::L1, RelaxationKind::L2] {
            let r = solve_relaxation(&inst, kind).unwrap();
            assert_eq!(r.status, LpStatus::Optimal);
            assert!(r.objective_value >= 4.0 - 1e-9, "{kind}: {}", r.objective_value);
        }
    }

    #[test]
    fn empty_instance_has_zero_optimum() {
        let inst = Instance::from_indexed(3, vec![3, 1], vec![], vec![], Balance::Lambda(0.0)).unwrap();
        let r = solve_relaxation(&inst, RelaxationKind::L1).unwrap();
        assert_eq!(r.objective_value, 0.0);
        r.solution.check(&inst).unwrap();
    }

    #[test]
    fn lp_objective_matches_relaxation_value() {
        let edges = vec![(0, 1, 1.0), (1, 2, 2.0), (0, 2, 0.5), (2, 3, 1.5)];
        let prefs = vec![(0, 0, 1.0), (1, 1, 0.5), (2, 0, 0.25), (3, 1, 1.0), (3, 0, 0.5)];
        let inst = Instance::from_indexed(4, vec![2, 3], edges, prefs, Balance::Lambda(0.7)).unwrap();
        for kind in [RelaxationKind::L1, RelaxationKind::L2] {
            let program = build_program(&inst, kind);
            let lp = simplex::solve(program.linear_program(), &SimplexOptions::default()).unwrap();
            let r = solve_relaxation(&inst, kind).unwrap();
            let lp_value = lp.objective + program.constant_offset();
            assert!((lp_value - r.objective_value).abs() < 1e-7, "{kind}: {lp_value} vs {}", r.objective_value);
        }
    }
}
