//! Acceptance criteria 1-12. Each test prints one `[PASS]` or `[FAIL]` line with
//! its measurements and runtime, and fails when the criterion is not met. The
//! criteria run one at a time so wall-clock limits are not skewed by each other.

mod common;

use std::io::Write;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use rand::Rng;

use common::*;
use tfc::baselines::greedy;
use tfc::eval::{self, approximation_ratio, RatioMode};
use tfc::exact::{enumerate_optimum, solve_exact, DEFAULT_NODE_BUDGET};
use tfc::io::{self, CompanyConfig, EducationConfig, PreferenceFunction, SynthTfConfig};
use tfc::model::{evaluate, evaluate_unchecked, Assignment, Balance, FractionalSolution, Instance};
use tfc::relax::{eval_l1, eval_l2, eval_unchecked, solve_relaxation, RelaxationKind};
use tfc::rounding::{pipage_round, randomized_pipage_round_seeded};
use tfc::solve::{solve, Algorithm, SolveOptions};
use tfc::speedups::{compact_solve, symmetrize_twins, Supernode, DEFAULT_TARGET_SIZE};

static SERIAL: Mutex<()> = Mutex::new(());

type Check = Result<String, String>;

fn criterion(id: u32, name: &str, limit: Duration, check: impl FnOnce() -> Check) {
    let _serial = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let start = Instant::now();
    let outcome = catch_unwind(AssertUnwindSafe(check));
    let elapsed = start.elapsed();
    let (pass, detail) = match outcome {
        Ok(Ok(d)) if elapsed <= limit => (true, d),
        Ok(Ok(d)) => (false, format!("{d}; exceeded the time limit")),
        Ok(Err(d)) => (false, d),
        Err(p) => {
            let msg = p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()));
            (false, format!("panicked: {}", msg.unwrap_or_default()))
        }
    };
    let line = format!(
        "\n[{}] C{id:02} {name}: {detail} [{:.2}s, limit {}s]\n",
        if pass { "PASS" } else { "FAIL" },
        elapsed.as_secs_f64(),
        limit.as_secs()
    );
    // Written past the test harness capture so the line always shows.
    let _ = std::io::stderr().write_all(line.as_bytes());
    assert!(pass, "criterion C{id:02} failed");
}

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

fn scale(x: f64) -> f64 {
    x.abs().max(1.0)
}

#[test]
fn c01_integral_agreement() {
    criterion(1, "L1 = L2 = F on integral points", Duration::from_secs(10), || {
        let mut rng = rng(1);
        let mut worst: f64 = 0.0;
        let mut checked = 0;
        for _ in 0..50 {
            let inst = random_instance(&mut rng, 20, 5);
            for _ in 0..10 {
                let a = random_assignment(&mut rng, &inst);
                let y = integral(&a, inst.num_tasks());
                let f = evaluate(&inst, &a).map_err(err)?.total;
                let l1 = eval_l1(&inst, &y).map_err(err)?;
                let l2 = eval_l2(&inst, &y).map_err(err)?;
                let oracle = oracle_f(&inst, &y);
                for other in [l1, l2, oracle] {
                    worst = worst.max((other - f).abs() / scale(f));
                }
                checked += 1;
            }
        }
        let detail = format!("{checked} assignments over 50 instances, max relative gap {worst:.2e} (tol 1e-9)");
        if worst <= 1e-9 {
            Ok(detail)
        } else {
            Err(detail)
        }
    });
}

#[test]
fn c02_half_guarantee() {
    criterion(2, "pipage on L1 reaches half of F* and of L1(y*)", Duration::from_secs(30), || {
        let mut rng = rng(2);
        let (mut min_opt, mut min_lp) = (f64::INFINITY, f64::INFINITY);
        for i in 0..30 {
            let inst = random_instance(&mut rng, 7, 4);
            let lp = solve_relaxation(&inst, RelaxationKind::L1).map_err(err)?;
            let l1 = oracle_l1(&inst, &lp.solution);
            if !close(l1, lp.objective_value, 1e-7) {
                return Err(format!("instance {i}: LP value {} but L1(y*) = {l1}", lp.objective_value));
            }
            let x = pipage_round(&inst, &lp.solution).map_err(err)?;
            let fx = oracle_f(&inst, &integral(&x, inst.num_tasks()));
            let (fstar, _) = oracle_optimum(&inst);
            if fx < 0.5 * fstar || fx < 0.5 * l1 {
                return Err(format!("instance {i}: F(x) = {fx}, F* = {fstar}, L1(y*) = {l1}"));
            }
            if fstar > 0.0 {
                min_opt = min_opt.min(fx / fstar);
            }
            if l1 > 0.0 {
                min_lp = min_lp.min(fx / l1);
            }
        }
        Ok(format!("30 instances, min F(x)/F* = {min_opt:.4}, min F(x)/L1(y*) = {min_lp:.4} (need >= 0.5)"))
    });
}

/// Individuals with a preference for every task, so `λ Σ c y ≥ w(E)` at α = 5.
fn balanced_instance(seed: u64) -> Instance {
    let mut rng = rng(seed);
    let n = rng.gen_range(6..=10);
    let k = 3;
    let mut edges = Vec::new();
    for u in 0..n {
        for v in (u + 1)..n {
            if rng.gen_bool(0.5) {
                edges.push((u, v, 1.0));
            }
        }
    }
    let prefs =
        (0..n).flat_map(|v| (0..k).map(move |t| (v, t))).map(|(v, t)| (v, t, rng.gen_range(0.3..=1.0))).collect();
    Instance::from_indexed(n, vec![n.div_ceil(k) + 1; k], edges, prefs, Balance::Alpha(5.0)).unwrap()
}

#[test]
fn c03_three_quarter_guarantee() {
    criterion(3, "mean F of randomized pipage on L2 >= 3/4 L2(y*) - 3 SE", Duration::from_secs(120), || {
        let mut worst = f64::INFINITY;
        let mut used = 0;
        let mut seed = 300;
        while used < 10 {
            seed += 1;
            let inst = balanced_instance(seed);
            let lp = solve_relaxation(&inst, RelaxationKind::L2).map_err(err)?;
            let y = &lp.solution;
            let linear: f64 = (0..inst.num_nodes())
                .flat_map(|v| (0..inst.num_tasks()).map(move |t| (v, t)))
                .map(|(v, t)| inst.preference(v, t) * y.get(v, t))
                .sum();
            let w: f64 = inst.edges().iter().map(|e| e.weight).sum();
            if inst.lambda() * linear < w {
                continue;
            }
            used += 1;
            let l2 = oracle_l2(&inst, y);
            let mut values = Vec::with_capacity(200);
            for r in 0..200 {
                let x = randomized_pipage_round_seeded(&inst, y, seed, r).map_err(err)?;
                values.push(oracle_f(&inst, &integral(&x, inst.num_tasks())));
            }
            let (mean, se) = mean_and_se(&values);
            if mean < 0.75 * l2 - 3.0 * se {
                return Err(format!("seed {seed}: mean {mean:.4}, SE {se:.4}, L2(y*) {l2:.4}"));
            }
            worst = worst.min(mean / (0.75 * l2));
        }
        Ok(format!("10 balanced instances x 200 seeds, min mean / (3/4 L2(y*)) = {worst:.4}"))
    });
}

#[test]
fn c04_rounding_feasibility() {
    criterion(4, "rounded assignments are feasible", Duration::from_secs(60), || {
        let mut rng = rng(4);
        let (mut ok, mut runs) = (0, 0);
        let mut first_failure = None;
        for i in 0..5000u64 {
            let inst = random_instance(&mut rng, 15, 5);
            let y = random_fractional(&mut rng, &inst, 4);
            let outcomes = [pipage_round(&inst, &y), randomized_pipage_round_seeded(&inst, &y, i, 0)];
            for (scheme, out) in ["pipage", "randomized"].into_iter().zip(outcomes) {
                runs += 1;
                match out {
                    Ok(a) if feasible(&inst, &a) => ok += 1,
                    Ok(a) => {
                        first_failure.get_or_insert(format!("{scheme} run {i}: infeasible {:?}", a.tasks()));
                    }
                    Err(e) => {
                        first_failure.get_or_insert(format!("{scheme} run {i}: {e}"));
                    }
                }
            }
        }
        let detail = format!("{ok}/{runs} feasible");
        match first_failure {
            None => Ok(detail),
            Some(f) => Err(format!("{detail}; first failure {f}")),
        }
    });
}

#[test]
fn c05_marginals_and_negative_correlation() {
    criterion(5, "randomized pipage marginals and negative correlation", Duration::from_secs(120), || {
        let rows = [[0.5, 0.3, 0.2], [0.4, 0.4, 0.2], [0.3, 0.3, 0.4], [0.6, 0.2, 0.2], [0.2, 0.5, 0.3]];
        let (n, k) = (rows.len(), 3);
        let inst = Instance::from_indexed(
            n,
            vec![2; k],
            vec![(0, 1, 1.0), (1, 2, 1.0), (2, 3, 0.5), (3, 4, 2.0), (0, 4, 1.0)],
            vec![(0, 0, 1.0), (2, 2, 0.5), (4, 1, 0.25)],
            Balance::Lambda(1.0),
        )
        .unwrap();
        let y = FractionalSolution::new(n, k, rows.iter().flatten().copied().collect());
        const RUNS: u64 = 20_000;
        let draws: Vec<Assignment> = (0..RUNS)
            .map(|r| randomized_pipage_round_seeded(&inst, &y, 5, r))
            .collect::<Result<_, _>>()
            .map_err(err)?;
        let runs = RUNS as f64;

        let mut worst_marginal: f64 = 0.0;
        for v in 0..n {
            for t in 0..k {
                let p = y.get(v, t);
                let hits = draws.iter().filter(|a| a.task_of(v) == t).count() as f64 / runs;
                let se = (p * (1.0 - p) / runs).sqrt();
                worst_marginal = worst_marginal.max((hits - p).abs() / se);
            }
        }

        let mut worst_corr = f64::NEG_INFINITY;
        let mut subsets = Vec::new();
        for a in 0..n {
            for b in (a + 1)..n {
                subsets.push(vec![a, b]);
                for c in (b + 1)..n {
                    subsets.push(vec![a, b, c]);
                }
            }
        }
        for t in 0..k {
            for s in &subsets {
                let all_in: f64 = s.iter().map(|&v| y.get(v, t)).product();
                let all_out: f64 = s.iter().map(|&v| 1.0 - y.get(v, t)).product();
                let hit_in = draws.iter().filter(|a| s.iter().all(|&v| a.task_of(v) == t)).count() as f64 / runs;
                let hit_out = draws.iter().filter(|a| s.iter().all(|&v| a.task_of(v) != t)).count() as f64 / runs;
                for (observed, bound) in [(hit_in, all_in), (hit_out, all_out)] {
                    let se = (bound * (1.0 - bound) / runs).sqrt().max(1.0 / runs);
                    worst_corr = worst_corr.max((observed - bound) / se);
                }
            }
        }
        let detail = format!(
            "{RUNS} runs; worst marginal deviation {worst_marginal:.2} SE, worst excess over product bound {worst_corr:.2} SE ({} subset checks)",
            2 * k * subsets.len()
        );
        if worst_marginal <= 3.0 && worst_corr <= 3.0 {
            Ok(detail)
        } else {
            Err(detail)
        }
    });
}

#[test]
fn c06_f_dominates_half_l1() {
    criterion(6, "F(y) >= L1(y)/2 on feasible fractional points", Duration::from_secs(30), || {
        let mut rng = rng(6);
        let mut inst = random_instance(&mut rng, 12, 4);
        let (mut min_slack, mut violations, mut oracle_gap) = (f64::INFINITY, 0, 0.0f64);
        for i in 0..10_000 {
            if i % 10 == 0 {
                inst = random_instance(&mut rng, 12, 4);
            }
            let y = random_fractional(&mut rng, &inst, 5);
            let f = evaluate_unchecked(&inst, &y).total;
            let l1 = eval_unchecked(&inst, RelaxationKind::L1, &y);
            oracle_gap = oracle_gap.max((f - oracle_f(&inst, &y)).abs() / scale(f));
            oracle_gap = oracle_gap.max((l1 - oracle_l1(&inst, &y)).abs() / scale(l1));
            let slack = (f - 0.5 * l1) / scale(f);
            if slack < -1e-9 {
                violations += 1;
            }
            min_slack = min_slack.min(slack);
        }
        let detail = format!(
            "10000 points, {violations} violations, min (F - L1/2)/max(1,|F|) = {min_slack:.3e}, oracle agreement {oracle_gap:.1e}"
        );
        if violations == 0 && oracle_gap <= 1e-9 {
            Ok(detail)
        } else {
            Err(detail)
        }
    });
}

#[test]
fn c07_greedy_counterexample() {
    criterion(7, "greedy approximation ratio on the trap instance", Duration::from_secs(1), || {
        let (w, eps) = (100.0, 0.1);
        let inst = Instance::from_indexed(
            3,
            vec![1, 2],
            vec![(1, 2, w)],
            vec![(0, 0, 1.0 - eps), (1, 1, eps)],
            Balance::Lambda(1.0),
        )
        .map_err(err)?;
        let x = greedy(&inst);
        let fg = evaluate(&inst, &x).map_err(err)?.total;
        let (fstar, _) = oracle_optimum(&inst);
        let ar = approximation_ratio(fg, fstar, RatioMode::Exact).map_err(err)?.value;
        let expected = 1.0 / 100.1;
        let detail = format!(
            "greedy {:?} F = {fg}, F* = {fstar}, AR = {ar:.12} (expected {expected:.12}, bound 1/W = 0.01)",
            x.tasks()
        );
        if (ar - expected).abs() <= 1e-12 && ar <= 1.0 / w {
            Ok(detail)
        } else {
            Err(detail)
        }
    });
}

#[test]
fn c08_branch_and_bound_matches_enumeration() {
    criterion(8, "branch and bound equals exhaustive enumeration", Duration::from_secs(60), || {
        let mut rng = rng(8);
        let (mut nodes, mut leaves) = (0u64, 0u64);
        for i in 0..100 {
            let k = rng.gen_range(2..=5usize);
            let max_n = (1..).take_while(|&n| (k as u64).pow(n) <= 100_000).last().unwrap() as usize;
            let n = rng.gen_range(2..=max_n);
            let inst = random_instance_sized(&mut rng, n, k);
            let bb = solve_exact(&inst, DEFAULT_NODE_BUDGET).map_err(err)?;
            let (fstar, _) = oracle_optimum(&inst);
            let full = enumerate_optimum(&inst).map_err(err)?;
            let bb_value = oracle_f(&inst, &integral(&bb.assignment, k));
            if !close(bb.value, fstar, 1e-9) || !close(bb_value, fstar, 1e-9) || bb.assignment != full.assignment {
                return Err(format!(
                    "instance {i} ({n} x {k}): B&B {} {:?}, enumeration {fstar} {:?}",
                    bb.value,
                    bb.assignment.tasks(),
                    full.assignment.tasks()
                ));
            }
            nodes += bb.nodes_explored;
            leaves += full.nodes_explored;
        }
        Ok(format!(
            "100 instances agree (value and tie-broken assignment); {nodes} search nodes vs {leaves} enumerated"
        ))
    });
}

/// Instance whose individuals come in classes of one or two exact twins.
fn twin_instance(seed: u64) -> (Instance, Vec<Vec<usize>>) {
    let mut rng = rng(seed);
    let classes = rng.gen_range(4..=6);
    let k: usize = rng.gen_range(2..=3);
    let mut members = Vec::new();
    let mut n: usize = 0;
    for c in 0..classes {
        let size = if c < 2 || rng.gen_bool(0.4) { 2 } else { 1 };
        members.push((n..n + size).collect::<Vec<_>>());
        n += size;
    }
    let mut edges = Vec::new();
    for a in 0..classes {
        for b in (a + 1)..classes {
            if rng.gen_bool(0.6) {
                let w = rng.gen_range(0.2..2.0);
                for &u in &members[a] {
                    for &v in &members[b] {
                        edges.push((u, v, w));
                    }
                }
            }
        }
    }
    let mut prefs = Vec::new();
    for m in &members {
        for t in 0..k {
            if rng.gen_bool(0.7) {
                let c = rng.gen_range(0.0..=1.0);
                prefs.extend(m.iter().map(|&v| (v, t, c)));
            }
        }
    }
    let mut caps = vec![n.div_ceil(k); k];
    caps[0] += rng.gen_range(0..=1);
    let balance = Balance::Alpha(rng.gen_range(0.5..4.0));
    (Instance::from_indexed(n, caps, edges, prefs, balance).unwrap(), members)
}

#[test]
fn c09_compact_twins() {
    criterion(9, "symmetrized and compact optima keep the LP value", Duration::from_secs(30), || {
        let mut worst: f64 = 0.0;
        let mut pairs = 0;
        for seed in 0..20 {
            let (inst, classes) = twin_instance(900 + seed);
            let twins: Vec<(usize, usize)> = classes.iter().filter(|m| m.len() == 2).map(|m| (m[0], m[1])).collect();
            let partition: Vec<Supernode> =
                classes.iter().enumerate().map(|(id, m)| Supernode { id, members: m.clone() }).collect();
            for kind in [RelaxationKind::L1, RelaxationKind::L2] {
                let oracle = |y: &FractionalSolution| match kind {
                    RelaxationKind::L1 => oracle_l1(&inst, y),
                    RelaxationKind::L2 => oracle_l2(&inst, y),
                };
                let raw = solve_relaxation(&inst, kind).map_err(err)?;
                let value = oracle(&raw.solution);
                let mut sym = raw.solution.clone();
                for &(u, v) in &twins {
                    sym = symmetrize_twins(&sym, u, v);
                }
                sym.check(&inst).map_err(err)?;
                let compact = compact_solve(&inst, &partition, kind).map_err(err)?;
                for (label, y) in [("symmetrized", &sym), ("compact", &compact.solution)] {
                    for &(u, v) in &twins {
                        if y.row(u) != y.row(v) {
                            return Err(format!("seed {seed} {kind} {label}: rows {u} and {v} differ"));
                        }
                    }
                    let gap = (oracle(y) - value).abs() / scale(value);
                    worst = worst.max(gap);
                    if gap > 1e-7 {
                        return Err(format!("seed {seed} {kind} {label}: {} vs raw {value}", oracle(y)));
                    }
                }
                let gap = (compact.compact_objective - value).abs() / scale(value);
                worst = worst.max(gap);
                if gap > 1e-7 {
                    return Err(format!("seed {seed} {kind}: compact LP {} vs raw {value}", compact.compact_objective));
                }
                pairs += twins.len();
            }
        }
        Ok(format!("20 instances, {pairs} twin pairs over L1 and L2, equal rows, max relative value gap {worst:.2e} (tol 1e-7)"))
    });
}

#[test]
fn c10_speedup_benefit() {
    criterion(10, "sparsify or compact is 5x faster within 2% on Synth-TF |V|=200", Duration::from_secs(300), || {
        let config = SynthTfConfig { blocks: 10, block_size: 20, ..SynthTfConfig::default() };
        let inst = io::generate_synth_tf(&config, 10).map_err(err)?.instance;
        let timed = |opts: SolveOptions| -> Result<(f64, f64), String> {
            let start = Instant::now();
            let report = solve(&inst, &opts).map_err(err)?;
            Ok((start.elapsed().as_secs_f64(), report.results.objective.total))
        };
        let base = SolveOptions { algorithm: Algorithm::RpipageL2, seed: 10, ..SolveOptions::default() };
        let (t_plain, f_plain) = timed(base.clone())?;
        let (t_sparse, f_sparse) = timed(SolveOptions { sparsify: Some(0.05), ..base.clone() })?;
        let (t_compact, f_compact) = timed(SolveOptions { compact: Some(DEFAULT_TARGET_SIZE), ..base })?;
        let judge = |t: f64, f: f64| (t_plain / t, (f - f_plain).abs() / f_plain);
        let (sp_s, gap_s) = judge(t_sparse, f_sparse);
        let (sp_c, gap_c) = judge(t_compact, f_compact);
        let detail = format!(
            "plain {t_plain:.2}s F={f_plain:.2}; sparsify {t_sparse:.2}s ({sp_s:.1}x) gap {:.2}%; compact {t_compact:.2}s ({sp_c:.1}x) gap {:.2}%",
            100.0 * gap_s,
            100.0 * gap_c
        );
        if (sp_s >= 5.0 && gap_s <= 0.02) || (sp_c >= 5.0 && gap_c <= 0.02) {
            Ok(detail)
        } else {
            Err(detail)
        }
    });
}

#[test]
fn c11_alpha_sweep_shape() {
    criterion(11, "exact alpha sweep is monotone and alpha=10 gives top choices", Duration::from_secs(60), || {
        let grid = [0.0, 0.5, 1.0, 2.0, 10.0];
        let (mut permitted, mut all_top) = (0, 0);
        for seed in 0..10u64 {
            let config = EducationConfig {
                students: 7 + (seed as usize % 4),
                projects: 3,
                group_size: 3,
                function: if seed % 2 == 0 { PreferenceFunction::Inverse } else { PreferenceFunction::LinNorm },
                ..EducationConfig::default()
            };
            let (inst, data) = io::generate_education(&config, seed).map_err(err)?;
            let opts = SolveOptions { algorithm: Algorithm::Exact, ..SolveOptions::default() };
            let points = eval::alpha_sweep(&inst, &grid, &[Algorithm::Exact], &opts);
            let terms: Vec<(f64, f64)> = points
                .iter()
                .map(|p| p.results[0].outcome.clone().map(|b| (b.task_satisfaction, b.social_satisfaction)))
                .collect::<Result<_, _>>()?;
            for w in terms.windows(2) {
                let ((r0, g0), (r1, g1)) = (w[0], w[1]);
                if r1 < r0 - 1e-9 * scale(r0) || g1 > g0 + 1e-9 * scale(g0) {
                    return Err(format!("seed {seed}: (F_R, F_G) went from ({r0}, {g0}) to ({r1}, {g1})"));
                }
            }

            let mut demand = vec![0usize; inst.num_tasks()];
            for (s, ranking) in data.rankings.iter().enumerate() {
                let _ = inst.node_index(&data.students[s]).ok_or("student missing")?;
                demand[inst.task_index(&data.projects[ranking[0]]).ok_or("project missing")?] += 1;
            }
            if demand.iter().zip(inst.capacities()).all(|(d, c)| d <= c) {
                permitted += 1;
                let at10 = inst.with_balance(Balance::Alpha(10.0)).map_err(err)?;
                let x = solve_exact(&at10, DEFAULT_NODE_BUDGET).map_err(err)?.assignment;
                let misses: Vec<usize> =
                    (0..inst.num_nodes()).filter(|&v| inst.preference(v, x.task_of(v)) != 1.0).collect();
                if !misses.is_empty() {
                    return Err(format!("seed {seed}: at alpha = 10 individuals {misses:?} miss their top choice"));
                }
                all_top += 1;
            }
        }
        Ok(format!(
            "10 instances monotone over alpha {grid:?}; top choice for everyone in {all_top}/{permitted} instances where capacities permit"
        ))
    });
}

#[test]
fn c12_company_gender_gap() {
    criterion(12, "Company |V|=400 at alpha=2 lowers AVG-GAP with <= 15% moved", Duration::from_secs(120), || {
        let data = io::generate_company(&CompanyConfig::with_employees(400), 12).map_err(err)?;
        let inst = &data.instance;
        let opts = SolveOptions { lp_time_limit: Some(120.0), ..SolveOptions::default() };
        let report = solve(inst, &opts).map_err(err)?;
        let x = report.best_assignment(inst).map_err(err)?;
        let original = data.original_assignment();
        let before = eval::average_gender_gap(&data.gender, &original, inst.num_tasks());
        let after = eval::average_gender_gap(&data.gender, &x, inst.num_tasks());
        let moved = eval::changed_fraction(&original, &x);
        let detail = format!("AVG-GAP {before:.2} -> {after:.2} points, {:.2}% moved", 100.0 * moved);
        if report.lp_hit_limit() {
            let r = report.results.relaxation.as_ref().unwrap();
            return Err(format!(
                "L2 relaxation unfinished after {} iterations at the deadline; its last point rounds to {detail}",
                r.iterations
            ));
        }
        if after < before && moved <= 0.15 {
            Ok(detail)
        } else {
            Err(detail)
        }
    });
}
