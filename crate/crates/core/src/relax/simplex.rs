//! Bounded-variable revised primal simplex.
//!
//! Programs are maximized. Every row gets a slack with coefficient +1 whose bounds
//! encode the row sense; rows whose slack cannot absorb the starting residual get an
//! artificial variable that phase one drives to zero. Pricing is Dantzig's rule with
//! a switch to Bland's rule after a run of degenerate pivots.

use std::time::Instant;

use thiserror::Error;

use super::lu::{BasisFactor, LuFactors, SparseVec};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Le,
    Ge,
    Eq,
}

/// A sparse linear program `max cᵀx` subject to row constraints and variable bounds.
#[derive(Debug, Clone, Default)]
pub struct LinearProgram {
    objective: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    row_start: Vec<usize>,
    row_cols: Vec<usize>,
    row_vals: Vec<f64>,
    senses: Vec<Sense>,
    rhs: Vec<f64>,
}

impl LinearProgram {
    pub fn new() -> Self {
        LinearProgram { row_start: vec![0], ..Default::default() }
    }

    pub fn add_variable(&mut self, cost: f64, lower: f64, upper: f64) -> usize {
        assert!(lower <= upper, "empty bound interval [{lower}, {upper}]");
        self.objective.push(cost);
        self.lower.push(lower);
        self.upper.push(upper);
        self.objective.len() - 1
    }

    pub fn add_row(&mut self, coeffs: &[(usize, f64)], sense: Sense, rhs: f64) -> usize {
        for &(j, a) in coeffs {
            assert!(j < self.objective.len(), "row references unknown variable {j}");
            if a != 0.0 {
                self.row_cols.push(j);
                self.row_vals.push(a);
            }
        }
        self.row_start.push(self.row_cols.len());
        self.senses.push(sense);
        self.rhs.push(rhs);
        self.senses.len() - 1
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn num_rows(&self) -> usize {
        self.senses.len()
    }

    pub fn objective(&self) -> &[f64] {
        &self.objective
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let (a, b) = (self.row_start[i], self.row_start[i + 1]);
        (&self.row_cols[a..b], &self.row_vals[a..b])
    }

    pub fn sense(&self, i: usize) -> Sense {
        self.senses[i]
    }

    pub fn rhs(&self, i: usize) -> f64 {
        self.rhs[i]
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective.iter().zip(x).map(|(c, v)| c * v).sum()
    }

    /// Largest bound or row violation of `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut worst = 0.0f64;
        for j in 0..self.num_vars() {
            worst = worst.max(self.lower[j] - x[j]).max(x[j] - self.upper[j]);
        }
        for i in 0..self.num_rows() {
            let (cols, vals) = self.row(i);
            let act: f64 = cols.iter().zip(vals).map(|(&j, &a)| a * x[j]).sum();
            let r = self.rhs[i];
            worst = match self.senses[i] {
                Sense::Le => worst.max(act - r),
                Sense::Ge => worst.max(r - act),
                Sense::Eq => worst.max((act - r).abs()),
            };
        }
        worst
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum LpStatus {
    Optimal,
    IterationLimit,
    TimeLimit,
}

impl LpStatus {
    /// Stopped early on the iteration budget or the deadline.
    pub fn is_limit(self) -> bool {
        self != LpStatus::Optimal
    }
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
    pub status: LpStatus,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LpError {
    #[error("linear program is infeasible (residual {0:.3e})")]
    Infeasible(f64),
    #[error("linear program is unbounded")]
    Unbounded,
    #[error("iteration limit {0} reached before a feasible basis was found")]
    IterationLimit(usize),
    #[error("deadline reached after {0} iterations before a feasible basis was found")]
    TimeLimit(usize),
    #[error("numerical failure: {0}")]
    Numerical(String),
}

#[derive(Debug, Clone)]
pub struct SimplexOptions {
    /// Defaults to `50 · (variables + rows)`.
    pub max_iterations: Option<usize>,
    pub refactor_interval: usize,
    pub primal_tolerance: f64,
    /// Scaled by `max(1, max |c_j|)`.
    pub dual_tolerance: f64,
    /// Consecutive degenerate pivots before switching to Bland's rule.
    pub degenerate_limit: usize,
    /// Wall-clock cutoff, handled like the iteration budget.
    pub deadline: Option<Instant>,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        SimplexOptions {
            max_iterations: None,
            refactor_interval: 100,
            primal_tolerance: 1e-9,
            dual_tolerance: 1e-9,
            degenerate_limit: 200,
            deadline: None,
        }
    }
}

const PIVOT_TOLERANCE: f64 = 1e-9;
const MAX_REPAIRS: usize = 50;
/// Smallest number of candidates scanned per partial-pricing round.
const MIN_PRICING_CHUNK: usize = 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum State {
    Basic,
    Lower,
    Upper,
    /// Nonbasic free variable resting at zero.
    Zero,
}

enum Outcome {
    Optimal,
    IterationLimit,
    TimeLimit,
}

struct Solver<'a> {
    lp: &'a LinearProgram,
    n: usize,
    m: usize,
    col_start: Vec<usize>,
    col_rows: Vec<usize>,
    col_vals: Vec<f64>,
    art_row: Vec<usize>,
    art_sign: Vec<f64>,
    art_of_row: Vec<usize>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    cost: Vec<f64>,
    x: Vec<f64>,
    state: Vec<State>,
    basis: Vec<usize>,
    factor: BasisFactor,
    d: Vec<f64>,
    iterations: usize,
    max_iterations: usize,
    primal_tol: f64,
    dual_tol: f64,
    opts: SimplexOptions,
    price_cursor: usize,
    buf_row: SparseVec,
    buf_pos: SparseVec,
    alpha: SparseVec,
    rho: SparseVec,
    row_acc: Vec<f64>,
    row_mark: Vec<bool>,
    touched: Vec<usize>,
}

/// Solves `lp` to optimality or until the iteration budget runs out.
///
/// Hitting the budget or the deadline in phase two returns the current feasible
/// point with a limit status; hitting it in phase one is an error since no feasible
/// point is known.
pub fn solve(lp: &LinearProgram, opts: &SimplexOptions) -> Result<LpSolution, LpError> {
    let mut s = Solver::new(lp, opts.clone());
    if !s.art_row.is_empty() {
        s.refactor()?;
        match s.run()? {
            Outcome::IterationLimit => return Err(LpError::IterationLimit(s.iterations)),
            Outcome::TimeLimit => return Err(LpError::TimeLimit(s.iterations)),
            Outcome::Optimal => {}
        }
        let residual: f64 = (s.n + s.m..s.x.len()).map(|j| s.x[j].abs()).sum();
        let scale = 1.0 + (0..s.m).map(|i| lp.rhs(i).abs()).fold(0.0, f64::max);
        if residual > 1e-7 * scale {
            return Err(LpError::Infeasible(residual));
        }
        for j in s.n + s.m..s.x.len() {
            s.upper[j] = 0.0;
            if s.state[j] != State::Basic {
                s.state[j] = State::Lower;
                s.x[j] = 0.0;
            }
        }
    }
    s.cost.iter_mut().for_each(|c| *c = 0.0);
    s.cost[..s.n].copy_from_slice(lp.objective());
    s.refactor()?;
    let status = match s.run()? {
        Outcome::Optimal => LpStatus::Optimal,
        Outcome::IterationLimit => LpStatus::IterationLimit,
        Outcome::TimeLimit => LpStatus::TimeLimit,
    };
    let x: Vec<f64> = (0..s.n).map(|j| s.x[j].clamp(lp.lower()[j], lp.upper()[j])).collect();
    let objective = lp.objective_value(&x);
    Ok(LpSolution { x, objective, iterations: s.iterations, status })
}

impl<'a> Solver<'a> {
    fn new(lp: &'a LinearProgram, opts: SimplexOptions) -> Self {
        let n = lp.num_vars();
        let m = lp.num_rows();

        let mut col_start = vec![0usize; n + 1];
        for &j in &lp.row_cols {
            col_start[j + 1] += 1;
        }
        for j in 0..n {
            col_start[j + 1] += col_start[j];
        }
        let mut fill = col_start.clone();
        let mut col_rows = vec![0usize; lp.row_cols.len()];
        let mut col_vals = vec![0.0; lp.row_cols.len()];
        for i in 0..m {
            let (cols, vals) = lp.row(i);
            for (&j, &a) in cols.iter().zip(vals) {
                col_rows[fill[j]] = i;
                col_vals[fill[j]] = a;
                fill[j] += 1;
            }
        }

        let mut lower = lp.lower().to_vec();
        let mut upper = lp.upper().to_vec();
        let mut x = vec![0.0; n];
        let mut state = vec![State::Lower; n];
        for j in 0..n {
            if lower[j].is_finite() {
                x[j] = lower[j];
            } else if upper[j].is_finite() {
                x[j] = upper[j];
                state[j] = State::Upper;
            } else {
                state[j] = State::Zero;
            }
        }

        // Crash: a profitable column singleton takes its row's basis slot when it
        // can absorb the row residual on its own.
        let mut crash = vec![usize::MAX; m];
        for j in 0..n {
            if col_start[j + 1] - col_start[j] == 1 && lp.objective()[j] > 0.0 {
                let i = col_rows[col_start[j]];
                if crash[i] == usize::MAX {
                    crash[i] = j;
                }
            }
        }

        let mut basis = Vec::with_capacity(m);
        let mut art_row = Vec::new();
        let mut art_sign = Vec::new();
        let mut art_value = Vec::new();
        for i in 0..m {
            let (cols, vals) = lp.row(i);
            let act: f64 = cols.iter().zip(vals).map(|(&j, &a)| a * x[j]).sum();
            let need = lp.rhs(i) - act;
            let (lo, hi, rest) = match lp.sense(i) {
                Sense::Le => (0.0, f64::INFINITY, State::Lower),
                Sense::Ge => (f64::NEG_INFINITY, 0.0, State::Upper),
                Sense::Eq => (0.0, 0.0, State::Lower),
            };
            lower.push(lo);
            upper.push(hi);
            if crash[i] != usize::MAX {
                let j = crash[i];
                let a = col_vals[col_start[j]];
                let value = x[j] + need / a;
                if value >= lower[j] && value <= upper[j] {
                    x[j] = value;
                    state[j] = State::Basic;
                    basis.push(j);
                    x.push(0.0);
                    state.push(rest);
                    continue;
                }
            }
            if need >= lo && need <= hi {
                x.push(need);
                state.push(State::Basic);
                basis.push(n + i);
            } else {
                let at = need.clamp(lo, hi);
                x.push(at);
                state.push(if at == lo { State::Lower } else { State::Upper });
                let residual = need - at;
                art_row.push(i);
                art_sign.push(residual.signum());
                art_value.push(residual.abs());
                basis.push(usize::MAX);
            }
        }
        let mut cost = vec![0.0; n + m];
        let mut art_of_row = vec![usize::MAX; m];
        for (k, &i) in art_row.iter().enumerate() {
            let j = n + m + k;
            lower.push(0.0);
            upper.push(f64::INFINITY);
            x.push(art_value[k]);
            state.push(State::Basic);
            cost.push(-1.0);
            basis[i] = j;
            art_of_row[i] = k;
        }

        let total = x.len();
        let cmax = lp.objective().iter().fold(1.0f64, |a, c| a.max(c.abs()));
        let max_iterations = opts.max_iterations.unwrap_or(50 * (n + m)).max(1);
        Solver {
            lp,
            n,
            m,
            col_start,
            col_rows,
            col_vals,
            art_row,
            art_sign,
            art_of_row,
            lower,
            upper,
            cost,
            x,
            state,
            basis,
            factor: BasisFactor::default(),
            d: vec![0.0; total],
            iterations: 0,
            max_iterations,
            primal_tol: opts.primal_tolerance,
            dual_tol: opts.dual_tolerance * cmax,
            opts,
            price_cursor: 0,
            buf_row: SparseVec::new(m),
            buf_pos: SparseVec::new(m),
            alpha: SparseVec::new(m),
            rho: SparseVec::new(m),
            row_acc: vec![0.0; n],
            row_mark: vec![false; n],
            touched: Vec::new(),
        }
    }

    fn for_column(&self, j: usize, mut f: impl FnMut(usize, f64)) {
        if j < self.n {
            for k in self.col_start[j]..self.col_start[j + 1] {
                f(self.col_rows[k], self.col_vals[k]);
            }
        } else if j < self.n + self.m {
            f(j - self.n, 1.0);
        } else {
            let k = j - self.n - self.m;
            f(self.art_row[k], self.art_sign[k]);
        }
    }

    fn column(&self, j: usize) -> Vec<(usize, f64)> {
        let mut out = Vec::new();
        self.for_column(j, |i, a| out.push((i, a)));
        out
    }

    fn nonbasic_state(&self, j: usize) -> (State, f64) {
        let (lo, hi) = (self.lower[j], self.upper[j]);
        let v = self.x[j];
        if lo.is_finite() && (!hi.is_finite() || (v - lo).abs() <= (hi - v).abs()) {
            (State::Lower, lo)
        } else if hi.is_finite() {
            (State::Upper, hi)
        } else {
            (State::Zero, 0.0)
        }
    }

    fn refactor(&mut self) -> Result<(), LpError> {
        let mut repairs = 0;
        loop {
            let columns = self.basis.iter().map(|&j| self.column(j)).collect();
            match LuFactors::factorize(self.m, columns) {
                Ok(lu) => {
                    self.factor = BasisFactor::new(lu);
                    break;
                }
                Err(singular) => {
                    repairs += 1;
                    if repairs > MAX_REPAIRS {
                        return Err(LpError::Numerical("basis stays singular after repair".into()));
                    }
                    for (&p, &r) in singular.positions.iter().zip(&singular.rows) {
                        let out = self.basis[p];
                        let (st, v) = self.nonbasic_state(out);
                        self.state[out] = st;
                        self.x[out] = v;
                        let slack = self.n + r;
                        self.basis[p] = slack;
                        self.state[slack] = State::Basic;
                    }
                }
            }
        }
        self.recompute_primal();
        self.recompute_duals();
        Ok(())
    }

    fn recompute_primal(&mut self) {
        let mut b: Vec<f64> = (0..self.m).map(|i| self.lp.rhs(i)).collect();
        for j in 0..self.x.len() {
            if self.state[j] != State::Basic && self.x[j] != 0.0 {
                let v = self.x[j];
                self.for_column(j, |i, a| b[i] -= a * v);
            }
        }
        self.buf_row.fill_dense(&b);
        self.buf_pos.clear();
        self.factor.ftran(&mut self.buf_row, &mut self.buf_pos);
        for (p, &j) in self.basis.iter().enumerate() {
            self.x[j] = self.buf_pos.vals[p];
        }
        self.buf_row.clear();
        self.buf_pos.clear();
    }

    fn recompute_duals(&mut self) {
        let cb: Vec<f64> = self.basis.iter().map(|&j| self.cost[j]).collect();
        self.buf_pos.fill_dense(&cb);
        self.rho.clear();
        self.factor.btran(&mut self.buf_pos, &mut self.rho);
        let pi = &self.rho.vals;
        for j in 0..self.x.len() {
            if self.state[j] == State::Basic {
                self.d[j] = 0.0;
            } else {
                let mut dj = self.cost[j];
                self.for_column(j, |i, a| dj -= pi[i] * a);
                self.d[j] = dj;
            }
        }
        self.buf_pos.clear();
        self.rho.clear();
    }

    #[inline]
    fn eligible(&self, j: usize) -> bool {
        let dj = self.d[j];
        let tol = self.dual_tol;
        match self.state[j] {
            State::Basic => false,
            State::Lower => dj > tol && self.upper[j] > self.lower[j],
            State::Upper => dj < -tol && self.upper[j] > self.lower[j],
            State::Zero => dj.abs() > tol,
        }
    }

    /// Bland: lowest eligible index. Otherwise Dantzig's rule over successive
    /// chunks of the columns, starting where the previous search stopped.
    fn price(&mut self, bland: bool) -> Option<usize> {
        let total = self.x.len();
        if bland {
            return (0..total).find(|&j| self.eligible(j));
        }
        let chunk = (total / 8).max(MIN_PRICING_CHUNK).min(total);
        let mut scanned = 0;
        let mut j = self.price_cursor % total;
        while scanned < total {
            let mut best: Option<usize> = None;
            let mut best_val = 0.0;
            let end = (scanned + chunk).min(total);
            while scanned < end {
                if self.eligible(j) {
                    let v = self.d[j].abs();
                    if v > best_val || (v == best_val && best.is_none_or(|b| j < b)) {
                        best_val = v;
                        best = Some(j);
                    }
                }
                j += 1;
                if j == total {
                    j = 0;
                }
                scanned += 1;
            }
            if best.is_some() {
                self.price_cursor = j;
                return best;
            }
        }
        None
    }

    /// Ratio test for entering `q` moving in direction `dir`. Returns the step and
    /// the leaving basis position, or `None` for a bound flip of `q`.
    fn ratio_test(&self, q: usize, dir: f64, bland: bool) -> Result<(f64, Option<usize>), LpError> {
        let range = self.upper[q] - self.lower[q];
        let ptol = self.primal_tol;
        let limit = |p: usize, slack: f64| -> Option<(f64, f64)> {
            let a = dir * self.alpha.vals[p];
            if a.abs() <= PIVOT_TOLERANCE {
                return None;
            }
            let j = self.basis[p];
            let dist = if a > 0.0 { self.x[j] - self.lower[j] } else { self.upper[j] - self.x[j] };
            if !dist.is_finite() {
                return None;
            }
            Some(((dist + slack).max(0.0) / a.abs(), a.abs()))
        };

        let mut leave: Option<(usize, f64)> = None;
        if bland {
            for &p in &self.alpha.idx {
                if let Some((t, _)) = limit(p, 0.0) {
                    let better = match leave {
                        None => true,
                        Some((bp, bt)) => t < bt - 1e-12 || (t <= bt + 1e-12 && self.basis[p] < self.basis[bp]),
                    };
                    if better {
                        leave = Some((p, t));
                    }
                }
            }
        } else {
            let mut theta_max = f64::INFINITY;
            for &p in &self.alpha.idx {
                if let Some((t, _)) = limit(p, ptol) {
                    theta_max = theta_max.min(t);
                }
            }
            let mut best_abs = 0.0;
            if theta_max.is_finite() {
                for &p in &self.alpha.idx {
                    if let Some((t, a)) = limit(p, 0.0) {
                        if t <= theta_max && (a > best_abs || (a == best_abs && leave.is_some_and(|(bp, _)| p < bp))) {
                            best_abs = a;
                            leave = Some((p, t));
                        }
                    }
                }
            }
        }

        match leave {
            Some((_, t)) if range.is_finite() && range <= t => Ok((range, None)),
            Some((p, t)) => Ok((t, Some(p))),
            None if range.is_finite() => Ok((range, None)),
            None => Err(LpError::Unbounded),
        }
    }

    fn run(&mut self) -> Result<Outcome, LpError> {
        let mut bland = false;
        let mut degenerate_run = 0usize;
        loop {
            if self.iterations >= self.max_iterations {
                return Ok(Outcome::IterationLimit);
            }
            if self.opts.deadline.is_some_and(|d| Instant::now() >= d) {
                return Ok(Outcome::TimeLimit);
            }
            if self.factor.num_updates() >= self.opts.refactor_interval {
                self.refactor()?;
            }
            let q = match self.price(bland) {
                Some(q) => q,
                None if self.factor.num_updates() > 0 => {
                    // Confirm optimality against freshly computed duals.
                    self.refactor()?;
                    match self.price(bland) {
                        Some(q) => q,
                        None => return Ok(Outcome::Optimal),
                    }
                }
                None => return Ok(Outcome::Optimal),
            };
            self.iterations += 1;

            self.buf_row.clear();
            let mut b = std::mem::take(&mut self.buf_row);
            self.for_column(q, |i, a| b.set(i, a));
            self.alpha.clear();
            self.factor.ftran(&mut b, &mut self.alpha);
            b.clear();
            self.buf_row = b;

            let dir = if self.d[q] > 0.0 { 1.0 } else { -1.0 };
            let (theta, leaving) = self.ratio_test(q, dir, bland)?;

            if theta <= 1e-12 {
                degenerate_run += 1;
                if degenerate_run >= self.opts.degenerate_limit {
                    bland = true;
                }
            } else {
                degenerate_run = 0;
                bland = false;
            }

            if theta != 0.0 {
                self.x[q] += dir * theta;
                for &p in &self.alpha.idx {
                    let a = self.alpha.vals[p];
                    if a != 0.0 {
                        self.x[self.basis[p]] -= dir * theta * a;
                    }
                }
            }

            let Some(r) = leaving else {
                if dir > 0.0 {
                    self.state[q] = State::Upper;
                    self.x[q] = self.upper[q];
                } else {
                    self.state[q] = State::Lower;
                    self.x[q] = self.lower[q];
                }
                continue;
            };
            self.pivot(q, r, dir);
        }
    }

    fn pivot(&mut self, q: usize, r: usize, dir: f64) {
        let l = self.basis[r];
        let alpha_r = self.alpha.vals[r];

        self.buf_pos.clear();
        self.buf_pos.set(r, 1.0);
        self.rho.clear();
        self.factor.btran(&mut self.buf_pos, &mut self.rho);
        self.buf_pos.clear();

        let theta_d = self.d[q] / alpha_r;
        for &i in &self.rho.idx {
            let ri = self.rho.vals[i];
            if ri == 0.0 {
                continue;
            }
            let (cols, vals) = self.lp.row(i);
            for (&j, &a) in cols.iter().zip(vals) {
                if !self.row_mark[j] {
                    self.row_mark[j] = true;
                    self.touched.push(j);
                }
                self.row_acc[j] += ri * a;
            }
            let s = self.n + i;
            if self.state[s] != State::Basic {
                self.d[s] -= theta_d * ri;
            }
            let k = self.art_of_row[i];
            if k != usize::MAX {
                let j = self.n + self.m + k;
                if self.state[j] != State::Basic {
                    self.d[j] -= theta_d * self.art_sign[k] * ri;
                }
            }
        }
        for &j in &self.touched {
            if self.state[j] != State::Basic {
                self.d[j] -= theta_d * self.row_acc[j];
            }
            self.row_acc[j] = 0.0;
            self.row_mark[j] = false;
        }
        self.touched.clear();

        let to_lower = dir * alpha_r > 0.0;
        self.state[l] = if to_lower { State::Lower } else { State::Upper };
        self.x[l] = if to_lower { self.lower[l] } else { self.upper[l] };
        self.d[l] = -theta_d;
        self.d[q] = 0.0;
        self.state[q] = State::Basic;
        self.basis[r] = q;
        self.factor.update(r, &self.alpha);
    }
}
