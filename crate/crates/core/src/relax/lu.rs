//! Sparse LU factorization of simplex bases with product-form updates.
//!
//! Pivots are chosen singleton-first and then by a Markowitz count with threshold
//! partial pivoting. The bases produced by the team-formation programs are close to
//! triangular, so the dense "bump" stays small.

/// Markowitz threshold: a pivot must be at least this fraction of its column maximum.
const PIVOT_THRESHOLD: f64 = 0.1;
/// Entries below this magnitude are dropped after elimination.
const DROP_TOLERANCE: f64 = 1e-13;
/// Smallest acceptable pivot magnitude.
const ABS_PIVOT_TOLERANCE: f64 = 1e-10;
/// Columns examined per Markowitz search once no singleton is left.
const MARKOWITZ_SEARCH: usize = 8;

/// The basis could not be fully factorized: the listed basis positions and rows
/// were left without a pivot.
#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct Singular {
    pub positions: Vec<usize>,
    pub rows: Vec<usize>,
}

#[derive(Debug, Clone, Default)]
pub(crate) struct LuFactors {
    pivot_row: Vec<usize>,
    pivot_pos: Vec<usize>,
    pivot_val: Vec<f64>,
    l_start: Vec<usize>,
    l_rows: Vec<usize>,
    l_vals: Vec<f64>,
    u_start: Vec<usize>,
    u_pos: Vec<usize>,
    u_vals: Vec<f64>,
    l_steps: Vec<usize>,
    step_of_row: Vec<usize>,
    step_of_pos: Vec<usize>,
    ucol_start: Vec<usize>,
    ucol_steps: Vec<usize>,
    visited: Vec<bool>,
}

impl LuFactors {
    /// Factorizes the `m × m` matrix whose column `p` is `columns[p]` (row, value).
    pub fn factorize(m: usize, mut columns: Vec<Vec<(usize, f64)>>) -> Result<Self, Singular> {
        assert_eq!(columns.len(), m);
        let mut row_pattern: Vec<Vec<usize>> = vec![Vec::new(); m];
        let mut row_count = vec![0usize; m];
        for (p, col) in columns.iter_mut().enumerate() {
            col.retain(|&(_, v)| v != 0.0);
            for &(r, _) in col.iter() {
                row_pattern[r].push(p);
                row_count[r] += 1;
            }
        }
        let mut row_active = vec![true; m];
        let mut col_active = vec![true; m];
        let mut active_cols: Vec<usize> = (0..m).collect();
        let mut active_slot: Vec<usize> = (0..m).collect();

        let mut col_singletons: Vec<usize> = (0..m).filter(|&p| columns[p].len() == 1).collect();
        col_singletons.reverse();
        let mut row_singletons: Vec<usize> = (0..m).filter(|&r| row_count[r] == 1).collect();
        row_singletons.reverse();

        let mut lu = LuFactors { l_start: vec![0], u_start: vec![0], ..Default::default() };

        let mut scatter = vec![usize::MAX; m];
        let mut stamp = vec![usize::MAX; m];

        for step in 0..m {
            let pivot = Self::next_singleton_col(&mut col_singletons, &columns, &col_active)
                .or_else(|| {
                    Self::next_singleton_row(
                        &mut row_singletons,
                        &row_pattern,
                        &row_count,
                        &row_active,
                        &col_active,
                        &columns,
                    )
                })
                .or_else(|| Self::markowitz(&active_cols, &columns, &row_count));
            let Some((r, p)) = pivot else {
                let positions = active_cols.clone();
                let rows = (0..m).filter(|&r| row_active[r]).collect();
                return Err(Singular { positions, rows });
            };

            // Remove column p from the active set and extract its L multipliers.
            col_active[p] = false;
            let slot = active_slot[p];
            active_cols.swap_remove(slot);
            if slot < active_cols.len() {
                active_slot[active_cols[slot]] = slot;
            }
            let pcol = std::mem::take(&mut columns[p]);
            let pivot_val = pcol.iter().find(|&&(rr, _)| rr == r).map(|&(_, v)| v).unwrap();
            let l_begin = lu.l_rows.len();
            for &(rr, v) in &pcol {
                if rr != r {
                    lu.l_rows.push(rr);
                    lu.l_vals.push(v / pivot_val);
                    row_count[rr] -= 1;
                    if row_count[rr] == 1 {
                        row_singletons.push(rr);
                    }
                }
            }
            row_active[r] = false;

            // Eliminate row r from every other active column that touches it.
            let pattern = std::mem::take(&mut row_pattern[r]);
            for c in pattern {
                if !col_active[c] || stamp[c] == step {
                    continue;
                }
                stamp[c] = step;
                let col = &mut columns[c];
                let Some(idx) = col.iter().position(|&(rr, _)| rr == r) else { continue };
                let (_, a_rc) = col.swap_remove(idx);
                lu.u_pos.push(c);
                lu.u_vals.push(a_rc);
                if l_begin < lu.l_rows.len() {
                    for (i, &(rr, _)) in col.iter().enumerate() {
                        scatter[rr] = i;
                    }
                    for li in l_begin..lu.l_rows.len() {
                        let rr = lu.l_rows[li];
                        let delta = -lu.l_vals[li] * a_rc;
                        if scatter[rr] != usize::MAX {
                            col[scatter[rr]].1 += delta;
                        } else {
                            scatter[rr] = col.len();
                            col.push((rr, delta));
                            row_pattern[rr].push(c);
                            row_count[rr] += 1;
                        }
                    }
                    for &(rr, _) in col.iter() {
                        scatter[rr] = usize::MAX;
                    }
                    col.retain(|&(rr, v)| {
                        let keep = v.abs() > DROP_TOLERANCE;
                        if !keep {
                            row_count[rr] -= 1;
                        }
                        keep
                    });
                }
                if col.len() == 1 {
                    col_singletons.push(c);
                }
            }
            // Rows whose count dropped through cancellation may now be singletons.
            for li in l_begin..lu.l_rows.len() {
                let rr = lu.l_rows[li];
                if row_active[rr] && row_count[rr] == 1 {
                    row_singletons.push(rr);
                }
            }

            lu.pivot_row.push(r);
            lu.pivot_pos.push(p);
            lu.pivot_val.push(pivot_val);
            lu.l_start.push(lu.l_rows.len());
            lu.u_start.push(lu.u_pos.len());
        }
        Ok(lu.finish(m))
    }

    fn next_singleton_col(
        stack: &mut Vec<usize>,
        columns: &[Vec<(usize, f64)>],
        col_active: &[bool],
    ) -> Option<(usize, usize)> {
        while let Some(p) = stack.pop() {
            if col_active[p] && columns[p].len() == 1 && columns[p][0].1.abs() > ABS_PIVOT_TOLERANCE {
                return Some((columns[p][0].0, p));
            }
        }
        None
    }

    fn next_singleton_row(
        stack: &mut Vec<usize>,
        row_pattern: &[Vec<usize>],
        row_count: &[usize],
        row_active: &[bool],
        col_active: &[bool],
        columns: &[Vec<(usize, f64)>],
    ) -> Option<(usize, usize)> {
        while let Some(r) = stack.pop() {
            if !row_active[r] || row_count[r] != 1 {
                continue;
            }
            for &c in &row_pattern[r] {
                if !col_active[c] {
                    continue;
                }
                let col = &columns[c];
                if let Some(&(_, v)) = col.iter().find(|&&(rr, _)| rr == r) {
                    let max = col.iter().fold(0.0f64, |a, &(_, x)| a.max(x.abs()));
                    if v.abs() > ABS_PIVOT_TOLERANCE && v.abs() >= 0.01 * max {
                        return Some((r, c));
                    }
                    break;
                }
            }
        }
        None
    }

    fn markowitz(active_cols: &[usize], columns: &[Vec<(usize, f64)>], row_count: &[usize]) -> Option<(usize, usize)> {
        let mut order: Vec<usize> = active_cols.iter().copied().filter(|&c| !columns[c].is_empty()).collect();
        if order.is_empty() {
            return None;
        }
        let key = |c: &usize| (columns[*c].len(), *c);
        if order.len() > MARKOWITZ_SEARCH {
            order.select_nth_unstable_by_key(MARKOWITZ_SEARCH, key);
            order.truncate(MARKOWITZ_SEARCH);
        }
        order.sort_unstable_by_key(key);
        let mut best: Option<(usize, usize, usize)> = None;
        for &c in &order {
            let col = &columns[c];
            let max = col.iter().fold(0.0f64, |a, &(_, x)| a.max(x.abs()));
            if max <= ABS_PIVOT_TOLERANCE {
                continue;
            }
            for &(r, v) in col {
                if v.abs() < PIVOT_THRESHOLD * max {
                    continue;
                }
                let cost = (row_count[r] - 1) * (col.len() - 1);
                if best.is_none_or(|(b, _, _)| cost < b) {
                    best = Some((cost, r, c));
                }
            }
        }
        best.map(|(_, r, c)| (r, c))
    }

    /// Builds the indexes used by the sparse solves.
    fn finish(mut self, m: usize) -> Self {
        let steps = self.pivot_row.len();
        self.step_of_row = vec![usize::MAX; m];
        self.step_of_pos = vec![usize::MAX; m];
        for k in 0..steps {
            self.step_of_row[self.pivot_row[k]] = k;
            self.step_of_pos[self.pivot_pos[k]] = k;
            if self.l_start[k + 1] > self.l_start[k] {
                self.l_steps.push(k);
            }
        }
        // Column-wise view of U: for position c, the steps whose U row references c.
        let mut start = vec![0usize; m + 1];
        for &c in &self.u_pos {
            start[c + 1] += 1;
        }
        for c in 0..m {
            start[c + 1] += start[c];
        }
        let mut fill = start.clone();
        let mut steps_of = vec![0usize; self.u_pos.len()];
        for k in 0..steps {
            for i in self.u_start[k]..self.u_start[k + 1] {
                let c = self.u_pos[i];
                steps_of[fill[c]] = k;
                fill[c] += 1;
            }
        }
        self.ucol_start = start;
        self.ucol_steps = steps_of;
        self.visited = vec![false; steps];
        self
    }

    /// Steps reachable from `seeds` along `next`, sorted ascending.
    fn reach(
        &mut self,
        seeds: impl Iterator<Item = usize>,
        next: impl Fn(&Self, usize, &mut Vec<usize>),
    ) -> Vec<usize> {
        let mut out = Vec::new();
        let mut stack: Vec<usize> = Vec::new();
        for s in seeds {
            if !self.visited[s] {
                self.visited[s] = true;
                stack.push(s);
            }
        }
        let mut buf = Vec::new();
        while let Some(k) = stack.pop() {
            out.push(k);
            buf.clear();
            next(self, k, &mut buf);
            for &k2 in &buf {
                if !self.visited[k2] {
                    self.visited[k2] = true;
                    stack.push(k2);
                }
            }
        }
        for &k in &out {
            self.visited[k] = false;
        }
        out.sort_unstable();
        out
    }

    /// Solves `B x = b`. `b` is indexed by row and is overwritten; the result is
    /// accumulated into the cleared vector `x`, indexed by basis position.
    pub fn solve(&mut self, b: &mut SparseVec, x: &mut SparseVec) {
        for &k in &self.l_steps {
            let v = b.vals[self.pivot_row[k]];
            if v != 0.0 {
                for i in self.l_start[k]..self.l_start[k + 1] {
                    b.add(self.l_rows[i], -self.l_vals[i] * v);
                }
            }
        }
        let seeds: Vec<usize> = b.idx.iter().filter(|&&r| b.vals[r] != 0.0).map(|&r| self.step_of_row[r]).collect();
        let order = self.reach(seeds.into_iter(), |lu, k, out| {
            let c = lu.pivot_pos[k];
            out.extend_from_slice(&lu.ucol_steps[lu.ucol_start[c]..lu.ucol_start[c + 1]]);
        });
        for &k in order.iter().rev() {
            let mut s = b.vals[self.pivot_row[k]];
            for i in self.u_start[k]..self.u_start[k + 1] {
                s -= self.u_vals[i] * x.vals[self.u_pos[i]];
            }
            x.set(self.pivot_pos[k], s / self.pivot_val[k]);
        }
    }

    /// Solves `Bᵀ y = c`. `c` is indexed by basis position and is overwritten; the
    /// result is accumulated into the cleared vector `y`, indexed by row.
    pub fn solve_transpose(&mut self, c: &mut SparseVec, y: &mut SparseVec) {
        let seeds: Vec<usize> = c.idx.iter().filter(|&&p| c.vals[p] != 0.0).map(|&p| self.step_of_pos[p]).collect();
        let order = self.reach(seeds.into_iter(), |lu, k, out| {
            out.extend(lu.u_pos[lu.u_start[k]..lu.u_start[k + 1]].iter().map(|&p| lu.step_of_pos[p]));
        });
        for &k in &order {
            let z = c.vals[self.pivot_pos[k]] / self.pivot_val[k];
            if z != 0.0 {
                y.set(self.pivot_row[k], z);
                for i in self.u_start[k]..self.u_start[k + 1] {
                    c.add(self.u_pos[i], -self.u_vals[i] * z);
                }
            }
        }
        for &k in self.l_steps.iter().rev() {
            let r = self.pivot_row[k];
            let mut s = y.vals[r];
            for i in self.l_start[k]..self.l_start[k + 1] {
                s -= self.l_vals[i] * y.vals[self.l_rows[i]];
            }
            if s != y.vals[r] {
                y.set(r, s);
            }
        }
    }
}

/// A dense value array with a list of the positions that may be nonzero.
#[derive(Debug, Clone, Default)]
pub(crate) struct SparseVec {
    pub vals: Vec<f64>,
    pub idx: Vec<usize>,
    mark: Vec<bool>,
}

impl SparseVec {
    pub fn new(n: usize) -> Self {
        SparseVec { vals: vec![0.0; n], idx: Vec::new(), mark: vec![false; n] }
    }

    #[inline]
    pub fn add(&mut self, i: usize, v: f64) {
        if !self.mark[i] {
            self.mark[i] = true;
            self.idx.push(i);
        }
        self.vals[i] += v;
    }

    #[inline]
    pub fn set(&mut self, i: usize, v: f64) {
        if !self.mark[i] {
            self.mark[i] = true;
            self.idx.push(i);
        }
        self.vals[i] = v;
    }

    pub fn clear(&mut self) {
        for &i in &self.idx {
            self.vals[i] = 0.0;
            self.mark[i] = false;
        }
        self.idx.clear();
    }

    /// Marks every position, for dense right-hand sides.
    pub fn fill_dense(&mut self, values: &[f64]) {
        self.clear();
        for (i, &v) in values.iter().enumerate() {
            self.set(i, v);
        }
    }
}

/// One product-form update: basis position `pos` was replaced by a column whose
/// representation in the previous basis is `alpha`.
#[derive(Debug, Clone)]
struct Eta {
    pos: usize,
    pivot: f64,
    entries: Vec<(usize, f64)>,
}

/// LU factors plus the eta file accumulated since the last refactorization.
#[derive(Debug, Clone, Default)]
pub(crate) struct BasisFactor {
    lu: LuFactors,
    etas: Vec<Eta>,
}

impl BasisFactor {
    pub fn new(lu: LuFactors) -> Self {
        BasisFactor { lu, etas: Vec::new() }
    }

    pub fn num_updates(&self) -> usize {
        self.etas.len()
    }

    /// `x = B⁻¹ b`; `b` (row space) is consumed as scratch, `x` must be cleared.
    pub fn ftran(&mut self, b: &mut SparseVec, x: &mut SparseVec) {
        self.lu.solve(b, x);
        for eta in &self.etas {
            let xr = x.vals[eta.pos];
            if xr != 0.0 {
                let xr = xr / eta.pivot;
                x.vals[eta.pos] = xr;
                for &(i, a) in &eta.entries {
                    x.add(i, -a * xr);
                }
            }
        }
    }

    /// `y = B⁻ᵀ c`; `c` (position space) is consumed as scratch, `y` must be cleared.
    pub fn btran(&mut self, c: &mut SparseVec, y: &mut SparseVec) {
        for eta in self.etas.iter().rev() {
            let mut s = c.vals[eta.pos];
            for &(i, a) in &eta.entries {
                s -= a * c.vals[i];
            }
            let v = s / eta.pivot;
            if v != c.vals[eta.pos] {
                c.set(eta.pos, v);
            }
        }
        self.lu.solve_transpose(c, y);
    }

    /// Records the replacement of basis position `pos` by a column whose
    /// representation in the current basis is `alpha`.
    pub fn update(&mut self, pos: usize, alpha: &SparseVec) {
        let entries = alpha
            .idx
            .iter()
            .filter(|&&i| i != pos && alpha.vals[i].abs() > DROP_TOLERANCE)
            .map(|&i| (i, alpha.vals[i]))
            .collect();
        self.etas.push(Eta { pos, pivot: alpha.vals[pos], entries });
    }
}
