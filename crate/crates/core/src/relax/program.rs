//! Linearized forms of the L1 and L2 relaxations.

use std::collections::HashMap;

use super::simplex::{LinearProgram, Sense};
use super::RelaxationKind;
use crate::model::Instance;

/// Problem data the linearizations are built from. For an ordinary instance each
/// unit is one individual of size 1; for a compacted instance units are supernodes.
#[derive(Debug, Clone, PartialEq)]
pub struct RelaxationInput {
    pub num_units: usize,
    pub num_tasks: usize,
    /// Number of individuals each unit stands for.
    pub sizes: Vec<usize>,
    pub capacities: Vec<usize>,
    /// Objective coefficient of `y_ut`, row-major; already includes λ and unit size.
    pub linear: Vec<f64>,
    pub edges: Vec<(usize, usize, f64)>,
}

impl RelaxationInput {
    pub fn from_instance(inst: &Instance) -> Self {
        let (n, k) = (inst.num_nodes(), inst.num_tasks());
        let mut linear = vec![0.0; n * k];
        for (v, t, c) in inst.preference_triples() {
            linear[v * k + t] = inst.lambda() * c;
        }
        RelaxationInput {
            num_units: n,
            num_tasks: k,
            sizes: vec![1; n],
            capacities: inst.capacities().to_vec(),
            linear,
            edges: inst.edges().iter().map(|e| (e.u, e.v, e.weight)).collect(),
        }
    }

    pub fn total_edge_weight(&self) -> f64 {
        self.edges.iter().map(|e| e.2).sum()
    }

    /// Value of the concave relaxation at `y` (row-major, units × tasks).
    pub fn evaluate(&self, kind: RelaxationKind, y: &[f64]) -> f64 {
        let k = self.num_tasks;
        let linear: f64 = self.linear.iter().zip(y).map(|(c, v)| c * v).sum();
        let pairs: f64 = match kind {
            RelaxationKind::L1 => self
                .edges
                .iter()
                .map(|&(u, v, w)| {
                    let inner = (0..k).map(|t| 2.0 - y[u * k + t] - y[v * k + t]).fold(1.0f64, f64::min);
                    w * inner
                })
                .sum(),
            RelaxationKind::L2 => {
                self.edges
                    .iter()
                    .map(|&(u, v, w)| {
                        let s: f64 = (0..k).map(|t| (y[u * k + t] + y[v * k + t]).min(1.0)).sum();
                        w * s
                    })
                    .sum::<f64>()
                    - self.total_edge_weight()
            }
        };
        linear + pairs
    }
}

/// Equivalent program used for solving, restricted to the conflict rows listed in
/// `active` (pairs of edge index and task).
///
/// Auxiliaries are measured from the top: `g_e = 1 − z_e` for L1 and
/// `e_et = y_ut + y_vt − x_et` for L2, with rows `g_e ≥ y_ut + y_vt − 1`
/// (resp. `e_et ≥ y_ut + y_vt − 1`). Such a row only binds when both endpoints lean
/// on task `t`. The objective omits the constant `w(E)`; [`RelaxationInput::evaluate`]
/// recovers the relaxation value from `y`.
pub(crate) fn excess_form(input: &RelaxationInput, kind: RelaxationKind, active: &[(usize, usize)]) -> LinearProgram {
    let (n, k) = (input.num_units, input.num_tasks);
    let mut lp = LinearProgram::new();
    for &c in &input.linear {
        lp.add_variable(c, 0.0, 1.0);
    }
    let y = |u: usize, t: usize| u * k + t;
    for u in 0..n {
        let row: Vec<(usize, f64)> = (0..k).map(|t| (y(u, t), 1.0)).collect();
        lp.add_row(&row, Sense::Eq, 1.0);
    }
    for t in 0..k {
        let row: Vec<(usize, f64)> = (0..n).map(|u| (y(u, t), input.sizes[u] as f64)).collect();
        lp.add_row(&row, Sense::Le, input.capacities[t] as f64);
    }
    let mut edge_aux: HashMap<usize, usize> = HashMap::new();
    for &(e, t) in active {
        let (u, v, w) = input.edges[e];
        let aux = match kind {
            RelaxationKind::L1 => *edge_aux.entry(e).or_insert_with(|| lp.add_variable(-w, 0.0, 1.0)),
            RelaxationKind::L2 => lp.add_variable(-w, 0.0, 1.0),
        };
        lp.add_row(&[(aux, 1.0), (y(u, t), -1.0), (y(v, t), -1.0)], Sense::Ge, -1.0);
    }
    lp
}

/// The linear program equivalent to maximizing a relaxation over the feasible
/// polytope. Variables are `y_ut` (row-major) followed by the auxiliaries: one
/// `z_e` per edge for L1, one `x_et` per edge and task for L2.
#[derive(Debug, Clone)]
pub struct RelaxationProgram {
    kind: RelaxationKind,
    num_units: usize,
    num_tasks: usize,
    num_edges: usize,
    constant_offset: f64,
    lp: LinearProgram,
}

impl RelaxationProgram {
    pub fn build(input: &RelaxationInput, kind: RelaxationKind) -> Self {
        let (n, k) = (input.num_units, input.num_tasks);
        let mut lp = LinearProgram::new();
        for &c in &input.linear {
            lp.add_variable(c, 0.0, 1.0);
        }
        for &(_, _, w) in &input.edges {
            match kind {
                RelaxationKind::L1 => {
                    lp.add_variable(w, 0.0, 1.0);
                }
                RelaxationKind::L2 => {
                    for _ in 0..k {
                        lp.add_variable(w, 0.0, 1.0);
                    }
                }
            }
        }
        let y = |u: usize, t: usize| u * k + t;
        for u in 0..n {
            let row: Vec<(usize, f64)> = (0..k).map(|t| (y(u, t), 1.0)).collect();
            lp.add_row(&row, Sense::Eq, 1.0);
        }
        for t in 0..k {
            let row: Vec<(usize, f64)> = (0..n).map(|u| (y(u, t), input.sizes[u] as f64)).collect();
            lp.add_row(&row, Sense::Le, input.capacities[t] as f64);
        }
        let base = n * k;
        for (e, &(u, v, _)) in input.edges.iter().enumerate() {
            for t in 0..k {
                match kind {
                    RelaxationKind::L1 => {
                        lp.add_row(&[(base + e, 1.0), (y(u, t), 1.0), (y(v, t), 1.0)], Sense::Le, 2.0);
                    }
                    RelaxationKind::L2 => {
                        lp.add_row(&[(base + e * k + t, 1.0), (y(u, t), -1.0), (y(v, t), -1.0)], Sense::Le, 0.0);
                    }
                }
            }
        }
        let constant_offset = match kind {
            RelaxationKind::L1 => 0.0,
            RelaxationKind::L2 => -input.total_edge_weight(),
        };
        RelaxationProgram { kind, num_units: n, num_tasks: k, num_edges: input.edges.len(), constant_offset, lp }
    }

    /// Variable and row counts of the program `build` would produce.
    pub fn build_size(input: &RelaxationInput, kind: RelaxationKind) -> (usize, usize) {
        let (n, k, e) = (input.num_units, input.num_tasks, input.edges.len());
        let aux = match kind {
            RelaxationKind::L1 => e,
            RelaxationKind::L2 => e * k,
        };
        (n * k + aux, n + k + e * k)
    }

    pub fn from_instance(inst: &Instance, kind: RelaxationKind) -> Self {
        Self::build(&RelaxationInput::from_instance(inst), kind)
    }

    pub fn kind(&self) -> RelaxationKind {
        self.kind
    }

    pub fn num_variables(&self) -> usize {
        self.lp.num_vars()
    }

    pub fn num_constraints(&self) -> usize {
        self.lp.num_rows()
    }

    pub fn num_units(&self) -> usize {
        self.num_units
    }

    pub fn num_tasks(&self) -> usize {
        self.num_tasks
    }

    pub fn constant_offset(&self) -> f64 {
        self.constant_offset
    }

    pub fn objective_coeffs(&self) -> &[f64] {
        self.lp.objective()
    }

    pub fn linear_program(&self) -> &LinearProgram {
        &self.lp
    }

    /// Column index of `y_ut`.
    pub fn y_index(&self, u: usize, t: usize) -> usize {
        u * self.num_tasks + t
    }

    pub fn variable_name(&self, j: usize) -> String {
        let k = self.num_tasks;
        let base = self.num_units * k;
        if j < base {
            format!("y_{}_{}", j / k, j % k)
        } else {
            match self.kind {
                RelaxationKind::L1 => format!("z_{}", j - base),
                RelaxationKind::L2 => format!("x_{}_{}", (j - base) / k, (j - base) % k),
            }
        }
    }

    pub fn row_name(&self, i: usize) -> String {
        let (n, k) = (self.num_units, self.num_tasks);
        if i < n {
            format!("assign_{i}")
        } else if i < n + k {
            format!("cap_{}", i - n)
        } else {
            let r = i - n - k;
            format!("link_{}_{}", r / k, r % k)
        }
    }

    pub(crate) fn num_edges(&self) -> usize {
        self.num_edges
    }
}
