//! Sparsify and Compact.
//!
//! Sparsify keeps each conflict edge with probability `p` (weights are not
//! rescaled). Compact groups individuals into supernodes, solves the size-weighted
//! relaxation over supernodes and copies each supernode's row to its members.

use std::collections::HashMap;

use rand::Rng;
use thiserror::Error;

use crate::model::{ConflictEdge, FractionalSolution, Instance, ModelError};
use crate::relax::{self, LpStatus, RelaxError, RelaxationInput, RelaxationKind, SimplexOptions};
use crate::rng;

#[derive(Debug, Error)]
pub enum SpeedupError {
    #[error("retention probability must lie in (0, 1], got {0}")]
    InvalidProbability(f64),
    #[error("invalid partition: {0}")]
    InvalidPartition(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Relax(#[from] RelaxError),
}

/// Independent Bernoulli(`p`) retention of every conflict edge. λ stays at the value
/// resolved on the full graph.
pub fn sparsify(inst: &Instance, p: f64, seed: u64) -> Result<Instance, SpeedupError> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(SpeedupError::InvalidProbability(p));
    }
    let mut rng = rng::split(seed, rng::stream::SPARSIFY);
    let kept: Vec<ConflictEdge> = inst.edges().iter().filter(|_| rng.gen::<f64>() < p).cloned().collect();
    Ok(inst.with_edges(kept)?)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Supernode {
    pub id: usize,
    /// Original node indices, ascending.
    pub members: Vec<usize>,
}

impl Supernode {
    pub fn size(&self) -> usize {
        self.members.len()
    }
}

/// Anything that can split the individuals into supernodes.
pub trait Partitioner {
    fn partition(&self, inst: &Instance) -> Vec<Supernode>;
}

/// Label propagation on the friend graph (the complement of the conflict graph).
///
/// Exact twins (same conflict neighbors and weights, same preferences) move as one
/// unit throughout. Communities are then merged when their mean preference vectors
/// are within `preference_tolerance` in L∞ and at least `min_friend_density` of the
/// cross pairs are friends. Groups larger than `target_size` are cut into chunks of
/// whole twin classes.
#[derive(Debug, Clone)]
pub struct LabelPropagation {
    pub target_size: usize,
    pub preference_tolerance: f64,
    pub min_friend_density: f64,
    pub max_rounds: usize,
}

pub const DEFAULT_TARGET_SIZE: usize = 100;

impl Default for LabelPropagation {
    fn default() -> Self {
        LabelPropagation {
            target_size: DEFAULT_TARGET_SIZE,
            preference_tolerance: 0.1,
            min_friend_density: 0.5,
            max_rounds: 100,
        }
    }
}

/// Groups of exact twins, each sorted, ordered by smallest member.
pub fn twin_classes(inst: &Instance) -> Vec<Vec<usize>> {
    type Key = (Vec<(usize, u64)>, Vec<(usize, u64)>);
    let mut classes: Vec<Vec<usize>> = Vec::new();
    let mut index: HashMap<Key, usize> = HashMap::new();
    for v in 0..inst.num_nodes() {
        let mut nbrs: Vec<(usize, u64)> = inst.neighbors(v).iter().map(|&(u, w)| (u, w.to_bits())).collect();
        nbrs.sort_unstable();
        let prefs = inst.preferences_of(v).iter().map(|&(t, c)| (t, c.to_bits())).collect();
        let slot = *index.entry((nbrs, prefs)).or_insert_with(|| {
            classes.push(Vec::new());
            classes.len() - 1
        });
        classes[slot].push(v);
    }
    classes
}

impl Partitioner for LabelPropagation {
    fn partition(&self, inst: &Instance) -> Vec<Supernode> {
        let n = inst.num_nodes();
        let classes = twin_classes(inst);
        let mut label: Vec<usize> = vec![0; n];
        let mut label_size = vec![0usize; n];
        for class in &classes {
            for &v in class {
                label[v] = class[0];
            }
            label_size[class[0]] = class.len();
        }
        let mut nbr_count = vec![0usize; n];
        for _ in 0..self.max_rounds {
            let mut changed = false;
            for class in &classes {
                let r = class[0];
                let own = label[r];
                for &(u, _) in inst.neighbors(r) {
                    nbr_count[label[u]] += 1;
                }
                let mut best: Option<(usize, usize)> = None;
                for (l, &size) in label_size.iter().enumerate() {
                    if size == 0 {
                        continue;
                    }
                    let friends = size - nbr_count[l] - usize::from(l == own);
                    if friends == 0 {
                        continue;
                    }
                    let better = match best {
                        None => true,
                        Some((bl, bc)) => friends > bc || (friends == bc && l == own && bl != own),
                    };
                    if better {
                        best = Some((l, friends));
                    }
                }
                for &(u, _) in inst.neighbors(r) {
                    nbr_count[label[u]] = 0;
                }
                if let Some((l, _)) = best {
                    if l != own {
                        for &v in class {
                            label[v] = l;
                        }
                        label_size[own] -= class.len();
                        label_size[l] += class.len();
                        changed = true;
                    }
                }
            }
            if !changed {
                break;
            }
        }

        // Communities as lists of twin classes, ordered by smallest member.
        let mut by_label: HashMap<usize, Vec<usize>> = HashMap::new();
        let mut community_order = Vec::new();
        for (ci, class) in classes.iter().enumerate() {
            let l = label[class[0]];
            by_label
                .entry(l)
                .or_insert_with(|| {
                    community_order.push(l);
                    Vec::new()
                })
                .push(ci);
        }
        let communities: Vec<Vec<usize>> = community_order.iter().map(|l| by_label.remove(l).unwrap()).collect();

        let groups = self.merge(inst, &classes, communities);
        let mut out: Vec<Vec<usize>> = Vec::new();
        for group in groups {
            out.extend(self.split(&classes, group));
        }
        for members in &mut out {
            members.sort_unstable();
        }
        out.sort_by_key(|m| m[0]);
        out.into_iter().enumerate().map(|(id, members)| Supernode { id, members }).collect()
    }
}

impl LabelPropagation {
    fn merge(&self, inst: &Instance, classes: &[Vec<usize>], communities: Vec<Vec<usize>>) -> Vec<Vec<usize>> {
        let k = inst.num_tasks();
        let mut group_of = vec![usize::MAX; inst.num_nodes()];
        let mut groups: Vec<Vec<usize>> = Vec::new();
        let mut group_size: Vec<usize> = Vec::new();
        let mut group_pref: Vec<Vec<f64>> = Vec::new();
        for community in communities {
            let members: Vec<usize> = community.iter().flat_map(|&c| classes[c].iter().copied()).collect();
            let size = members.len();
            let mut pref = vec![0.0; k];
            for &v in &members {
                for &(t, c) in inst.preferences_of(v) {
                    pref[t] += c;
                }
            }
            let mut conflicts: HashMap<usize, usize> = HashMap::new();
            for &v in &members {
                for &(u, _) in inst.neighbors(v) {
                    if group_of[u] != usize::MAX {
                        *conflicts.entry(group_of[u]).or_insert(0) += 1;
                    }
                }
            }
            let target = (0..groups.len()).find(|&g| {
                if group_size[g] + size > self.target_size {
                    return false;
                }
                let pairs = (group_size[g] * size) as f64;
                let friends = pairs - *conflicts.get(&g).unwrap_or(&0) as f64;
                if friends / pairs < self.min_friend_density {
                    return false;
                }
                (0..k).all(|t| {
                    (pref[t] / size as f64 - group_pref[g][t] / group_size[g] as f64).abs() <= self.preference_tolerance
                })
            });
            let g = match target {
                Some(g) => g,
                None => {
                    groups.push(Vec::new());
                    group_size.push(0);
                    group_pref.push(vec![0.0; k]);
                    groups.len() - 1
                }
            };
            for &v in &members {
                group_of[v] = g;
            }
            groups[g].extend(community);
            group_size[g] += size;
            for t in 0..k {
                group_pref[g][t] += pref[t];
            }
        }
        groups
    }

    /// Chunks of whole twin classes, each at most `target_size` unless one class is
    /// larger on its own.
    fn split(&self, classes: &[Vec<usize>], group: Vec<usize>) -> Vec<Vec<usize>> {
        let cap = self.target_size.max(1);
        let mut out: Vec<Vec<usize>> = Vec::new();
        let mut current: Vec<usize> = Vec::new();
        for c in group {
            let class = &classes[c];
            if class.len() > cap {
                for chunk in class.chunks(cap) {
                    out.push(chunk.to_vec());
                }
                continue;
            }
            if current.len() + class.len() > cap {
                out.push(std::mem::take(&mut current));
            }
            current.extend_from_slice(class);
        }
        if !current.is_empty() {
            out.push(current);
        }
        out
    }
}

/// Default partitioner with the given maximum supernode size.
pub fn compact_partition(inst: &Instance, target_supernode_size: usize) -> Vec<Supernode> {
    LabelPropagation { target_size: target_supernode_size, ..LabelPropagation::default() }.partition(inst)
}

/// Every individual in exactly one non-empty supernode.
pub fn validate_partition(inst: &Instance, partition: &[Supernode]) -> Result<Vec<usize>, SpeedupError> {
    let mut owner = vec![usize::MAX; inst.num_nodes()];
    for (s, node) in partition.iter().enumerate() {
        if node.members.is_empty() {
            return Err(SpeedupError::InvalidPartition(format!("supernode {s} is empty")));
        }
        for &v in &node.members {
            if v >= owner.len() {
                return Err(SpeedupError::InvalidPartition(format!("node index {v} out of range")));
            }
            if owner[v] != usize::MAX {
                return Err(SpeedupError::InvalidPartition(format!("node {} in two supernodes", inst.node_ids()[v])));
            }
            owner[v] = s;
        }
    }
    if let Some(v) = owner.iter().position(|&s| s == usize::MAX) {
        return Err(SpeedupError::InvalidPartition(format!("node {} not covered", inst.node_ids()[v])));
    }
    Ok(owner)
}

/// The compact problem: supernode sizes, summed cross weights, summed preferences.
#[derive(Debug, Clone)]
pub struct SuperInstance {
    pub supernodes: Vec<Supernode>,
    pub owner: Vec<usize>,
    pub input: RelaxationInput,
    /// Member-mean preferences, row-major (supernodes × tasks).
    pub mean_preferences: Vec<f64>,
    /// Weight of conflict edges inside a supernode, which the compact problem ignores.
    pub ignored_conflict_weight: f64,
}

impl SuperInstance {
    pub fn build(inst: &Instance, partition: &[Supernode]) -> Result<Self, SpeedupError> {
        let owner = validate_partition(inst, partition)?;
        let (s, k) = (partition.len(), inst.num_tasks());
        let mut mean_preferences = vec![0.0; s * k];
        for (a, node) in partition.iter().enumerate() {
            for &v in &node.members {
                for &(t, c) in inst.preferences_of(v) {
                    mean_preferences[a * k + t] += c;
                }
            }
            for t in 0..k {
                mean_preferences[a * k + t] /= node.size() as f64;
            }
        }
        let mut weights: HashMap<(usize, usize), f64> = HashMap::new();
        let mut ignored = 0.0;
        for e in inst.edges() {
            let (a, b) = (owner[e.u], owner[e.v]);
            if a == b {
                ignored += e.weight;
            } else {
                *weights.entry((a.min(b), a.max(b))).or_insert(0.0) += e.weight;
            }
        }
        let mut edges: Vec<(usize, usize, f64)> = weights.into_iter().map(|((a, b), w)| (a, b, w)).collect();
        edges.sort_by_key(|&(a, b, _)| (a, b));
        let sizes: Vec<usize> = partition.iter().map(Supernode::size).collect();
        let linear = (0..s * k).map(|i| inst.lambda() * sizes[i / k] as f64 * mean_preferences[i]).collect();
        let input = RelaxationInput {
            num_units: s,
            num_tasks: k,
            sizes,
            capacities: inst.capacities().to_vec(),
            linear,
            edges,
        };
        Ok(SuperInstance {
            supernodes: partition.to_vec(),
            owner,
            input,
            mean_preferences,
            ignored_conflict_weight: ignored,
        })
    }

    /// `x_vt = y_St` for every member `v` of supernode `S`.
    pub fn unroll(&self, y: &FractionalSolution) -> FractionalSolution {
        let k = self.input.num_tasks;
        let mut out = FractionalSolution::zeros(self.owner.len(), k);
        for (v, &s) in self.owner.iter().enumerate() {
            out.row_mut(v).copy_from_slice(y.row(s));
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct CompactResult {
    /// Unrolled solution over the original individuals.
    pub solution: FractionalSolution,
    /// Compact relaxation value at the supernode solution.
    pub compact_objective: f64,
    pub iterations: usize,
    pub status: LpStatus,
    pub num_supernodes: usize,
    pub ignored_conflict_weight: f64,
}

pub fn compact_solve(
    inst: &Instance,
    partition: &[Supernode],
    kind: RelaxationKind,
) -> Result<CompactResult, SpeedupError> {
    compact_solve_with(inst, partition, kind, &SimplexOptions::default())
}

pub fn compact_solve_with(
    inst: &Instance,
    partition: &[Supernode],
    kind: RelaxationKind,
    opts: &SimplexOptions,
) -> Result<CompactResult, SpeedupError> {
    let sup = SuperInstance::build(inst, partition)?;
    let lp = relax::solve_compact_relaxation(&sup.input, kind, opts)?;
    let solution = sup.unroll(&lp.solution);
    solution.check(inst)?;
    Ok(CompactResult {
        solution,
        compact_objective: lp.objective_value,
        iterations: lp.iterations,
        status: lp.status,
        num_supernodes: partition.len(),
        ignored_conflict_weight: sup.ignored_conflict_weight,
    })
}

/// Average of `y` and its image under swapping rows `u` and `v`.
pub fn symmetrize_twins(y: &FractionalSolution, u: usize, v: usize) -> FractionalSolution {
    let mut out = y.clone();
    for t in 0..y.num_tasks() {
        let avg = 0.5 * (y.get(u, t) + y.get(v, t));
        out.set(u, t, avg);
        out.set(v, t, avg);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Balance;

    fn complete_conflicts(n: usize) -> Vec<(usize, usize, f64)> {
        (0..n).flat_map(|u| ((u + 1)..n).map(move |v| (u, v, 1.0))).collect()
    }

    #[test]
    fn sparsify_bounds_and_identity() {
        let inst = Instance::from_indexed(6, vec![3, 3], complete_conflicts(6), vec![], Balance::Alpha(1.0)).unwrap();
        assert!(sparsify(&inst, 0.0, 1).is_err());
        assert!(sparsify(&inst, 1.5, 1).is_err());
        let same = sparsify(&inst, 1.0, 1).unwrap();
        assert_eq!(same.edges(), inst.edges());
        assert_eq!(same.lambda(), inst.lambda());
        let half = sparsify(&inst, 0.5, 4).unwrap();
        assert_eq!(half.lambda(), inst.lambda());
        assert_eq!(half.edges().len(), sparsify(&inst, 0.5, 4).unwrap().edges().len());
    }

    #[test]
    fn complete_conflict_graph_gives_singletons() {
        let inst = Instance::from_indexed(5, vec![5], complete_conflicts(5), vec![], Balance::Lambda(0.0)).unwrap();
        let part = compact_partition(&inst, 10);
        assert_eq!(part.len(), 5);
        assert!(part.iter().all(|s| s.size() == 1));
    }

    #[test]
    fn twins_share_a_supernode() {
        // 0 and 1 are twins; 2 conflicts with both; 3 is unrelated with other prefs.
        let edges = vec![(0, 2, 1.0), (1, 2, 1.0), (2, 3, 1.0)];
        let prefs = vec![(0, 0, 1.0), (1, 0, 1.0), (2, 1, 1.0), (3, 1, 0.5)];
        let inst = Instance::from_indexed(4, vec![2, 2], edges, prefs, Balance::Lambda(1.0)).unwrap();
        assert_eq!(twin_classes(&inst)[0], vec![0, 1]);
        let part = compact_partition(&inst, 2);
        let owner = validate_partition(&inst, &part).unwrap();
        assert_eq!(owner[0], owner[1]);
    }

    #[test]
    fn singleton_partition_matches_full_relaxation() {
        let edges = vec![(0, 1, 1.0), (1, 2, 2.0), (0, 2, 0.5), (2, 3, 1.5)];
        let prefs = vec![(0, 0, 1.0), (1, 1, 0.5), (2, 0, 0.25), (3, 1, 1.0)];
        let inst = Instance::from_indexed(4, vec![2, 3], edges, prefs, Balance::Lambda(0.7)).unwrap();
        let part: Vec<Supernode> = (0..4).map(|v| Supernode { id: v, members: vec![v] }).collect();
        for kind in [RelaxationKind::L1, RelaxationKind::L2] {
            let full = relax::solve_relaxation(&inst, kind).unwrap();
            let compact = compact_solve(&inst, &part, kind).unwrap();
            assert!((full.objective_value - compact.compact_objective).abs() < 1e-9);
        }
    }

    #[test]
    fn compact_weights_and_ignored_weight() {
        let edges = vec![(0, 1, 2.0), (0, 2, 1.0), (1, 2, 1.0), (1, 3, 0.5)];
        let inst =
            Instance::from_indexed(4, vec![4, 4], edges, vec![(0, 0, 1.0), (1, 0, 0.5)], Balance::Lambda(2.0)).unwrap();
        let part = vec![Supernode { id: 0, members: vec![0, 1] }, Supernode { id: 1, members: vec![2, 3] }];
        let sup = SuperInstance::build(&inst, &part).unwrap();
        assert_eq!(sup.ignored_conflict_weight, 2.0);
        assert_eq!(sup.input.edges, vec![(0, 1, 2.5)]);
        assert_eq!(sup.mean_preferences[0], 0.75);
        assert_eq!(sup.input.linear[0], 2.0 * 1.5);
        assert!(validate_partition(&inst, &part[..1]).is_err());
    }
}
