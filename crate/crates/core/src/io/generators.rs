//! Seeded instance generators.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::education::{build_education_instance, friends_to_conflicts, PreferenceFunction, RankingData};
use super::IoError;
use crate::model::{Assignment, Balance, ConflictEdge, Instance};
use crate::rng::{self, TfcRng};

fn generator_rng(seed: u64) -> TfcRng {
    rng::split(seed, rng::stream::GENERATOR)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Gender {
    Male,
    Female,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Department {
    pub name: String,
    pub size: usize,
    pub male_fraction: f64,
}

/// Company with departments of given size and gender mix. All male employees
/// conflict pairwise; an employee prefers their own department and, with
/// probability `switch_probability`, one other department.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompanyConfig {
    pub departments: Vec<Department>,
    pub switch_probability: f64,
    pub balance: Balance,
}

impl CompanyConfig {
    /// Four equal departments totalling `employees`: IT and Sales male dominated, HR
    /// and PR female dominated, average gap 35 points.
    pub fn with_employees(employees: usize) -> Self {
        let size = employees / 4;
        let dept = |name: &str, male_fraction| Department { name: name.into(), size, male_fraction };
        CompanyConfig {
            departments: vec![dept("IT", 0.70), dept("Sales", 0.65), dept("HR", 0.30), dept("PR", 0.35)],
            switch_probability: 0.01,
            balance: Balance::Alpha(2.0),
        }
    }
}

impl Default for CompanyConfig {
    fn default() -> Self {
        Self::with_employees(4000)
    }
}

#[derive(Debug, Clone)]
pub struct CompanyData {
    pub instance: Instance,
    pub gender: Vec<Gender>,
    /// Original department of each employee.
    pub department: Vec<usize>,
}

impl CompanyData {
    pub fn original_assignment(&self) -> Assignment {
        Assignment::new(self.department.clone())
    }
}

pub fn generate_company(config: &CompanyConfig, seed: u64) -> Result<CompanyData, IoError> {
    let mut rng = generator_rng(seed);
    let k = config.departments.len();
    if k == 0 {
        return Err(IoError::Invalid("company needs at least one department".into()));
    }
    if !(0.0..=1.0).contains(&config.switch_probability) {
        return Err(IoError::Invalid(format!("switch probability {} outside [0, 1]", config.switch_probability)));
    }
    let mut gender = Vec::new();
    let mut department = Vec::new();
    for (d, dept) in config.departments.iter().enumerate() {
        if !(0.0..=1.0).contains(&dept.male_fraction) {
            return Err(IoError::Invalid(format!("male fraction of {} outside [0, 1]", dept.name)));
        }
        let males = (dept.male_fraction * dept.size as f64).round() as usize;
        let mut block: Vec<Gender> =
            (0..dept.size).map(|i| if i < males { Gender::Male } else { Gender::Female }).collect();
        block.shuffle(&mut rng);
        gender.extend(block);
        department.extend(std::iter::repeat_n(d, dept.size));
    }
    let n = gender.len();
    let mut prefs = Vec::with_capacity(n);
    for (v, &d) in department.iter().enumerate() {
        let mut row = vec![(d, 1.0)];
        if k > 1 && rng.gen::<f64>() < config.switch_probability {
            let mut other = rng::index(&mut rng, k - 1);
            if other >= d {
                other += 1;
            }
            row.push((other, 1.0));
        }
        prefs.extend(row.into_iter().map(|(t, c)| (v, t, c)));
    }
    let males: Vec<usize> = (0..n).filter(|&v| gender[v] == Gender::Male).collect();
    let mut edges = Vec::with_capacity(males.len() * males.len().saturating_sub(1) / 2);
    for (i, &u) in males.iter().enumerate() {
        for &v in &males[i + 1..] {
            edges.push(ConflictEdge { u, v, weight: 1.0 });
        }
    }
    let node_ids = (0..n).map(|v| format!("e{v}")).collect();
    let task_ids = config.departments.iter().map(|d| d.name.clone()).collect();
    let capacities = config.departments.iter().map(|d| d.size).collect();
    let instance = Instance::new(node_ids, task_ids, capacities, edges, prefs, config.balance)?;
    Ok(CompanyData { instance, gender, department })
}

/// Planted-partition friend graph with a primary project per block; the conflict
/// graph is its complement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthTfConfig {
    pub blocks: usize,
    pub block_size: usize,
    pub tasks: usize,
    pub p_in: f64,
    pub p_out: f64,
    /// Each capacity is `ceil(|V| / |T|) + capacity_slack`.
    pub capacity_slack: usize,
    pub balance: Balance,
}

impl Default for SynthTfConfig {
    fn default() -> Self {
        SynthTfConfig {
            blocks: 10,
            block_size: 100,
            tasks: 10,
            p_in: 0.99,
            p_out: 1e-5,
            capacity_slack: 2,
            balance: Balance::Alpha(10.0),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SynthTfData {
    pub instance: Instance,
    /// Planted block of each node.
    pub block: Vec<usize>,
    /// Primary project of each block.
    pub primary: Vec<usize>,
}

pub fn generate_synth_tf(config: &SynthTfConfig, seed: u64) -> Result<SynthTfData, IoError> {
    if config.blocks == 0 || config.block_size == 0 || config.tasks == 0 {
        return Err(IoError::Invalid("blocks, block size and tasks must be positive".into()));
    }
    for p in [config.p_in, config.p_out] {
        if !(0.0..=1.0).contains(&p) {
            return Err(IoError::Invalid(format!("edge probability {p} outside [0, 1]")));
        }
    }
    let mut rng = generator_rng(seed);
    let (n, k) = (config.blocks * config.block_size, config.tasks);
    let block: Vec<usize> = (0..n).map(|v| v / config.block_size).collect();
    let mut perm: Vec<usize> = (0..k).collect();
    perm.shuffle(&mut rng);
    let primary: Vec<usize> = (0..config.blocks).map(|b| perm[b % k]).collect();

    let mut edges = Vec::new();
    for u in 0..n {
        for v in (u + 1)..n {
            let p = if block[u] == block[v] { config.p_in } else { config.p_out };
            if rng.gen::<f64>() >= p {
                edges.push(ConflictEdge { u, v, weight: 1.0 });
            }
        }
    }
    let mut prefs = Vec::with_capacity(2 * n);
    for v in 0..n {
        let first = primary[block[v]];
        let extra = rng::index(&mut rng, k);
        prefs.push((v, first, 1.0));
        if extra != first {
            prefs.push((v, extra, 1.0));
        }
    }
    let cap = n.div_ceil(k) + config.capacity_slack;
    let node_ids = (0..n).map(|v| format!("n{v}")).collect();
    let task_ids = (0..k).map(|t| format!("p{t}")).collect();
    let instance = Instance::new(node_ids, task_ids, vec![cap; k], edges, prefs, config.balance)?;
    Ok(SynthTfData { instance, block, primary })
}

/// Class-project data: students in friend groups that tend to favour one project.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EducationConfig {
    pub students: usize,
    pub projects: usize,
    pub group_size: usize,
    /// Friendship probability inside a group.
    pub p_in: f64,
    /// Friendship probability across groups.
    pub p_cross: f64,
    /// Probability that a student ranks the group's favourite project first.
    pub favorite_probability: f64,
    /// Each capacity is `ceil(students / projects) + capacity_slack`.
    pub capacity_slack: usize,
    pub function: PreferenceFunction,
    pub balance: Balance,
}

impl Default for EducationConfig {
    fn default() -> Self {
        EducationConfig {
            students: 28,
            projects: 7,
            group_size: 4,
            p_in: 0.8,
            p_cross: 0.02,
            favorite_probability: 0.6,
            capacity_slack: 1,
            function: PreferenceFunction::Inverse,
            balance: Balance::Alpha(1.0),
        }
    }
}

pub fn generate_education(config: &EducationConfig, seed: u64) -> Result<(Instance, RankingData), IoError> {
    if config.students == 0 || config.projects == 0 || config.group_size == 0 {
        return Err(IoError::Invalid("students, projects and group size must be positive".into()));
    }
    let mut rng = generator_rng(seed);
    let (n, k) = (config.students, config.projects);
    let groups = n.div_ceil(config.group_size);
    let favorite: Vec<usize> = (0..groups).map(|_| rng::index(&mut rng, k)).collect();
    let mut rankings = Vec::with_capacity(n);
    for v in 0..n {
        let mut order: Vec<usize> = (0..k).collect();
        order.shuffle(&mut rng);
        if rng.gen::<f64>() < config.favorite_probability {
            let fav = favorite[v / config.group_size];
            let pos = order.iter().position(|&t| t == fav).unwrap();
            order[..=pos].rotate_right(1);
        }
        rankings.push(order);
    }
    let mut friends = Vec::new();
    for u in 0..n {
        for v in (u + 1)..n {
            let p = if u / config.group_size == v / config.group_size { config.p_in } else { config.p_cross };
            if rng.gen::<f64>() < p {
                friends.push((u, v));
            }
        }
    }
    debug_assert!(friends_to_conflicts(&friends, n).is_ok());
    let data = RankingData {
        students: (0..n).map(|v| format!("s{v}")).collect(),
        projects: (0..k).map(|t| format!("p{t}")).collect(),
        rankings,
        friends,
    };
    let caps = vec![n.div_ceil(k) + config.capacity_slack; k];
    let inst = build_education_instance(&data, &caps, config.function, config.balance)?;
    Ok((inst, data))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn company_shape() {
        let data = generate_company(&CompanyConfig::with_employees(400), 7).unwrap();
        let inst = &data.instance;
        assert_eq!((inst.num_nodes(), inst.num_tasks()), (400, 4));
        assert_eq!(inst.capacities(), &[100; 4]);
        let males = data.gender.iter().filter(|&&g| g == Gender::Male).count();
        assert_eq!(males, 70 + 65 + 30 + 35);
        assert_eq!(inst.edges().len(), males * (males - 1) / 2);
        for v in 0..400 {
            assert_eq!(inst.preference(v, data.department[v]), 1.0);
        }
    }

    #[test]
    fn synth_tf_shape_and_determinism() {
        let config = SynthTfConfig { blocks: 4, block_size: 10, tasks: 5, ..SynthTfConfig::default() };
        let a = generate_synth_tf(&config, 3).unwrap();
        let b = generate_synth_tf(&config, 3).unwrap();
        assert_eq!(a.instance.edges(), b.instance.edges());
        assert_eq!(a.instance.capacities(), &[10; 5]);
        for v in 0..40 {
            let units = a.instance.preferences_of(v).iter().filter(|&&(_, c)| c == 1.0).count();
            assert!((1..=2).contains(&units));
        }
        let mut primaries = a.primary.clone();
        primaries.sort_unstable();
        primaries.dedup();
        assert_eq!(primaries.len(), 4);
    }

    #[test]
    fn education_rankings_are_permutations() {
        let (inst, data) = generate_education(&EducationConfig::default(), 11).unwrap();
        data.validate().unwrap();
        assert_eq!(inst.num_nodes(), 28);
        assert_eq!(inst.edges().len(), 378 - data.friends.len());
        for v in 0..28 {
            assert_eq!(inst.preference(v, data.rankings[v][0]), 1.0);
        }
    }
}
