//! Education-style data: per-student project rankings and a friend list.
//!
//! Three headerless CSV files, `#` starts a comment:
//! - capacities: `project,capacity`, defining the project order;
//! - rankings: `student,best,...,worst`, one full ranking per student;
//! - friends: `student,student`.
//!
//! The conflict graph is the complement of the friend graph with unit weights.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::io::Read;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::IoError;
use crate::model::{Balance, ConflictEdge, Instance};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PreferenceFunction {
    /// `c = 1 / rank`
    Inverse,
    /// `c = (|T| − rank + 1) / |T|`
    LinNorm,
}

impl PreferenceFunction {
    /// Preference for a 1-based `rank` among `num_tasks` projects.
    pub fn value(self, rank: usize, num_tasks: usize) -> f64 {
        match self {
            PreferenceFunction::Inverse => 1.0 / rank as f64,
            PreferenceFunction::LinNorm => (num_tasks - rank + 1) as f64 / num_tasks as f64,
        }
    }
}

impl fmt::Display for PreferenceFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PreferenceFunction::Inverse => "inverse",
            PreferenceFunction::LinNorm => "linnorm",
        })
    }
}

impl FromStr for PreferenceFunction {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "inverse" => Ok(PreferenceFunction::Inverse),
            "linnorm" => Ok(PreferenceFunction::LinNorm),
            other => Err(format!("unknown preference function `{other}` (expected inverse or linnorm)")),
        }
    }
}

/// Rankings and friendships indexed by student and project position.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RankingData {
    pub students: Vec<String>,
    pub projects: Vec<String>,
    /// `rankings[v]` lists project indices from best to worst.
    pub rankings: Vec<Vec<usize>>,
    pub friends: Vec<(usize, usize)>,
}

impl RankingData {
    /// 1-based rank student `v` gives project `t`.
    pub fn rank(&self, v: usize, t: usize) -> usize {
        self.rankings[v].iter().position(|&s| s == t).expect("rankings are permutations") + 1
    }

    pub fn validate(&self) -> Result<(), IoError> {
        let k = self.projects.len();
        if self.rankings.len() != self.students.len() {
            return Err(IoError::Invalid("one ranking per student required".into()));
        }
        for (v, r) in self.rankings.iter().enumerate() {
            let mut seen = vec![false; k];
            if r.len() != k || r.iter().any(|&t| t >= k || std::mem::replace(&mut seen[t], true)) {
                return Err(IoError::Invalid(format!(
                    "ranking of `{}` is not a permutation of the projects",
                    self.students[v]
                )));
            }
        }
        for &(a, b) in &self.friends {
            if a >= self.students.len() || b >= self.students.len() {
                return Err(IoError::Invalid("friend pair references an unknown student".into()));
            }
        }
        Ok(())
    }
}

/// All unordered non-friend pairs with unit weight, in lexicographic order.
pub fn friends_to_conflicts(
    friend_pairs: &[(usize, usize)],
    num_nodes: usize,
) -> Result<Vec<(usize, usize, f64)>, IoError> {
    let mut friends = HashSet::with_capacity(friend_pairs.len());
    for &(a, b) in friend_pairs {
        if a == b {
            return Err(IoError::Invalid(format!("student #{a} listed as their own friend")));
        }
        if a >= num_nodes || b >= num_nodes {
            return Err(IoError::Invalid("friend pair references an unknown student".into()));
        }
        friends.insert((a.min(b), a.max(b)));
    }
    let mut out = Vec::with_capacity((num_nodes * num_nodes.saturating_sub(1) / 2).saturating_sub(friends.len()));
    for u in 0..num_nodes {
        for v in (u + 1)..num_nodes {
            if !friends.contains(&(u, v)) {
                out.push((u, v, 1.0));
            }
        }
    }
    Ok(out)
}

pub fn build_education_instance(
    data: &RankingData,
    capacities: &[usize],
    function: PreferenceFunction,
    balance: Balance,
) -> Result<Instance, IoError> {
    data.validate()?;
    let (n, k) = (data.students.len(), data.projects.len());
    if capacities.len() != k {
        return Err(IoError::Invalid(format!("{} capacities for {k} projects", capacities.len())));
    }
    let edges = friends_to_conflicts(&data.friends, n)?
        .into_iter()
        .map(|(u, v, weight)| ConflictEdge { u, v, weight })
        .collect();
    let mut prefs = Vec::with_capacity(n * k);
    for v in 0..n {
        for (pos, &t) in data.rankings[v].iter().enumerate() {
            prefs.push((v, t, function.value(pos + 1, k)));
        }
    }
    Ok(Instance::new(data.students.clone(), data.projects.clone(), capacities.to_vec(), edges, prefs, balance)?)
}

fn reader<R: Read>(r: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new().has_headers(false).comment(Some(b'#')).flexible(true).trim(csv::Trim::All).from_reader(r)
}

fn line_of(record: &csv::StringRecord) -> usize {
    record.position().map_or(0, |p| p.line() as usize)
}

/// Parses the three CSV inputs; returns the data and the capacities in project order.
pub fn parse_education<R1: Read, R2: Read, R3: Read>(
    rankings: R1,
    friends: R2,
    capacities: R3,
) -> Result<(RankingData, Vec<usize>), IoError> {
    let mut projects = Vec::new();
    let mut caps = Vec::new();
    let mut project_index = HashMap::new();
    for record in reader(capacities).records() {
        let record = record?;
        let line = line_of(&record);
        if record.len() != 2 {
            return Err(IoError::parse(line, "capacities: expected `project,capacity`"));
        }
        let id = record[0].to_string();
        let cap = record[1]
            .parse()
            .map_err(|_| IoError::parse(line, format!("capacities: invalid capacity `{}`", &record[1])))?;
        if project_index.insert(id.clone(), projects.len()).is_some() {
            return Err(IoError::parse(line, format!("capacities: duplicate project `{id}`")));
        }
        projects.push(id);
        caps.push(cap);
    }

    let mut students = Vec::new();
    let mut student_index = HashMap::new();
    let mut ranks = Vec::new();
    for record in reader(rankings).records() {
        let record = record?;
        let line = line_of(&record);
        let id = record.get(0).unwrap_or_default().to_string();
        if student_index.insert(id.clone(), students.len()).is_some() {
            return Err(IoError::parse(line, format!("rankings: duplicate student `{id}`")));
        }
        let order = record
            .iter()
            .skip(1)
            .map(|p| {
                project_index
                    .get(p)
                    .copied()
                    .ok_or_else(|| IoError::parse(line, format!("rankings: unknown project `{p}`")))
            })
            .collect::<Result<Vec<_>, _>>()?;
        let mut seen = HashSet::new();
        if order.len() != projects.len() || !order.iter().all(|t| seen.insert(*t)) {
            return Err(IoError::parse(line, format!("rankings: `{id}` must rank every project exactly once")));
        }
        students.push(id);
        ranks.push(order);
    }

    let mut pairs = Vec::new();
    for record in reader(friends).records() {
        let record = record?;
        let line = line_of(&record);
        if record.len() != 2 {
            return Err(IoError::parse(line, "friends: expected `student,student`"));
        }
        let lookup = |s: &str| {
            student_index.get(s).copied().ok_or_else(|| IoError::parse(line, format!("friends: unknown student `{s}`")))
        };
        let (a, b) = (lookup(&record[0])?, lookup(&record[1])?);
        if a == b {
            return Err(IoError::parse(line, format!("friends: self-pair `{}`", &record[0])));
        }
        pairs.push((a, b));
    }
    Ok((RankingData { students, projects, rankings: ranks, friends: pairs }, caps))
}

pub fn load_education(
    rankings: &Path,
    friends: &Path,
    capacities: &Path,
    function: PreferenceFunction,
    balance: Balance,
) -> Result<(Instance, RankingData), IoError> {
    let open = |p: &Path| std::fs::File::open(p).map_err(|e| IoError::file(p, e));
    let (data, caps) = parse_education(open(rankings)?, open(friends)?, open(capacities)?)?;
    let inst = build_education_instance(&data, &caps, function, balance)?;
    Ok((inst, data))
}
