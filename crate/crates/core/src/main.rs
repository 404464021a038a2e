//! `tfc` command line: generate instances, solve, sweep α, evaluate assignments.
//!
//! Exit codes: 0 success, 1 failure, 2 usage error, 3 LP iteration or time limit,
//! 4 invalid input (parse error, infeasible assignment, malformed instance).

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::json;

use tfc::eval::{self, QualityMetrics};
use tfc::io::{self, Gender, IoError, PreferenceFunction, RankingData};
use tfc::model::{evaluate, Assignment, Balance, Instance, ObjectiveBreakdown};
use tfc::solve::{self, Algorithm, ReferenceMode, SolveError, SolveOptions};
use tfc::speedups::DEFAULT_TARGET_SIZE;

const METADATA_SCHEMA: &str = "tfc-metadata/1";
const EVALUATION_SCHEMA: &str = "tfc-evaluation/1";

#[derive(Parser)]
#[command(name = "tfc", version, about = "Team formation amidst conflicts")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a generated instance in the canonical format.
    Generate(GenerateArgs),
    /// Relax, round and evaluate one instance.
    Solve(SolveArgs),
    /// Solve at every α of a grid and write a TSV table.
    Sweep(SweepArgs),
    /// Score assignment files side by side.
    Evaluate(EvaluateArgs),
}

#[derive(Args, Clone, Copy)]
struct BalanceArgs {
    /// Balancing factor; λ = α · w(E) / |V|.
    #[arg(long, conflicts_with = "lambda")]
    alpha: Option<f64>,
    /// Weight of the preference term, given directly.
    #[arg(long)]
    lambda: Option<f64>,
}

impl BalanceArgs {
    fn get(self) -> Option<Balance> {
        self.alpha.map(Balance::Alpha).or(self.lambda.map(Balance::Lambda))
    }
}

#[derive(Args)]
struct InstanceArgs {
    /// Instance in the canonical text format.
    #[arg(long, required_unless_present = "rankings", conflicts_with_all = ["rankings", "friends", "capacities"])]
    instance: Option<PathBuf>,
    /// Education rankings CSV: `student,best,...,worst`.
    #[arg(long, requires_all = ["friends", "capacities"])]
    rankings: Option<PathBuf>,
    /// Education friendships CSV: `student,student`.
    #[arg(long)]
    friends: Option<PathBuf>,
    /// Education capacities CSV: `project,capacity`.
    #[arg(long)]
    capacities: Option<PathBuf>,
    #[arg(long, default_value = "inverse")]
    preference_function: PreferenceFunction,
    #[command(flatten)]
    balance: BalanceArgs,
}

impl InstanceArgs {
    fn source(&self) -> String {
        match (&self.instance, &self.rankings) {
            (Some(p), _) => p.display().to_string(),
            (None, Some(p)) => p.display().to_string(),
            (None, None) => String::new(),
        }
    }

    fn load(&self) -> Result<(Instance, Option<RankingData>), CliError> {
        if let Some(path) = &self.instance {
            let inst = io::load_instance(path)?;
            let inst = match self.balance.get() {
                Some(b) => inst.with_balance(b).map_err(IoError::from)?,
                None => inst,
            };
            return Ok((inst, None));
        }
        let (Some(r), Some(f), Some(c)) = (&self.rankings, &self.friends, &self.capacities) else {
            return Err(CliError::usage("education input needs --rankings, --friends and --capacities"));
        };
        let balance = self.balance.get().unwrap_or(Balance::Alpha(1.0));
        let (inst, data) = io::load_education(r, f, c, self.preference_function, balance)?;
        Ok((inst, Some(data)))
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Generator {
    Company,
    SynthTf,
    Education,
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(value_enum)]
    kind: Generator,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// JSON with the generator's side data (genders, blocks, rankings).
    #[arg(long)]
    metadata: Option<PathBuf>,
    /// Company size.
    #[arg(long)]
    employees: Option<usize>,
    /// Synth-TF planted blocks.
    #[arg(long)]
    blocks: Option<usize>,
    #[arg(long)]
    block_size: Option<usize>,
    /// Synth-TF projects.
    #[arg(long)]
    tasks: Option<usize>,
    #[arg(long)]
    students: Option<usize>,
    #[arg(long)]
    projects: Option<usize>,
    #[arg(long)]
    preference_function: Option<PreferenceFunction>,
    #[command(flatten)]
    balance: BalanceArgs,
}

#[derive(Args)]
struct SolveArgs {
    #[command(flatten)]
    input: InstanceArgs,
    #[arg(long, default_value = "rpipage-l2")]
    algorithm: Algorithm,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    repetitions: usize,
    /// Keep each conflict edge with this probability before relaxing.
    #[arg(long)]
    sparsify: Option<f64>,
    /// Coarsen similar nodes into supernodes before relaxing.
    #[arg(long)]
    compact: bool,
    #[arg(long, default_value_t = DEFAULT_TARGET_SIZE, requires = "compact")]
    target_size: usize,
    /// auto, none, exact or lp-bound.
    #[arg(long, default_value = "auto")]
    reference: ReferenceMode,
    #[arg(long)]
    max_lp_iterations: Option<usize>,
    /// Stop the LP this many seconds into the solve and round its last feasible point.
    #[arg(long)]
    lp_time_limit: Option<f64>,
    #[arg(long, default_value_t = tfc::exact::DEFAULT_NODE_BUDGET)]
    exact_budget: u64,
    /// JSON report; stdout when omitted.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Best assignment in the canonical assignment format.
    #[arg(long)]
    assignment: Option<PathBuf>,
}

impl SolveArgs {
    fn options(&self, algorithm: Algorithm) -> SolveOptions {
        SolveOptions {
            algorithm,
            seed: self.seed,
            repetitions: self.repetitions,
            sparsify: self.sparsify,
            compact: self.compact.then_some(self.target_size),
            reference: self.reference,
            max_lp_iterations: self.max_lp_iterations,
            lp_time_limit: self.lp_time_limit,
            exact_budget: self.exact_budget,
        }
    }
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    input: InstanceArgs,
    /// Comma-separated α grid.
    #[arg(long, value_delimiter = ',', default_value = "0,0.5,1,2,10")]
    alphas: Vec<f64>,
    /// Comma-separated algorithms.
    #[arg(long, value_delimiter = ',', default_value = "exact,pipage-l1,rpipage-l2,greedy,random")]
    algorithms: Vec<Algorithm>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    repetitions: usize,
    #[arg(long)]
    sparsify: Option<f64>,
    #[arg(long)]
    max_lp_iterations: Option<usize>,
    #[arg(long, default_value_t = tfc::exact::DEFAULT_NODE_BUDGET)]
    exact_budget: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvaluateArgs {
    #[command(flatten)]
    input: InstanceArgs,
    /// Assignment files, reported in the given order.
    #[arg(required = true)]
    assignments: Vec<PathBuf>,
    /// Generator metadata; enables rank, friend and gender metrics.
    #[arg(long)]
    metadata: Option<PathBuf>,
    /// JSON output; a table is always printed to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Serialize, Deserialize)]
struct Metadata {
    schema: String,
    generator: String,
    seed: u64,
    config: serde_json::Value,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    gender: Option<Vec<Gender>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    department: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    block: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    rankings: Option<RankingData>,
}

#[derive(Debug, Serialize)]
struct EvaluatedAssignment {
    path: String,
    objective: ObjectiveBreakdown,
    #[serde(skip_serializing_if = "Option::is_none")]
    quality: Option<QualityMetrics>,
    #[serde(skip_serializing_if = "Option::is_none")]
    average_gender_gap: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    changed_fraction: Option<f64>,
}

struct CliError {
    code: u8,
    message: String,
}

impl CliError {
    fn usage(message: impl Into<String>) -> Self {
        CliError { code: 2, message: message.into() }
    }
}

impl From<IoError> for CliError {
    fn from(e: IoError) -> Self {
        let code = match e {
            IoError::File { .. } => 1,
            _ => 4,
        };
        CliError { code, message: e.to_string() }
    }
}

impl From<SolveError> for CliError {
    fn from(e: SolveError) -> Self {
        let code = match &e {
            SolveError::Options(_) => 2,
            _ if e.lp_limit().is_some() => 3,
            SolveError::Model(_) => 4,
            _ => 1,
        };
        CliError { code, message: e.to_string() }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let result = match cli.command {
        Command::Generate(a) => generate(a),
        Command::Solve(a) => run_solve(a),
        Command::Sweep(a) => sweep(a),
        Command::Evaluate(a) => run_evaluate(a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("tfc: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}

/// Canonical instance text with the config echo as a comment after the header.
fn instance_with_echo(inst: &Instance, echo: &serde_json::Value) -> String {
    let text = io::write_instance(inst);
    let (header, rest) = text.split_once('\n').expect("header line");
    format!("{header}\n# config {echo}\n{rest}")
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    Ok(io::write_atomic(path, text.as_bytes())?)
}

fn generate(a: GenerateArgs) -> Result<u8, CliError> {
    let mut meta = Metadata {
        schema: METADATA_SCHEMA.into(),
        generator: String::new(),
        seed: a.seed,
        config: serde_json::Value::Null,
        gender: None,
        department: None,
        block: None,
        rankings: None,
    };
    let inst = match a.kind {
        Generator::Company => {
            let mut config = io::CompanyConfig::with_employees(a.employees.unwrap_or(4000));
            config.balance = a.balance.get().unwrap_or(config.balance);
            let data = io::generate_company(&config, a.seed)?;
            meta.generator = "company".into();
            meta.config = serde_json::to_value(&config).expect("serializable");
            meta.gender = Some(data.gender);
            meta.department = Some(data.department);
            data.instance
        }
        Generator::SynthTf => {
            let d = io::SynthTfConfig::default();
            let config = io::SynthTfConfig {
                blocks: a.blocks.unwrap_or(d.blocks),
                block_size: a.block_size.unwrap_or(d.block_size),
                tasks: a.tasks.unwrap_or(d.tasks),
                balance: a.balance.get().unwrap_or(d.balance),
                ..d
            };
            let data = io::generate_synth_tf(&config, a.seed)?;
            meta.generator = "synth-tf".into();
            meta.config = serde_json::to_value(&config).expect("serializable");
            meta.block = Some(data.block);
            data.instance
        }
        Generator::Education => {
            let d = io::EducationConfig::default();
            let config = io::EducationConfig {
                students: a.students.unwrap_or(d.students),
                projects: a.projects.unwrap_or(d.projects),
                function: a.preference_function.unwrap_or(d.function),
                balance: a.balance.get().unwrap_or(d.balance),
                ..d
            };
            let (inst, data) = io::generate_education(&config, a.seed)?;
            meta.generator = "education".into();
            meta.config = serde_json::to_value(&config).expect("serializable");
            meta.rankings = Some(data);
            inst
        }
    };
    let echo = json!({ "generator": meta.generator, "seed": a.seed, "config": meta.config });
    write_text(&a.out, &instance_with_echo(&inst, &echo))?;
    if let Some(path) = &a.metadata {
        io::save_report(&meta, path)?;
    }
    Ok(0)
}

fn run_solve(a: SolveArgs) -> Result<u8, CliError> {
    let (inst, _) = a.input.load()?;
    let mut report = solve::solve(&inst, &a.options(a.algorithm))?;
    report.config.instance_path = Some(a.input.source());
    match &a.report {
        Some(path) => io::save_report(&report, path)?,
        None => println!("{}", serde_json::to_string_pretty(&report).expect("serializable")),
    }
    if let Some(path) = &a.assignment {
        let best = report.best_assignment(&inst)?;
        io::save_assignment(&inst, &best, path)?;
    }
    if report.lp_hit_limit() {
        eprintln!("tfc: LP stopped at its iteration or time limit; the report uses the last feasible point");
        return Ok(3);
    }
    Ok(0)
}

fn sweep(a: SweepArgs) -> Result<u8, CliError> {
    let (inst, _) = a.input.load()?;
    let opts = SolveOptions {
        seed: a.seed,
        repetitions: a.repetitions,
        sparsify: a.sparsify,
        max_lp_iterations: a.max_lp_iterations,
        exact_budget: a.exact_budget,
        reference: ReferenceMode::None,
        ..SolveOptions::default()
    };
    if a.alphas.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
        return Err(CliError::usage("α values must be finite and non-negative"));
    }
    let points = eval::alpha_sweep(&inst, &a.alphas, &a.algorithms, &opts);
    let algorithms: Vec<String> = a.algorithms.iter().map(|x| x.to_string()).collect();
    let echo = json!({
        "instance": a.input.source(),
        "alphas": a.alphas,
        "algorithms": algorithms,
        "seed": a.seed,
        "repetitions": a.repetitions,
        "sparsify": a.sparsify,
    });
    write_text(&a.out, &io::write_sweep(&points, &echo.to_string()))?;
    Ok(0)
}

fn run_evaluate(a: EvaluateArgs) -> Result<u8, CliError> {
    let (inst, csv_rankings) = a.input.load()?;
    let meta: Option<Metadata> = a.metadata.as_deref().map(io::load_report).transpose()?;
    let rankings = csv_rankings.or_else(|| meta.as_ref().and_then(|m| m.rankings.clone()));
    let original = meta.as_ref().and_then(|m| m.department.clone()).map(Assignment::new);

    let mut rows = Vec::with_capacity(a.assignments.len());
    for path in &a.assignments {
        let x = io::load_assignment(path, &inst).map_err(|e| match e {
            IoError::File { .. } => CliError::from(e),
            _ => CliError { code: 4, message: format!("{}: {e}", path.display()) },
        })?;
        let quality = match &rankings {
            Some(r) => {
                Some(eval::quality_metrics(&inst, r, &x).map_err(|e| CliError { code: 4, message: e.to_string() })?)
            }
            None => None,
        };
        let gender = meta.as_ref().and_then(|m| m.gender.as_ref());
        rows.push(EvaluatedAssignment {
            path: path.display().to_string(),
            objective: evaluate(&inst, &x).map_err(IoError::from)?,
            quality,
            average_gender_gap: gender.map(|g| eval::average_gender_gap(g, &x, inst.num_tasks())),
            changed_fraction: original.as_ref().map(|o| eval::changed_fraction(o, &x)),
        });
    }
    print_table(&rows);
    if let Some(path) = &a.out {
        let doc = json!({
            "schema": EVALUATION_SCHEMA,
            "config": { "instance": a.input.source(), "metadata": a.metadata },
            "assignments": rows,
        });
        io::save_report(&doc, path)?;
    }
    Ok(0)
}

fn print_table(rows: &[EvaluatedAssignment]) {
    let mut lines: Vec<(String, Vec<String>)> = vec![
        ("".into(), rows.iter().map(|r| r.path.clone()).collect()),
        ("F_R".into(), rows.iter().map(|r| r.objective.task_satisfaction.to_string()).collect()),
        ("F_G".into(), rows.iter().map(|r| r.objective.social_satisfaction.to_string()).collect()),
        ("lambda".into(), rows.iter().map(|r| r.objective.lambda.to_string()).collect()),
        ("F".into(), rows.iter().map(|r| r.objective.total.to_string()).collect()),
    ];
    if rows.iter().all(|r| r.quality.is_some()) {
        for (name, pick) in [
            ("rank max", (|q: &QualityMetrics| q.rank.max) as fn(&QualityMetrics) -> f64),
            ("rank avg", |q| q.rank.avg),
            ("rank std", |q| q.rank.std),
            ("friends max", |q| q.friends.max),
            ("friends avg", |q| q.friends.avg),
            ("friends std", |q| q.friends.std),
        ] {
            lines.push((
                name.into(),
                rows.iter().map(|r| format!("{:.3}", pick(r.quality.as_ref().unwrap()))).collect(),
            ));
        }
    }
    if rows.iter().all(|r| r.average_gender_gap.is_some()) {
        lines.push(("avg gap".into(), rows.iter().map(|r| format!("{:.2}", r.average_gender_gap.unwrap())).collect()));
    }
    if rows.iter().all(|r| r.changed_fraction.is_some()) {
        lines.push(("changed".into(), rows.iter().map(|r| format!("{:.4}", r.changed_fraction.unwrap())).collect()));
    }
    let label = lines.iter().map(|(n, _)| n.len()).max().unwrap_or(0);
    let widths: Vec<usize> =
        (0..rows.len()).map(|c| lines.iter().map(|(_, cells)| cells[c].len()).max().unwrap_or(0)).collect();
    for (name, cells) in &lines {
        let cols: Vec<String> = cells.iter().zip(&widths).map(|(c, w)| format!("{c:>w$}")).collect();
        println!("{name:<label$}  {}", cols.join("  "));
    }
}
