//! The `forkguard` command line.
//!
//! Exit codes: 0 success, 2 invalid arguments, 3 I/O or file-format failure,
//! 4 numerical failure. Every file or table written starts with a header
//! naming the tool version, the subcommand, the seed and every parameter.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use crate::collusion_detector::{
    self, detect, labeled_examples, metrics_from_scores, predict, Decision, LinearModel,
    TrainingConfig, DEFAULT_THRESHOLD,
};
use crate::consortium_sim::{
    estimate_risk_monte_carlo, generate_dataset, read_trace, write_trace, write_trace_to, Scenario,
    DEFAULT_LEAD_CUTOFF,
};
use crate::error::{Error, Result};
use crate::payoff_game::{
    attacker_payoff, expected_attack_payoff, is_attack_rational, AttackStake, RationalityMode,
};
use crate::race_math::{
    double_spend_risk, double_spend_risk_series, min_confirmations, Confirmations,
    HashratePartition, DEFAULT_N_CAP,
};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Errors whose `name` is one of these are reported as `--name`.
const FLAG_NAMES: &[&str] = &[
    "q",
    "n",
    "eps",
    "n_cap",
    "v",
    "o",
    "B",
    "trials",
    "lead_cutoff",
    "count",
    "threshold",
    "learning_rate",
    "epochs",
    "tail_tolerance",
];

#[derive(Debug, Parser)]
#[command(
    name = "forkguard",
    version,
    about = "Double-spend risk, collusion simulation and attack detection for proof-of-work ledgers"
)]
pub struct Cli {
    /// Root RNG seed; falls back to $FORKGUARD_SEED, then 0.
    #[arg(long, global = true, env = "FORKGUARD_SEED", default_value_t = 0)]
    pub seed: u64,

    /// Tabular output format.
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    pub format: Format,

    /// Write the main output here instead of stdout.
    #[arg(long, global = true, value_name = "PATH")]
    pub output: Option<PathBuf>,

    /// Worker threads for simulate and gen-data (results do not depend on it).
    #[arg(long, global = true, value_name = "N")]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    /// A JSON document with a `header` object and a `rows` array.
    Json,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Double-spend success probability for a range of confirmation counts.
    Risk(RiskArgs),
    /// Minimum confirmations that push the risk below each ceiling.
    Policy(PolicyArgs),
    /// Attacker payoff for one attack.
    Payoff(PayoffArgs),
    /// Monte Carlo estimate of the double-spend risk.
    Simulate(SimulateArgs),
    /// Generate a labelled episode trace from a collusion scenario.
    GenData(GenDataArgs),
    /// Train the attack classifier on a trace.
    Train(TrainArgs),
    /// Run every episode of a trace through the approve/cancel gate.
    Detect(DetectArgs),
    /// Classification metrics of a model on a labelled trace.
    Evaluate(DetectArgs),
    /// Plot-ready tables: confirmation policy grid or risk-vs-n curves.
    Report(ReportArgs),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Risk(_) => "risk",
            Command::Policy(_) => "policy",
            Command::Payoff(_) => "payoff",
            Command::Simulate(_) => "simulate",
            Command::GenData(_) => "gen-data",
            Command::Train(_) => "train",
            Command::Detect(_) => "detect",
            Command::Evaluate(_) => "evaluate",
            Command::Report(_) => "report",
        }
    }

    fn params(&self) -> Value {
        let value = match self {
            Command::Risk(a) => serde_json::to_value(a),
            Command::Policy(a) => serde_json::to_value(a),
            Command::Payoff(a) => serde_json::to_value(a),
            Command::Simulate(a) => serde_json::to_value(a),
            Command::GenData(a) => serde_json::to_value(a),
            Command::Train(a) => serde_json::to_value(a),
            Command::Detect(a) | Command::Evaluate(a) => serde_json::to_value(a),
            Command::Report(a) => serde_json::to_value(a),
        };
        value.expect("arguments serialize")
    }
}

/// Inclusive range of confirmation counts, written `a..b`, `a..=b` or `n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ConfirmationRange {
    pub first: u32,
    pub last: u32,
}

impl FromStr for ConfirmationRange {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let parse = |t: &str| {
            t.trim()
                .parse::<u32>()
                .map_err(|_| format!("`{t}` is not a confirmation count"))
        };
        let (first, last) = match s.split_once("..") {
            Some((a, b)) => (parse(a)?, parse(b.strip_prefix('=').unwrap_or(b))?),
            None => {
                let n = parse(s)?;
                (n, n)
            }
        };
        if first < 1 || last < first {
            return Err(format!("`{s}` must satisfy 1 <= first <= last"));
        }
        Ok(Self { first, last })
    }
}

#[derive(Debug, Args, Serialize)]
pub struct RiskArgs {
    /// Attacker hashrate share in [0, 1].
    #[arg(long)]
    pub q: f64,
    /// Confirmation counts, e.g. `1..6` (inclusive) or `4`.
    #[arg(long, default_value = "1..10")]
    pub n: ConfirmationRange,
    /// Tail mass at which the direct series is truncated.
    #[arg(long, default_value_t = 1e-12)]
    pub tail_tolerance: f64,
}

#[derive(Debug, Args, Serialize)]
pub struct PolicyArgs {
    /// Attacker hashrate share in [0, 1].
    #[arg(long)]
    pub q: f64,
    /// Comma-separated risk ceilings in (0, 1).
    #[arg(long, value_delimiter = ',', required = true)]
    pub eps: Vec<f64>,
    /// Largest confirmation count searched.
    #[arg(long, default_value_t = DEFAULT_N_CAP)]
    pub n_cap: u32,
}

#[derive(Debug, Args, Serialize)]
pub struct PayoffArgs {
    /// Value of the commodity or service being bought.
    #[arg(long)]
    pub v: f64,
    /// Pre-mined attacker blocks forfeited on failure.
    #[arg(long, default_value_t = 0)]
    pub o: u32,
    /// Value of each forfeited block.
    #[arg(long = "B", default_value_t = 0.0)]
    #[serde(rename = "B")]
    pub block_value: f64,
    /// Attacker hashrate share in [0, 1].
    #[arg(long)]
    pub q: f64,
    /// Weight both outcomes by the exact success probability.
    #[arg(long)]
    pub expected: bool,
    /// Confirmations the merchant waits for (expected mode).
    #[arg(long, default_value_t = 1)]
    pub n: u32,
}

#[derive(Debug, Args, Serialize)]
pub struct SimulateArgs {
    /// Attacker hashrate share in [0, 1).
    #[arg(long)]
    pub q: f64,
    /// Confirmations the merchant waits for.
    #[arg(long, default_value_t = 1)]
    pub n: u32,
    /// Number of simulated races (at least 100).
    #[arg(long, default_value_t = 1_000_000)]
    pub trials: u64,
    /// Honest lead at which a race counts as lost for the attacker.
    #[arg(long, default_value_t = DEFAULT_LEAD_CUTOFF)]
    pub lead_cutoff: u32,
}

#[derive(Debug, Args, Serialize)]
pub struct GenDataArgs {
    /// Scenario TOML file; the bundled default scenario when omitted.
    #[arg(long, value_name = "PATH")]
    pub scenario: Option<PathBuf>,
    /// Number of episodes.
    #[arg(long, default_value_t = 10_000)]
    pub count: u64,
}

#[derive(Debug, Args, Serialize)]
pub struct TrainArgs {
    /// Training trace (JSON lines).
    #[arg(long, value_name = "PATH")]
    pub trace: PathBuf,
    /// Where to write the trained model.
    #[arg(long, value_name = "PATH")]
    #[serde(skip)]
    pub model: PathBuf,
    /// Optional CSV file receiving the per-epoch loss.
    #[arg(long, value_name = "PATH")]
    #[serde(skip)]
    pub loss_curve: Option<PathBuf>,
    /// Gradient descent step size.
    #[arg(long, default_value_t = TrainingConfig::default().learning_rate)]
    pub learning_rate: f64,
    /// Full-batch gradient steps.
    #[arg(long, default_value_t = TrainingConfig::default().epochs)]
    pub epochs: u32,
}

#[derive(Debug, Args, Serialize)]
pub struct DetectArgs {
    /// Model file written by `train`.
    #[arg(long, value_name = "PATH")]
    pub model: PathBuf,
    /// Trace of episodes to judge.
    #[arg(long, value_name = "PATH")]
    pub trace: PathBuf,
    /// Attack probability at or above which a transaction is cancelled.
    #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
    pub threshold: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportTable {
    /// Minimum confirmations for risk ceilings 10%, 1% and 0.1% over a q grid.
    Rosenfeld,
    /// Double-spend risk against confirmations for several q.
    Curves,
}

#[derive(Debug, Args, Serialize)]
pub struct ReportArgs {
    /// Which table to produce.
    #[arg(long, value_enum, default_value_t = ReportTable::Rosenfeld)]
    pub table: ReportTable,
    /// Comma-separated attacker shares; a 0.05..0.5 grid by default.
    #[arg(long, value_delimiter = ',')]
    pub q: Vec<f64>,
    /// Largest confirmation count in the curves table.
    #[arg(long, default_value_t = 30)]
    pub n_max: u32,
}

#[derive(Debug, Clone, PartialEq)]
enum Cell {
    Int(i64),
    Float(f64),
    Text(String),
    Bool(bool),
    Missing,
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Float(v)
    }
}
impl From<u32> for Cell {
    fn from(v: u32) -> Self {
        Cell::Int(i64::from(v))
    }
}
impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::Int(i64::try_from(v).unwrap_or(i64::MAX))
    }
}
impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Bool(v)
    }
}
impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Int(v) => v.to_string(),
            Cell::Float(v) => v.to_string(),
            Cell::Text(v) => v.clone(),
            Cell::Bool(v) => v.to_string(),
            Cell::Missing => "NA".into(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::Int(v) => json!(v),
            Cell::Float(v) => json!(v),
            Cell::Text(v) => json!(v),
            Cell::Bool(v) => json!(v),
            Cell::Missing => Value::Null,
        }
    }
}

struct Table {
    columns: Vec<&'static str>,
    rows: Vec<Vec<Cell>>,
}

impl Table {
    fn new(columns: &[&'static str]) -> Self {
        Self {
            columns: columns.to_vec(),
            rows: Vec::new(),
        }
    }

    fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }
}

/// Header echoed at the top of every output.
#[derive(Clone)]
struct RunHeader {
    command: &'static str,
    seed: u64,
    format: Format,
    params: Value,
}

impl RunHeader {
    fn comment_lines(&self) -> Vec<String> {
        vec![
            format!("forkguard {VERSION} {}", self.command),
            format!("seed={}", self.seed),
            format!("format={}", self.format_name()),
            format!("params={}", self.params),
        ]
    }

    fn format_name(&self) -> &'static str {
        match self.format {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }

    fn json(&self) -> Value {
        json!({
            "tool": "forkguard",
            "version": VERSION,
            "command": self.command,
            "seed": self.seed,
            "params": self.params,
        })
    }

    fn render(&self, table: &Table) -> String {
        match self.format {
            Format::Csv => {
                let mut out = String::new();
                for line in self.comment_lines() {
                    let _ = writeln!(out, "# {line}");
                }
                out.push_str(&table.columns.join(","));
                out.push('\n');
                for row in &table.rows {
                    let cells: Vec<String> = row.iter().map(Cell::csv).collect();
                    out.push_str(&cells.join(","));
                    out.push('\n');
                }
                out
            }
            Format::Json => {
                let rows: Vec<Value> = table
                    .rows
                    .iter()
                    .map(|row| {
                        Value::Object(
                            table
                                .columns
                                .iter()
                                .zip(row)
                                .map(|(c, v)| (c.to_string(), v.json()))
                                .collect(),
                        )
                    })
                    .collect();
                let doc = json!({ "header": self.json(), "rows": rows });
                let mut text = serde_json::to_string_pretty(&doc).expect("json output");
                text.push('\n');
                text
            }
        }
    }
}

/// Parses `args` (including the program name), runs the subcommand and
/// returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let result = match cli.threads {
        Some(threads) => match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
            Ok(pool) => pool.install(|| execute(&cli)),
            Err(e) => Err(Error::invalid("threads", e.to_string())),
        },
        None => execute(&cli),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {}", describe(&e));
            e.exit_code()
        }
    }
}

fn describe(e: &Error) -> String {
    match e {
        Error::InvalidArgument { name, reason } if FLAG_NAMES.contains(name) => {
            format!("invalid value for --{}: {reason}", name.replace('_', "-"))
        }
        other => other.to_string(),
    }
}

fn execute(cli: &Cli) -> Result<()> {
    let header = RunHeader {
        command: cli.command.name(),
        seed: cli.seed,
        format: cli.format,
        params: cli.command.params(),
    };
    match &cli.command {
        Command::Risk(a) => emit(cli, &header, &risk_table(a)?),
        Command::Policy(a) => emit(cli, &header, &policy_table(a)?),
        Command::Payoff(a) => emit(cli, &header, &payoff_table(a)?),
        Command::Simulate(a) => emit(cli, &header, &simulate_table(a, cli.seed)?),
        Command::GenData(a) => gen_data(cli, &header, a),
        Command::Train(a) => train(cli, &header, a),
        Command::Detect(a) => emit(cli, &header, &detect_table(a)?),
        Command::Evaluate(a) => emit(cli, &header, &evaluate_table(a)?),
        Command::Report(a) => emit(cli, &header, &report_table(a)?),
    }
}

fn emit(cli: &Cli, header: &RunHeader, table: &Table) -> Result<()> {
    write_output(cli.output.as_deref(), header.render(table).as_bytes())
}

fn write_output(path: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match path {
        Some(path) => fs::write(path, bytes).map_err(|e| Error::io(path, e)),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(bytes)
                .and_then(|()| stdout.flush())
                .map_err(|e| Error::io("<stdout>", e))
        }
    }
}

fn risk_table(a: &RiskArgs) -> Result<Table> {
    let split = HashratePartition::from_attacker_share(a.q)?;
    let mut table = Table::new(&["q", "n", "closed_form", "series", "difference"]);
    for n in a.n.first..=a.n.last {
        let closed = double_spend_risk(n, split)?;
        let (series, diff) = if split.is_majority() {
            (Cell::Missing, Cell::Missing)
        } else {
            let s = double_spend_risk_series(n, split, a.tail_tolerance)?;
            (s.into(), (closed - s).into())
        };
        table.push(vec![a.q.into(), n.into(), closed.into(), series, diff]);
    }
    Ok(table)
}

fn policy_table(a: &PolicyArgs) -> Result<Table> {
    let split = HashratePartition::from_attacker_share(a.q)?;
    let mut table = Table::new(&["q", "epsilon", "n_star", "risk_at_n_star"]);
    for &eps in &a.eps {
        let policy = min_confirmations(split, eps, a.n_cap)?;
        let (n_star, risk) = match policy.confirmations {
            Confirmations::Required(n) => (n.into(), double_spend_risk(n, split)?.into()),
            Confirmations::Unattainable => ("unattainable".into(), Cell::Missing),
        };
        table.push(vec![a.q.into(), eps.into(), n_star, risk]);
    }
    Ok(table)
}

fn payoff_table(a: &PayoffArgs) -> Result<Table> {
    let split = HashratePartition::from_attacker_share(a.q)?;
    let stake = AttackStake::new(a.v, a.o, a.block_value)?;
    let (mode, payoff, n) = if a.expected {
        (
            RationalityMode::Expected,
            expected_attack_payoff(stake, split, a.n)?,
            Cell::from(a.n),
        )
    } else {
        (
            RationalityMode::Step,
            attacker_payoff(stake, split),
            Cell::Missing,
        )
    };
    let rational = is_attack_rational(stake, split, mode, a.n)?;
    let mut table = Table::new(&["v", "o", "B", "q", "mode", "n", "payoff", "rational"]);
    table.push(vec![
        a.v.into(),
        a.o.into(),
        a.block_value.into(),
        a.q.into(),
        if a.expected { "expected" } else { "step" }.into(),
        n,
        payoff.amount().into(),
        rational.into(),
    ]);
    Ok(table)
}

fn simulate_table(a: &SimulateArgs, seed: u64) -> Result<Table> {
    let split = HashratePartition::from_attacker_share(a.q)?;
    let est = estimate_risk_monte_carlo(split, a.n, a.trials, a.lead_cutoff, seed)?;
    let closed = double_spend_risk(a.n, split)?;
    let z = if est.std_error > 0.0 {
        Cell::Float((est.estimate - closed) / est.std_error)
    } else {
        Cell::Missing
    };
    let mut table = Table::new(&[
        "q",
        "n",
        "trials",
        "lead_cutoff",
        "successes",
        "estimate",
        "std_error",
        "closed_form",
        "z_score",
    ]);
    table.push(vec![
        a.q.into(),
        a.n.into(),
        a.trials.into(),
        a.lead_cutoff.into(),
        est.successes.into(),
        est.estimate.into(),
        est.std_error.into(),
        closed.into(),
        z,
    ]);
    Ok(table)
}

fn load_scenario(path: Option<&Path>) -> Result<Scenario> {
    match path {
        Some(p) => Scenario::load(p),
        None => Ok(Scenario::default()),
    }
}

fn gen_data(cli: &Cli, header: &RunHeader, a: &GenDataArgs) -> Result<()> {
    let scenario = load_scenario(a.scenario.as_deref())?;
    let data = generate_dataset(&scenario.network(), &scenario, a.count, cli.seed)?;
    let mut lines = header.comment_lines();
    lines.push(format!(
        "scenario={}",
        serde_json::to_string(&scenario).expect("scenario serializes")
    ));
    match &cli.output {
        Some(path) => write_trace(path, &lines, &data.episodes)?,
        None => write_trace_to(std::io::stdout().lock(), &lines, &data.episodes)
            .map_err(|e| Error::io("<stdout>", e))?,
    }
    let s = &data.summary;
    eprintln!(
        "{} episodes: {} attacks (mean v {:.2}, {} succeeded), {} honest (mean v {:.2})",
        s.episodes,
        s.attacks.count,
        s.attacks.mean_value_v,
        s.successful_attacks,
        s.honest.count,
        s.honest.mean_value_v
    );
    Ok(())
}

fn train(cli: &Cli, header: &RunHeader, a: &TrainArgs) -> Result<()> {
    let episodes = read_trace(&a.trace)?;
    let config = TrainingConfig {
        learning_rate: a.learning_rate,
        epochs: a.epochs,
        seed: cli.seed,
    };
    let training = collusion_detector::train_on_episodes(&episodes, config)?;
    let model = training.model;
    model.save(&a.model, &header.comment_lines())?;

    if let Some(path) = &a.loss_curve {
        let mut curve = Table::new(&["epoch", "loss"]);
        for (epoch, loss) in training.loss_curve.iter().enumerate() {
            curve.push(vec![(epoch as u64).into(), (*loss).into()]);
        }
        let csv = RunHeader {
            format: Format::Csv,
            ..header.clone()
        }
        .render(&curve);
        fs::write(path, csv).map_err(|e| Error::io(path, e))?;
    }

    let data = labeled_examples(&episodes, model.median_v())?;
    let metrics = collusion_detector::evaluate(&model, &data, DEFAULT_THRESHOLD)?;
    let mut table = Table::new(&["parameter", "value"]);
    for (name, w) in collusion_detector::FEATURE_NAMES.iter().zip(model.weights) {
        table.push(vec![format!("weight_{name}").as_str().into(), w.into()]);
    }
    table.push(vec!["bias".into(), model.bias.into()]);
    table.push(vec!["median_v".into(), model.median_v().into()]);
    table.push(vec![
        "final_loss".into(),
        model.training_meta.final_loss.into(),
    ]);
    table.push(vec!["train_accuracy".into(), metrics.accuracy.into()]);
    table.push(vec![
        "train_auc".into(),
        metrics.auc.map_or(Cell::Missing, Cell::Float),
    ]);
    emit(cli, header, &table)
}

fn detect_table(a: &DetectArgs) -> Result<Table> {
    let model = LinearModel::load(&a.model)?;
    let episodes = read_trace(&a.trace)?;
    let mut table = Table::new(&[
        "index",
        "seed",
        "attack_probability",
        "decision",
        "threshold",
        "attack_attempted",
    ]);
    let mut cancelled = 0u64;
    for (i, e) in episodes.iter().enumerate() {
        let verdict = detect(&model, &e.observables(), a.threshold)?;
        let decision = match verdict.decision {
            Decision::Approve => "Approve",
            Decision::CancelAndRetry => {
                cancelled += 1;
                "CancelAndRetry"
            }
        };
        table.push(vec![
            (i as u64).into(),
            e.seed.to_string().as_str().into(),
            verdict.attack_probability.into(),
            decision.into(),
            verdict.threshold_used.into(),
            e.attack_attempted.into(),
        ]);
    }
    if !episodes.is_empty() {
        eprintln!(
            "cancelled {cancelled} of {} transactions ({:.4})",
            episodes.len(),
            cancelled as f64 / episodes.len() as f64
        );
    }
    Ok(table)
}

fn evaluate_table(a: &DetectArgs) -> Result<Table> {
    let model = LinearModel::load(&a.model)?;
    let episodes = read_trace(&a.trace)?;
    let data = labeled_examples(&episodes, model.median_v())?;
    let scores: Vec<f64> = data.iter().map(|e| predict(&model, &e.features)).collect();
    let labels: Vec<bool> = data.iter().map(|e| e.attack).collect();
    let m = metrics_from_scores(&scores, &labels, a.threshold)?;
    let mut table = Table::new(&["metric", "value"]);
    let rows: [(&str, Cell); 9] = [
        ("episodes", (data.len() as u64).into()),
        ("accuracy", m.accuracy.into()),
        ("precision", m.precision.into()),
        ("recall", m.recall.into()),
        ("auc", m.auc.map_or(Cell::Missing, Cell::Float)),
        ("true_positive", m.confusion.true_positive.into()),
        ("false_positive", m.confusion.false_positive.into()),
        ("true_negative", m.confusion.true_negative.into()),
        ("false_negative", m.confusion.false_negative.into()),
    ];
    for (name, value) in rows {
        table.push(vec![name.into(), value]);
    }
    Ok(table)
}

pub const REPORT_Q_GRID: [f64; 10] = [0.05, 0.1, 0.15, 0.2, 0.25, 0.3, 0.35, 0.4, 0.45, 0.5];
pub const REPORT_EPSILONS: [f64; 3] = [0.1, 0.01, 0.001];

fn report_table(a: &ReportArgs) -> Result<Table> {
    let grid: Vec<f64> = if a.q.is_empty() {
        REPORT_Q_GRID.to_vec()
    } else {
        a.q.clone()
    };
    match a.table {
        ReportTable::Rosenfeld => {
            let mut table = Table::new(&["q", "epsilon", "n_star", "risk_at_n_star"]);
            for &q in &grid {
                let rows = policy_table(&PolicyArgs {
                    q,
                    eps: REPORT_EPSILONS.to_vec(),
                    n_cap: DEFAULT_N_CAP,
                })?;
                table.rows.extend(rows.rows);
            }
            Ok(table)
        }
        ReportTable::Curves => {
            if a.n_max < 1 {
                return Err(Error::invalid("n", "--n-max must be at least 1"));
            }
            let mut table = Table::new(&["q", "n", "risk"]);
            for &q in &grid {
                let split = HashratePartition::from_attacker_share(q)?;
                for n in 1..=a.n_max {
                    table.push(vec![
                        q.into(),
                        n.into(),
                        double_spend_risk(n, split)?.into(),
                    ]);
                }
            }
            Ok(table)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_confirmation_ranges() {
        let r: ConfirmationRange = "1..6".parse().unwrap();
        assert_eq!((r.first, r.last), (1, 6));
        let r: ConfirmationRange = "2..=4".parse().unwrap();
        assert_eq!((r.first, r.last), (2, 4));
        let r: ConfirmationRange = "3".parse().unwrap();
        assert_eq!((r.first, r.last), (3, 3));
        assert!("0..3".parse::<ConfirmationRange>().is_err());
        assert!("5..2".parse::<ConfirmationRange>().is_err());
        assert!("x".parse::<ConfirmationRange>().is_err());
    }

    #[test]
    fn risk_rows_carry_both_routes() {
        let t = risk_table(&RiskArgs {
            q: 0.1,
            n: "1..6".parse().unwrap(),
            tail_tolerance: 1e-12,
        })
        .unwrap();
        assert_eq!(t.rows.len(), 6);
        let Cell::Float(r1) = t.rows[0][2] else {
            panic!()
        };
        assert!((r1 - 0.2).abs() < 1e-15);
        let Cell::Float(diff) = t.rows[5][4] else {
            panic!()
        };
        assert!(diff.abs() < 1e-10);
    }

    #[test]
    fn majority_risk_rows_are_one_without_series() {
        let t = risk_table(&RiskArgs {
            q: 0.5,
            n: "1..3".parse().unwrap(),
            tail_tolerance: 1e-12,
        })
        .unwrap();
        for row in &t.rows {
            assert_eq!(row[2], Cell::Float(1.0));
            assert_eq!(row[3], Cell::Missing);
        }
    }

    #[test]
    fn invalid_arguments_name_their_flag() {
        let e = Error::invalid("q", "1.5 is not in [0, 1]");
        assert!(describe(&e).contains("--q"));
        let e = Error::invalid("lead_cutoff", "too small");
        assert!(describe(&e).contains("--lead-cutoff"));
        let e = Error::invalid("stakeholders", "bad");
        assert!(!describe(&e).contains("--"));
    }

    #[test]
    fn csv_header_echoes_parameters() {
        let header = RunHeader {
            command: "risk",
            seed: 9,
            format: Format::Csv,
            params: json!({"q": 0.1}),
        };
        let text = header.render(&Table::new(&["a"]));
        assert!(text.starts_with(&format!("# forkguard {VERSION} risk\n# seed=9\n")));
        assert!(text.contains("# params={\"q\":0.1}\n"));
        assert!(text.ends_with("a\n"));
    }
}
