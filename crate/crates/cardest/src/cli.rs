//! Command-line arguments. Every option can also be given in a TOML config
//! file, in a table named after the command (`[gen]`, `[bench]`, ...) with
//! the flag's long name as key; flags win over the file.

use std::path::{Path, PathBuf};

use clap::{ArgAction, Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};
use crate::formats::read_text;

#[derive(Debug, Parser)]
#[command(name = "cardest", version, about = "Cardinality-estimation workbench")]
pub struct Cli {
    /// Root that relative paths resolve against (default: current directory).
    #[arg(long, global = true)]
    pub workspace: Option<PathBuf>,
    /// TOML file with defaults for every flag.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Worker threads (default: available cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Load CSV tables described by a TOML schema into a catalog snapshot.
    Ingest(IngestArgs),
    /// Generate a synthetic database as a catalog snapshot.
    Synth(SynthArgs),
    /// Rebuild column statistics of a catalog.
    Stats(StatsArgs),
    /// Generate a workload file.
    Gen(GenArgs),
    /// Train bootstrap replicas of the digit model.
    Train(TrainArgs),
    /// Estimate one query.
    Estimate(EstimateArgs),
    /// Q-error benchmark of a pipeline over a workload's test split.
    Bench(BenchArgs),
    /// Simulated end-to-end time with cost-based routing.
    E2e(E2eArgs),
    /// CSV plot data from bench and e2e outputs.
    PlotData(PlotDataArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Ingest(_) => "ingest",
            Command::Synth(_) => "synth",
            Command::Stats(_) => "stats",
            Command::Gen(_) => "gen",
            Command::Train(_) => "train",
            Command::Estimate(_) => "estimate",
            Command::Bench(_) => "bench",
            Command::E2e(_) => "e2e",
            Command::PlotData(_) => "plot-data",
        }
    }
}

/// Fills unset fields of `self` from `other`.
pub trait Merge {
    fn merge(&mut self, other: Self);
}

macro_rules! merge_fields {
    ($t:ty { $($opt:ident),* } flags { $($flag:ident),* }) => {
        impl Merge for $t {
            fn merge(&mut self, other: Self) {
                $( if self.$opt.is_none() { self.$opt = other.$opt; } )*
                $( self.$flag |= other.$flag; )*
            }
        }
    };
}

#[derive(Debug, Clone, Default, PartialEq, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct IngestArgs {
    /// Directory holding the CSV files.
    pub data_dir: Option<PathBuf>,
    /// TOML schema file.
    pub schema: Option<PathBuf>,
    #[arg(long)]
    pub buckets: Option<usize>,
    #[arg(long)]
    pub mcv: Option<usize>,
    /// Catalog snapshot to write [default: catalog.json].
    #[arg(long)]
    pub out: Option<PathBuf>,
}
merge_fields!(IngestArgs { data_dir, schema, buckets, mcv, out } flags {});

#[derive(Debug, Clone, Default, PartialEq, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct SynthArgs {
    #[arg(long)]
    pub tables: Option<usize>,
    #[arg(long)]
    pub rows: Option<usize>,
    #[arg(long)]
    pub zipf: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}
merge_fields!(SynthArgs { tables, rows, zipf, seed, out } flags {});

#[derive(Debug, Clone, Default, PartialEq, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct StatsArgs {
    #[arg(long)]
    pub catalog: Option<PathBuf>,
    #[arg(long)]
    pub buckets: Option<usize>,
    #[arg(long)]
    pub mcv: Option<usize>,
    /// Where to write the updated catalog [default: overwrite the input].
    #[arg(long)]
    pub out: Option<PathBuf>,
}
merge_fields!(StatsArgs { catalog, buckets, mcv, out } flags {});

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GenKind {
    Spj,
    Like,
    Distinct,
    Dynamic,
    ShiftSplit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ShiftBy {
    Joins,
    Filters,
}

#[derive(Debug, Clone, Default, PartialEq, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct GenArgs {
    #[arg(value_enum)]
    pub kind: Option<GenKind>,
    #[arg(long)]
    pub catalog: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Number of queries (spj, like).
    #[arg(long)]
    pub count: Option<usize>,
    #[arg(long)]
    pub max_joins: Option<usize>,
    #[arg(long)]
    pub max_filters: Option<usize>,
    /// Share of queries marked train (spj).
    #[arg(long)]
    pub train_frac: Option<f64>,
    /// Share of queries marked validation (spj).
    #[arg(long)]
    pub validation_frac: Option<f64>,
    /// Table and text column for LIKE patterns.
    #[arg(long)]
    pub table: Option<String>,
    #[arg(long)]
    pub column: Option<String>,
    /// Base workload (distinct, dynamic, shift-split).
    #[arg(long)]
    pub base: Option<PathBuf>,
    /// insert:delete:update, e.g. 2:1:1 (dynamic).
    #[arg(long)]
    pub ratio: Option<String>,
    /// Number of write statements (dynamic).
    #[arg(long)]
    pub writes: Option<usize>,
    #[arg(long, value_enum)]
    pub by: Option<ShiftBy>,
    /// Train gets queries with fewer than `lo` joins/filters.
    #[arg(long)]
    pub lo: Option<usize>,
    /// Test gets queries with more than `hi` joins/filters.
    #[arg(long)]
    pub hi: Option<usize>,
}
merge_fields!(GenArgs {
    kind, catalog, seed, out, count, max_joins, max_filters, train_frac, validation_frac, table, column, base, ratio, writes,
    by, lo, hi
} flags {});

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OptimizerArg {
    Sgd,
    Adam,
}

#[derive(Debug, Clone, Default, PartialEq, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct TrainArgs {
    #[arg(long)]
    pub catalog: Option<PathBuf>,
    #[arg(long)]
    pub workload: Option<PathBuf>,
    #[arg(long)]
    pub replicas: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub hidden: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long, value_enum)]
    pub optimizer: Option<OptimizerArg>,
    /// Leave out the copies of each example with one feedback turn.
    #[arg(long, action = ArgAction::SetTrue)]
    pub no_feedback_copies: bool,
    #[arg(long, action = ArgAction::SetTrue)]
    pub no_stats: bool,
    #[arg(long, action = ArgAction::SetTrue)]
    pub no_estimates: bool,
    /// Model bundle to write [default: model.json].
    #[arg(long)]
    pub out: Option<PathBuf>,
}
merge_fields!(TrainArgs { catalog, workload, replicas, seed, epochs, lr, hidden, batch_size, optimizer, out }
    flags { no_feedback_copies, no_stats, no_estimates });

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BackendKind {
    Pg,
    Sampling,
    Ndv,
    Oracle,
    Model,
    Remote,
    Mock,
}

#[derive(Debug, Clone, Default, PartialEq, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct EstimateArgs {
    #[arg(long)]
    pub catalog: Option<PathBuf>,
    #[arg(long)]
    pub query: Option<String>,
    #[arg(long, value_enum)]
    pub backend: Option<BackendKind>,
    /// Self-correct with this threshold (model, remote, mock).
    #[arg(long)]
    pub self_correct: Option<f64>,
    #[arg(long)]
    pub max_iterations: Option<usize>,
    #[arg(long, action = ArgAction::SetTrue)]
    pub no_stats: bool,
    #[arg(long, action = ArgAction::SetTrue)]
    pub no_estimates: bool,
    /// Model bundle (model backend).
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Remote endpoint settings (remote backend), a TOML file.
    #[arg(long)]
    pub remote: Option<PathBuf>,
    #[arg(long)]
    pub sampling_rate: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Print the prompt sent to the backend.
    #[arg(long, action = ArgAction::SetTrue)]
    pub show_prompt: bool,
}
merge_fields!(EstimateArgs { catalog, query, backend, self_correct, max_iterations, model, remote, sampling_rate, seed }
    flags { no_stats, no_estimates, show_prompt });

#[derive(Debug, Clone, Default, PartialEq, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct BenchArgs {
    #[arg(long)]
    pub catalog: Option<PathBuf>,
    #[arg(long)]
    pub workload: Option<PathBuf>,
    /// Pipeline description (TOML).
    #[arg(long)]
    pub pipeline: Option<PathBuf>,
    /// CSV report; a `.json` report and a `.traces.jsonl` file are written
    /// next to it [default: report.csv].
    #[arg(long)]
    pub report: Option<PathBuf>,
}
merge_fields!(BenchArgs { catalog, workload, pipeline, report } flags {});

#[derive(Debug, Clone, Default, PartialEq, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct E2eArgs {
    #[arg(long)]
    pub catalog: Option<PathBuf>,
    #[arg(long)]
    pub workload: Option<PathBuf>,
    /// Workload whose sub-query costs set the routing threshold
    /// [default: the evaluated workload's non-test queries].
    #[arg(long)]
    pub calibration: Option<PathBuf>,
    #[arg(long)]
    pub route_threshold_percentile: Option<f64>,
    /// Pipeline description of the expensive estimator (TOML).
    #[arg(long)]
    pub pipeline: Option<PathBuf>,
    #[arg(long)]
    pub cost_unit_ms: Option<f64>,
    /// JSON report [default: e2e.json].
    #[arg(long)]
    pub out: Option<PathBuf>,
}
merge_fields!(E2eArgs { catalog, workload, calibration, route_threshold_percentile, pipeline, cost_unit_ms, out } flags {});

#[derive(Debug, Clone, Default, PartialEq, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct PlotDataArgs {
    /// JSON reports written by `bench` (repeatable).
    #[arg(long)]
    pub report: Vec<PathBuf>,
    /// Trace file written by `bench`.
    #[arg(long)]
    pub traces: Option<PathBuf>,
    /// JSON report written by `e2e`.
    #[arg(long)]
    pub e2e: Option<PathBuf>,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

impl Merge for PlotDataArgs {
    fn merge(&mut self, other: Self) {
        if self.report.is_empty() {
            self.report = other.report;
        }
        if self.traces.is_none() {
            self.traces = other.traces;
        }
        if self.e2e.is_none() {
            self.e2e = other.e2e;
        }
        if self.out_dir.is_none() {
            self.out_dir = other.out_dir;
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct ConfigFile {
    pub workspace: Option<PathBuf>,
    pub jobs: Option<usize>,
    pub ingest: Option<IngestArgs>,
    pub synth: Option<SynthArgs>,
    pub stats: Option<StatsArgs>,
    pub gen: Option<GenArgs>,
    pub train: Option<TrainArgs>,
    pub estimate: Option<EstimateArgs>,
    pub bench: Option<BenchArgs>,
    pub e2e: Option<E2eArgs>,
    pub plot_data: Option<PlotDataArgs>,
}

pub fn load_config(path: &Path) -> CliResult<ConfigFile> {
    toml::from_str(&read_text(path)?).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

/// The command and global settings after applying the config file.
#[derive(Debug)]
pub struct Resolved {
    pub workspace: PathBuf,
    pub jobs: usize,
    pub command: Command,
}

impl Resolved {
    /// `p` relative to the workspace unless absolute.
    pub fn path(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.workspace.join(p)
        }
    }
}

fn fill<T: Merge>(args: &mut T, from: Option<T>) {
    if let Some(c) = from {
        args.merge(c);
    }
}

pub fn resolve(cli: Cli) -> CliResult<Resolved> {
    let cfg = match &cli.config {
        Some(p) => load_config(p)?,
        None => ConfigFile::default(),
    };
    let mut command = cli.command;
    match &mut command {
        Command::Ingest(a) => fill(a, cfg.ingest),
        Command::Synth(a) => fill(a, cfg.synth),
        Command::Stats(a) => fill(a, cfg.stats),
        Command::Gen(a) => fill(a, cfg.gen),
        Command::Train(a) => fill(a, cfg.train),
        Command::Estimate(a) => fill(a, cfg.estimate),
        Command::Bench(a) => fill(a, cfg.bench),
        Command::E2e(a) => fill(a, cfg.e2e),
        Command::PlotData(a) => fill(a, cfg.plot_data),
    }
    let jobs = cli
        .jobs
        .or(cfg.jobs)
        .unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1));
    if jobs == 0 {
        return Err(CliError::Usage("--jobs must be >= 1".into()));
    }
    Ok(Resolved {
        workspace: cli.workspace.or(cfg.workspace).unwrap_or_else(|| PathBuf::from(".")),
        jobs,
        command,
    })
}

/// The effective settings of `r` as a config file that replays the run.
pub fn replay_config(r: &Resolved) -> String {
    let mut cfg = ConfigFile {
        workspace: Some(r.workspace.clone()),
        jobs: Some(r.jobs),
        ..ConfigFile::default()
    };
    match &r.command {
        Command::Ingest(a) => cfg.ingest = Some(a.clone()),
        Command::Synth(a) => cfg.synth = Some(a.clone()),
        Command::Stats(a) => cfg.stats = Some(a.clone()),
        Command::Gen(a) => cfg.gen = Some(a.clone()),
        Command::Train(a) => cfg.train = Some(a.clone()),
        Command::Estimate(a) => cfg.estimate = Some(a.clone()),
        Command::Bench(a) => cfg.bench = Some(a.clone()),
        Command::E2e(a) => cfg.e2e = Some(a.clone()),
        Command::PlotData(a) => cfg.plot_data = Some(a.clone()),
    }
    toml::to_string(&cfg).expect("config serializes")
}
