//! Command-line harness: load or generate a graph, run tester trials or one
//! of the exact oracle checks, and write a JSON report.

pub mod aggregate;
pub mod experiment;
pub mod oracle;

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::Parser;
use conductance_core::graph::{generate, read_edge_list_file, Family, Graph, LoadError, VertexId};
use conductance_core::sim::RoundStats;
use conductance_core::spectral::SpectralError;
use conductance_core::tester::{run_tester_with, GraphSummary, RunOptions, RunReport, TesterConfig, TesterError};
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

pub use aggregate::{aggregate, AggregateError, AggregateReport, TrialSummary, CSV_SCHEMA_VERSION};
pub use experiment::{ExperimentSpec, GraphSource, Mode};

pub const REPORT_SCHEMA_VERSION: u32 = 1;

const GEN_HELP: &str = "\
Generator specs (--gen):
  complete:N             complete graph on N vertices
  cycle:N                cycle on N vertices
  path:N                 path on N vertices
  dumbbell:K             two K-cliques joined by one edge
  random_regular:D:N     random D-regular graph on N vertices (alias regular)
  barbell_path:K:LEN     two K-cliques joined by a path of LEN vertices (alias barbell)

Exit codes: 0 ok, 2 bad flags or missing file, 3 validation failure, 4 internal error.
Oracle checks that do not hold still exit 0 and report \"pass\": false.";

#[derive(Debug, Parser)]
#[command(name = "conductance", version, about = "Distributed conductance tester and spectral oracle", after_help = GEN_HELP)]
pub struct Args {
    /// What to run (may also be given with --mode).
    #[arg(value_enum)]
    pub mode_arg: Option<Mode>,
    #[arg(long, value_enum)]
    pub mode: Option<Mode>,
    /// Edge-list file: header `n m`, then one `u v` pair per line.
    #[arg(long, conflicts_with = "gen")]
    pub graph: Option<PathBuf>,
    /// Generated graph, e.g. `dumbbell:4`.
    #[arg(long = "gen")]
    pub gen: Option<String>,
    /// Seed for randomized generators.
    #[arg(long)]
    pub graph_seed: Option<u64>,
    /// JSON experiment file; flags given on the command line take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Master seed; trial t uses seed + t.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub trials: Option<u32>,
    /// Walks per source.
    #[arg(long)]
    pub walks: Option<u64>,
    /// Walk length in rounds.
    #[arg(long)]
    pub length: Option<u32>,
    #[arg(long, allow_negative_numbers = true)]
    pub tau_slack: Option<f64>,
    #[arg(long)]
    pub source_constant: Option<f64>,
    /// Largest tuple count allowed on one message.
    #[arg(long)]
    pub congestion_limit: Option<f64>,
    /// Fixed comma-separated source set instead of the biased coins.
    #[arg(long, value_delimiter = ',')]
    pub sources: Option<Vec<u32>>,
    /// Longest walk for verify-lemmas.
    #[arg(long)]
    pub ell_max: Option<u64>,
    /// Subset slack for sticky-vertex extraction in verify-lemmas.
    #[arg(long)]
    pub eta: Option<f64>,
    /// Comma-separated walk lengths for mixing.
    #[arg(long, value_delimiter = ',')]
    pub steps: Option<Vec<u64>>,
    /// Report path (stdout if absent).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Per-trial CSV (test mode).
    #[arg(long)]
    pub csv: Option<PathBuf>,
    /// JSON-lines per-round transcript (test mode).
    #[arg(long)]
    pub transcript: Option<PathBuf>,
    /// Omit wall-clock fields so identical runs give identical bytes.
    #[arg(long)]
    pub deterministic: bool,
    /// Worker threads (default: all cores).
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    BadFlags(String),
    #[error("file not found: {}", .0.display())]
    FileNotFound(PathBuf),
    #[error("validation failed: {0}")]
    ValidationFailed(String),
    #[error("internal error: {0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::BadFlags(_) | CliError::FileNotFound(_) => 2,
            CliError::ValidationFailed(_) => 3,
            CliError::Internal(_) => 4,
        }
    }
}

impl From<SpectralError> for CliError {
    fn from(e: SpectralError) -> Self {
        CliError::ValidationFailed(e.to_string())
    }
}

impl From<TesterError> for CliError {
    fn from(e: TesterError) -> Self {
        match e {
            TesterError::Sim(e) => CliError::Internal(e.to_string()),
            other => CliError::ValidationFailed(other.to_string()),
        }
    }
}

fn write_failed(path: &Path) -> impl Fn(io::Error) -> CliError + '_ {
    move |e| CliError::Internal(format!("cannot write {}: {e}", path.display()))
}

/// Parses `argv` (program name first), runs, and returns the exit code.
pub fn cli_run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args = match Args::try_parse_from(argv) {
        Ok(args) => args,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(&args) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

/// Builds the experiment from an optional config file and the flags.
pub fn build_spec(args: &Args) -> Result<ExperimentSpec, CliError> {
    let base = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| match e.kind() {
                io::ErrorKind::NotFound => CliError::FileNotFound(path.clone()),
                _ => CliError::BadFlags(format!("cannot read {}: {e}", path.display())),
            })?;
            let spec: ExperimentSpec = serde_json::from_str(&text)
                .map_err(|e| CliError::BadFlags(format!("bad config {}: {e}", path.display())))?;
            Some(spec)
        }
        None => None,
    };
    if args.mode_arg.is_some() && args.mode.is_some() && args.mode_arg != args.mode {
        return Err(CliError::BadFlags("conflicting modes given".into()));
    }
    let mode = args
        .mode
        .or(args.mode_arg)
        .or(base.as_ref().map(|b| b.mode))
        .ok_or_else(|| CliError::BadFlags("no mode given (test, verify-lemmas, verify-cheeger, mixing, brute-conductance)".into()))?;
    let graph = match (&args.graph, &args.gen) {
        (Some(path), _) => GraphSource::File(path.clone()),
        (None, Some(text)) => GraphSource::Gen(
            Family::from_str(text).map_err(|e| CliError::BadFlags(format!("bad --gen {text:?}: {e}")))?,
        ),
        (None, None) => base
            .as_ref()
            .map(|b| b.graph.clone())
            .ok_or_else(|| CliError::BadFlags("no graph given; use --graph FILE or --gen SPEC".into()))?,
    };
    let mut spec = base.unwrap_or(ExperimentSpec {
        mode,
        graph: graph.clone(),
        graph_seed: 0,
        alpha: None,
        epsilon: None,
        seed: 0,
        trials: 1,
        overrides: Default::default(),
        ell_max: None,
        eta: None,
        steps: None,
        out: None,
    });
    spec.mode = mode;
    spec.graph = graph;
    let o = &mut spec.overrides;
    macro_rules! take {
        ($dst:expr, $src:expr) => {
            if let Some(v) = $src.clone() {
                $dst = Some(v);
            }
        };
    }
    take!(o.walks, args.walks);
    take!(o.ell, args.length);
    take!(o.tau_slack, args.tau_slack);
    take!(o.source_constant, args.source_constant);
    take!(o.congestion_limit, args.congestion_limit);
    take!(o.sources, args.sources.as_ref().map(|q| q.iter().map(|&v| VertexId(v)).collect::<Vec<_>>()));
    take!(spec.alpha, args.alpha);
    take!(spec.epsilon, args.epsilon);
    take!(spec.ell_max, args.ell_max);
    take!(spec.eta, args.eta);
    take!(spec.steps, args.steps);
    take!(spec.out, args.out);
    if let Some(seed) = args.seed {
        spec.seed = seed;
    }
    if let Some(seed) = args.graph_seed {
        spec.graph_seed = seed;
    }
    if let Some(trials) = args.trials {
        spec.trials = trials;
    }

    if spec.trials == 0 {
        return Err(CliError::BadFlags("--trials must be at least 1".into()));
    }
    if spec.mode == Mode::Test && (spec.alpha.is_none() || spec.epsilon.is_none()) {
        return Err(CliError::BadFlags("test mode needs --alpha and --epsilon".into()));
    }
    if spec.mode != Mode::Test && (args.csv.is_some() || args.transcript.is_some()) {
        return Err(CliError::BadFlags("--csv and --transcript apply to test mode only".into()));
    }
    if args.threads == Some(0) {
        return Err(CliError::BadFlags("--threads must be at least 1".into()));
    }
    Ok(spec)
}

pub fn load_graph(spec: &ExperimentSpec) -> Result<Graph, CliError> {
    match &spec.graph {
        GraphSource::File(path) => read_edge_list_file(path).map_err(|e| match e {
            LoadError::Io { source, .. } if source.kind() == io::ErrorKind::NotFound => {
                CliError::FileNotFound(path.clone())
            }
            LoadError::Io { .. } => CliError::BadFlags(e.to_string()),
            other => CliError::ValidationFailed(format!("{}: {other}", path.display())),
        }),
        GraphSource::Gen(family) => {
            generate(family, spec.graph_seed).map_err(|e| CliError::ValidationFailed(e.to_string()))
        }
    }
}

#[derive(Serialize)]
struct Report<'a> {
    schema_version: u32,
    mode: Mode,
    spec: &'a ExperimentSpec,
    graph: GraphSummary,
    #[serde(skip_serializing_if = "Option::is_none")]
    pass: Option<bool>,
    result: serde_json::Value,
    #[serde(skip_serializing_if = "Option::is_none")]
    generated_at_unix: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    elapsed_ms: Option<u64>,
}

#[derive(Serialize)]
struct TranscriptRecord<'a> {
    trial: usize,
    #[serde(flatten)]
    stats: &'a RoundStats,
}

fn execute(args: &Args) -> Result<(), CliError> {
    let spec = build_spec(args)?;
    let graph = load_graph(&spec)?;
    let started = Instant::now();
    let work = || run_mode(&spec, &graph, args);
    let (pass, result) = match args.threads {
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .map_err(|e| CliError::Internal(e.to_string()))?
            .install(work)?,
        None => work()?,
    };
    let report = Report {
        schema_version: REPORT_SCHEMA_VERSION,
        mode: spec.mode,
        spec: &spec,
        graph: GraphSummary::of(&graph),
        pass,
        result,
        generated_at_unix: (!args.deterministic)
            .then(|| SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())),
        elapsed_ms: (!args.deterministic).then(|| started.elapsed().as_millis() as u64),
    };
    let mut text = serde_json::to_string_pretty(&report).map_err(|e| CliError::Internal(e.to_string()))?;
    text.push('\n');
    match &spec.out {
        Some(path) => std::fs::write(path, text).map_err(write_failed(path))?,
        None => io::stdout().write_all(text.as_bytes()).map_err(|e| CliError::Internal(e.to_string()))?,
    }
    Ok(())
}

fn to_value(value: impl Serialize) -> Result<serde_json::Value, CliError> {
    serde_json::to_value(value).map_err(|e| CliError::Internal(e.to_string()))
}

fn run_mode(spec: &ExperimentSpec, graph: &Graph, args: &Args) -> Result<(Option<bool>, serde_json::Value), CliError> {
    match spec.mode {
        Mode::Test => {
            let reports = run_trials(spec, graph)?;
            let agg = aggregate(&reports).map_err(|e| CliError::Internal(e.to_string()))?;
            if let Some(path) = &args.transcript {
                let mut w = BufWriter::new(File::create(path).map_err(write_failed(path))?);
                for t in &agg.per_trial {
                    let report = reports.iter().find(|r| r.seed == t.seed).expect("trial report");
                    for stats in &report.stats {
                        serde_json::to_writer(&mut w, &TranscriptRecord { trial: t.trial, stats })
                            .map_err(|e| CliError::Internal(e.to_string()))?;
                        w.write_all(b"\n").map_err(write_failed(path))?;
                    }
                }
                w.flush().map_err(write_failed(path))?;
            }
            if let Some(path) = &args.csv {
                let file = File::create(path).map_err(write_failed(path))?;
                aggregate::write_csv(&agg, file).map_err(|e| CliError::Internal(e.to_string()))?;
            }
            Ok((None, to_value(&agg)?))
        }
        Mode::VerifyLemmas => {
            let r = oracle::verify_lemmas(graph, spec.ell_max.unwrap_or(50), spec.eta)?;
            Ok((Some(r.pass()), to_value(&r)?))
        }
        Mode::VerifyCheeger => {
            let r = oracle::cheeger(graph)?;
            Ok((Some(r.pass()), to_value(&r)?))
        }
        Mode::Mixing => {
            let steps = spec.steps.clone().unwrap_or_else(|| vec![1, 5, 20]);
            let r = oracle::mixing(graph, &steps)?;
            Ok((Some(r.pass()), to_value(&r)?))
        }
        Mode::BruteConductance => Ok((None, to_value(oracle::brute(graph)?)?)),
    }
}

/// Runs every trial of a test-mode experiment, in parallel, in trial order.
pub fn run_trials(spec: &ExperimentSpec, graph: &Graph) -> Result<Vec<RunReport>, CliError> {
    let (alpha, epsilon) = match (spec.alpha, spec.epsilon) {
        (Some(a), Some(e)) => (a, e),
        _ => return Err(CliError::BadFlags("test mode needs --alpha and --epsilon".into())),
    };
    let configs: Vec<TesterConfig> = (0..spec.trials)
        .map(|t| TesterConfig {
            alpha,
            epsilon,
            master_seed: spec.seed.wrapping_add(u64::from(t)),
            overrides: spec.overrides.clone(),
        })
        .collect();
    configs[0].resolve(graph)?;
    configs
        .par_iter()
        .map(|c| run_tester_with(graph, c, &RunOptions::default()).map_err(CliError::from))
        .collect()
}
