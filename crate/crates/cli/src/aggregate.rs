//! Folding per-trial tester reports into one summary.

use std::collections::BTreeMap;

use conductance_core::graph::VertexId;
use conductance_core::sim::Outcome;
use conductance_core::tester::{ConfigEcho, GraphSummary, RunReport};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Version of the per-trial CSV layout.
pub const CSV_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AggregateError {
    #[error("no trial reports to aggregate")]
    Empty,
    #[error("trial with seed {seed} used a different configuration or graph")]
    HeterogeneousConfigs { seed: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialSummary {
    pub trial: usize,
    pub seed: u64,
    pub outcome: Outcome,
    pub sources: usize,
    pub rejecting: Vec<VertexId>,
    pub first_rejecting: Option<VertexId>,
    pub rounds: u32,
    pub messages: u64,
    pub tuples: u64,
    pub max_edge_tuples: usize,
    pub conservation_ok: bool,
    /// Full walk length completed and every round within `2m` messages.
    pub accounting_ok: bool,
}

impl TrialSummary {
    fn of(trial: usize, r: &RunReport) -> Self {
        let aborted = r.outcome == Outcome::AbortedCongestion;
        let accounting_ok = (aborted || r.rounds == r.config.resolved.ell)
            && r.stats.len() == r.rounds as usize
            && r.stats.iter().all(|s| s.messages <= 2 * r.graph.m);
        TrialSummary {
            trial,
            seed: r.seed,
            outcome: r.outcome,
            sources: r.sources.len(),
            rejecting: r.rejecting.clone(),
            first_rejecting: r.first_rejecting(),
            rounds: r.rounds,
            messages: r.stats.iter().map(|s| s.messages as u64).sum(),
            tuples: r.stats.iter().map(|s| s.tuples as u64).sum(),
            max_edge_tuples: r.stats.iter().map(|s| s.max_edge_tuples).max().unwrap_or(0),
            conservation_ok: r.conservation_ok,
            accounting_ok,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateReport {
    pub trials: usize,
    pub config: ConfigEcho,
    pub graph: GraphSummary,
    pub accept_count: usize,
    pub reject_count: usize,
    pub aborted_count: usize,
    pub accept_fraction: f64,
    pub reject_fraction: f64,
    pub aborted_fraction: f64,
    /// Trials keyed by their smallest rejecting vertex.
    pub first_rejecting_histogram: BTreeMap<VertexId, usize>,
    pub total_rounds: u64,
    pub total_messages: u64,
    pub total_tuples: u64,
    pub conservation_ok: bool,
    pub accounting_ok: bool,
    /// Sorted by seed; `trial` is the position in that order.
    pub per_trial: Vec<TrialSummary>,
}

pub fn aggregate(reports: &[RunReport]) -> Result<AggregateReport, AggregateError> {
    let first = reports.first().ok_or(AggregateError::Empty)?;
    if let Some(odd) = reports.iter().find(|r| r.config != first.config || r.graph != first.graph) {
        return Err(AggregateError::HeterogeneousConfigs { seed: odd.seed });
    }
    let mut ordered: Vec<&RunReport> = reports.iter().collect();
    ordered.sort_by_key(|r| r.seed);
    let per_trial: Vec<TrialSummary> = ordered.iter().enumerate().map(|(i, r)| TrialSummary::of(i, r)).collect();

    let count = |o: Outcome| per_trial.iter().filter(|t| t.outcome == o).count();
    let (accept_count, reject_count, aborted_count) =
        (count(Outcome::Accept), count(Outcome::Reject), count(Outcome::AbortedCongestion));
    let trials = per_trial.len();
    let mut first_rejecting_histogram = BTreeMap::new();
    for v in per_trial.iter().filter_map(|t| t.first_rejecting) {
        *first_rejecting_histogram.entry(v).or_insert(0) += 1;
    }
    Ok(AggregateReport {
        trials,
        config: first.config.clone(),
        graph: first.graph,
        accept_count,
        reject_count,
        aborted_count,
        accept_fraction: accept_count as f64 / trials as f64,
        reject_fraction: reject_count as f64 / trials as f64,
        aborted_fraction: aborted_count as f64 / trials as f64,
        first_rejecting_histogram,
        total_rounds: per_trial.iter().map(|t| u64::from(t.rounds)).sum(),
        total_messages: per_trial.iter().map(|t| t.messages).sum(),
        total_tuples: per_trial.iter().map(|t| t.tuples).sum(),
        conservation_ok: per_trial.iter().all(|t| t.conservation_ok),
        accounting_ok: per_trial.iter().all(|t| t.accounting_ok),
        per_trial,
    })
}

#[derive(Debug, Serialize)]
struct CsvRow<'a> {
    trial: usize,
    seed: u64,
    outcome: &'a str,
    sources: usize,
    rejecting: String,
    first_rejecting: Option<u32>,
    rounds: u32,
    messages: u64,
    tuples: u64,
    max_edge_tuples: usize,
}

/// Writes one row per trial under a fixed header; `rejecting` is a
/// space-separated list of vertex ids.
pub fn write_csv(report: &AggregateReport, out: impl std::io::Write) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for t in &report.per_trial {
        let outcome = match t.outcome {
            Outcome::Accept => "accept",
            Outcome::Reject => "reject",
            Outcome::AbortedCongestion => "aborted_congestion",
        };
        w.serialize(CsvRow {
            trial: t.trial,
            seed: t.seed,
            outcome,
            sources: t.sources,
            rejecting: t.rejecting.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(" "),
            first_rejecting: t.first_rejecting.map(|v| v.0),
            rounds: t.rounds,
            messages: t.messages,
            tuples: t.tuples,
            max_edge_tuples: t.max_edge_tuples,
        })?;
    }
    w.flush()?;
    Ok(())
}
