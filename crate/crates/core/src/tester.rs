//! Distributed conductance tester: every vertex runs the same local program
//! on the CONGEST engine and decides Accept or Reject on its own.
//!
//! A vertex becomes a source with probability proportional to its degree and
//! launches `walks` lazy random walks. Walks are carried as counts: each
//! round a vertex splits every batch it holds between staying and its
//! neighbors and forwards one message per neighbor. After `ell` rounds a
//! vertex rejects if more than `m * deg(v) * (1 + tau_slack)` walks from a
//! single source ended at it.

use std::collections::BTreeMap;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{Graph, GraphError, VertexId};
use crate::sim::{
    self, Context, Decision, Envelope, HaltReason, Outbox, Outcome, Payload, ProgramError, RoundStats,
    SimConfig, SimError, VertexProgram,
};

pub const DEFAULT_SOURCE_CONSTANT: f64 = 5000.0;
pub const DEFAULT_CONGESTION_CONSTANT: f64 = 5500.0;

#[derive(Debug, Error)]
pub enum TesterError {
    #[error("invalid tester configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Sim(#[from] SimError),
}

/// Optional replacements for the default constants. `None` keeps the default.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Overrides {
    #[serde(default)]
    pub walks: Option<u64>,
    #[serde(default)]
    pub ell: Option<u32>,
    #[serde(default)]
    pub tau_slack: Option<f64>,
    #[serde(default)]
    pub source_constant: Option<f64>,
    #[serde(default)]
    pub congestion_limit: Option<f64>,
    /// Fixed source set replacing the biased coins.
    #[serde(default)]
    pub sources: Option<Vec<VertexId>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TesterConfig {
    pub alpha: f64,
    pub epsilon: f64,
    pub master_seed: u64,
    #[serde(default)]
    pub overrides: Overrides,
}

/// Parameters in effect for one graph.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Resolved {
    pub walks: u64,
    pub ell: u32,
    pub tau_slack: f64,
    pub source_constant: f64,
    pub congestion_limit: f64,
}

impl TesterConfig {
    pub fn new(alpha: f64, epsilon: f64, master_seed: u64) -> Self {
        TesterConfig { alpha, epsilon, master_seed, overrides: Overrides::default() }
    }

    pub fn resolve(&self, graph: &Graph) -> Result<Resolved, TesterError> {
        let bad = |msg: String| Err(TesterError::InvalidConfig(msg));
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return bad(format!("alpha must lie in (0, 1), got {}", self.alpha));
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return bad(format!("epsilon must be positive, got {}", self.epsilon));
        }
        let n = graph.n() as u64;
        let m = graph.m() as u64;
        let o = &self.overrides;

        let walks = match o.walks {
            Some(k) => k,
            None => m
                .checked_mul(m)
                .and_then(|x| x.checked_mul(2))
                .ok_or_else(|| TesterError::InvalidConfig("default walk count overflows".into()))?,
        };
        if walks == 0 {
            return bad("walk count must be at least 1".into());
        }
        if walks.checked_mul(n).is_none() {
            return bad(format!("walks * n overflows 64 bits (walks = {walks}, n = {n})"));
        }

        let ell = match o.ell {
            Some(l) => l,
            None => {
                let raw = (32.0 / (self.alpha * self.alpha) * (n as f64).ln()).ceil();
                if raw > f64::from(u32::MAX) {
                    return bad(format!("default walk length {raw} is too large"));
                }
                raw as u32
            }
        };
        if ell == 0 {
            return bad("walk length must be at least 1".into());
        }

        let tau_slack = o.tau_slack.unwrap_or_else(|| 2.0 * (n as f64).powf(-0.25));
        if !tau_slack.is_finite() || tau_slack <= -1.0 {
            return bad(format!("tau_slack must be finite and greater than -1, got {tau_slack}"));
        }
        let source_constant = o.source_constant.unwrap_or(DEFAULT_SOURCE_CONSTANT);
        if !(source_constant >= 0.0 && source_constant.is_finite()) {
            return bad(format!("source_constant must be non-negative, got {source_constant}"));
        }
        let congestion_limit = o.congestion_limit.unwrap_or(DEFAULT_CONGESTION_CONSTANT / self.epsilon);
        if congestion_limit.is_nan() || congestion_limit < 0.0 {
            return bad(format!("congestion_limit must be non-negative, got {congestion_limit}"));
        }
        if let Some(sources) = &o.sources {
            if let Some(bad_id) = sources.iter().find(|v| v.0 == 0 || v.index() >= graph.n()) {
                return bad(format!("source {bad_id} is not a vertex"));
            }
        }
        Ok(Resolved { walks, ell, tau_slack, source_constant, congestion_limit })
    }
}

/// Biased coin of one vertex.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SourceDecision {
    pub probability: f64,
    pub is_source: bool,
}

impl SourceDecision {
    pub fn probability(source_constant: f64, degree: usize, epsilon: f64, total_volume: usize) -> f64 {
        (source_constant * degree as f64 / (epsilon * total_volume as f64)).min(1.0)
    }

    /// Flips with the first draw of the vertex's round-0 stream.
    pub fn flip(probability: f64, rng: &mut ChaCha8Rng) -> Self {
        let draw: f64 = rng.random();
        SourceDecision { probability, is_source: draw < probability }
    }
}

/// The source set a run with this configuration will use.
pub fn sample_sources(graph: &Graph, config: &TesterConfig) -> Result<Vec<VertexId>, TesterError> {
    let resolved = config.resolve(graph)?;
    if let Some(forced) = &config.overrides.sources {
        return Ok(normalize_sources(forced));
    }
    Ok(graph
        .vertices()
        .filter(|&v| {
            let p = SourceDecision::probability(
                resolved.source_constant,
                graph.degree(v),
                config.epsilon,
                graph.total_volume(),
            );
            SourceDecision::flip(p, &mut sim::vertex_rng(config.master_seed, v, 0)).is_source
        })
        .collect())
}

fn normalize_sources(sources: &[VertexId]) -> Vec<VertexId> {
    let mut q = sources.to_vec();
    q.sort_unstable();
    q.dedup();
    q
}

/// Rejection threshold of `v`.
pub fn threshold(graph: &Graph, tau_slack: f64, v: VertexId) -> f64 {
    graph.m() as f64 * graph.degree(v) as f64 * (1.0 + tau_slack)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WalkTuple {
    pub source: VertexId,
    pub count: u64,
    pub step: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WalkBatch(pub Vec<WalkTuple>);

impl Payload for WalkBatch {
    fn tuple_count(&self) -> usize {
        self.0.len()
    }
}

/// Walk bookkeeping of one vertex.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct WalkLedger {
    /// Walks stationed here: source -> (count, step).
    pub stationed: BTreeMap<VertexId, (u64, u32)>,
    /// Next-hop assignments of the latest step: (source, destination) -> count.
    pub routed: BTreeMap<(VertexId, VertexId), u64>,
    /// Walks that ended here: source -> count.
    pub ended: BTreeMap<VertexId, u64>,
}

#[derive(Debug, Clone)]
pub struct TesterVertex {
    pub id: VertexId,
    pub degree: usize,
    pub ell: u32,
    pub walks: u64,
    pub tau: f64,
    pub congestion_limit: f64,
    source_probability: f64,
    forced_source: Option<bool>,
    pub source: Option<SourceDecision>,
    pub ledger: WalkLedger,
}

impl TesterVertex {
    pub fn new(graph: &Graph, config: &TesterConfig, resolved: &Resolved, v: VertexId) -> Self {
        TesterVertex {
            id: v,
            degree: graph.degree(v),
            ell: resolved.ell,
            walks: resolved.walks,
            tau: threshold(graph, resolved.tau_slack, v),
            congestion_limit: resolved.congestion_limit,
            source_probability: SourceDecision::probability(
                resolved.source_constant,
                graph.degree(v),
                config.epsilon,
                graph.total_volume(),
            ),
            forced_source: config.overrides.sources.as_ref().map(|q| q.contains(&v)),
            source: None,
            ledger: WalkLedger::default(),
        }
    }

    pub fn is_source(&self) -> bool {
        self.source.is_some_and(|s| s.is_source)
    }

    fn absorb(&mut self, inbox: Vec<Envelope<WalkBatch>>, step: u32) -> Result<(), ProgramError> {
        for env in inbox {
            for t in env.payload.0 {
                if t.step != step {
                    return Err(ProgramError(format!(
                        "tuple from {} carries step {} but step {} was expected",
                        env.src, t.step, step
                    )));
                }
                let slot = self.ledger.stationed.entry(t.source).or_insert((0, step));
                if slot.1 != step {
                    return Err(ProgramError(format!("walks of source {} are out of step", t.source)));
                }
                slot.0 += t.count;
            }
        }
        Ok(())
    }

    /// Moves every stationed walk one lazy step: stays with probability 1/2,
    /// otherwise to a uniform neighbor.
    pub fn advance_step(
        &mut self,
        step: u32,
        neighbors: &[VertexId],
        rng: &mut ChaCha8Rng,
    ) -> Result<Vec<(VertexId, WalkBatch)>, ProgramError> {
        let d = neighbors.len();
        let mut outgoing: Vec<Vec<WalkTuple>> = vec![Vec::new(); d];
        self.ledger.routed.clear();
        for (&source, slot) in self.ledger.stationed.iter_mut() {
            let (count, at) = *slot;
            if at != step {
                return Err(ProgramError(format!("walks of source {source} are at step {at}, expected {step}")));
            }
            let stay = binomial(count, 0.5, rng);
            let mut left = count - stay;
            for (j, out) in outgoing.iter_mut().enumerate() {
                if left == 0 {
                    break;
                }
                let moved = if j + 1 == d { left } else { binomial(left, 1.0 / (d - j) as f64, rng) };
                left -= moved;
                if moved > 0 {
                    self.ledger.routed.insert((source, neighbors[j]), moved);
                    out.push(WalkTuple { source, count: moved, step: step + 1 });
                }
            }
            *slot = (stay, step + 1);
        }
        self.ledger.stationed.retain(|_, (count, _)| *count > 0);
        Ok(neighbors
            .iter()
            .zip(outgoing)
            .filter(|(_, tuples)| !tuples.is_empty())
            .map(|(&w, tuples)| (w, WalkBatch(tuples)))
            .collect())
    }

    /// Accept unless some source's ended-walk count strictly exceeds `tau`.
    pub fn decide(ended: &BTreeMap<VertexId, u64>, tau: f64) -> Decision {
        if ended.values().any(|&c| c as f64 > tau) {
            Decision::Reject
        } else {
            Decision::Accept
        }
    }
}

fn binomial(n: u64, p: f64, rng: &mut ChaCha8Rng) -> u64 {
    if n == 0 {
        return 0;
    }
    Binomial::new(n, p).expect("probability in [0, 1]").sample(rng)
}

impl VertexProgram for TesterVertex {
    type Payload = WalkBatch;

    fn init(&mut self, ctx: &mut Context<'_>) -> Result<(), ProgramError> {
        let decision = match self.forced_source {
            Some(forced) => SourceDecision { probability: if forced { 1.0 } else { 0.0 }, is_source: forced },
            None => SourceDecision::flip(self.source_probability, &mut ctx.rng),
        };
        self.source = Some(decision);
        if decision.is_source {
            self.ledger.stationed.insert(self.id, (self.walks, 0));
        }
        Ok(())
    }

    fn on_round(
        &mut self,
        ctx: &mut Context<'_>,
        inbox: Vec<Envelope<WalkBatch>>,
        outbox: &mut Outbox<WalkBatch>,
    ) -> Result<(), ProgramError> {
        let step = ctx.round - 1;
        self.absorb(inbox, step)?;
        let messages = self.advance_step(step, ctx.neighbors, &mut ctx.rng)?;
        let congested = messages.iter().any(|(_, batch)| batch.tuple_count() as f64 > self.congestion_limit);
        for (w, batch) in messages {
            outbox.send(w, batch);
        }
        if congested {
            outbox.halt_all(HaltReason::Congestion);
        }
        Ok(())
    }

    fn finalize(&mut self, ctx: &mut Context<'_>, inbox: Vec<Envelope<WalkBatch>>) -> Result<Decision, ProgramError> {
        if ctx.halted {
            return Ok(Decision::Accept);
        }
        self.absorb(inbox, self.ell)?;
        for (source, (count, step)) in std::mem::take(&mut self.ledger.stationed) {
            if step != self.ell {
                return Err(ProgramError(format!("walks of source {source} stopped at step {step}")));
            }
            self.ledger.ended.insert(source, count);
        }
        Ok(Self::decide(&self.ledger.ended, self.tau))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphSummary {
    pub n: usize,
    pub m: usize,
    pub min_degree: usize,
    pub max_degree: usize,
}

impl GraphSummary {
    pub fn of(graph: &Graph) -> Self {
        GraphSummary { n: graph.n(), m: graph.m(), min_degree: graph.min_degree(), max_degree: graph.max_degree() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct VertexVerdict {
    pub vertex: VertexId,
    pub outcome: Outcome,
    pub round: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigEcho {
    pub alpha: f64,
    pub epsilon: f64,
    pub overrides: Overrides,
    pub resolved: Resolved,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub config: ConfigEcho,
    pub graph: GraphSummary,
    pub seed: u64,
    pub sources: Vec<VertexId>,
    /// AbortedCongestion if any vertex aborted, else Reject if any vertex
    /// rejected, else Accept.
    pub outcome: Outcome,
    pub verdicts: Vec<VertexVerdict>,
    pub rejecting: Vec<VertexId>,
    pub rounds: u32,
    pub stats: Vec<RoundStats>,
    /// Every source's walks summed to `walks` after every delivered round
    /// and at the end.
    pub conservation_ok: bool,
    /// Ended-walk counts per source, indexed by vertex.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub endpoints: Option<BTreeMap<VertexId, Vec<u64>>>,
    /// Per source, walks in flight after each delivered round.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub walk_totals: Option<BTreeMap<VertexId, Vec<u64>>>,
}

impl RunReport {
    pub fn first_rejecting(&self) -> Option<VertexId> {
        self.rejecting.first().copied()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RunOptions {
    pub threads: Option<usize>,
    pub endpoints: bool,
    pub walk_totals: bool,
}

pub fn run_tester(graph: &Graph, config: &TesterConfig) -> Result<RunReport, TesterError> {
    run_tester_with(graph, config, &RunOptions::default())
}

pub fn run_tester_with(graph: &Graph, config: &TesterConfig, options: &RunOptions) -> Result<RunReport, TesterError> {
    graph.validate()?;
    let resolved = config.resolve(graph)?;
    let sim_config = SimConfig { rounds: resolved.ell, master_seed: config.master_seed, threads: options.threads };

    let mut conserved = true;
    let mut totals: BTreeMap<VertexId, Vec<u64>> = BTreeMap::new();
    let outcome = sim::run_observed(
        graph,
        |v, g| TesterVertex::new(g, config, &resolved, v),
        &sim_config,
        |view| {
            let mut in_flight: BTreeMap<VertexId, u64> = BTreeMap::new();
            for p in view.programs {
                if p.is_source() {
                    in_flight.entry(p.id).or_insert(0);
                }
                for (&q, &(count, step)) in &p.ledger.stationed {
                    conserved &= step == view.round;
                    *in_flight.entry(q).or_insert(0) += count;
                }
            }
            for inbox in view.pending {
                for env in inbox {
                    for t in &env.payload.0 {
                        conserved &= t.step == view.round && t.count > 0;
                        *in_flight.entry(t.source).or_insert(0) += t.count;
                    }
                }
            }
            for (q, total) in in_flight {
                conserved &= total == resolved.walks;
                totals.entry(q).or_default().push(total);
            }
        },
    )?;

    let sources: Vec<VertexId> = outcome.programs.iter().filter(|p| p.is_source()).map(|p| p.id).collect();
    if outcome.halted.is_none() {
        let mut ended: BTreeMap<VertexId, u64> = sources.iter().map(|&q| (q, 0)).collect();
        for p in &outcome.programs {
            for (&q, &c) in &p.ledger.ended {
                *ended.entry(q).or_insert(0) += c;
            }
        }
        conserved &= ended.values().all(|&t| t == resolved.walks);
    }

    let verdicts: Vec<VertexVerdict> = outcome
        .verdicts
        .iter()
        .enumerate()
        .map(|(i, v)| VertexVerdict { vertex: VertexId::from_index(i), outcome: v.outcome, round: v.round })
        .collect();
    let rejecting: Vec<VertexId> =
        verdicts.iter().filter(|v| v.outcome == Outcome::Reject).map(|v| v.vertex).collect();
    let overall = if verdicts.iter().any(|v| v.outcome == Outcome::AbortedCongestion) {
        Outcome::AbortedCongestion
    } else if !rejecting.is_empty() {
        Outcome::Reject
    } else {
        Outcome::Accept
    };
    let endpoints = options.endpoints.then(|| {
        sources
            .iter()
            .map(|&q| {
                let row = outcome.programs.iter().map(|p| p.ledger.ended.get(&q).copied().unwrap_or(0)).collect();
                (q, row)
            })
            .collect()
    });

    Ok(RunReport {
        config: ConfigEcho {
            alpha: config.alpha,
            epsilon: config.epsilon,
            overrides: config.overrides.clone(),
            resolved,
        },
        graph: GraphSummary::of(graph),
        seed: config.master_seed,
        sources,
        outcome: overall,
        verdicts,
        rejecting,
        rounds: outcome.rounds_executed,
        stats: outcome.stats,
        conservation_ok: conserved,
        endpoints,
        walk_totals: options.walk_totals.then_some(totals),
    })
}
