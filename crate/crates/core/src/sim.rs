//! Deterministic synchronous-round CONGEST engine.
//!
//! Every vertex runs its own [`VertexProgram`]. A run is `init` on all
//! vertices, then `rounds` synchronous rounds, then `finalize`. In round `r`
//! each vertex sees exactly the messages its neighbors sent in round `r - 1`
//! and may send at most one message per incident edge; messages sent in the
//! last round are handed to `finalize`. `init` and `finalize` cannot send.
//!
//! Handlers of one round may run concurrently. Each handler call gets a
//! private RNG keyed on `(master_seed, vertex, round)`, and inboxes are
//! ordered by sender, so transcripts do not depend on the thread count.

use std::any::Any;
use std::io::{self, Write};
use std::panic::{self, AssertUnwindSafe};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{Graph, VertexId};

/// Bandwidth is accounted in tuples, not bits.
pub trait Payload: Clone + Send + Sync {
    fn tuple_count(&self) -> usize;
}

/// A delivered message.
#[derive(Debug, Clone, PartialEq)]
pub struct Envelope<P> {
    pub src: VertexId,
    pub payload: P,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HaltReason {
    Reject,
    Congestion,
}

/// Messages produced by one handler call, plus an optional global stop.
#[derive(Debug)]
pub struct Outbox<P> {
    messages: Vec<(VertexId, P)>,
    halt: Option<HaltReason>,
}

impl<P> Default for Outbox<P> {
    fn default() -> Self {
        Outbox { messages: Vec::new(), halt: None }
    }
}

impl<P> Outbox<P> {
    pub fn send(&mut self, dst: VertexId, payload: P) {
        self.messages.push((dst, payload));
    }

    /// Stops every vertex at the end of the current round. Nothing sent in
    /// this round is delivered; the calling vertex records `Reject` or
    /// `AbortedCongestion` and everyone else finalizes as they stand.
    pub fn halt_all(&mut self, reason: HaltReason) {
        self.halt = Some(reason);
    }

    pub fn messages(&self) -> &[(VertexId, P)] {
        &self.messages
    }

    pub fn halted(&self) -> Option<HaltReason> {
        self.halt
    }
}

/// What a handler may see besides its own state.
pub struct Context<'a> {
    pub vertex: VertexId,
    /// 0 during `init`, `1..=rounds` for rounds, `rounds + 1` in `finalize`.
    pub round: u32,
    pub neighbors: &'a [VertexId],
    pub rng: ChaCha8Rng,
    /// Set in `finalize` when the run was stopped by a halt.
    pub halted: bool,
}

/// Handler failure reported by a program; the engine converts it (and
/// panics) into [`SimError::ProgramPanic`].
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{0}")]
pub struct ProgramError(pub String);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Decision {
    Accept,
    Reject,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Outcome {
    Accept,
    Reject,
    AbortedCongestion,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdict {
    pub outcome: Outcome,
    /// Round in which the outcome was fixed.
    pub round: u32,
}

pub trait VertexProgram: Send {
    type Payload: Payload;

    fn init(&mut self, ctx: &mut Context<'_>) -> Result<(), ProgramError>;

    fn on_round(
        &mut self,
        ctx: &mut Context<'_>,
        inbox: Vec<Envelope<Self::Payload>>,
        outbox: &mut Outbox<Self::Payload>,
    ) -> Result<(), ProgramError>;

    /// `inbox` holds the messages sent in the last round.
    fn finalize(
        &mut self,
        ctx: &mut Context<'_>,
        inbox: Vec<Envelope<Self::Payload>>,
    ) -> Result<Decision, ProgramError>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundStats {
    pub round: u32,
    pub messages: usize,
    pub tuples: usize,
    pub max_edge_tuples: usize,
    pub halted: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SimError {
    #[error("vertex {vertex} failed in round {round}: {message}")]
    ProgramPanic { vertex: VertexId, round: u32, message: String },
    #[error("vertex {src} sent to non-neighbor {dst} in round {round}")]
    NonNeighbor { src: VertexId, dst: VertexId, round: u32 },
    #[error("vertex {src} sent more than one message to {dst} in round {round}")]
    DuplicateMessage { src: VertexId, dst: VertexId, round: u32 },
    #[error("cannot build worker pool: {0}")]
    ThreadPool(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SimConfig {
    pub rounds: u32,
    pub master_seed: u64,
    /// Worker threads; `None` uses the current rayon pool.
    pub threads: Option<usize>,
}

/// Engine state after a round has been delivered; used by observers.
pub struct RoundView<'a, P: VertexProgram> {
    pub round: u32,
    pub programs: &'a [P],
    /// Messages delivered at the end of `round`, indexed by recipient.
    pub pending: &'a [Vec<Envelope<P::Payload>>],
}

pub struct RunOutcome<P> {
    pub verdicts: Vec<Verdict>,
    pub stats: Vec<RoundStats>,
    /// Rounds executed, including a halting round.
    pub rounds_executed: u32,
    pub halted: Option<HaltReason>,
    /// Final per-vertex program states, indexed by vertex.
    pub programs: Vec<P>,
}

/// Private RNG stream for one handler call.
pub fn vertex_rng(master_seed: u64, vertex: VertexId, round: u32) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream((u64::from(vertex.0) << 32) | u64::from(round));
    rng
}

pub fn run<P, F>(graph: &Graph, factory: F, config: &SimConfig) -> Result<RunOutcome<P>, SimError>
where
    P: VertexProgram,
    F: FnMut(VertexId, &Graph) -> P + Send,
{
    run_observed(graph, factory, config, |_| {})
}

/// Like [`run`], calling `observer` after `init` (round 0) and after the
/// delivery of every round that did not halt.
pub fn run_observed<P, F, O>(
    graph: &Graph,
    mut factory: F,
    config: &SimConfig,
    mut observer: O,
) -> Result<RunOutcome<P>, SimError>
where
    P: VertexProgram,
    F: FnMut(VertexId, &Graph) -> P + Send,
    O: FnMut(RoundView<'_, P>) + Send,
{
    let pool = match config.threads {
        Some(t) => Some(
            rayon::ThreadPoolBuilder::new()
                .num_threads(t)
                .build()
                .map_err(|e| SimError::ThreadPool(e.to_string()))?,
        ),
        None => None,
    };
    let mut engine = || -> Result<RunOutcome<P>, SimError> {
        let n = graph.n();
        let neighbors: Vec<Vec<VertexId>> = graph.vertices().map(|v| graph.neighbors(v).collect()).collect();
        let mut programs: Vec<P> = graph.vertices().map(|v| factory(v, graph)).collect();
        let seed = config.master_seed;
        let ctx = |i: usize, round: u32, halted: bool| {
            let vertex = VertexId::from_index(i);
            Context { vertex, round, neighbors: &neighbors[i], rng: vertex_rng(seed, vertex, round), halted }
        };

        programs
            .par_iter_mut()
            .enumerate()
            .map(|(i, p)| guarded(VertexId::from_index(i), 0, || p.init(&mut ctx(i, 0, false))))
            .collect::<Result<Vec<()>, SimError>>()?;
        let mut inboxes: Vec<Vec<Envelope<P::Payload>>> = (0..n).map(|_| Vec::new()).collect();
        observer(RoundView { round: 0, programs: &programs, pending: &inboxes });

        let mut stats = Vec::with_capacity(config.rounds as usize);
        let mut halts: Vec<Option<HaltReason>> = vec![None; n];
        let mut halted_round = None;
        for round in 1..=config.rounds {
            let delivered = std::mem::take(&mut inboxes);
            let outboxes = programs
                .par_iter_mut()
                .zip(delivered.into_par_iter())
                .enumerate()
                .map(|(i, (p, inbox))| {
                    guarded(VertexId::from_index(i), round, || {
                        let mut outbox = Outbox::default();
                        p.on_round(&mut ctx(i, round, false), inbox, &mut outbox)?;
                        Ok(outbox)
                    })
                })
                .collect::<Result<Vec<Outbox<P::Payload>>, SimError>>()?;

            let mut round_stats =
                RoundStats { round, messages: 0, tuples: 0, max_edge_tuples: 0, halted: false };
            let mut next: Vec<Vec<Envelope<P::Payload>>> = (0..n).map(|_| Vec::new()).collect();
            for (i, outbox) in outboxes.into_iter().enumerate() {
                let src = VertexId::from_index(i);
                let mut targets: Vec<VertexId> = Vec::with_capacity(outbox.messages.len());
                for (dst, payload) in outbox.messages {
                    if dst.0 == 0 || dst.index() >= n || !graph.is_adjacent(src, dst) {
                        return Err(SimError::NonNeighbor { src, dst, round });
                    }
                    if targets.contains(&dst) {
                        return Err(SimError::DuplicateMessage { src, dst, round });
                    }
                    targets.push(dst);
                    let tuples = payload.tuple_count();
                    round_stats.messages += 1;
                    round_stats.tuples += tuples;
                    round_stats.max_edge_tuples = round_stats.max_edge_tuples.max(tuples);
                    next[dst.index()].push(Envelope { src, payload });
                }
                halts[i] = outbox.halt;
            }
            if halts.iter().any(Option::is_some) {
                round_stats.halted = true;
                stats.push(round_stats);
                halted_round = Some(round);
                break;
            }
            stats.push(round_stats);
            inboxes = next;
            observer(RoundView { round, programs: &programs, pending: &inboxes });
        }

        let rounds_executed = halted_round.unwrap_or(config.rounds);
        let final_round = rounds_executed + 1;
        if halted_round.is_some() {
            inboxes = (0..n).map(|_| Vec::new()).collect();
        }
        let verdicts = programs
            .par_iter_mut()
            .zip(inboxes.into_par_iter())
            .enumerate()
            .map(|(i, (p, inbox))| match halts[i] {
                Some(HaltReason::Reject) => Ok(Verdict { outcome: Outcome::Reject, round: rounds_executed }),
                Some(HaltReason::Congestion) => {
                    Ok(Verdict { outcome: Outcome::AbortedCongestion, round: rounds_executed })
                }
                None => {
                    let decision = guarded(VertexId::from_index(i), final_round, || {
                        p.finalize(&mut ctx(i, final_round, halted_round.is_some()), inbox)
                    })?;
                    let outcome = match decision {
                        Decision::Accept => Outcome::Accept,
                        Decision::Reject => Outcome::Reject,
                    };
                    Ok(Verdict { outcome, round: rounds_executed })
                }
            })
            .collect::<Result<Vec<Verdict>, SimError>>()?;

        let halted = if halts.contains(&Some(HaltReason::Congestion)) {
            Some(HaltReason::Congestion)
        } else if halts.contains(&Some(HaltReason::Reject)) {
            Some(HaltReason::Reject)
        } else {
            None
        };
        Ok(RunOutcome { verdicts, stats, rounds_executed, halted, programs })
    };
    match pool {
        Some(pool) => pool.install(engine),
        None => engine(),
    }
}

/// Runs a handler, converting both returned errors and panics into
/// [`SimError::ProgramPanic`].
fn guarded<T>(
    vertex: VertexId,
    round: u32,
    f: impl FnOnce() -> Result<T, ProgramError>,
) -> Result<T, SimError> {
    match panic::catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(value)) => Ok(value),
        Ok(Err(ProgramError(message))) => Err(SimError::ProgramPanic { vertex, round, message }),
        Err(payload) => Err(SimError::ProgramPanic { vertex, round, message: panic_message(payload) }),
    }
}

fn panic_message(payload: Box<dyn Any + Send>) -> String {
    if let Some(s) = payload.downcast_ref::<&str>() {
        (*s).to_owned()
    } else if let Some(s) = payload.downcast_ref::<String>() {
        s.clone()
    } else {
        "panic with non-string payload".to_owned()
    }
}

/// JSON-lines transcript, one record per round.
pub fn write_transcript(stats: &[RoundStats], mut out: impl Write) -> io::Result<()> {
    for s in stats {
        serde_json::to_writer(&mut out, s)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}
