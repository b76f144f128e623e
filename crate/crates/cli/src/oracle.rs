//! Exact checks run by the non-test modes.

use conductance_core::graph::{min_conductance_bruteforce, Cut, Graph, VertexId, VertexSet};
use conductance_core::spectral::{
    build_spectral, heavy_coefficient_sum, sticky_set, verify_cheeger, verify_mixing, verify_side_trap,
    verify_subset_trap, CheegerReport, MixingReport, SpectralBundle, SpectralError, StickySet, TrapReport,
};
use serde::Serialize;

pub const HEAVY_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Serialize)]
pub struct HeavyCheck {
    pub sum: f64,
    pub bound: f64,
    pub pass: bool,
}

pub fn heavy_check(bundle: &SpectralBundle, side: &VertexSet, delta: f64) -> HeavyCheck {
    let sum = heavy_coefficient_sum(bundle, side, delta);
    let bound = 5.0 / 6.0 * side.volume() as f64;
    HeavyCheck { sum, bound, pass: sum >= bound - HEAVY_TOLERANCE }
}

#[derive(Debug, Serialize)]
pub struct LemmaResult {
    pub cut: Cut,
    pub whole_side: TrapReport,
    /// Side minus its lowest-degree vertex, when that leaves an admissible region.
    pub subset: Option<TrapReport>,
    pub heavy: HeavyCheck,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sticky: Option<StickySet>,
}

impl LemmaResult {
    pub fn pass(&self) -> bool {
        self.whole_side.all_pass()
            && self.subset.as_ref().is_none_or(TrapReport::all_pass)
            && self.heavy.pass
            && self.sticky.as_ref().is_none_or(|s| s.complete)
    }
}

/// Runs the trap checks on the minimum-conductance cut of `graph`.
pub fn verify_lemmas(graph: &Graph, ell_max: u64, eta: Option<f64>) -> Result<LemmaResult, SpectralError> {
    let bundle = build_spectral(graph)?;
    let (_, side) = min_conductance_bruteforce(graph)?;
    let cut = Cut::new(graph, side)?;
    let whole_side = verify_side_trap(&bundle, &cut, ell_max)?;
    let subset = match subset_region(graph, &cut.side) {
        Some(region) => match verify_subset_trap(&bundle, &cut, &region, ell_max) {
            Ok(report) => Some(report),
            Err(SpectralError::EtaOutOfRange(_)) => None,
            Err(e) => return Err(e),
        },
        None => None,
    };
    let heavy = heavy_check(&bundle, &cut.side, cut.conductance);
    let sticky = eta.map(|eta| sticky_set(&bundle, &cut, eta, ell_max)).transpose()?;
    Ok(LemmaResult { cut, whole_side, subset, heavy, sticky })
}

fn subset_region(graph: &Graph, side: &VertexSet) -> Option<VertexSet> {
    if side.len() < 2 {
        return None;
    }
    let drop = side.iter().min_by_key(|&v| (graph.degree(v), v))?;
    Some(side.without(graph.degrees(), drop))
}

#[derive(Debug, Serialize)]
pub struct MixingResult {
    pub regular: bool,
    pub reports: Vec<MixingReport>,
}

impl MixingResult {
    /// Irregular graphs are judged on the degree-scaled deviation.
    pub fn pass(&self) -> bool {
        self.reports.iter().all(|r| if self.regular { r.pass() } else { r.scaled_pass() })
    }
}

pub fn mixing(graph: &Graph, steps: &[u64]) -> Result<MixingResult, SpectralError> {
    let bundle = build_spectral(graph)?;
    Ok(MixingResult {
        regular: graph.min_degree() == graph.max_degree(),
        reports: steps.iter().map(|&ell| verify_mixing(&bundle, ell)).collect(),
    })
}

pub fn cheeger(graph: &Graph) -> Result<CheegerReport, SpectralError> {
    verify_cheeger(&build_spectral(graph)?, graph)
}

#[derive(Debug, Serialize)]
pub struct BruteResult {
    pub conductance: f64,
    pub cheeger_constant: f64,
    pub side: Vec<VertexId>,
    pub volume: usize,
    pub crossing_edges: usize,
}

pub fn brute(graph: &Graph) -> Result<BruteResult, SpectralError> {
    let (conductance, side) = min_conductance_bruteforce(graph)?;
    let cut = Cut::new(graph, side)?;
    Ok(BruteResult {
        conductance,
        cheeger_constant: conductance / 2.0,
        side: cut.side.iter().collect(),
        volume: cut.side.volume(),
        crossing_edges: cut.crossing_edges,
    })
}
