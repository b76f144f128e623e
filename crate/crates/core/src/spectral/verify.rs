//! Numerical checks of the trap-probability bounds, the Cheeger sandwich and
//! the pairwise mixing bound against exact walk distributions.

use serde::Serialize;

use super::{mass_in, SpectralBundle, SpectralError};
use crate::graph::{cheeger_constant_lazy, Cut, Graph, VertexId, VertexSet, BRUTE_FORCE_MAX_N};

/// A row passes when `trap >= bound - TRAP_SLACK`.
pub const TRAP_SLACK: f64 = 1e-9;
/// Tolerance for both Cheeger inequalities.
const CHEEGER_TOLERANCE: f64 = 1e-8;
/// Allowed excess of the mixing deviation over `lambda_2^l`.
const MIXING_TOLERANCE: f64 = 1e-9;
/// Heavy eigenvalues are those with `lambda >= 1 - 3 delta - HEAVY_EPS`.
const HEAVY_EPS: f64 = 1e-12;

/// `vol(S)/2m + (5/6 - vol(S)/2m)(1 - 3 delta)^l`.
pub fn side_trap_bound(volume: usize, total_volume: usize, delta: f64, steps: u64) -> f64 {
    subset_trap_bound(volume, total_volume, 0.0, delta, steps)
}

/// `vol(T)/2m + ((5/6)(1 - sqrt(6 eta / 5))^2 - vol(T)/2m)(1 - 3 delta)^l`.
pub fn subset_trap_bound(volume: usize, total_volume: usize, eta: f64, delta: f64, steps: u64) -> f64 {
    let base = volume as f64 / total_volume as f64;
    let factor = 5.0 / 6.0 * (1.0 - (6.0 * eta / 5.0).sqrt()).powi(2);
    base + (factor - base) * (1.0 - 3.0 * delta).powf(steps as f64)
}

/// Per-vertex bound a sticky vertex satisfies for its region `T`; same
/// algebraic form as [`subset_trap_bound`].
pub fn sticky_bound(volume: usize, total_volume: usize, eta: f64, delta: f64, steps: u64) -> f64 {
    subset_trap_bound(volume, total_volume, eta, delta, steps)
}

/// `sum a_i^2` over eigenvalues with `lambda_i >= 1 - 3 delta`.
pub fn heavy_coefficient_sum(bundle: &SpectralBundle, set: &VertexSet, delta: f64) -> f64 {
    let threshold = 1.0 - 3.0 * delta - HEAVY_EPS;
    bundle
        .coefficients(set)
        .iter()
        .zip(bundle.lambdas())
        .filter(|(_, &l)| l >= threshold)
        .map(|(a, _)| a * a)
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrapRow {
    pub ell: u64,
    pub trap: f64,
    pub bound: f64,
    pub pass: bool,
}

/// Serializes as a bare JSON array of rows.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct TrapTable(pub Vec<TrapRow>);

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrapReport {
    pub delta: f64,
    /// `1 - vol(T)/vol(S)`; zero for the whole-set form.
    pub eta: f64,
    pub region_volume: usize,
    pub total_volume: usize,
    pub rows: TrapTable,
}

impl TrapReport {
    pub fn all_pass(&self) -> bool {
        self.rows.0.iter().all(|r| r.pass)
    }

    /// Smallest `trap - bound` over all rows.
    pub fn min_slack(&self) -> f64 {
        self.rows.0.iter().map(|r| r.trap - r.bound).fold(f64::INFINITY, f64::min)
    }
}

fn check_delta(cut: &Cut) -> Result<f64, SpectralError> {
    if cut.conductance >= 1.0 / 3.0 {
        return Err(SpectralError::DeltaTooLarge(cut.conductance));
    }
    Ok(cut.conductance)
}

fn trap_table(
    bundle: &SpectralBundle,
    region: &VertexSet,
    ell_max: u64,
    bound: impl Fn(u64) -> f64,
) -> Result<TrapTable, SpectralError> {
    let p0 = bundle.degree_weighted(region)?;
    let rows = bundle
        .walk_from(p0)
        .take(ell_max as usize + 1)
        .enumerate()
        .map(|(ell, p)| {
            let ell = ell as u64;
            let trap = mass_in(&p, region);
            let bound = bound(ell);
            TrapRow { ell, trap, bound, pass: trap >= bound - TRAP_SLACK }
        })
        .collect();
    Ok(TrapTable(rows))
}

/// Exact `trap(S, l)` against the whole-set bound for `l = 0..=ell_max`,
/// with `delta` the conductance of `cut`.
pub fn verify_side_trap(
    bundle: &SpectralBundle,
    cut: &Cut,
    ell_max: u64,
) -> Result<TrapReport, SpectralError> {
    let delta = check_delta(cut)?;
    let total = 2 * bundle.m();
    let vol = cut.side.volume();
    let rows = trap_table(bundle, &cut.side, ell_max, |ell| side_trap_bound(vol, total, delta, ell))?;
    Ok(TrapReport { delta, eta: 0.0, region_volume: vol, total_volume: total, rows })
}

/// Exact averaged `trap(T, l)` against the subset bound, with
/// `eta = 1 - vol(T)/vol(S)` required in `[0, 5/6)`.
pub fn verify_subset_trap(
    bundle: &SpectralBundle,
    cut: &Cut,
    region: &VertexSet,
    ell_max: u64,
) -> Result<TrapReport, SpectralError> {
    if region.is_empty() {
        return Err(SpectralError::EmptyRegion);
    }
    if !region.is_subset_of(&cut.side) {
        return Err(SpectralError::NotSubset);
    }
    let eta = 1.0 - region.volume() as f64 / cut.side.volume() as f64;
    if !(0.0..5.0 / 6.0).contains(&eta) {
        return Err(SpectralError::EtaOutOfRange(eta));
    }
    let delta = check_delta(cut)?;
    let total = 2 * bundle.m();
    let vol = region.volume();
    let rows = trap_table(bundle, region, ell_max, |ell| subset_trap_bound(vol, total, eta, delta, ell))?;
    Ok(TrapReport { delta, eta, region_volume: vol, total_volume: total, rows })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StickyWitness {
    pub vertex: VertexId,
    /// The region `T` this vertex was certified against.
    pub region: VertexSet,
    pub trap: f64,
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StickySet {
    pub members: VertexSet,
    pub witnesses: Vec<StickyWitness>,
    /// `(1 - eta) vol(S)`: regions are at least this heavy.
    pub region_volume_target: f64,
    /// False if extraction stopped because no vertex of a region met the
    /// bound (which the subset bound rules out).
    pub complete: bool,
}

/// Iterative extraction of sticky vertices from a low-conductance side.
///
/// While the remaining part `R` of `S` has volume at least `(1 - eta) vol(S)`:
/// build `T` from `R` greedily by descending `trap(v, R, l)` until
/// `vol(T) >= (1 - eta) vol(S)`, take the vertex of `T` with the largest
/// `trap(v, T, l)`, and if it meets the bound move it from `R` into `P`.
pub fn sticky_set(
    bundle: &SpectralBundle,
    cut: &Cut,
    eta: f64,
    steps: u64,
) -> Result<StickySet, SpectralError> {
    let n = bundle.n();
    if n > BRUTE_FORCE_MAX_N {
        return Err(SpectralError::TooLarge { n, max: BRUTE_FORCE_MAX_N });
    }
    if !(eta > 0.0 && eta < 5.0 / 6.0) {
        return Err(SpectralError::EtaOutOfRange(eta));
    }
    let delta = check_delta(cut)?;
    let degrees = bundle.degrees();
    let total = 2 * bundle.m();
    let power = bundle.walk_power(steps);
    // trap(v, T, l) = sum over w in T of M^l(w, v)
    let trap = |v: usize, region: &[bool]| -> f64 {
        (0..n).filter(|&w| region[w]).map(|w| power[(w, v)]).sum()
    };

    let target = (1.0 - eta) * cut.side.volume() as f64;
    let mut remaining: Vec<bool> = (0..n).map(|i| cut.side.contains_index(i)).collect();
    let mut members = vec![false; n];
    let mut witnesses = Vec::new();
    let mut complete = true;
    loop {
        let remaining_volume: usize = (0..n).filter(|&i| remaining[i]).map(|i| degrees[i]).sum();
        if remaining_volume == 0 || (remaining_volume as f64) < target {
            break;
        }
        let mut order: Vec<(usize, f64)> =
            (0..n).filter(|&i| remaining[i]).map(|i| (i, trap(i, &remaining))).collect();
        order.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        let mut region = vec![false; n];
        let mut volume = 0usize;
        for &(i, _) in &order {
            if volume as f64 >= target && volume > 0 {
                break;
            }
            region[i] = true;
            volume += degrees[i];
        }
        let bound = sticky_bound(volume, total, eta, delta, steps);
        let (best, best_trap) = (0..n)
            .filter(|&i| region[i])
            .map(|i| (i, trap(i, &region)))
            .max_by(|a, b| a.1.total_cmp(&b.1).then(b.0.cmp(&a.0)))
            .expect("region is nonempty");
        if best_trap < bound - TRAP_SLACK {
            complete = false;
            break;
        }
        remaining[best] = false;
        members[best] = true;
        witnesses.push(StickyWitness {
            vertex: VertexId::from_index(best),
            region: VertexSet::from_membership(degrees, region),
            trap: best_trap,
            bound,
        });
    }
    Ok(StickySet {
        members: VertexSet::from_membership(degrees, members),
        witnesses,
        region_volume_target: target,
        complete,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheegerReport {
    /// Lazy-walk Cheeger constant.
    pub phi: f64,
    pub lambda2: f64,
    /// `phi^2 / 2`.
    pub lower: f64,
    /// `1 - lambda_2`.
    pub gap: f64,
    /// `2 phi`.
    pub upper: f64,
    pub lower_ok: bool,
    pub upper_ok: bool,
}

impl CheegerReport {
    pub fn pass(&self) -> bool {
        self.lower_ok && self.upper_ok
    }
}

/// `phi^2/2 <= 1 - lambda_2 <= 2 phi` with brute-force `phi`.
pub fn verify_cheeger(bundle: &SpectralBundle, graph: &Graph) -> Result<CheegerReport, SpectralError> {
    let phi = cheeger_constant_lazy(graph)?;
    let lambda2 = bundle.lambda2();
    let (lower, gap, upper) = (phi * phi / 2.0, 1.0 - lambda2, 2.0 * phi);
    Ok(CheegerReport {
        phi,
        lambda2,
        lower,
        gap,
        upper,
        lower_ok: lower <= gap + CHEEGER_TOLERANCE,
        upper_ok: gap <= upper + CHEEGER_TOLERANCE,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MixingReport {
    pub ell: u64,
    pub lambda2: f64,
    /// `lambda_2^l`.
    pub bound: f64,
    /// `max |M^l(v,u) - deg(v)/2m|` over all pairs.
    pub max_deviation: f64,
    /// `(v, u)` attaining the maximum.
    pub worst_pair: (VertexId, VertexId),
    /// `max(0, max_deviation - bound)`.
    pub max_violation: f64,
    /// Same maximum after scaling by `sqrt(deg(u)/deg(v))`; this form is
    /// bounded by `lambda_2^l` on every graph, regular or not.
    pub max_scaled_deviation: f64,
}

impl MixingReport {
    pub fn pass(&self) -> bool {
        self.max_violation <= MIXING_TOLERANCE
    }

    pub fn scaled_pass(&self) -> bool {
        self.max_scaled_deviation <= self.bound + MIXING_TOLERANCE
    }
}

/// Pairwise deviation of the `l`-step walk from stationarity.
pub fn verify_mixing(bundle: &SpectralBundle, ell: u64) -> MixingReport {
    let power = bundle.walk_power(ell);
    let n = bundle.n();
    let degrees = bundle.degrees();
    let mut max_deviation = 0.0f64;
    let mut max_scaled = 0.0f64;
    let mut worst = (0, 0);
    for v in 0..n {
        for u in 0..n {
            let dev = (power[(v, u)] - bundle.stationary()[v]).abs();
            if dev > max_deviation {
                max_deviation = dev;
                worst = (v, u);
            }
            max_scaled = max_scaled.max(dev * (degrees[u] as f64 / degrees[v] as f64).sqrt());
        }
    }
    let lambda2 = bundle.lambda2();
    let bound = lambda2.powf(ell as f64);
    MixingReport {
        ell,
        lambda2,
        bound,
        max_deviation,
        worst_pair: (VertexId::from_index(worst.0), VertexId::from_index(worst.1)),
        max_violation: (max_deviation - bound).max(0.0),
        max_scaled_deviation: max_scaled,
    }
}
