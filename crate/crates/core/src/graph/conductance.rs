use super::{Cut, Graph, GraphError, VertexSet};

/// Largest vertex count accepted by exhaustive subset enumeration.
pub const BRUTE_FORCE_MAX_N: usize = 24;

/// `E(S, V \ S) / min(vol(S), vol(V \ S))`.
pub fn cut_conductance(graph: &Graph, side: &VertexSet) -> Result<f64, GraphError> {
    Cut::new(graph, side.clone()).map(|cut| cut.conductance)
}

/// Exhaustive minimum conductance over all cuts.
///
/// The witness always has `vol <= m`. Among equal-conductance witnesses the
/// one with the smallest membership mask (bit `i` = vertex `i + 1`) wins.
pub fn min_conductance_bruteforce(graph: &Graph) -> Result<(f64, VertexSet), GraphError> {
    check_size(graph)?;
    let masks = graph.neighbor_masks();
    let universe = full_mask(graph.n());
    // A connected graph with n >= 2 always has a cut of positive volume.
    let best = min_cut_within(&masks, universe).ok_or(GraphError::EmptySide)?;
    Ok((best.conductance(), VertexSet::from_mask(graph.degrees(), best.mask)))
}

/// Cheeger constant of the lazy walk: `min E(U, V\U) / (2 vol(U))` over
/// `vol(U) <= m`, i.e. half the graph conductance.
pub fn cheeger_constant_lazy(graph: &Graph) -> Result<f64, GraphError> {
    min_conductance_bruteforce(graph).map(|(phi, _)| phi / 2.0)
}

/// Greedy extraction of a low-conductance set.
///
/// Starting from `A = {}` and `R = V`, repeatedly finds the
/// minimum-conductance cut `(X, R \ X)` of the subgraph induced by `R`
/// (degrees and crossing edges measured inside `R`, `vol_R(X) <= vol_R(R \ X)`).
/// While that conductance is at most `threshold`, `X` moves from `R` into `A`.
/// Returns `None` when the very first search finds no qualifying cut.
pub fn find_low_conductance_set(
    graph: &Graph,
    threshold: f64,
) -> Result<Option<VertexSet>, GraphError> {
    check_size(graph)?;
    let masks = graph.neighbor_masks();
    let mut remaining = full_mask(graph.n());
    let mut collected = 0u64;
    while remaining.count_ones() >= 2 {
        match min_cut_within(&masks, remaining) {
            Some(best) if best.conductance() <= threshold => {
                collected |= best.mask;
                remaining &= !best.mask;
            }
            _ => break,
        }
    }
    Ok((collected != 0).then(|| VertexSet::from_mask(graph.degrees(), collected)))
}

fn check_size(graph: &Graph) -> Result<(), GraphError> {
    if graph.n() > BRUTE_FORCE_MAX_N {
        return Err(GraphError::TooLarge { n: graph.n(), max: BRUTE_FORCE_MAX_N });
    }
    Ok(())
}

fn full_mask(n: usize) -> u64 {
    if n == 64 {
        u64::MAX
    } else {
        (1u64 << n) - 1
    }
}

#[derive(Debug, Clone, Copy)]
struct BestCut {
    crossing: u64,
    volume: u64,
    mask: u64,
}

impl BestCut {
    fn conductance(&self) -> f64 {
        self.crossing as f64 / self.volume as f64
    }

    /// Exact rational comparison, then smallest mask.
    fn beats(&self, other: &BestCut) -> bool {
        let lhs = self.crossing * other.volume;
        let rhs = other.crossing * self.volume;
        lhs < rhs || (lhs == rhs && self.mask < other.mask)
    }
}

/// Minimum-conductance cut of the subgraph induced by `universe`, visiting
/// every subset once in Gray-code order with O(1) incremental updates.
fn min_cut_within(masks: &[u64], universe: u64) -> Option<BestCut> {
    let verts: Vec<usize> = (0..masks.len()).filter(|&v| universe >> v & 1 == 1).collect();
    let inner_degree: Vec<u64> = verts
        .iter()
        .map(|&v| u64::from((masks[v] & universe).count_ones()))
        .collect();
    let total_volume: u64 = inner_degree.iter().sum();
    if total_volume == 0 {
        return None;
    }

    let mut subset = 0u64;
    let mut crossing = 0u64;
    let mut volume = 0u64;
    let mut best: Option<BestCut> = None;
    for step in 1u64..(1u64 << verts.len()) {
        let slot = step.trailing_zeros() as usize;
        let v = verts[slot];
        let bit = 1u64 << v;
        let deg = inner_degree[slot];
        if subset & bit == 0 {
            let inside = u64::from((masks[v] & subset).count_ones());
            crossing = crossing + deg - 2 * inside;
            volume += deg;
            subset |= bit;
        } else {
            subset &= !bit;
            let inside = u64::from((masks[v] & subset).count_ones());
            crossing = crossing + 2 * inside - deg;
            volume -= deg;
        }
        if volume == 0 || 2 * volume > total_volume {
            continue;
        }
        let candidate = BestCut { crossing, volume, mask: subset };
        if best.as_ref().is_none_or(|b| candidate.beats(b)) {
            best = Some(candidate);
        }
    }
    best
}
