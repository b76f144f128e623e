use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Graph, GraphError};

const REGULAR_ATTEMPTS: usize = 10_000;

/// Test-fixture graph families.
///
/// Textual form (`family:param[:param]`):
/// `complete:N`, `cycle:N`, `path:N`, `dumbbell:K`, `random_regular:D:N`
/// (alias `regular:D:N`), `barbell_path:K:LEN` (alias `barbell:K:LEN`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Family {
    Complete { n: usize },
    Cycle { n: usize },
    Path { n: usize },
    /// Two copies of `K_k` joined by one edge between vertex `k` and `k + 1`.
    Dumbbell { k: usize },
    RandomRegular { d: usize, n: usize },
    /// Two copies of `K_k` joined through a path with `len` interior vertices.
    BarbellPath { k: usize, len: usize },
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Family::Complete { n } => write!(f, "complete:{n}"),
            Family::Cycle { n } => write!(f, "cycle:{n}"),
            Family::Path { n } => write!(f, "path:{n}"),
            Family::Dumbbell { k } => write!(f, "dumbbell:{k}"),
            Family::RandomRegular { d, n } => write!(f, "random_regular:{d}:{n}"),
            Family::BarbellPath { k, len } => write!(f, "barbell_path:{k}:{len}"),
        }
    }
}

impl FromStr for Family {
    type Err = GraphError;

    fn from_str(spec: &str) -> Result<Self, Self::Err> {
        let bad = |why: &str| GraphError::InfeasibleParameters(format!("`{spec}`: {why}"));
        let mut parts = spec.split(':');
        let name = parts.next().unwrap_or_default();
        let params = parts
            .map(|p| p.trim().parse::<usize>().map_err(|_| bad("parameters must be non-negative integers")))
            .collect::<Result<Vec<_>, _>>()?;
        let arity = |k: usize| {
            if params.len() == k {
                Ok(())
            } else {
                Err(bad(&format!("expected {k} parameter(s), got {}", params.len())))
            }
        };
        let family = match name {
            "complete" => {
                arity(1)?;
                Family::Complete { n: params[0] }
            }
            "cycle" => {
                arity(1)?;
                Family::Cycle { n: params[0] }
            }
            "path" => {
                arity(1)?;
                Family::Path { n: params[0] }
            }
            "dumbbell" => {
                arity(1)?;
                Family::Dumbbell { k: params[0] }
            }
            "random_regular" | "regular" => {
                arity(2)?;
                Family::RandomRegular { d: params[0], n: params[1] }
            }
            "barbell_path" | "barbell" => {
                arity(2)?;
                Family::BarbellPath { k: params[0], len: params[1] }
            }
            other => return Err(bad(&format!("unknown family `{other}`"))),
        };
        family.check()?;
        Ok(family)
    }
}

impl Family {
    /// Vertex count of the generated graph.
    pub fn vertex_count(&self) -> usize {
        match *self {
            Family::Complete { n }
            | Family::Cycle { n }
            | Family::Path { n }
            | Family::RandomRegular { n, .. } => n,
            Family::Dumbbell { k } => 2 * k,
            Family::BarbellPath { k, len } => 2 * k + len,
        }
    }

    fn check(&self) -> Result<(), GraphError> {
        let fail = |why: String| Err(GraphError::InfeasibleParameters(format!("{self}: {why}")));
        match *self {
            Family::Complete { n } if n < 2 => fail("complete graph needs n >= 2".into()),
            Family::Cycle { n } if n < 3 => fail("cycle needs n >= 3".into()),
            Family::Path { n } if n < 2 => fail("path needs n >= 2".into()),
            Family::Dumbbell { k } if k < 1 => fail("dumbbell needs k >= 1".into()),
            Family::BarbellPath { k, .. } if k < 1 => fail("barbell_path needs k >= 1".into()),
            Family::RandomRegular { d, n } => {
                if d == 0 || d >= n {
                    fail(format!("need 1 <= d < n, got d={d}, n={n}"))
                } else if (n * d) % 2 != 0 {
                    fail(format!("n*d must be even, got {}", n * d))
                } else if d == 1 && n > 2 {
                    fail("a 1-regular graph on more than 2 vertices is disconnected".into())
                } else {
                    Ok(())
                }
            }
            _ => Ok(()),
        }
    }
}

/// Builds a graph of the given family. Only `RandomRegular` consumes `seed`;
/// output is a pure function of `(family, seed)`.
pub fn generate(family: &Family, seed: u64) -> Result<Graph, GraphError> {
    family.check()?;
    let n = family.vertex_count();
    let mut adjacency = vec![Vec::new(); n];
    let mut link = |u: usize, v: usize| {
        adjacency[u].push(v);
        adjacency[v].push(u);
    };
    match *family {
        Family::Complete { n } => clique(&mut link, 0, n),
        Family::Cycle { n } => (0..n).for_each(|v| link(v, (v + 1) % n)),
        Family::Path { n } => (1..n).for_each(|v| link(v - 1, v)),
        Family::Dumbbell { k } => {
            clique(&mut link, 0, k);
            clique(&mut link, k, k);
            link(k - 1, k);
        }
        Family::BarbellPath { k, len } => {
            clique(&mut link, 0, k);
            clique(&mut link, k + len, k);
            (k..=k + len).for_each(|v| link(v - 1, v));
        }
        Family::RandomRegular { d, n } => return random_regular(d, n, seed),
    }
    Graph::from_adjacency(adjacency)
}

fn clique(link: &mut impl FnMut(usize, usize), start: usize, size: usize) {
    for u in start..start + size {
        for v in u + 1..start + size {
            link(u, v);
        }
    }
}

/// Configuration model with rejection of loops, multi-edges and
/// disconnected outcomes.
fn random_regular(d: usize, n: usize, seed: u64) -> Result<Graph, GraphError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut stubs: Vec<usize> = (0..n).flat_map(|v| std::iter::repeat_n(v, d)).collect();
    'attempt: for _ in 0..REGULAR_ATTEMPTS {
        stubs.shuffle(&mut rng);
        let mut adjacency = vec![Vec::with_capacity(d); n];
        for pair in stubs.chunks_exact(2) {
            let (u, v) = (pair[0], pair[1]);
            if u == v || adjacency[u].contains(&v) {
                continue 'attempt;
            }
            adjacency[u].push(v);
            adjacency[v].push(u);
        }
        match Graph::from_adjacency(adjacency) {
            Ok(graph) => return Ok(graph),
            Err(GraphError::Disconnected(_)) => continue,
            Err(other) => return Err(other),
        }
    }
    Err(GraphError::InfeasibleParameters(format!(
        "no simple connected {d}-regular graph on {n} vertices after {REGULAR_ATTEMPTS} attempts"
    )))
}
