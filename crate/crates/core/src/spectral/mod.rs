//! Dense exact spectral oracle for the lazy random walk.
//!
//! For a graph with adjacency `A` and degree matrix `D`:
//!
//! ```text
//! M = (I + A D^-1) / 2          lazy walk, column-stochastic
//! N = I - D^-1/2 A D^-1/2       normalized Laplacian, symmetric
//! M = D^1/2 (I - N/2) D^-1/2
//! 0 = w_1 <= ... <= w_n <= 2    eigenvalues of N
//! l_i = 1 - w_i / 2             eigenvalues of M (and of I - N/2)
//! pi = d / 2m                   stationary distribution
//! ```
//!
//! Everything here is O(n^2) memory and intended for small graphs; it is the
//! ground truth the distributed tester and the trap-probability bounds are
//! checked against.

pub mod jacobi;
mod verify;

use std::io::{self, Write};

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::graph::{Graph, GraphError, VertexId, VertexSet};

pub use verify::{
    sticky_bound, heavy_coefficient_sum, side_trap_bound, subset_trap_bound, sticky_set,
    verify_cheeger, verify_mixing, verify_side_trap, verify_subset_trap, CheegerReport,
    MixingReport, StickySet, StickyWitness, TrapReport, TrapRow, TrapTable, TRAP_SLACK,
};

/// Largest graph accepted by [`build_spectral`].
pub const SPECTRAL_MAX_N: usize = 2000;
/// Off-diagonal Frobenius norm at which Jacobi iteration stops.
pub const JACOBI_TOLERANCE: f64 = 1e-10;
/// Sweep cap for Jacobi iteration.
pub const JACOBI_MAX_SWEEPS: usize = 100;
/// Walk distributions are renormalized to unit mass this often.
const RENORMALIZE_EVERY: u64 = 64;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpectralError {
    #[error("spectral oracle supports at most {max} vertices, graph has {n}")]
    TooLarge { n: usize, max: usize },
    #[error("eigen-solver did not converge after {sweeps} sweeps (off-diagonal norm {off_diagonal:e})")]
    NoConvergence { sweeps: usize, off_diagonal: f64 },
    #[error("start vertex {0} is not in the trap region")]
    StartOutsideRegion(VertexId),
    #[error("trap region is empty")]
    EmptyRegion,
    #[error("cut conductance {0} is not below 1/3; the trap bound is vacuous")]
    DeltaTooLarge(f64),
    #[error("eta = {0} outside the admissible range")]
    EtaOutOfRange(f64),
    #[error("region T is not a subset of S")]
    NotSubset,
    #[error("vertex {0} out of range")]
    VertexOutOfRange(VertexId),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// Dense walk matrix, normalized Laplacian and its eigen-decomposition.
#[derive(Debug, Clone)]
pub struct SpectralBundle {
    walk: DMatrix<f64>,
    laplacian: DMatrix<f64>,
    omegas: Vec<f64>,
    lambdas: Vec<f64>,
    eigvecs: DMatrix<f64>,
    stationary: Vec<f64>,
    degrees: Vec<usize>,
    m: usize,
    sweeps: usize,
}

pub fn build_spectral(graph: &Graph) -> Result<SpectralBundle, SpectralError> {
    let n = graph.n();
    if n > SPECTRAL_MAX_N {
        return Err(SpectralError::TooLarge { n, max: SPECTRAL_MAX_N });
    }
    let degrees = graph.degrees().to_vec();
    let two_m = graph.total_volume() as f64;
    let mut walk = DMatrix::zeros(n, n);
    let mut laplacian = DMatrix::identity(n, n);
    for u in 0..n {
        walk[(u, u)] = 0.5;
        for &v in graph.neighbors_of_index(u) {
            // Column u holds the next-step distribution from u.
            walk[(v, u)] = 0.5 / degrees[u] as f64;
            laplacian[(u, v)] = -1.0 / ((degrees[u] * degrees[v]) as f64).sqrt();
        }
    }
    let eigen = jacobi::symmetric_eigen(&laplacian, JACOBI_TOLERANCE, JACOBI_MAX_SWEEPS).map_err(
        |e| SpectralError::NoConvergence { sweeps: e.sweeps, off_diagonal: e.off_diagonal },
    )?;
    let lambdas = eigen.values.iter().map(|w| 1.0 - w / 2.0).collect();
    Ok(SpectralBundle {
        walk,
        laplacian,
        omegas: eigen.values,
        lambdas,
        eigvecs: eigen.vectors,
        stationary: degrees.iter().map(|&d| d as f64 / two_m).collect(),
        degrees,
        m: graph.m(),
        sweeps: eigen.sweeps,
    })
}

/// Which trap probability to evaluate.
#[derive(Debug, Clone)]
pub enum TrapQuery {
    /// `trap(u, T, l)`: an `l`-step walk from `start` ends in `region`.
    Vertex { start: VertexId, region: VertexSet, steps: u64 },
    /// `trap(T, l)`: start drawn from `region` proportionally to degree.
    Averaged { region: VertexSet, steps: u64 },
}

/// Iterates `p, Mp, M^2 p, ...` with periodic renormalization.
pub struct WalkIter<'a> {
    bundle: &'a SpectralBundle,
    current: DVector<f64>,
    step: u64,
}

impl Iterator for WalkIter<'_> {
    type Item = DVector<f64>;

    fn next(&mut self) -> Option<Self::Item> {
        let out = self.current.clone();
        self.step += 1;
        self.current = &self.bundle.walk * &self.current;
        if self.step.is_multiple_of(RENORMALIZE_EVERY) {
            let total = self.current.sum();
            self.current /= total;
        }
        Some(out)
    }
}

impl SpectralBundle {
    pub fn n(&self) -> usize {
        self.degrees.len()
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn degrees(&self) -> &[usize] {
        &self.degrees
    }

    pub fn walk_matrix(&self) -> &DMatrix<f64> {
        &self.walk
    }

    pub fn laplacian(&self) -> &DMatrix<f64> {
        &self.laplacian
    }

    /// Eigenvalues of `N`, ascending.
    pub fn omegas(&self) -> &[f64] {
        &self.omegas
    }

    /// `1 - w_i / 2`, in the same order as [`Self::omegas`] (so descending).
    pub fn lambdas(&self) -> &[f64] {
        &self.lambdas
    }

    /// Second largest eigenvalue of the lazy walk.
    pub fn lambda2(&self) -> f64 {
        self.lambdas.get(1).copied().unwrap_or(0.0)
    }

    /// Columns are the unit eigenvectors `e_1..e_n` of `N`.
    pub fn eigenvectors(&self) -> &DMatrix<f64> {
        &self.eigvecs
    }

    pub fn stationary(&self) -> &[f64] {
        &self.stationary
    }

    pub fn sweeps(&self) -> usize {
        self.sweeps
    }

    fn check_vertex(&self, v: VertexId) -> Result<(), SpectralError> {
        if v.0 == 0 || v.index() >= self.n() {
            return Err(SpectralError::VertexOutOfRange(v));
        }
        Ok(())
    }

    pub fn point_mass(&self, start: VertexId) -> Result<DVector<f64>, SpectralError> {
        self.check_vertex(start)?;
        let mut p = DVector::zeros(self.n());
        p[start.index()] = 1.0;
        Ok(p)
    }

    /// `D 1_T / vol(T)`.
    pub fn degree_weighted(&self, region: &VertexSet) -> Result<DVector<f64>, SpectralError> {
        if region.is_empty() {
            return Err(SpectralError::EmptyRegion);
        }
        let vol = region.volume() as f64;
        Ok(DVector::from_iterator(
            self.n(),
            (0..self.n()).map(|i| if region.contains_index(i) { self.degrees[i] as f64 / vol } else { 0.0 }),
        ))
    }

    pub fn walk_from(&self, initial: DVector<f64>) -> WalkIter<'_> {
        WalkIter { bundle: self, current: initial, step: 0 }
    }

    /// `M^steps e_start` by repeated matrix-vector products.
    pub fn walk_distribution(&self, start: VertexId, steps: u64) -> Result<Vec<f64>, SpectralError> {
        let p0 = self.point_mass(start)?;
        let p = self.walk_from(p0).nth(steps as usize).expect("walk iterator is infinite");
        Ok(p.iter().copied().collect())
    }

    pub fn trap_probability(&self, query: &TrapQuery) -> Result<f64, SpectralError> {
        let (p0, region, steps) = match query {
            TrapQuery::Vertex { start, region, steps } => {
                self.check_vertex(*start)?;
                if !region.contains(*start) {
                    return Err(SpectralError::StartOutsideRegion(*start));
                }
                (self.point_mass(*start)?, region, *steps)
            }
            TrapQuery::Averaged { region, steps } => (self.degree_weighted(region)?, region, *steps),
        };
        let p = self.walk_from(p0).nth(steps as usize).expect("walk iterator is infinite");
        Ok(mass_in(&p, region))
    }

    /// `a_i = <D^1/2 1_S, e_i>` for every eigenvector.
    pub fn coefficients(&self, set: &VertexSet) -> Vec<f64> {
        let x = DVector::from_vec(set.sqrt_degree_indicator(&self.degrees));
        (self.eigvecs.transpose() * x).iter().copied().collect()
    }

    /// `(D^1/2 1_S)^T N (D^1/2 1_S)`, which equals `E(S, V \ S)`.
    pub fn quadratic_form(&self, set: &VertexSet) -> f64 {
        let x = DVector::from_vec(set.sqrt_degree_indicator(&self.degrees));
        x.dot(&(&self.laplacian * &x))
    }

    /// `trap(S, l) = (1/vol S) sum_i a_i^2 l_i^l`.
    pub fn spectral_trap(&self, set: &VertexSet, steps: u64) -> Result<f64, SpectralError> {
        if set.is_empty() {
            return Err(SpectralError::EmptyRegion);
        }
        let sum: f64 = self
            .coefficients(set)
            .iter()
            .zip(&self.lambdas)
            .map(|(a, l)| a * a * l.powf(steps as f64))
            .sum();
        Ok(sum / set.volume() as f64)
    }

    /// `M^steps` by binary exponentiation.
    pub fn walk_power(&self, steps: u64) -> DMatrix<f64> {
        let mut result = DMatrix::identity(self.n(), self.n());
        let mut base = self.walk.clone();
        let mut e = steps;
        while e > 0 {
            if e & 1 == 1 {
                result = &result * &base;
            }
            e >>= 1;
            if e > 0 {
                base = &base * &base;
            }
        }
        result
    }

    pub fn write_walk_csv(&self, out: impl Write) -> io::Result<()> {
        write_matrix_csv(&self.walk, out)
    }

    pub fn write_laplacian_csv(&self, out: impl Write) -> io::Result<()> {
        write_matrix_csv(&self.laplacian, out)
    }

    /// One row per eigenpair: `omega,lambda,e_1..e_n` components.
    pub fn write_eigen_csv(&self, mut out: impl Write) -> io::Result<()> {
        let n = self.n();
        let header: Vec<String> = (1..=n).map(|i| format!("v{i}")).collect();
        writeln!(out, "omega,lambda,{}", header.join(","))?;
        for i in 0..n {
            let comps: Vec<String> = (0..n).map(|r| self.eigvecs[(r, i)].to_string()).collect();
            writeln!(out, "{},{},{}", self.omegas[i], self.lambdas[i], comps.join(","))?;
        }
        Ok(())
    }
}

fn mass_in(p: &DVector<f64>, region: &VertexSet) -> f64 {
    p.iter()
        .enumerate()
        .filter(|&(i, _)| region.contains_index(i))
        .map(|(_, x)| x)
        .sum()
}

pub fn write_matrix_csv(matrix: &DMatrix<f64>, mut out: impl Write) -> io::Result<()> {
    for r in 0..matrix.nrows() {
        let row: Vec<String> = (0..matrix.ncols()).map(|c| matrix[(r, c)].to_string()).collect();
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}
