//! Cyclic Jacobi eigen-decomposition for dense real symmetric matrices.

use nalgebra::DMatrix;

/// Result of a converged decomposition.
#[derive(Debug, Clone)]
pub struct SymmetricEigen {
    /// Eigenvalues in ascending order.
    pub values: Vec<f64>,
    /// Column `i` is the unit eigenvector for `values[i]`, with its first
    /// nonzero component positive.
    pub vectors: DMatrix<f64>,
    /// Full sweeps performed.
    pub sweeps: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoConvergence {
    pub sweeps: usize,
    pub off_diagonal: f64,
}

/// Components at or below this magnitude are skipped when fixing signs.
const SIGN_EPS: f64 = 1e-12;

/// Runs cyclic-by-row Jacobi rotations until the off-diagonal Frobenius norm
/// is at most `tolerance`, or fails after `max_sweeps` sweeps.
///
/// The input must be symmetric; only its values are read.
pub fn symmetric_eigen(
    matrix: &DMatrix<f64>,
    tolerance: f64,
    max_sweeps: usize,
) -> Result<SymmetricEigen, NoConvergence> {
    let n = matrix.nrows();
    assert_eq!(n, matrix.ncols(), "matrix must be square");
    // Row-major working copies.
    let mut a: Vec<f64> = (0..n * n).map(|k| matrix[(k / n, k % n)]).collect();
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }

    let mut sweeps = 0;
    loop {
        let off = off_diagonal_norm(&a, n);
        if off <= tolerance {
            break;
        }
        if sweeps == max_sweeps {
            return Err(NoConvergence { sweeps, off_diagonal: off });
        }
        for p in 0..n {
            for q in p + 1..n {
                rotate(&mut a, &mut v, n, p, q);
            }
        }
        sweeps += 1;
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[i * n + i].total_cmp(&a[j * n + j]));
    let values = order.iter().map(|&i| a[i * n + i]).collect();
    let mut vectors = DMatrix::zeros(n, n);
    for (col, &src) in order.iter().enumerate() {
        let sign = (0..n)
            .map(|row| v[row * n + src])
            .find(|x| x.abs() > SIGN_EPS)
            .map_or(1.0, f64::signum);
        for row in 0..n {
            vectors[(row, col)] = sign * v[row * n + src];
        }
    }
    Ok(SymmetricEigen { values, vectors, sweeps })
}

fn off_diagonal_norm(a: &[f64], n: usize) -> f64 {
    let mut sum = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                sum += a[i * n + j] * a[i * n + j];
            }
        }
    }
    sum.sqrt()
}

/// Applies the rotation annihilating `a[p][q]`: `A <- J^T A J`, `V <- V J`.
fn rotate(a: &mut [f64], v: &mut [f64], n: usize, p: usize, q: usize) {
    let apq = a[p * n + q];
    if apq == 0.0 {
        return;
    }
    let theta = (a[q * n + q] - a[p * n + p]) / (2.0 * apq);
    let t = if theta == 0.0 {
        1.0
    } else {
        theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
    };
    let c = 1.0 / (t * t + 1.0).sqrt();
    let s = t * c;

    for k in 0..n {
        let akp = a[k * n + p];
        let akq = a[k * n + q];
        a[k * n + p] = c * akp - s * akq;
        a[k * n + q] = s * akp + c * akq;
    }
    for k in 0..n {
        let apk = a[p * n + k];
        let aqk = a[q * n + k];
        a[p * n + k] = c * apk - s * aqk;
        a[q * n + k] = s * apk + c * aqk;
    }
    a[p * n + q] = 0.0;
    a[q * n + p] = 0.0;
    for k in 0..n {
        let vkp = v[k * n + p];
        let vkq = v[k * n + q];
        v[k * n + p] = c * vkp - s * vkq;
        v[k * n + q] = s * vkp + c * vkq;
    }
}
