use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Upper bound on Jacobi sweeps before giving up on the tolerance.
pub const MAX_SWEEPS: usize = 100;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrumReport {
    /// Descending, non-negative.
    pub singular_values: Vec<f64>,
    /// Instances averaged into the matrix; zero for a bare matrix.
    pub sample_count: usize,
    pub matrix_dimension: usize,
    pub sweeps: usize,
    /// False when `MAX_SWEEPS` ran out before the tolerance was met.
    pub converged: bool,
}

impl SpectrumReport {
    pub fn count_below(&self, threshold: f64) -> usize {
        self.singular_values
            .iter()
            .filter(|&&s| s < threshold)
            .count()
    }
}

/// Singular values of a square matrix from the eigenvalues of `MᵀM`,
/// found by cyclic Jacobi rotations.
///
/// Iteration stops once the off-diagonal Frobenius mass of the rotated
/// `MᵀM` falls below `1e-12·‖M‖_F`, or below the rounding floor
/// `n·ε·‖MᵀM‖_F` when that is larger.
pub fn singular_spectrum(matrix: &Tensor) -> Result<SpectrumReport> {
    let shape = matrix.shape();
    if shape.len() != 2 || shape[0] != shape[1] {
        return Err(Error::shape(
            "singular_spectrum",
            format!("expected a square matrix, got {shape:?}"),
        ));
    }
    if !matrix.all_finite() {
        return Err(Error::NonFinite("singular_spectrum input".into()));
    }
    let n = shape[0];
    let m = matrix.data();
    let mut a = vec![0.0; n * n];
    for i in 0..n {
        for j in i..n {
            let v: f64 = (0..n).map(|k| m[k * n + i] * m[k * n + j]).sum();
            a[i * n + j] = v;
            a[j * n + i] = v;
        }
    }
    let norm_m = m.iter().map(|v| v * v).sum::<f64>().sqrt();
    let norm_a = a.iter().map(|v| v * v).sum::<f64>().sqrt();
    let tol = (1e-12 * norm_m).max(n as f64 * f64::EPSILON * norm_a);
    let off = |a: &[f64]| {
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    s += a[i * n + j] * a[i * n + j];
                }
            }
        }
        s.sqrt()
    };
    let mut sweeps = 0;
    let mut converged = off(&a) <= tol;
    while !converged && sweeps < MAX_SWEEPS {
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[q * n + q] - a[p * n + p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
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
            }
        }
        sweeps += 1;
        converged = off(&a) <= tol;
    }
    let mut singular_values: Vec<f64> = (0..n).map(|i| a[i * n + i].max(0.0).sqrt()).collect();
    singular_values.sort_by(|x, y| y.total_cmp(x));
    Ok(SpectrumReport {
        singular_values,
        sample_count: 0,
        matrix_dimension: n,
        sweeps,
        converged,
    })
}

/// Counts of values in uniform bins over `[0, max]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    /// `bins + 1` ascending edges.
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
}

/// The maximum lands in the last bin; an all-zero input fills the first.
pub fn histogram(values: &[f64], bins: usize) -> Result<Histogram> {
    if bins == 0 {
        return Err(Error::config("bins", "must be at least 1"));
    }
    let max = values.iter().copied().fold(0.0, f64::max);
    let width = max / bins as f64;
    let edges = (0..=bins).map(|i| i as f64 * width).collect();
    let mut counts = vec![0; bins];
    for &v in values {
        let b = if width > 0.0 {
            ((v / width) as usize).min(bins - 1)
        } else {
            0
        };
        counts[b] += 1;
    }
    Ok(Histogram { edges, counts })
}
