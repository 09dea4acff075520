//! Error metrics, output-energy diagnostics and kernel views of linear fits.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operator_basis::{FeatureMap, OperatorBasis};
use crate::pde_data::sine_mode_1d;
use crate::wls_solver::OperatorEstimate;

/// Deterministic tree summation; bit-stable regardless of thread count.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    const LEAF: usize = 32;
    if xs.len() <= LEAF {
        return xs.iter().sum();
    }
    let (a, b) = xs.split_at(xs.len() / 2);
    pairwise_sum(a) + pairwise_sum(b)
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    pairwise_sum(xs) / xs.len() as f64
}

/// Nearest-rank quantile: the `ceil(p n)`-th smallest value.
pub fn quantile(values: &[f64], p: f64) -> Option<f64> {
    if values.is_empty() || !(0.0..=1.0).contains(&p) {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let rank = ((p * v.len() as f64).ceil() as usize).max(1);
    Some(v[rank - 1])
}

pub fn median(values: &[f64]) -> Option<f64> {
    quantile(values, 0.5)
}

/// Output mode weights `(1 + |n|^2)^alpha`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SobolevWeighting {
    pub alpha: f64,
    pub weights: Vec<f64>,
}

impl SobolevWeighting {
    /// Weights from squared mode norms `|n|^2`.
    pub fn new(alpha: f64, mode_norms_sq: &[f64]) -> Self {
        let weights = mode_norms_sq.iter().map(|n2| (1.0 + n2).powf(alpha)).collect();
        Self { alpha, weights }
    }

    /// Modes `1..=d` of a one-dimensional sine basis.
    pub fn modes_1d(alpha: f64, d: usize) -> Self {
        let sq: Vec<f64> = (1..=d).map(|n| (n * n) as f64).collect();
        Self::new(alpha, &sq)
    }

    pub fn modes_2d(alpha: f64, modes: &[(usize, usize)]) -> Self {
        let sq: Vec<f64> = modes.iter().map(|&(a, b)| (a * a + b * b) as f64).collect();
        Self::new(alpha, &sq)
    }

    /// All-ones weights (plain coefficient l2).
    pub fn unit(d: usize) -> Self {
        Self {
            alpha: 0.0,
            weights: vec![1.0; d],
        }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn norm_sq(&self, g: &[f64]) -> f64 {
        g.iter().zip(&self.weights).map(|(v, w)| w * v * v).sum()
    }

    /// Multiplies coefficients by `sqrt(weight)`; fitting scaled outputs is
    /// fitting in the weighted-orthonormal output basis.
    pub fn scale(&self, g: &[f64]) -> Vec<f64> {
        g.iter().zip(&self.weights).map(|(v, w)| v * w.sqrt()).collect()
    }

    pub fn unscale(&self, g: &[f64]) -> Vec<f64> {
        g.iter().zip(&self.weights).map(|(v, w)| v / w.sqrt()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub samples: usize,
    /// Mean of weighted squared per-sample errors.
    pub mean_squared: f64,
    /// Root of `mean_squared`; the empirical Bochner-norm error.
    pub absolute: f64,
    /// `sqrt(mean err^2 / mean truth^2)` (ratio of means).
    pub relative: Option<f64>,
    /// Mean over samples of `|err_i| / |truth_i|` (mean of ratios).
    pub mean_relative: Option<f64>,
    /// Per-sample error norms at the 5%, 50% and 95% nearest ranks.
    pub quantiles: [f64; 3],
}

pub const REPORT_QUANTILES: [f64; 3] = [0.05, 0.5, 0.95];

pub fn empirical_bochner_error(
    truth: &[Vec<f64>],
    predicted: &[Vec<f64>],
    weighting: &SobolevWeighting,
) -> Result<ErrorReport> {
    if truth.len() != predicted.len() || truth.is_empty() {
        return Err(Error::DimensionMismatch(format!(
            "{} truth rows, {} predictions",
            truth.len(),
            predicted.len()
        )));
    }
    let d = weighting.len();
    if truth.iter().chain(predicted).any(|g| g.len() != d) {
        return Err(Error::DimensionMismatch(format!("rows must have {d} output modes")));
    }
    let err_sq: Vec<f64> = truth
        .iter()
        .zip(predicted)
        .map(|(t, p)| {
            let diff: Vec<f64> = t.iter().zip(p).map(|(a, b)| a - b).collect();
            weighting.norm_sq(&diff)
        })
        .collect();
    let ref_sq: Vec<f64> = truth.iter().map(|t| weighting.norm_sq(t)).collect();
    let mean_squared = mean(&err_sq);
    let mean_ref = mean(&ref_sq);
    let relative = (mean_ref > 0.0).then(|| (mean_squared / mean_ref).sqrt());
    let mean_relative = ref_sq.iter().all(|&r| r > 0.0).then(|| {
        let ratios: Vec<f64> = err_sq.iter().zip(&ref_sq).map(|(e, r)| (e / r).sqrt()).collect();
        mean(&ratios)
    });
    let norms: Vec<f64> = err_sq.iter().map(|e| e.sqrt()).collect();
    let q = REPORT_QUANTILES.map(|p| quantile(&norms, p).unwrap());
    Ok(ErrorReport {
        samples: truth.len(),
        mean_squared,
        absolute: mean_squared.sqrt(),
        relative,
        mean_relative,
        quantiles: q,
    })
}

/// `1 - (energy in the first d_keep modes) / (total energy)`, empirically.
pub fn energy_fraction_lost(outputs: &[Vec<f64>], d_keep: usize) -> Result<f64> {
    if let Some(g) = outputs.iter().find(|g| g.len() < d_keep) {
        return Err(Error::DimensionMismatch(format!("d_keep {d_keep} beyond {} columns", g.len())));
    }
    let total: Vec<f64> = outputs.iter().map(|g| g.iter().map(|v| v * v).sum()).collect();
    let kept: Vec<f64> = outputs.iter().map(|g| g[..d_keep].iter().map(|v| v * v).sum()).collect();
    let total = pairwise_sum(&total);
    if total == 0.0 {
        return Ok(0.0);
    }
    Ok((1.0 - pairwise_sum(&kept) / total).clamp(0.0, 1.0))
}

fn linear_parts(estimate: &OperatorEstimate) -> Result<(&[usize], &[f64])> {
    match estimate.basis().as_ref() {
        OperatorBasis::Linear(b) => Ok((b.input_modes(), b.sigma())),
        _ => Err(Error::UnsupportedBasis("kernel views need a linear rank-one basis".into())),
    }
}

/// Raw-coefficient operator matrix `M[input, output] = C[l, o] / sigma_l`.
pub fn operator_matrix_view(estimate: &OperatorEstimate) -> Result<DMatrix<f64>> {
    let (modes, sigma) = linear_parts(estimate)?;
    let c = estimate.coefficients();
    let d_in = estimate.basis().d_in();
    let mut m = DMatrix::zeros(d_in, c.ncols());
    for (l, (&mode, s)) in modes.iter().zip(sigma).enumerate() {
        for o in 0..c.ncols() {
            m[(mode, o)] += c[(l, o)] / s;
        }
    }
    Ok(m)
}

/// `K(x, y) = sum C[l, o] sigma_l^{-1} xi_{n_l}(x) psi_o(y)` on a 1D sine basis,
/// with coordinate `m` of the input standing for mode `m + 1`. Rows follow `xs`.
pub fn reconstruct_kernel(estimate: &OperatorEstimate, xs: &[f64], ys: &[f64]) -> Result<Vec<Vec<f64>>> {
    let m = operator_matrix_view(estimate)?;
    let (d_in, d_out) = m.shape();
    let xi: Vec<Vec<f64>> = xs.iter().map(|&x| (1..=d_in).map(|n| sine_mode_1d(n, x)).collect()).collect();
    let psi: Vec<Vec<f64>> = ys.iter().map(|&y| (1..=d_out).map(|n| sine_mode_1d(n, y)).collect()).collect();
    // contract the output side once per y
    let mpsi: Vec<Vec<f64>> = psi
        .iter()
        .map(|p| (0..d_in).map(|i| (0..d_out).map(|o| m[(i, o)] * p[o]).sum()).collect())
        .collect();
    Ok(xi
        .iter()
        .map(|a| mpsi.iter().map(|b| a.iter().zip(b).map(|(u, v)| u * v).sum()).collect())
        .collect())
}

/// Relative Frobenius mass off the diagonal of a square block.
pub fn off_diagonal_fraction(m: &DMatrix<f64>) -> f64 {
    let total = m.norm();
    if total == 0.0 {
        return 0.0;
    }
    let mut off = 0.0;
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            if i != j {
                off += m[(i, j)] * m[(i, j)];
            }
        }
    }
    off.sqrt() / total
}
