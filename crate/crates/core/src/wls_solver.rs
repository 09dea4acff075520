//! Block weighted least squares.
//!
//! With `Lambda = [d_out] x Lambda_scalar` the normal equations decouple into
//! `d_out` systems sharing one `N_eff x N_eff` Gram matrix, so the fit is a
//! single matrix least-squares problem `min_C |A C - B|_F`.

use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operator_basis::{FeatureMap, OperatorBasis};
use crate::sampling::{numerical_rank, SampleBatch, RANK_TOL};

/// `c_delta = 1 / (delta + (1 - delta) ln(1 - delta))`.
pub fn c_delta(delta: f64) -> Result<f64> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::Domain(format!("delta = {delta} outside (0, 1)")));
    }
    let denom = if delta < 0.5 {
        // sum_{k>=2} delta^k / (k (k-1)) avoids cancellation near zero
        let mut term = delta;
        let mut sum = 0.0;
        for k in 2..200 {
            term *= delta;
            let add = term / (k * (k - 1)) as f64;
            sum += add;
            if add < sum * 1e-18 {
                break;
            }
        }
        sum
    } else {
        delta + (1.0 - delta) * (-delta).ln_1p()
    };
    Ok(1.0 / denom)
}

/// `ceil(c_delta N_eff ln(2 N_eff / epsilon))`.
pub fn min_samples(n_eff: usize, delta: f64, epsilon: f64) -> Result<usize> {
    if n_eff == 0 {
        return Err(Error::Domain("N_eff must be at least 1".into()));
    }
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::Domain(format!("epsilon = {epsilon} outside (0, 1)")));
    }
    let n = n_eff as f64;
    Ok((c_delta(delta)? * n * (2.0 * n / epsilon).ln()).ceil() as usize)
}

/// `gamma(N) = 1 / (c_delta ln(2 N / epsilon))`, a logged diagnostic.
pub fn gamma_n(n: usize, delta: f64, epsilon: f64) -> Result<f64> {
    Ok(1.0 / (c_delta(delta)? * (2.0 * n as f64 / epsilon).ln()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StabilityBudget {
    pub delta: f64,
    pub epsilon: f64,
    pub c_delta: f64,
    pub m_min: usize,
}

impl StabilityBudget {
    pub fn new(n_eff: usize, delta: f64, epsilon: f64) -> Result<Self> {
        Ok(Self {
            delta,
            epsilon,
            c_delta: c_delta(delta)?,
            m_min: min_samples(n_eff, delta, epsilon)?,
        })
    }
}

/// Scaled design and targets: rows `sqrt(w_i / M) phi(f_i)` and `sqrt(w_i / M) g_i`.
#[derive(Debug, Clone)]
pub struct WlsSystem {
    basis: Arc<OperatorBasis>,
    design: DMatrix<f64>,
    targets: DMatrix<f64>,
}

pub fn assemble(basis: &Arc<OperatorBasis>, samples: &SampleBatch, outputs: &[Vec<f64>]) -> Result<WlsSystem> {
    let m = samples.len();
    if m == 0 {
        return Err(Error::DimensionMismatch("no samples".into()));
    }
    if samples.weights.len() != m || outputs.len() != m {
        return Err(Error::DimensionMismatch(format!(
            "{m} inputs, {} weights, {} outputs",
            samples.weights.len(),
            outputs.len()
        )));
    }
    let (n, d_out) = (basis.n_eff(), basis.d_out());
    if let Some(bad) = outputs.iter().find(|g| g.len() != d_out) {
        return Err(Error::DimensionMismatch(format!("output of length {} for d_out {d_out}", bad.len())));
    }
    if let Some(bad) = samples.inputs.iter().find(|f| f.len() != basis.d_in()) {
        return Err(Error::DimensionMismatch(format!("input of length {} for d_in {}", bad.len(), basis.d_in())));
    }
    if let Some(w) = samples.weights.iter().find(|w| !(**w > 0.0) || !w.is_finite()) {
        return Err(Error::Domain(format!("sample weight {w} not positive")));
    }
    let rows: Vec<Vec<f64>> = samples
        .inputs
        .par_iter()
        .zip(&samples.weights)
        .map(|(f, &w)| {
            let s = (w / m as f64).sqrt();
            let mut phi = vec![0.0; n];
            basis.eval_into(f, &mut phi);
            phi.iter_mut().for_each(|v| *v *= s);
            phi
        })
        .collect();
    let design = DMatrix::from_fn(m, n, |i, j| rows[i][j]);
    let targets = DMatrix::from_fn(m, d_out, |i, o| (samples.weights[i] / m as f64).sqrt() * outputs[i][o]);
    Ok(WlsSystem {
        basis: Arc::clone(basis),
        design,
        targets,
    })
}

impl WlsSystem {
    pub fn basis(&self) -> &Arc<OperatorBasis> {
        &self.basis
    }

    pub fn design(&self) -> &DMatrix<f64> {
        &self.design
    }

    pub fn targets(&self) -> &DMatrix<f64> {
        &self.targets
    }

    pub fn rows(&self) -> usize {
        self.design.nrows()
    }

    /// `G = A^T A`, the shared diagonal block of the full Gram matrix.
    pub fn gram(&self) -> DMatrix<f64> {
        self.design.tr_mul(&self.design)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GramSummary {
    pub spectral_gap: f64,
    pub condition: f64,
    pub block_size: usize,
    pub min_eigenvalue: f64,
    pub max_eigenvalue: f64,
}

impl GramSummary {
    pub fn from_gram(gram: DMatrix<f64>) -> Result<Self> {
        let n = gram.nrows();
        let eig = SymmetricEigen::try_new(gram, f64::EPSILON, 10_000).ok_or(Error::EigenSolveFailed)?;
        let lo = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = eig.eigenvalues.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let gap = eig.eigenvalues.iter().map(|l| (l - 1.0).abs()).fold(0.0, f64::max);
        let condition = if lo > 0.0 { hi / lo } else { f64::INFINITY };
        Ok(Self {
            spectral_gap: gap,
            condition,
            block_size: n,
            min_eigenvalue: lo,
            max_eigenvalue: hi,
        })
    }

    pub fn stable(&self, delta: f64) -> bool {
        self.spectral_gap <= delta
    }
}

pub fn gram_diagnostics(system: &WlsSystem) -> Result<GramSummary> {
    GramSummary::from_gram(system.gram())
}

/// Fitted coefficients `C` (`N_eff x d_out`); prediction is `C^T phi(f)`.
#[derive(Debug, Clone)]
pub struct OperatorEstimate {
    basis: Arc<OperatorBasis>,
    coefficients: DMatrix<f64>,
    pub rank: usize,
    pub residual: f64,
    pub tau: Option<f64>,
    pub conditioned_out: bool,
}

impl OperatorEstimate {
    pub fn new(basis: Arc<OperatorBasis>, coefficients: DMatrix<f64>) -> Result<Self> {
        if coefficients.shape() != (basis.n_eff(), basis.d_out()) {
            return Err(Error::DimensionMismatch(format!(
                "coefficients {:?} for basis ({}, {})",
                coefficients.shape(),
                basis.n_eff(),
                basis.d_out()
            )));
        }
        let rank = basis.n_eff();
        Ok(Self {
            basis,
            coefficients,
            rank,
            residual: 0.0,
            tau: None,
            conditioned_out: false,
        })
    }

    pub fn basis(&self) -> &Arc<OperatorBasis> {
        &self.basis
    }

    pub fn coefficients(&self) -> &DMatrix<f64> {
        &self.coefficients
    }

    pub fn with_tau(mut self, tau: f64) -> Self {
        self.tau = Some(tau);
        self
    }

    pub fn predict(&self, fhat: &[f64]) -> Vec<f64> {
        predict(self, fhat)
    }
}

fn min_norm_from_svd(m: DMatrix<f64>, rhs: &DMatrix<f64>) -> (DMatrix<f64>, usize) {
    let svd = m.svd(true, true);
    let rank = numerical_rank(svd.singular_values.as_slice());
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let u = svd.u.as_ref().unwrap();
    let vt = svd.v_t.as_ref().unwrap();
    let mut utb = u.tr_mul(rhs);
    for (i, s) in svd.singular_values.iter().enumerate() {
        let inv = if *s > RANK_TOL * smax { 1.0 / s } else { 0.0 };
        utb.row_mut(i).scale_mut(inv);
    }
    (vt.tr_mul(&utb), rank)
}

/// Least squares by QR of the design; rank deficiency falls back to the
/// minimum-norm solution and is reported through `rank`.
pub fn solve(system: &WlsSystem) -> OperatorEstimate {
    let (m, n) = system.design.shape();
    let (coefficients, rank) = if m >= n {
        let qr = system.design.clone().qr();
        let mut qtb = system.targets.clone();
        qr.q_tr_mul(&mut qtb);
        let qtb = qtb.rows(0, n).into_owned();
        let r = qr.r();
        let sv = r.clone().singular_values();
        let rank = numerical_rank(sv.as_slice());
        if rank == n {
            match r.solve_upper_triangular(&qtb) {
                Some(c) => (c, rank),
                None => min_norm_from_svd(r, &qtb),
            }
        } else {
            min_norm_from_svd(r, &qtb)
        }
    } else {
        min_norm_from_svd(system.design.clone(), &system.targets)
    };
    let residual = (&system.design * &coefficients - &system.targets).norm();
    OperatorEstimate {
        basis: Arc::clone(&system.basis),
        coefficients,
        rank,
        residual,
        tau: None,
        conditioned_out: false,
    }
}

/// Radial truncation `T_tau(g) = g min(|g|, tau) / |g|`.
pub fn truncate_output(prediction: &[f64], tau: f64) -> Result<Vec<f64>> {
    if !(tau > 0.0) {
        return Err(Error::Domain(format!("tau = {tau} must be positive")));
    }
    let norm = prediction.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm <= tau {
        return Ok(prediction.to_vec());
    }
    let s = tau / norm;
    Ok(prediction.iter().map(|v| v * s).collect())
}

/// Twice the largest training output norm.
pub fn default_tau(outputs: &[Vec<f64>]) -> f64 {
    2.0 * outputs
        .iter()
        .map(|g| g.iter().map(|v| v * v).sum::<f64>().sqrt())
        .fold(0.0, f64::max)
}

/// Zero estimate when the Gram gap exceeds `delta`; the boundary is kept.
pub fn condition_estimator(estimate: &OperatorEstimate, summary: &GramSummary, delta: f64) -> OperatorEstimate {
    let mut out = estimate.clone();
    if summary.spectral_gap > delta {
        out.coefficients.fill(0.0);
        out.conditioned_out = true;
    }
    out
}

pub fn predict(estimate: &OperatorEstimate, fhat: &[f64]) -> Vec<f64> {
    let mut phi = vec![0.0; estimate.basis.n_eff()];
    estimate.basis.eval_into(fhat, &mut phi);
    let c = &estimate.coefficients;
    let out: Vec<f64> = (0..c.ncols())
        .map(|o| c.column(o).iter().zip(&phi).map(|(a, b)| a * b).sum())
        .collect();
    match estimate.tau {
        Some(tau) => truncate_output(&out, tau).unwrap_or(out),
        None => out,
    }
}
