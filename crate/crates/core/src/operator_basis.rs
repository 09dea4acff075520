//! Orthonormal operator families with tensor structure `[d_out] x scalar features`.
//!
//! Every basis element is `psi_o * phi_l(f)` where `psi_o` runs over the
//! orthonormal output modes and `phi_l` over `N_eff` scalar features that are
//! orthonormal under the approximation measure. All computations therefore
//! reduce to the scalar features.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::index_sets::MultiIndex;
use crate::measures::{build_family, PolynomialFamily, ProductMeasure};

/// Scalar feature map shared by every operator basis.
pub trait FeatureMap: Send + Sync {
    /// Length of the input coefficient vector.
    fn d_in(&self) -> usize;
    /// Number of scalar features.
    fn n_eff(&self) -> usize;
    /// Number of output modes.
    fn d_out(&self) -> usize;
    /// Writes the scalar features at `fhat` into `out` (length `n_eff`).
    fn eval_into(&self, fhat: &[f64], out: &mut [f64]);

    /// Total dimension `N = d_out * N_eff`.
    fn dim(&self) -> usize {
        self.d_out() * self.n_eff()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub values: Vec<f64>,
    /// Set when some input coordinate lies outside `[-1, 1]`.
    pub extrapolated: bool,
}

fn outside_support(fhat: &[f64]) -> bool {
    fhat.iter().any(|x| x.abs() > 1.0)
}

/// Rank-one linear operators `sigma_{n1}^{-1} psi_{n2} xi_{n1}^*`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearRankOneBasis {
    input_modes: Vec<usize>,
    sigma: Vec<f64>,
    d_in: usize,
    d_out: usize,
}

impl LinearRankOneBasis {
    /// `input_modes` are positions in the input coefficient vector.
    pub fn new(measure: &ProductMeasure, input_modes: Vec<usize>, d_out: usize) -> Result<Self> {
        if input_modes.is_empty() || d_out == 0 {
            return Err(Error::DimensionMismatch("empty linear basis".into()));
        }
        let sigma = input_modes
            .iter()
            .map(|&m| {
                if m >= measure.dim() {
                    Err(Error::DimensionMismatch(format!(
                        "input mode {m} outside measure of dimension {}",
                        measure.dim()
                    )))
                } else {
                    Ok(measure.marginal(m).std_dev())
                }
            })
            .collect::<Result<Vec<_>>>()?;
        if sigma.iter().any(|&s| !(s > 0.0)) {
            return Err(Error::Domain("sigma must be positive".into()));
        }
        Ok(Self {
            input_modes,
            sigma,
            d_in: measure.dim(),
            d_out,
        })
    }

    pub fn input_modes(&self) -> &[usize] {
        &self.input_modes
    }

    pub fn sigma(&self) -> &[f64] {
        &self.sigma
    }

    /// All `(n1, n2)` pairs in the coefficient layout (feature-major blocks per output).
    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.d_out).flat_map(move |o| self.input_modes.iter().map(move |&m| (m, o)))
    }
}

impl FeatureMap for LinearRankOneBasis {
    fn d_in(&self) -> usize {
        self.d_in
    }
    fn n_eff(&self) -> usize {
        self.input_modes.len()
    }
    fn d_out(&self) -> usize {
        self.d_out
    }
    fn eval_into(&self, fhat: &[f64], out: &mut [f64]) {
        for ((o, &m), &s) in out.iter_mut().zip(&self.input_modes).zip(&self.sigma) {
            *o = fhat[m] / s;
        }
    }
}

/// Tensor orthogonal-polynomial operators `psi_{a0} prod_j p^j_{a_j}(fhat_j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PolyOperatorBasis {
    scalar_indices: Vec<MultiIndex>,
    families: Vec<PolynomialFamily>,
    /// Offsets of each coordinate's value table in a flat buffer.
    offsets: Vec<usize>,
    d_out: usize,
}

impl PolyOperatorBasis {
    pub fn new(measure: &ProductMeasure, scalar_indices: Vec<MultiIndex>, d_out: usize) -> Result<Self> {
        if scalar_indices.is_empty() || d_out == 0 {
            return Err(Error::DimensionMismatch("empty polynomial basis".into()));
        }
        let d = measure.dim();
        if let Some(bad) = scalar_indices.iter().find(|i| i.dim() != d) {
            return Err(Error::DimensionMismatch(format!(
                "index of length {} for measure of dimension {d}",
                bad.dim()
            )));
        }
        let mut max_deg = vec![0usize; d];
        for idx in &scalar_indices {
            for (m, &n) in max_deg.iter_mut().zip(&idx.0) {
                *m = (*m).max(n);
            }
        }
        let families = measure
            .marginals()
            .iter()
            .zip(&max_deg)
            .map(|(m, &n)| build_family(m, n))
            .collect::<Result<Vec<_>>>()?;
        let mut offsets = Vec::with_capacity(d + 1);
        let mut acc = 0;
        for &n in &max_deg {
            offsets.push(acc);
            acc += n + 1;
        }
        offsets.push(acc);
        Ok(Self {
            scalar_indices,
            families,
            offsets,
            d_out,
        })
    }

    pub fn scalar_indices(&self) -> &[MultiIndex] {
        &self.scalar_indices
    }

    pub fn families(&self) -> &[PolynomialFamily] {
        &self.families
    }

    /// Largest degree used in coordinate `j`.
    pub fn max_degree(&self, j: usize) -> usize {
        self.families[j].max_degree()
    }

    pub fn contains_zero_index(&self) -> bool {
        self.scalar_indices.iter().any(|i| i.is_zero())
    }
}

impl FeatureMap for PolyOperatorBasis {
    fn d_in(&self) -> usize {
        self.families.len()
    }
    fn n_eff(&self) -> usize {
        self.scalar_indices.len()
    }
    fn d_out(&self) -> usize {
        self.d_out
    }
    fn eval_into(&self, fhat: &[f64], out: &mut [f64]) {
        let mut table = vec![0.0; *self.offsets.last().unwrap()];
        for (j, fam) in self.families.iter().enumerate() {
            fam.eval_all(fhat[j], &mut table[self.offsets[j]..self.offsets[j + 1]]);
        }
        for (o, idx) in out.iter_mut().zip(&self.scalar_indices) {
            *o = idx
                .0
                .iter()
                .enumerate()
                .filter(|(_, &n)| n > 0)
                .map(|(j, &n)| table[self.offsets[j] + n])
                .product();
        }
    }
}

/// Features `b = R^{-T} g` orthonormalized against a discrete measure.
#[derive(Debug, Clone)]
pub struct OrthonormalizedBasis {
    raw: Box<OperatorBasis>,
    /// Upper-triangular factor of the scaled raw feature matrix.
    r: DMatrix<f64>,
}

impl OrthonormalizedBasis {
    pub(crate) fn new(raw: OperatorBasis, r: DMatrix<f64>) -> Self {
        Self {
            raw: Box::new(raw),
            r,
        }
    }

    pub fn raw(&self) -> &OperatorBasis {
        &self.raw
    }

    pub fn triangular_factor(&self) -> &DMatrix<f64> {
        &self.r
    }
}

impl FeatureMap for OrthonormalizedBasis {
    fn d_in(&self) -> usize {
        self.raw.d_in()
    }
    fn n_eff(&self) -> usize {
        self.raw.n_eff()
    }
    fn d_out(&self) -> usize {
        self.raw.d_out()
    }
    fn eval_into(&self, fhat: &[f64], out: &mut [f64]) {
        self.raw.eval_into(fhat, out);
        // forward substitution with R^T (lower triangular)
        let n = out.len();
        for i in 0..n {
            let mut s = out[i];
            for k in 0..i {
                s -= self.r[(k, i)] * out[k];
            }
            out[i] = s / self.r[(i, i)];
        }
    }
}

#[derive(Debug, Clone)]
pub enum OperatorBasis {
    Linear(LinearRankOneBasis),
    Polynomial(PolyOperatorBasis),
    Orthonormalized(OrthonormalizedBasis),
}

impl OperatorBasis {
    pub fn as_linear(&self) -> Option<&LinearRankOneBasis> {
        match self {
            OperatorBasis::Linear(b) => Some(b),
            _ => None,
        }
    }

    pub fn as_polynomial(&self) -> Option<&PolyOperatorBasis> {
        match self {
            OperatorBasis::Polynomial(b) => Some(b),
            _ => None,
        }
    }

    fn inner(&self) -> &dyn FeatureMap {
        match self {
            OperatorBasis::Linear(b) => b,
            OperatorBasis::Polynomial(b) => b,
            OperatorBasis::Orthonormalized(b) => b,
        }
    }
}

impl From<LinearRankOneBasis> for OperatorBasis {
    fn from(b: LinearRankOneBasis) -> Self {
        OperatorBasis::Linear(b)
    }
}

impl From<PolyOperatorBasis> for OperatorBasis {
    fn from(b: PolyOperatorBasis) -> Self {
        OperatorBasis::Polynomial(b)
    }
}

impl FeatureMap for OperatorBasis {
    fn d_in(&self) -> usize {
        self.inner().d_in()
    }
    fn n_eff(&self) -> usize {
        self.inner().n_eff()
    }
    fn d_out(&self) -> usize {
        self.inner().d_out()
    }
    fn eval_into(&self, fhat: &[f64], out: &mut [f64]) {
        self.inner().eval_into(fhat, out)
    }
}

pub fn features<B: FeatureMap + ?Sized>(basis: &B, fhat: &[f64]) -> FeatureVector {
    let mut values = vec![0.0; basis.n_eff()];
    basis.eval_into(fhat, &mut values);
    FeatureVector {
        values,
        extrapolated: outside_support(fhat),
    }
}

pub fn scalar_features(basis: &PolyOperatorBasis, fhat: &[f64]) -> FeatureVector {
    features(basis, fhat)
}

pub fn linear_features(basis: &LinearRankOneBasis, fhat: &[f64]) -> FeatureVector {
    features(basis, fhat)
}

fn squared_feature_norm<B: FeatureMap + ?Sized>(basis: &B, fhat: &[f64]) -> f64 {
    let mut buf = vec![0.0; basis.n_eff()];
    basis.eval_into(fhat, &mut buf);
    buf.iter().map(|v| v * v).sum()
}

/// Reciprocal Christoffel function `w(f) sum_n ||Phi_n(f)||^2`.
pub fn christoffel<B: FeatureMap + ?Sized>(basis: &B, fhat: &[f64], w: f64) -> f64 {
    w * basis.d_out() as f64 * squared_feature_norm(basis, fhat)
}

/// Optimal weight `N / sum_n ||Phi_n(f)||^2 = N_eff / sum_l phi_l(f)^2`.
pub fn optimal_weight<B: FeatureMap + ?Sized>(basis: &B, fhat: &[f64]) -> Result<f64> {
    weight_from_features(basis.n_eff(), squared_feature_norm(basis, fhat))
}

pub(crate) fn weight_from_features(n_eff: usize, sum_sq: f64) -> Result<f64> {
    if !(sum_sq > 0.0) || !sum_sq.is_finite() {
        return Err(Error::VanishingFeatures);
    }
    Ok(n_eff as f64 / sum_sq)
}

/// Scalar multilinear monomial `prod_j fhat_j^{beta_j}`.
pub fn monomial_scalar(beta: &[usize], fhat: &[f64]) -> f64 {
    beta.iter()
        .zip(fhat)
        .filter(|(&n, _)| n > 0)
        .map(|(&n, &x)| x.powi(n as i32))
        .product()
}

/// Multilinear operator `psi_{n0} prod_j fhat_j^{n_j}`; `n = (n0, n1, ..., n_d)`.
pub fn monomial_operator_eval(n: &MultiIndex, fhat: &[f64], d_out: usize) -> Result<Vec<f64>> {
    let (&n0, scalar) = n
        .0
        .split_first()
        .ok_or_else(|| Error::DimensionMismatch("monomial index needs an output entry".into()))?;
    if n0 >= d_out {
        return Err(Error::DimensionMismatch(format!(
            "output mode {n0} outside {d_out} output modes"
        )));
    }
    if scalar.len() > fhat.len() && scalar[fhat.len()..].iter().any(|&k| k > 0) {
        return Err(Error::DimensionMismatch("index exceeds input dimension".into()));
    }
    let mut out = vec![0.0; d_out];
    out[n0] = monomial_scalar(scalar, fhat);
    Ok(out)
}
