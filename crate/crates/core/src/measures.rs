//! Symmetric Jacobi probability measures on `[-1, 1]`, their orthonormal
//! polynomial families and Gauss quadrature rules.
//!
//! A marginal `Jac(alpha, alpha)` has density proportional to `(1 - t^2)^alpha`.
//! Orthonormal polynomials are produced from the closed-form Jacobi matrix
//! (three-term recurrence); the diagonal vanishes by symmetry.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Exponents at or below this value are rejected.
pub const MIN_ALPHA: f64 = -0.999;

/// Tolerance on total mass / quadrature weight sums.
pub const MASS_TOL: f64 = 1e-12;

/// Tolerance on quadrature-checked orthonormality.
pub const ORTHONORMALITY_TOL: f64 = 1e-10;

/// Default Gauss rule size for a family of maximal degree `n_max`.
pub fn default_quadrature_order(n_max: usize) -> usize {
    2 * (n_max + 1) + 8
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UnivariateMeasure {
    alpha: f64,
}

impl UnivariateMeasure {
    pub fn jacobi(alpha: f64) -> Result<Self> {
        if !alpha.is_finite() || alpha <= MIN_ALPHA {
            return Err(Error::InvalidAlpha(alpha));
        }
        Ok(Self { alpha })
    }

    /// The uniform probability law on `[-1, 1]`.
    pub fn uniform() -> Self {
        Self { alpha: 0.0 }
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Second (uncentered) moment; equals the variance since the law is centered.
    pub fn second_moment(&self) -> f64 {
        1.0 / (2.0 * self.alpha + 3.0)
    }

    pub fn std_dev(&self) -> f64 {
        self.second_moment().sqrt()
    }

    /// Off-diagonal Jacobi matrix entry `b_n` for `n >= 1`.
    fn recurrence_b(&self, n: usize) -> f64 {
        debug_assert!(n >= 1);
        if n == 1 {
            // n = 1 is special-cased so alpha = -1/2 avoids 0/0.
            return self.second_moment().sqrt();
        }
        let n = n as f64;
        let a = self.alpha;
        let num = n * (n + 2.0 * a);
        let den = (2.0 * n + 2.0 * a + 1.0) * (2.0 * n + 2.0 * a - 1.0);
        (num / den).sqrt()
    }
}

pub fn second_moment(m: &UnivariateMeasure) -> f64 {
    m.second_moment()
}

/// Product of independent marginals over the retained input coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProductMeasure {
    marginals: Vec<UnivariateMeasure>,
}

impl ProductMeasure {
    pub fn new(marginals: Vec<UnivariateMeasure>) -> Result<Self> {
        if marginals.is_empty() {
            return Err(Error::EmptyMeasure);
        }
        Ok(Self { marginals })
    }

    pub fn from_alphas(alphas: &[f64]) -> Result<Self> {
        let marginals = alphas
            .iter()
            .map(|&a| UnivariateMeasure::jacobi(a))
            .collect::<Result<Vec<_>>>()?;
        Self::new(marginals)
    }

    pub fn dim(&self) -> usize {
        self.marginals.len()
    }

    pub fn marginals(&self) -> &[UnivariateMeasure] {
        &self.marginals
    }

    pub fn marginal(&self, j: usize) -> &UnivariateMeasure {
        &self.marginals[j]
    }

    pub fn second_moments(&self) -> Vec<f64> {
        self.marginals.iter().map(|m| m.second_moment()).collect()
    }

    pub fn total_energy(&self) -> f64 {
        self.marginals.iter().map(|m| m.second_moment()).sum()
    }
}

/// Orthonormal polynomials `p_0, ..., p_{n_max}` of a symmetric Jacobi measure.
#[derive(Debug, Clone, PartialEq)]
pub struct PolynomialFamily {
    measure: UnivariateMeasure,
    /// `b[n]` for `n = 1..=n_max`; `b[0]` is unused and zero.
    b: Vec<f64>,
}

impl PolynomialFamily {
    pub fn measure(&self) -> &UnivariateMeasure {
        &self.measure
    }

    pub fn max_degree(&self) -> usize {
        self.b.len() - 1
    }

    /// Recurrence coefficients `(a_n, b_n)`; `a_n` is always zero.
    pub fn recurrence(&self, n: usize) -> (f64, f64) {
        (0.0, self.b[n])
    }

    /// Leading monomial coefficient of `p_n`.
    pub fn leading_coefficient(&self, n: usize) -> f64 {
        self.b[1..=n].iter().fold(1.0, |acc, b| acc / b)
    }

    /// Value of `p_n(x)` by forward recurrence.
    pub fn eval(&self, n: usize, x: f64) -> f64 {
        assert!(n <= self.max_degree(), "degree {n} beyond family");
        let mut prev = 0.0;
        let mut cur = 1.0;
        for k in 0..n {
            let next = (x * cur - self.b[k] * prev) / self.b[k + 1];
            prev = cur;
            cur = next;
        }
        cur
    }

    /// Fills `out[k] = p_k(x)` for `k < out.len()`.
    pub fn eval_all(&self, x: f64, out: &mut [f64]) {
        if out.is_empty() {
            return;
        }
        assert!(out.len() <= self.b.len(), "degree beyond family");
        out[0] = 1.0;
        if out.len() > 1 {
            out[1] = x / self.b[1];
        }
        for k in 1..out.len().saturating_sub(1) {
            out[k + 1] = (x * out[k] - self.b[k] * out[k - 1]) / self.b[k + 1];
        }
    }
}

pub fn build_family(m: &UnivariateMeasure, n_max: usize) -> Result<PolynomialFamily> {
    if !m.alpha.is_finite() || m.alpha <= MIN_ALPHA {
        return Err(Error::InvalidAlpha(m.alpha));
    }
    let mut b = Vec::with_capacity(n_max + 1);
    b.push(0.0);
    b.extend((1..=n_max).map(|n| m.recurrence_b(n)));
    Ok(PolynomialFamily { measure: *m, b })
}

pub fn eval_poly(fam: &PolynomialFamily, n: usize, x: f64) -> f64 {
    fam.eval(n, x)
}

/// Gauss rule for a probability measure; weights sum to one.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }
}

/// Golub-Welsch: nodes are eigenvalues of the Jacobi matrix (roots of `p_Q`),
/// weights are `1 / sum_{j<Q} p_j(x_q)^2`.
pub fn gauss_rule(fam: &PolynomialFamily, q: usize) -> Result<QuadratureRule> {
    if q == 0 {
        return Err(Error::InvalidQuadratureOrder);
    }
    if fam.max_degree() < q {
        return Err(Error::DegreeOutOfRange {
            requested: q,
            available: fam.max_degree(),
        });
    }
    let mut jac = DMatrix::<f64>::zeros(q, q);
    for i in 1..q {
        jac[(i, i - 1)] = fam.b[i];
        jac[(i - 1, i)] = fam.b[i];
    }
    let eig = SymmetricEigen::try_new(jac, f64::EPSILON, 10_000).ok_or(Error::EigenSolveFailed)?;
    let mut nodes: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    nodes.sort_by(|a, b| a.partial_cmp(b).unwrap());
    // symmetrize: the measure is even, so the rule must be too
    for i in 0..q / 2 {
        let m = 0.5 * (nodes[q - 1 - i] - nodes[i]);
        nodes[i] = -m;
        nodes[q - 1 - i] = m;
    }
    if q % 2 == 1 {
        nodes[q / 2] = 0.0;
    }
    let mut buf = vec![0.0; q];
    let mut weights: Vec<f64> = nodes
        .iter()
        .map(|&x| {
            fam.eval_all(x, &mut buf);
            1.0 / buf.iter().map(|p| p * p).sum::<f64>()
        })
        .collect();
    let total: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= total);
    Ok(QuadratureRule { nodes, weights })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn second_moment_closed_form() {
        assert_abs_diff_eq!(UnivariateMeasure::uniform().second_moment(), 1.0 / 3.0);
        assert_abs_diff_eq!(UnivariateMeasure::jacobi(1.0).unwrap().second_moment(), 0.2);
        assert_abs_diff_eq!(
            UnivariateMeasure::jacobi(13.5).unwrap().second_moment(),
            1.0 / 30.0,
            epsilon = 1e-16
        );
    }

    #[test]
    fn rejects_degenerate_alpha() {
        assert!(UnivariateMeasure::jacobi(-1.0).is_err());
        assert!(UnivariateMeasure::jacobi(-0.9995).is_err());
        assert!(UnivariateMeasure::jacobi(f64::NAN).is_err());
        assert!(UnivariateMeasure::jacobi(-0.99).is_ok());
        assert!(ProductMeasure::new(vec![]).is_err());
    }

    /// Gram-Schmidt of {1, x} under the uniform law with integrals by a
    /// 2-point moment-matched rule gives p_1 = sqrt(3) x.
    #[test]
    fn legendre_p1_matches_gram_schmidt() {
        let fam = build_family(&UnivariateMeasure::uniform(), 4).unwrap();
        // moments of uniform on [-1,1]: 1, 0, 1/3
        let norm = (1.0f64 / 3.0).sqrt();
        let oracle = |x: f64| x / norm;
        assert_abs_diff_eq!(fam.eval(1, 1.0), oracle(1.0), epsilon = 1e-14);
        assert_abs_diff_eq!(fam.eval(1, 1.0), 3f64.sqrt(), epsilon = 1e-14);
        for x in [-0.7, 0.0, 0.3, 2.0] {
            assert_eq!(fam.eval(0, x), 1.0);
        }
    }

    #[test]
    fn odd_polynomials_vanish_at_origin() {
        for alpha in [-0.5, 0.0, 2.0, 40.0] {
            let fam = build_family(&UnivariateMeasure::jacobi(alpha).unwrap(), 9).unwrap();
            for n in (1..=9).step_by(2) {
                assert_eq!(fam.eval(n, 0.0), 0.0);
            }
        }
    }

    #[test]
    fn leading_coefficients_positive() {
        let fam = build_family(&UnivariateMeasure::jacobi(3.0).unwrap(), 12).unwrap();
        for n in 0..=12 {
            assert!(fam.leading_coefficient(n) > 0.0);
        }
    }

    #[test]
    fn one_point_rule_is_the_mean() {
        for alpha in [-0.5, 0.0, 7.0] {
            let fam = build_family(&UnivariateMeasure::jacobi(alpha).unwrap(), 1).unwrap();
            let r = gauss_rule(&fam, 1).unwrap();
            assert_eq!(r.nodes(), &[0.0]);
            assert_abs_diff_eq!(r.weights()[0], 1.0, epsilon = 1e-15);
        }
    }

    /// Brute-force 2-point moment system for uniform: w1 + w2 = 1,
    /// w1 x1 + w2 x2 = 0, w1 x1^2 + w2 x2^2 = 1/3, symmetric => x = ±1/sqrt(3).
    #[test]
    fn two_point_legendre_rule() {
        let fam = build_family(&UnivariateMeasure::uniform(), 2).unwrap();
        let r = gauss_rule(&fam, 2).unwrap();
        let x = 1.0 / 3f64.sqrt();
        assert_abs_diff_eq!(r.nodes()[0], -x, epsilon = 1e-15);
        assert_abs_diff_eq!(r.nodes()[1], x, epsilon = 1e-15);
        assert_abs_diff_eq!(r.weights()[0], 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(r.weights()[1], 0.5, epsilon = 1e-15);
    }

    #[test]
    fn eight_point_rule_second_moment() {
        let fam = build_family(&UnivariateMeasure::uniform(), 8).unwrap();
        let r = gauss_rule(&fam, 8).unwrap();
        assert_abs_diff_eq!(r.integrate(|x| x * x), 1.0 / 3.0, epsilon = 1e-12);
        let p12 = r.integrate(|x| fam.eval(1, x) * fam.eval(2, x));
        assert_abs_diff_eq!(p12, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn gauss_rule_requires_recurrence_to_q() {
        let fam = build_family(&UnivariateMeasure::uniform(), 3).unwrap();
        assert!(gauss_rule(&fam, 4).is_err());
        assert!(gauss_rule(&fam, 0).is_err());
    }

    #[test]
    fn eigenvector_weights_agree_with_christoffel_weights() {
        let m = UnivariateMeasure::jacobi(2.5).unwrap();
        let q = 12;
        let fam = build_family(&m, q).unwrap();
        let r = gauss_rule(&fam, q).unwrap();
        let mut jac = DMatrix::<f64>::zeros(q, q);
        for i in 1..q {
            jac[(i, i - 1)] = fam.recurrence(i).1;
            jac[(i - 1, i)] = fam.recurrence(i).1;
        }
        let eig = SymmetricEigen::new(jac);
        let mut pairs: Vec<(f64, f64)> = (0..q)
            .map(|k| (eig.eigenvalues[k], eig.eigenvectors[(0, k)].powi(2)))
            .collect();
        pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        for (k, (x, w)) in pairs.into_iter().enumerate() {
            assert_abs_diff_eq!(r.nodes()[k], x, epsilon = 1e-13);
            assert_abs_diff_eq!(r.weights()[k], w, epsilon = 1e-13);
        }
    }
}
