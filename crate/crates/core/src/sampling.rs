//! Input generation: base draws from rho, optimal mixture draws, and
//! leverage-score draws over finite point clouds.
//!
//! All continuous marginals are discretized on a Gauss rule and sampled by
//! inverse transform on cumulative mass tables. Every sample index owns its
//! own random stream, so batches are reproducible under any thread count.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::index_sets::MultiIndex;
use crate::measures::{build_family, default_quadrature_order, gauss_rule, PolynomialFamily, ProductMeasure};
use crate::operator_basis::{
    weight_from_features, FeatureMap, OperatorBasis, OrthonormalizedBasis,
};
use crate::rng::RngSeed;

/// Largest tolerated deviation of an induced column sum from one.
pub const INDUCED_SUM_TOL: f64 = 1e-8;

/// Which discretized law of a coordinate to draw from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InducedLaw {
    /// `p_k^2 d rho_j`; degree 0 is the base law.
    Degree(usize),
    /// `x^2 / sigma^2 d rho_j`, the linear-feature law.
    Linear,
}

/// Cumulative mass tables of induced laws over the nodes of one Gauss rule.
#[derive(Debug, Clone, PartialEq)]
pub struct InducedTable {
    nodes: Vec<f64>,
    base_weights: Vec<f64>,
    degree_cdfs: Vec<Option<Vec<f64>>>,
    linear_cdf: Option<Vec<f64>>,
}

fn cumulate(masses: &[f64], total: f64) -> Vec<f64> {
    let mut acc = 0.0;
    let mut out: Vec<f64> = masses
        .iter()
        .map(|m| {
            acc += m;
            acc / total
        })
        .collect();
    if let Some(last) = out.last_mut() {
        *last = 1.0;
    }
    out
}

fn checked_cdf(masses: &[f64], degree: usize) -> Result<Vec<f64>> {
    let sum: f64 = masses.iter().sum();
    if !((sum - 1.0).abs() <= INDUCED_SUM_TOL) {
        return Err(Error::InducedNormalization { degree, sum });
    }
    Ok(cumulate(masses, sum))
}

/// Smallest index `i` with `u <= cdf[i]`.
pub fn inverse_cdf(cdf: &[f64], u: f64) -> usize {
    cdf.partition_point(|&c| c < u).min(cdf.len() - 1)
}

pub fn build_induced_table(fam: &PolynomialFamily, degrees: &[usize], q: usize) -> Result<InducedTable> {
    if q == 0 {
        return Err(Error::InvalidQuadratureOrder);
    }
    let max_deg = degrees.iter().copied().max().unwrap_or(0);
    if q < max_deg + 1 {
        return Err(Error::InsufficientQuadrature { q, degree: max_deg });
    }
    let family = build_family(fam.measure(), q.max(max_deg))?;
    let rule = gauss_rule(&family, q)?;
    let nodes = rule.nodes().to_vec();
    let base_weights = rule.weights().to_vec();

    let mut degree_cdfs = vec![None; max_deg + 1];
    let mut buf = vec![0.0; max_deg + 1];
    let values: Vec<Vec<f64>> = nodes
        .iter()
        .map(|&x| {
            family.eval_all(x, &mut buf);
            buf.clone()
        })
        .collect();
    for &n in std::iter::once(&0).chain(degrees) {
        if degree_cdfs[n].is_some() {
            continue;
        }
        let masses: Vec<f64> = values
            .iter()
            .zip(&base_weights)
            .map(|(p, w)| w * p[n] * p[n])
            .collect();
        degree_cdfs[n] = Some(checked_cdf(&masses, n)?);
    }
    Ok(InducedTable {
        nodes,
        base_weights,
        degree_cdfs,
        linear_cdf: None,
    })
}

impl InducedTable {
    /// Adds the linear-feature law with masses `w_i x_i^2 / sigma^2`.
    pub fn with_linear(mut self, second_moment: f64) -> Result<Self> {
        let masses: Vec<f64> = self
            .nodes
            .iter()
            .zip(&self.base_weights)
            .map(|(x, w)| w * x * x / second_moment)
            .collect();
        self.linear_cdf = Some(checked_cdf(&masses, 1)?);
        Ok(self)
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn base_weights(&self) -> &[f64] {
        &self.base_weights
    }

    pub fn cdf(&self, law: InducedLaw) -> Option<&[f64]> {
        match law {
            InducedLaw::Degree(n) => self.degree_cdfs.get(n).and_then(|c| c.as_deref()),
            InducedLaw::Linear => self.linear_cdf.as_deref(),
        }
    }

    /// Point masses of a law, recovered from its cumulative column.
    pub fn masses(&self, law: InducedLaw) -> Option<Vec<f64>> {
        let cdf = self.cdf(law)?;
        let mut prev = 0.0;
        Some(
            cdf.iter()
                .map(|&c| {
                    let m = c - prev;
                    prev = c;
                    m
                })
                .collect(),
        )
    }

    /// `E[x^power]` under the discretized law.
    pub fn moment(&self, law: InducedLaw, power: i32) -> Option<f64> {
        let masses = self.masses(law)?;
        Some(self.nodes.iter().zip(&masses).map(|(x, m)| m * x.powi(power)).sum())
    }

    fn draw_with(&self, cdf: &[f64], rng: &mut ChaCha8Rng) -> f64 {
        self.nodes[inverse_cdf(cdf, rng.gen::<f64>())]
    }
}

pub fn draw_base(table: &InducedTable, rng: &mut ChaCha8Rng) -> f64 {
    let cdf = table.cdf(InducedLaw::Degree(0)).expect("degree 0 column always present");
    table.draw_with(cdf, rng)
}

pub fn draw_induced(table: &InducedTable, k: usize, rng: &mut ChaCha8Rng) -> Result<f64> {
    let cdf = table.cdf(InducedLaw::Degree(k)).ok_or(Error::DegreeOutOfRange {
        requested: k,
        available: table.degree_cdfs.len() - 1,
    })?;
    Ok(table.draw_with(cdf, rng))
}

pub fn draw_linear(table: &InducedTable, rng: &mut ChaCha8Rng) -> Result<f64> {
    let cdf = table
        .cdf(InducedLaw::Linear)
        .ok_or_else(|| Error::UnsupportedBasis("table has no linear column".into()))?;
    Ok(table.draw_with(cdf, rng))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MixtureMode {
    Linear,
    Polynomial,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum MixtureComponent {
    Scalar(MultiIndex),
    InputMode(usize),
}

/// Optimal sampling measure as a finite mixture of product laws.
#[derive(Debug, Clone, PartialEq)]
pub struct MixturePlan {
    components: Vec<(MixtureComponent, f64)>,
    cumulative: Vec<f64>,
    mode: MixtureMode,
}

impl MixturePlan {
    fn from_counts(counts: BTreeMap<MixtureComponent, usize>, mode: MixtureMode) -> Self {
        let total: usize = counts.values().sum();
        let components: Vec<_> = counts
            .into_iter()
            .map(|(c, k)| (c, k as f64 / total as f64))
            .collect();
        let probs: Vec<f64> = components.iter().map(|(_, p)| *p).collect();
        let cumulative = cumulate(&probs, probs.iter().sum());
        Self {
            components,
            cumulative,
            mode,
        }
    }

    pub fn components(&self) -> &[(MixtureComponent, f64)] {
        &self.components
    }

    pub fn mode(&self) -> MixtureMode {
        self.mode
    }

    fn pick(&self, rng: &mut ChaCha8Rng) -> &MixtureComponent {
        &self.components[inverse_cdf(&self.cumulative, rng.gen::<f64>())].0
    }
}

/// Mixture weights are multiplicities over `|Lambda|`; each scalar index of
/// `[d_out] x Lambda_scalar` appears `d_out` times.
pub fn mixture_plan(basis: &OperatorBasis) -> Result<MixturePlan> {
    let mut counts = BTreeMap::new();
    match basis {
        OperatorBasis::Polynomial(b) => {
            for idx in b.scalar_indices() {
                *counts.entry(MixtureComponent::Scalar(idx.clone())).or_insert(0) += b.d_out();
            }
            Ok(MixturePlan::from_counts(counts, MixtureMode::Polynomial))
        }
        OperatorBasis::Linear(b) => {
            for &m in b.input_modes() {
                *counts.entry(MixtureComponent::InputMode(m)).or_insert(0) += b.d_out();
            }
            Ok(MixturePlan::from_counts(counts, MixtureMode::Linear))
        }
        OperatorBasis::Orthonormalized(_) => Err(Error::UnsupportedBasis(
            "discrete-measure features are sampled with a DiscretePlan".into(),
        )),
    }
}

/// Inputs with their least-squares weights.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SampleBatch {
    pub inputs: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
}

impl SampleBatch {
    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    fn from_pairs(pairs: Vec<(Vec<f64>, f64)>) -> Self {
        let (inputs, weights) = pairs.into_iter().unzip();
        Self { inputs, weights }
    }
}

/// Per-coordinate induced tables for one product measure.
#[derive(Debug, Clone)]
pub struct Sampler {
    tables: Vec<InducedTable>,
}

impl Sampler {
    /// Base-law tables only, each on a `q`-point rule.
    pub fn base(measure: &ProductMeasure, q: usize) -> Result<Self> {
        let tables = measure
            .marginals()
            .iter()
            .map(|m| build_induced_table(&build_family(m, 0)?, &[0], q))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { tables })
    }

    /// Tables covering every law the optimal measure of `basis` needs.
    pub fn for_basis(measure: &ProductMeasure, basis: &OperatorBasis) -> Result<Self> {
        if measure.dim() != basis.d_in() {
            return Err(Error::DimensionMismatch(format!(
                "measure has {} coordinates, basis {}",
                measure.dim(),
                basis.d_in()
            )));
        }
        let tables = match basis {
            OperatorBasis::Polynomial(b) => b
                .families()
                .iter()
                .enumerate()
                .map(|(j, fam)| {
                    let n = b.max_degree(j);
                    let degrees: Vec<usize> = (0..=n).collect();
                    build_induced_table(fam, &degrees, default_quadrature_order(n))
                })
                .collect::<Result<Vec<_>>>()?,
            OperatorBasis::Linear(b) => {
                let q = default_quadrature_order(1);
                let mut tables = Self::base(measure, q)?.tables;
                for &m in b.input_modes() {
                    let t = tables[m].clone();
                    tables[m] = t.with_linear(measure.marginal(m).second_moment())?;
                }
                tables
            }
            OperatorBasis::Orthonormalized(_) => {
                return Err(Error::UnsupportedBasis(
                    "discrete-measure features are sampled with a DiscretePlan".into(),
                ))
            }
        };
        Ok(Self { tables })
    }

    pub fn tables(&self) -> &[InducedTable] {
        &self.tables
    }

    pub fn dim(&self) -> usize {
        self.tables.len()
    }

    fn draw_base_vector(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        self.tables.iter().map(|t| draw_base(t, rng)).collect()
    }

    /// `m` i.i.d. draws from rho with unit weights.
    pub fn sample_monte_carlo(&self, seed: RngSeed, m: usize) -> SampleBatch {
        let pairs: Vec<_> = (0..m)
            .into_par_iter()
            .map(|i| (self.draw_base_vector(&mut seed.stream(i as u64)), 1.0))
            .collect();
        SampleBatch::from_pairs(pairs)
    }

    /// `m` draws from the optimal mixture with weights `N_eff / sum phi^2`.
    pub fn sample_optimal(
        &self,
        basis: &OperatorBasis,
        plan: &MixturePlan,
        seed: RngSeed,
        m: usize,
    ) -> Result<SampleBatch> {
        let pairs = (0..m)
            .into_par_iter()
            .map(|i| {
                let mut rng = seed.stream(i as u64);
                let f = self.draw_component(plan, &mut rng)?;
                let mut phi = vec![0.0; basis.n_eff()];
                basis.eval_into(&f, &mut phi);
                let w = weight_from_features(basis.n_eff(), phi.iter().map(|v| v * v).sum())?;
                Ok((f, w))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(SampleBatch::from_pairs(pairs))
    }

    fn draw_component(&self, plan: &MixturePlan, rng: &mut ChaCha8Rng) -> Result<Vec<f64>> {
        match plan.pick(rng) {
            MixtureComponent::Scalar(idx) => {
                if idx.dim() != self.dim() {
                    return Err(Error::DimensionMismatch("mixture index length".into()));
                }
                idx.0
                    .iter()
                    .zip(&self.tables)
                    .map(|(&k, t)| draw_induced(t, k, rng))
                    .collect()
            }
            MixtureComponent::InputMode(sel) => self
                .tables
                .iter()
                .enumerate()
                .map(|(j, t)| if j == *sel { draw_linear(t, rng) } else { Ok(draw_base(t, rng)) })
                .collect(),
        }
    }
}

/// Leverage-score sampling plan over a finite cloud.
#[derive(Debug, Clone)]
pub struct DiscretePlan {
    points: Vec<Vec<f64>>,
    probabilities: Vec<f64>,
    cumulative: Vec<f64>,
    weights: Vec<f64>,
    basis: OperatorBasis,
}

/// Cloud indices with their weights.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DiscreteDraw {
    pub indices: Vec<usize>,
    pub weights: Vec<f64>,
}

/// Singular values below this fraction of the largest count as zero.
pub const RANK_TOL: f64 = 1e-12;

pub(crate) fn numerical_rank(singular_values: &[f64]) -> usize {
    let smax = singular_values.iter().cloned().fold(0.0, f64::max);
    singular_values.iter().filter(|&&s| s > RANK_TOL * smax).count()
}

pub fn build_discrete_plan(points: Vec<Vec<f64>>, raw: &OperatorBasis) -> Result<DiscretePlan> {
    let s = points.len();
    let n = raw.n_eff();
    if s < n {
        return Err(Error::RankDeficient { rank: s, cols: n });
    }
    if let Some(p) = points.iter().find(|p| p.len() != raw.d_in()) {
        return Err(Error::DimensionMismatch(format!(
            "point of length {} for basis input dimension {}",
            p.len(),
            raw.d_in()
        )));
    }
    let scale = 1.0 / (s as f64).sqrt();
    let rows: Vec<Vec<f64>> = points
        .par_iter()
        .map(|p| {
            let mut g = vec![0.0; n];
            raw.eval_into(p, &mut g);
            g.iter_mut().for_each(|v| *v *= scale);
            g
        })
        .collect();
    let v = DMatrix::from_fn(s, n, |i, j| rows[i][j]);
    let qr = v.qr();
    let r = qr.r();
    let sv = r.clone().singular_values();
    let rank = numerical_rank(sv.as_slice());
    if rank < n {
        return Err(Error::RankDeficient { rank, cols: n });
    }
    let q = qr.q();
    let row_sq: Vec<f64> = (0..s).map(|i| q.row(i).iter().map(|x| x * x).sum()).collect();
    let probabilities: Vec<f64> = row_sq.iter().map(|r| r / n as f64).collect();
    let total: f64 = probabilities.iter().sum();
    let cumulative = cumulate(&probabilities, total);
    // b(x_i) = sqrt(S) Q_i, so the weight N / |b|^2 is N / (S |Q_i|^2)
    let weights: Vec<f64> = row_sq
        .iter()
        .map(|r| if *r > 0.0 { n as f64 / (s as f64 * r) } else { f64::INFINITY })
        .collect();
    Ok(DiscretePlan {
        points,
        probabilities,
        cumulative,
        weights,
        basis: OperatorBasis::Orthonormalized(OrthonormalizedBasis::new(raw.clone(), r)),
    })
}

impl DiscretePlan {
    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    /// Sampling weight attached to each cloud point.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// The b-features, orthonormal under the uniform law on the cloud.
    pub fn basis(&self) -> &OperatorBasis {
        &self.basis
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Materializes drawn indices as a sample batch.
    pub fn batch(&self, draw: &DiscreteDraw) -> SampleBatch {
        SampleBatch {
            inputs: draw.indices.iter().map(|&i| self.points[i].clone()).collect(),
            weights: draw.weights.clone(),
        }
    }
}

pub fn sample_discrete(plan: &DiscretePlan, seed: RngSeed, m: usize) -> DiscreteDraw {
    let indices: Vec<usize> = (0..m)
        .into_par_iter()
        .map(|i| inverse_cdf(&plan.cumulative, seed.stream(i as u64).gen::<f64>()))
        .collect();
    let weights = indices.iter().map(|&i| plan.weights[i]).collect();
    DiscreteDraw { indices, weights }
}

/// Uniform draws from the cloud with unit weights.
pub fn sample_uniform_discrete(plan: &DiscretePlan, seed: RngSeed, m: usize) -> DiscreteDraw {
    let s = plan.len();
    let indices: Vec<usize> = (0..m)
        .into_par_iter()
        .map(|i| seed.stream(i as u64).gen_range(0..s))
        .collect();
    DiscreteDraw {
        indices,
        weights: vec![1.0; m],
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::index_sets::{generate, IndexSetKind, IndexSetSpec};
    use crate::measures::UnivariateMeasure;
    use crate::operator_basis::{LinearRankOneBasis, PolyOperatorBasis};
    use approx::assert_abs_diff_eq;

    fn legendre(n: usize) -> PolynomialFamily {
        build_family(&UnivariateMeasure::uniform(), n).unwrap()
    }

    #[test]
    fn two_point_degree_one_masses() {
        let t = build_induced_table(&legendre(1), &[1], 2).unwrap();
        let m = t.masses(InducedLaw::Degree(1)).unwrap();
        assert_abs_diff_eq!(m[0], 0.5, epsilon = 1e-14);
        assert_abs_diff_eq!(m[1], 0.5, epsilon = 1e-14);
        assert_abs_diff_eq!(t.nodes()[1], 1.0 / 3f64.sqrt(), epsilon = 1e-14);
    }

    #[test]
    fn degree_zero_is_base_rule() {
        let t = build_induced_table(&legendre(3), &[1, 3], 6).unwrap();
        let m = t.masses(InducedLaw::Degree(0)).unwrap();
        for (a, b) in m.iter().zip(t.base_weights()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-14);
        }
        for k in [0, 1, 3] {
            assert_eq!(*t.cdf(InducedLaw::Degree(k)).unwrap().last().unwrap(), 1.0);
        }
        assert!(t.cdf(InducedLaw::Degree(2)).is_none());
    }

    #[test]
    fn insufficient_order_rejected() {
        assert_eq!(
            build_induced_table(&legendre(4), &[4], 4),
            Err(Error::InsufficientQuadrature { q: 4, degree: 4 })
        );
    }

    #[test]
    fn inverse_cdf_zero_is_first() {
        assert_eq!(inverse_cdf(&[0.2, 0.5, 1.0], 0.0), 0);
        assert_eq!(inverse_cdf(&[0.2, 0.5, 1.0], 0.2), 0);
        assert_eq!(inverse_cdf(&[0.2, 0.5, 1.0], 0.21), 1);
        assert_eq!(inverse_cdf(&[0.2, 0.5, 1.0], 1.0), 2);
    }

    #[test]
    fn degree_one_second_moment_closed_form() {
        // int x^2 * 3x^2 / 2 dx = 3/5
        let t = build_induced_table(&legendre(1), &[1], 3).unwrap();
        assert_abs_diff_eq!(t.moment(InducedLaw::Degree(1), 2).unwrap(), 0.6, epsilon = 1e-14);
    }

    #[test]
    fn linear_column_is_degree_one_law() {
        let m = UnivariateMeasure::jacobi(2.0).unwrap();
        let t = build_induced_table(&build_family(&m, 1).unwrap(), &[1], 12)
            .unwrap()
            .with_linear(m.second_moment())
            .unwrap();
        let a = t.cdf(InducedLaw::Degree(1)).unwrap();
        let b = t.cdf(InducedLaw::Linear).unwrap();
        for (x, y) in a.iter().zip(b) {
            assert_abs_diff_eq!(x, y, epsilon = 1e-13);
        }
    }

    #[test]
    fn zero_index_mixture_has_unit_weights() {
        let measure = ProductMeasure::from_alphas(&[0.0, 1.0]).unwrap();
        let basis: OperatorBasis = PolyOperatorBasis::new(&measure, vec![MultiIndex::zero(2)], 3).unwrap().into();
        let sampler = Sampler::for_basis(&measure, &basis).unwrap();
        let plan = mixture_plan(&basis).unwrap();
        let batch = sampler.sample_optimal(&basis, &plan, RngSeed(1), 50).unwrap();
        assert!(batch.weights.iter().all(|&w| w == 1.0));
    }

    #[test]
    fn linear_point_mass_mixture() {
        let measure = ProductMeasure::from_alphas(&[0.0, 1.0, 4.0]).unwrap();
        let basis: OperatorBasis = LinearRankOneBasis::new(&measure, vec![1], 4).unwrap().into();
        let plan = mixture_plan(&basis).unwrap();
        assert_eq!(plan.components(), &[(MixtureComponent::InputMode(1), 1.0)]);
        let sampler = Sampler::for_basis(&measure, &basis).unwrap();
        let batch = sampler.sample_optimal(&basis, &plan, RngSeed(2), 200).unwrap();
        // induced law on coordinate 1 has no mass at the origin
        assert!(batch.inputs.iter().all(|f| f[1] != 0.0));
    }

    #[test]
    fn optimal_weight_identity_and_reproducibility() {
        let measure = ProductMeasure::from_alphas(&[0.0, 1.0, 4.0]).unwrap();
        let set = generate(&IndexSetSpec::isotropic(IndexSetKind::HyperbolicCross, 4.0, 3, 10)).unwrap();
        let basis: OperatorBasis = PolyOperatorBasis::new(&measure, set, 2).unwrap().into();
        let sampler = Sampler::for_basis(&measure, &basis).unwrap();
        let plan = mixture_plan(&basis).unwrap();
        let a = sampler.sample_optimal(&basis, &plan, RngSeed(9), 300).unwrap();
        let b = sampler.sample_optimal(&basis, &plan, RngSeed(9), 300).unwrap();
        assert_eq!(a, b);
        for (f, w) in a.inputs.iter().zip(&a.weights) {
            let mut phi = vec![0.0; basis.n_eff()];
            basis.eval_into(f, &mut phi);
            let s: f64 = phi.iter().map(|v| v * v).sum();
            assert_abs_diff_eq!(w * s, basis.n_eff() as f64, epsilon = 1e-12 * basis.n_eff() as f64);
        }
    }

    #[test]
    fn mixture_probabilities_uniform_over_scalar_indices() {
        let measure = ProductMeasure::from_alphas(&[0.0, 0.0]).unwrap();
        let set = generate(&IndexSetSpec::isotropic(IndexSetKind::LpBall { p: 1.0 }, 2.0, 2, 10)).unwrap();
        let basis: OperatorBasis = PolyOperatorBasis::new(&measure, set, 7).unwrap().into();
        let plan = mixture_plan(&basis).unwrap();
        assert_eq!(plan.components().len(), 6);
        let total: f64 = plan.components().iter().map(|(_, p)| p).sum();
        assert_abs_diff_eq!(total, 1.0, epsilon = 1e-12);
        assert!(plan.components().iter().all(|(_, p)| (p - 1.0 / 6.0).abs() < 1e-15));
    }

    fn toy_poly(d_out: usize) -> (ProductMeasure, OperatorBasis) {
        let measure = ProductMeasure::from_alphas(&[0.0, 0.0]).unwrap();
        let set = generate(&IndexSetSpec::isotropic(IndexSetKind::LpBall { p: 1.0 }, 1.0, 2, 10)).unwrap();
        let basis = PolyOperatorBasis::new(&measure, set, d_out).unwrap().into();
        (measure, basis)
    }

    #[test]
    fn orthonormal_cloud_gives_uniform_probabilities() {
        // Features {1, sqrt3 x, sqrt3 y} on these 4 points are already
        // orthonormal under the uniform cloud law.
        let (_, basis) = toy_poly(1);
        let c = 1.0 / 3f64.sqrt();
        let pts = vec![vec![c, c], vec![c, -c], vec![-c, c], vec![-c, -c]];
        let plan = build_discrete_plan(pts, &basis).unwrap();
        for p in plan.probabilities() {
            assert_abs_diff_eq!(*p, 0.25, epsilon = 1e-14);
        }
    }

    #[test]
    fn b_features_orthonormal_and_probabilities_sum() {
        let (_, basis) = toy_poly(2);
        let pts: Vec<Vec<f64>> = (0..40)
            .map(|i| {
                let t = i as f64 / 40.0;
                vec![(7.0 * t).sin(), (3.0 * t + 0.4).cos() * 0.8]
            })
            .collect();
        let plan = build_discrete_plan(pts.clone(), &basis).unwrap();
        let total: f64 = plan.probabilities().iter().sum();
        assert_abs_diff_eq!(total, 1.0, epsilon = 1e-12);
        let n = basis.n_eff();
        let mut gram = vec![0.0; n * n];
        for p in &pts {
            let mut b = vec![0.0; n];
            plan.basis().eval_into(p, &mut b);
            for i in 0..n {
                for j in 0..n {
                    gram[i * n + j] += b[i] * b[j] / pts.len() as f64;
                }
            }
        }
        for i in 0..n {
            for j in 0..n {
                assert_abs_diff_eq!(gram[i * n + j], if i == j { 1.0 } else { 0.0 }, epsilon = 1e-10);
            }
        }
        for (i, p) in pts.iter().enumerate() {
            let mut b = vec![0.0; n];
            plan.basis().eval_into(p, &mut b);
            let w = n as f64 / b.iter().map(|v| v * v).sum::<f64>();
            assert_abs_diff_eq!(w, plan.weights()[i], epsilon = 1e-10 * w);
        }
    }

    #[test]
    fn single_point_cloud() {
        let measure = ProductMeasure::from_alphas(&[0.0]).unwrap();
        let basis: OperatorBasis = PolyOperatorBasis::new(&measure, vec![MultiIndex::zero(1)], 1).unwrap().into();
        let plan = build_discrete_plan(vec![vec![0.3]], &basis).unwrap();
        let d = sample_discrete(&plan, RngSeed(0), 20);
        assert!(d.indices.iter().all(|&i| i == 0));
        assert!(d.weights.iter().all(|&w| (w - 1.0).abs() < 1e-14));
    }

    #[test]
    fn rank_deficient_cloud_reports_rank() {
        let (_, basis) = toy_poly(1);
        let pts = vec![vec![0.1, 0.1], vec![0.2, 0.2], vec![0.3, 0.3], vec![-0.5, -0.5]];
        assert_eq!(
            build_discrete_plan(pts, &basis).unwrap_err(),
            Error::RankDeficient { rank: 2, cols: 3 }
        );
    }
}
