//! Experiment configuration: one JSON document, validated before any work.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use opwls::index_sets::{IndexSetKind, IndexSetSpec};
use opwls::pde_data::ModeOrder;

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Poisson2d,
    Poisson1dKernel,
    Burgers,
    DiscreteDemo,
    ComplexitySweep,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplingKind {
    Optimal,
    MonteCarlo,
}

impl SamplingKind {
    pub fn label(self) -> &'static str {
        match self {
            SamplingKind::Optimal => "optimal",
            SamplingKind::MonteCarlo => "monte_carlo",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "optimal" => Some(SamplingKind::Optimal),
            "monte-carlo" | "monte_carlo" => Some(SamplingKind::MonteCarlo),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeNorm {
    L1,
    Linf,
}

/// `alpha_n = scale * |n|^exponent` (1D: `|n| = n`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlphaRule {
    #[serde(default = "one")]
    pub scale: f64,
    #[serde(default = "two")]
    pub exponent: f64,
    #[serde(default = "l1")]
    pub norm: ModeNorm,
}

impl Default for AlphaRule {
    fn default() -> Self {
        Self {
            scale: 1.0,
            exponent: 2.0,
            norm: ModeNorm::L1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasureConfig {
    #[serde(default)]
    pub alpha_rule: AlphaRule,
    /// Fraction of input energy the retained modes must capture.
    #[serde(default = "energy_default")]
    pub energy_target: f64,
    /// Explicit input truncation; overrides the energy rule. For 2D
    /// experiments this is the side `K` of the mode square `[K]^2`.
    #[serde(default)]
    pub d_in: Option<usize>,
}

impl Default for MeasureConfig {
    fn default() -> Self {
        Self {
            alpha_rule: AlphaRule::default(),
            energy_target: energy_default(),
            d_in: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "type")]
pub enum SetKind {
    Lp { p: f64 },
    Linf,
    HyperbolicCross,
}

impl SetKind {
    pub fn to_core(self) -> IndexSetKind {
        match self {
            SetKind::Lp { p } => IndexSetKind::LpBall { p },
            SetKind::Linf => IndexSetKind::LpBall { p: f64::INFINITY },
            SetKind::HyperbolicCross => IndexSetKind::HyperbolicCross,
        }
    }

    pub fn label(self) -> String {
        match self {
            SetKind::Lp { p } => format!("l{p}"),
            SetKind::Linf => "linf".into(),
            SetKind::HyperbolicCross => "hc".into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "type")]
pub enum Anisotropy {
    Isotropic,
    /// `gamma_j = 1 - (j - 1) step`.
    Linear { step: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IndexSetConfig {
    pub kind: SetKind,
    /// One approximation space per radius.
    pub radii: Vec<f64>,
    #[serde(default = "isotropic")]
    pub anisotropy: Anisotropy,
    #[serde(default = "cap_default")]
    pub degree_cap: usize,
}

impl IndexSetConfig {
    pub fn gamma(&self, d_in: usize) -> Vec<f64> {
        (0..d_in)
            .map(|j| match self.anisotropy {
                Anisotropy::Isotropic => 1.0,
                Anisotropy::Linear { step } => 1.0 - j as f64 * step,
            })
            .collect()
    }

    pub fn spec(&self, radius: f64, d_in: usize) -> IndexSetSpec {
        IndexSetSpec::new(self.kind.to_core(), radius, self.gamma(d_in), self.degree_cap)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "type")]
pub enum SampleRule {
    /// `ceil(c_delta N_eff log(2 N_eff / epsilon))`.
    MinSamples,
    /// `ceil(N_eff log N_eff)`.
    NLogN,
    Multiple { factor: f64 },
    Fixed { m: usize },
}

impl SampleRule {
    pub fn samples(&self, n_eff: usize, delta: f64, epsilon: f64) -> Result<usize, CliError> {
        let n = n_eff as f64;
        Ok(match *self {
            SampleRule::MinSamples => opwls::wls_solver::min_samples(n_eff, delta, epsilon)?,
            SampleRule::NLogN => ((n * n.ln()).ceil() as usize).max(n_eff),
            SampleRule::Multiple { factor } => (factor * n).ceil() as usize,
            SampleRule::Fixed { m } => m,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiscreteTruth {
    Poisson1d,
    Burgers,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    #[serde(default = "nu_default")]
    pub nu: f64,
    #[serde(default)]
    pub dt: Option<f64>,
    #[serde(default)]
    pub d_solve: Option<usize>,
    #[serde(default = "t_default")]
    pub t_final: f64,
    /// Truth is computed to this many modes to measure output truncation.
    #[serde(default)]
    pub reference_d_out: Option<usize>,
    #[serde(default = "truth_default")]
    pub discrete_truth: DiscreteTruth,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            nu: nu_default(),
            dt: None,
            d_solve: None,
            t_final: t_default(),
            reference_d_out: None,
            discrete_truth: truth_default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "both_samplers")]
    pub sampling: Vec<SamplingKind>,
    #[serde(default = "half")]
    pub delta: f64,
    #[serde(default = "half")]
    pub epsilon: f64,
    #[serde(default)]
    pub measure: MeasureConfig,
    #[serde(default)]
    pub index_set: Option<IndexSetConfig>,
    /// `N_eff` sweep for experiments whose space is a prefix of an ordering.
    #[serde(default)]
    pub sizes: Vec<usize>,
    #[serde(default)]
    pub d_out: Option<usize>,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default = "one_usize")]
    pub trials: usize,
    #[serde(default = "rule_default")]
    pub sample_rule: SampleRule,
    #[serde(default = "test_default")]
    pub test_samples: usize,
    #[serde(default)]
    pub output_dir: Option<String>,
    #[serde(default)]
    pub cache_datasets: bool,
    /// Write training datasets under `dataset/`.
    #[serde(default = "yes")]
    pub save_datasets: bool,
    /// Output weighting `(1 + |n|^2)^alpha` for fitting and error.
    #[serde(default)]
    pub sobolev_alpha: f64,
    #[serde(default)]
    pub mode_order: ModeOrder,
    /// Point cloud size for the discrete demo.
    #[serde(default)]
    pub cloud_size: Option<usize>,
}

fn yes() -> bool {
    true
}
fn one() -> f64 {
    1.0
}
fn two() -> f64 {
    2.0
}
fn l1() -> ModeNorm {
    ModeNorm::L1
}
fn half() -> f64 {
    0.5
}
fn one_usize() -> usize {
    1
}
fn energy_default() -> f64 {
    0.95
}
fn isotropic() -> Anisotropy {
    Anisotropy::Isotropic
}
fn cap_default() -> usize {
    10
}
fn nu_default() -> f64 {
    0.1
}
fn t_default() -> f64 {
    0.2
}
fn truth_default() -> DiscreteTruth {
    DiscreteTruth::Poisson1d
}
fn both_samplers() -> Vec<SamplingKind> {
    vec![SamplingKind::Optimal, SamplingKind::MonteCarlo]
}
fn rule_default() -> SampleRule {
    SampleRule::MinSamples
}
fn test_default() -> usize {
    500
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Validation(format!("config: {e}")))
    }

    pub fn from_value(v: serde_json::Value) -> Result<Self, CliError> {
        serde_json::from_value(v).map_err(|e| CliError::Validation(format!("config: {e}")))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Content hash of the canonical JSON form (first 16 hex digits of SHA-256).
    /// The output location is not part of the experiment and is left out.
    pub fn content_hash(&self) -> String {
        let canonical = serde_json::to_string(&self.canonical()).expect("config serializes");
        short_hash(canonical.as_bytes())
    }

    /// Copy without the output location.
    pub fn canonical(&self) -> Self {
        Self {
            output_dir: None,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: &str| Err(CliError::Validation(m.to_string()));
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return bad("delta must lie in (0, 1)");
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return bad("epsilon must lie in (0, 1)");
        }
        if self.sampling.is_empty() {
            return bad("at least one sampling scheme is required");
        }
        if self.trials == 0 {
            return bad("trials must be at least 1");
        }
        if !(self.measure.energy_target > 0.0 && self.measure.energy_target <= 1.0) {
            return bad("energy_target must lie in (0, 1]");
        }
        let a = self.measure.alpha_rule;
        if !(a.scale >= 0.0) || !(a.exponent >= 0.0) {
            return bad("alpha_rule scale and exponent must be non-negative");
        }
        if a.exponent <= 1.0 && self.measure.d_in.is_none() {
            return bad("the energy rule needs alpha exponent > 1 (summable variances); set measure.d_in");
        }
        if self.measure.d_in == Some(0) {
            return bad("measure.d_in must be positive");
        }
        if self.d_out == Some(0) {
            return bad("d_out must be positive");
        }
        if self.sizes.contains(&0) {
            return bad("sizes must be positive");
        }
        if !(self.sobolev_alpha.is_finite()) {
            return bad("sobolev_alpha must be finite");
        }
        if let SampleRule::Multiple { factor } = self.sample_rule {
            if !(factor > 0.0) {
                return bad("sample_rule factor must be positive");
            }
        }
        if let Some(set) = &self.index_set {
            if set.radii.is_empty() || set.radii.iter().any(|r| !(*r >= 0.0)) {
                return bad("index_set.radii must be non-empty and non-negative");
            }
            if let SetKind::Lp { p } = set.kind {
                if !(p >= 1.0) {
                    return bad("index_set lp exponent must be >= 1");
                }
            }
            if let Anisotropy::Linear { step } = set.anisotropy {
                if !(step >= 0.0) {
                    return bad("anisotropy step must be non-negative");
                }
            }
        }
        match self.experiment {
            ExperimentKind::Poisson2d | ExperimentKind::Poisson1dKernel => {
                if self.sizes.is_empty() {
                    return bad("linear experiments need an N_eff sweep in `sizes`");
                }
            }
            ExperimentKind::Burgers => {
                if self.index_set.is_none() {
                    return bad("burgers needs an index_set");
                }
                if !(self.solver.nu > 0.0) || !(self.solver.t_final > 0.0) {
                    return bad("solver nu and t_final must be positive");
                }
                if self.test_samples == 0 {
                    return bad("test_samples must be positive");
                }
            }
            ExperimentKind::DiscreteDemo | ExperimentKind::ComplexitySweep => {
                if self.sizes.is_empty() {
                    return bad("this experiment needs an N_eff sweep in `sizes`");
                }
            }
        }
        if let Some(s) = self.cloud_size {
            if self.sizes.iter().any(|&n| n > s) {
                return bad("cloud_size must be at least every N_eff");
            }
        }
        Ok(())
    }
}

pub fn short_hash(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    hex::encode(&digest[..8])
}

/// Recursively overlays `patch` onto `base`.
pub fn merge_json(base: &mut serde_json::Value, patch: serde_json::Value) {
    match (base, patch) {
        (serde_json::Value::Object(b), serde_json::Value::Object(p)) => {
            for (k, v) in p {
                merge_json(b.entry(k).or_insert(serde_json::Value::Null), v);
            }
        }
        (b, p) => *b = p,
    }
}
