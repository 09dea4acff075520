//! The five studies. Each returns a `RunOutput`; nothing here touches the
//! run directory except the optional dataset cache read-back.

use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use opwls::evaluation::{empirical_bochner_error, energy_fraction_lost, reconstruct_kernel, ErrorReport, SobolevWeighting};
use opwls::index_sets::{generate, MultiIndex};
use opwls::measures::{default_quadrature_order, ProductMeasure};
use opwls::operator_basis::{LinearRankOneBasis, OperatorBasis};
use opwls::pde_data::{
    default_dt, greens_kernel, BurgersConfig, DataSet, OperatorKind, Provenance, TruthOperator,
};
use opwls::rng::RngSeed;
use opwls::sampling::{
    build_discrete_plan, mixture_plan, sample_discrete, sample_uniform_discrete, DiscretePlan, MixturePlan,
    SampleBatch, Sampler,
};
use opwls::wls_solver::{assemble, default_tau, gram_diagnostics, solve, GramSummary, OperatorEstimate};
use rayon::prelude::*;
use serde_json::json;

use crate::config::{DiscreteTruth, ExperimentConfig, ExperimentKind, SamplingKind};
use crate::error::CliError;
use crate::output::{dataset_key, read_dataset_csv, CoefficientTable, FitRecord, RunOutput};
use crate::setup::{alphas_1d, energy_fraction_1d, modes_2d_setup, prefix_poly_basis, select_d_in_1d};

/// Nodes per coordinate for test-set draws from rho.
const TEST_Q: usize = 32;
/// Nodes per coordinate for the discrete-demo cloud.
const CLOUD_Q: usize = 64;
const KERNEL_GRID: usize = 101;
/// Burgers output is over-resolved this many times to measure truncation.
const REFERENCE_FACTOR: usize = 4;
const BURGERS_DEFAULT_D_OUT: usize = 150;

/// Where previously generated datasets may be read back from.
#[derive(Debug, Clone, Default)]
pub struct DatasetStore {
    dir: Option<PathBuf>,
}

impl DatasetStore {
    pub fn memory() -> Self {
        Self { dir: None }
    }

    pub fn cached(dir: &Path) -> Self {
        Self {
            dir: Some(dir.to_path_buf()),
        }
    }

    fn get_or_build(
        &self,
        key: &str,
        template: DataSet,
        build: impl FnOnce(DataSet) -> Result<DataSet, CliError>,
    ) -> Result<DataSet, CliError> {
        if let Some(dir) = &self.dir {
            let path = dir.join(format!("{key}.csv"));
            if let Ok(bytes) = std::fs::read(&path) {
                let d_in = template.inputs.first().map_or(0, Vec::len);
                let data = read_dataset_csv(&bytes, d_in, &template)?;
                if data.inputs == template.inputs && data.weights == template.weights {
                    return Ok(data);
                }
            }
        }
        build(template)
    }
}

/// Ground truth applied to a prefix of the input coordinates.
struct Truth {
    kind: OperatorKind,
    op: TruthOperator,
    input_len: usize,
}

impl Truth {
    fn new(kind: OperatorKind, input_len: usize) -> Self {
        let op = TruthOperator::new(&kind);
        Self { kind, op, input_len }
    }

    fn apply(&self, f: &[f64]) -> Result<Vec<f64>, CliError> {
        Ok(self.op.apply(&f[..self.input_len.min(f.len())])?)
    }

    fn apply_all(&self, inputs: &[Vec<f64>]) -> Result<Vec<Vec<f64>>, CliError> {
        inputs.par_iter().map(|f| self.apply(f)).collect()
    }
}

/// Everything one experiment needs from the outside.
pub struct Context<'a> {
    pub config: &'a ExperimentConfig,
    pub store: DatasetStore,
}

fn seed_of(cfg: &ExperimentConfig) -> RngSeed {
    RngSeed(cfg.seed)
}

fn sampling_code(s: SamplingKind) -> u64 {
    match s {
        SamplingKind::Optimal => 0,
        SamplingKind::MonteCarlo => 1,
    }
}

/// Seed for one (sweep point, trial, sampler) fit.
fn fit_seed(cfg: &ExperimentConfig, point: usize, trial: usize, s: SamplingKind) -> RngSeed {
    let tag = (((point as u64) << 32) | ((trial as u64) << 2) | sampling_code(s)) + (1 << 60);
    seed_of(cfg).derive(tag)
}

fn test_seed(cfg: &ExperimentConfig, point: usize) -> RngSeed {
    seed_of(cfg).derive(2 + point as u64)
}

/// Weighted fit: outputs pre-scaled by the Sobolev weights, Gram diagnostics
/// on the same system.
pub fn fit(
    basis: &Arc<OperatorBasis>,
    batch: &SampleBatch,
    outputs: &[Vec<f64>],
    weighting: &SobolevWeighting,
) -> Result<(OperatorEstimate, GramSummary), CliError> {
    let scaled: Vec<Vec<f64>> = outputs.iter().map(|g| weighting.scale(g)).collect();
    let system = assemble(basis, batch, &scaled)?;
    let gram = gram_diagnostics(&system)?;
    let est = solve(&system).with_tau(default_tau(&scaled));
    Ok((est, gram))
}

fn predict_all(est: &OperatorEstimate, weighting: &SobolevWeighting, inputs: &[Vec<f64>]) -> Vec<Vec<f64>> {
    inputs.par_iter().map(|f| weighting.unscale(&est.predict(f))).collect()
}

fn pad(mut g: Vec<f64>, len: usize) -> Vec<f64> {
    g.resize(len, 0.0);
    g
}

/// Training batch drawn from a continuous sampler.
fn draw_batch(
    sampler: &Sampler,
    basis: &OperatorBasis,
    plan: &MixturePlan,
    seed: RngSeed,
    m: usize,
    s: SamplingKind,
) -> Result<SampleBatch, CliError> {
    Ok(match s {
        SamplingKind::Optimal => sampler.sample_optimal(basis, plan, seed, m)?,
        SamplingKind::MonteCarlo => sampler.sample_monte_carlo(seed, m),
    })
}

fn make_dataset(
    ctx: &Context,
    truth: &Truth,
    batch: SampleBatch,
    seed: RngSeed,
    s: SamplingKind,
    out: &mut RunOutput,
    measure_alphas: &[f64],
) -> Result<(String, DataSet), CliError> {
    let key = dataset_key(&json!({
        "operator": truth.kind,
        "alphas": measure_alphas,
        "sampler": s.label(),
        "seed": seed.0,
        "M": batch.len(),
    }));
    let template = DataSet {
        inputs: batch.inputs,
        outputs: Vec::new(),
        weights: batch.weights,
        provenance: Provenance {
            seed: seed.0,
            sampler: s.label().to_string(),
            operator: truth.kind.clone(),
        },
    };
    let data = ctx.store.get_or_build(&key, template, |mut t| {
        t.outputs = truth.apply_all(&t.inputs)?;
        Ok(t)
    })?;
    out.datasets.push((key.clone(), data.clone()));
    Ok((key, data))
}

fn index_label(idx: &MultiIndex) -> String {
    idx.0.iter().map(|n| n.to_string()).collect::<Vec<_>>().join("-")
}

fn coefficient_rows(basis: &OperatorBasis, labels_1d: &dyn Fn(usize) -> String) -> Vec<String> {
    match basis {
        OperatorBasis::Linear(b) => b.input_modes().iter().map(|&m| labels_1d(m)).collect(),
        OperatorBasis::Polynomial(b) => b.scalar_indices().iter().map(index_label).collect(),
        OperatorBasis::Orthonormalized(o) => coefficient_rows(o.raw(), labels_1d)
            .into_iter()
            .map(|l| format!("b[{l}]"))
            .collect(),
    }
}

fn ensure_samples(m: usize, n_eff: usize) -> Result<(), CliError> {
    if m < n_eff {
        return Err(CliError::Validation(format!(
            "sample rule gives M = {m} below N_eff = {n_eff}; the system would be underdetermined"
        )));
    }
    Ok(())
}

fn relative_gap(report: &ErrorReport) -> f64 {
    report.relative.unwrap_or(f64::NAN)
}

pub fn run_experiment(ctx: &Context) -> Result<RunOutput, CliError> {
    ctx.config.validate()?;
    match ctx.config.experiment {
        ExperimentKind::Poisson2d => poisson2d(ctx),
        ExperimentKind::Poisson1dKernel => poisson1d_kernel(ctx),
        ExperimentKind::Burgers => burgers(ctx),
        ExperimentKind::DiscreteDemo => discrete_demo(ctx),
        ExperimentKind::ComplexitySweep => complexity_sweep(ctx),
    }
}

fn poisson2d(ctx: &Context) -> Result<RunOutput, CliError> {
    let cfg = ctx.config;
    let mut out = RunOutput::default();
    let setup = modes_2d_setup(
        &cfg.measure.alpha_rule,
        cfg.measure.d_in,
        cfg.measure.energy_target,
        cfg.mode_order,
    )?;
    let n_modes = setup.modes.len();
    let d_out = cfg.d_out.unwrap_or(n_modes);
    if d_out > n_modes {
        return Err(CliError::Validation(format!("d_out {d_out} exceeds the {n_modes} retained modes")));
    }
    if let Some(&n) = cfg.sizes.iter().find(|&&n| n > n_modes) {
        return Err(CliError::Validation(format!("N_eff {n} exceeds the {n_modes} retained modes")));
    }
    out.note("side", setup.side);
    out.note("d_in", n_modes);
    out.note("d_out", d_out);
    out.note("input_energy_fraction", setup.energy_fraction);

    let out_modes = setup.modes[..d_out].to_vec();
    let truth = Truth::new(OperatorKind::Poisson2d { modes: out_modes.clone() }, d_out);
    let weighting = SobolevWeighting::modes_2d(cfg.sobolev_alpha, &out_modes);
    let alphas = crate::setup::alphas_2d(&cfg.measure.alpha_rule, &setup.modes);

    let test_inputs = Sampler::base(&setup.measure, TEST_Q)?
        .sample_monte_carlo(test_seed(cfg, 0), cfg.test_samples)
        .inputs;
    let test_truth = truth.apply_all(&test_inputs)?;
    let label_of = |m: usize| format!("{}:{}", setup.modes[m].0, setup.modes[m].1);

    for (point, &n_eff) in cfg.sizes.iter().enumerate() {
        let basis = Arc::new(OperatorBasis::from(LinearRankOneBasis::new(
            &setup.measure,
            (0..n_eff).collect(),
            d_out,
        )?));
        let sampler = Sampler::for_basis(&setup.measure, &basis)?;
        let plan = mixture_plan(&basis)?;
        let m = cfg.sample_rule.samples(n_eff, cfg.delta, cfg.epsilon)?;
        ensure_samples(m, n_eff)?;
        for trial in 0..cfg.trials {
            for &s in &cfg.sampling {
                let seed = fit_seed(cfg, point, trial, s);
                let batch = draw_batch(&sampler, &basis, &plan, seed, m, s)?;
                let (key, data) = make_dataset(ctx, &truth, batch, seed, s, &mut out, &alphas)?;
                let (est, gram) = fit(&basis, &data.batch(), &data.outputs, &weighting)?;
                let pred = predict_all(&est, &weighting, &test_inputs);
                let report = empirical_bochner_error(&test_truth, &pred, &weighting)?;
                if trial == 0 {
                    out.coefficients.push(CoefficientTable {
                        name: format!("N{n_eff}_{}", s.label()),
                        rows: coefficient_rows(&basis, &label_of),
                        values: est.coefficients().clone(),
                    });
                }
                out.fits.push(FitRecord {
                    label: format!("N={n_eff}"),
                    n_eff,
                    sampling: s,
                    trial,
                    m,
                    gram,
                    rank: est.rank,
                    test: Some(report),
                    extras: vec![("stable".into(), gram.stable(cfg.delta) as u8 as f64)],
                    dataset: Some(key),
                });
            }
        }
    }
    Ok(out)
}

/// Sup over a uniform grid of `|K_fit - G|`.
pub fn kernel_error(est: &OperatorEstimate, points: usize) -> Result<f64, CliError> {
    let xs: Vec<f64> = (0..points).map(|i| i as f64 / (points - 1) as f64).collect();
    let k = reconstruct_kernel(est, &xs, &xs)?;
    let mut worst: f64 = 0.0;
    for (i, row) in k.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            worst = worst.max((v - greens_kernel(xs[i], xs[j])).abs());
        }
    }
    Ok(worst)
}

fn poisson1d_kernel(ctx: &Context) -> Result<RunOutput, CliError> {
    let cfg = ctx.config;
    let rule = cfg.measure.alpha_rule;
    let mut out = RunOutput::default();
    for (point, &n_eff) in cfg.sizes.iter().enumerate() {
        let d_in = cfg.measure.d_in.unwrap_or(n_eff);
        if d_in < n_eff {
            return Err(CliError::Validation(format!("N_eff {n_eff} exceeds d_in {d_in}")));
        }
        let d_out = cfg.d_out.unwrap_or(d_in);
        let alphas = alphas_1d(&rule, d_in);
        let measure = ProductMeasure::from_alphas(&alphas)?;
        let truth = Truth::new(OperatorKind::Poisson1d { d_out }, d_in);
        let weighting = SobolevWeighting::modes_1d(cfg.sobolev_alpha, d_out);
        let basis = Arc::new(OperatorBasis::from(LinearRankOneBasis::new(
            &measure,
            (0..n_eff).collect(),
            d_out,
        )?));
        let sampler = Sampler::for_basis(&measure, &basis)?;
        let plan = mixture_plan(&basis)?;
        let m = cfg.sample_rule.samples(n_eff, cfg.delta, cfg.epsilon)?;
        ensure_samples(m, n_eff)?;
        let test_inputs = Sampler::base(&measure, TEST_Q)?
            .sample_monte_carlo(test_seed(cfg, point), cfg.test_samples)
            .inputs;
        let test_truth = truth.apply_all(&test_inputs)?;
        if let Ok(frac) = energy_fraction_1d(&rule, d_in) {
            out.note(&format!("input_energy_fraction_N{n_eff}"), frac);
        }
        for trial in 0..cfg.trials {
            for &s in &cfg.sampling {
                let seed = fit_seed(cfg, point, trial, s);
                let batch = draw_batch(&sampler, &basis, &plan, seed, m, s)?;
                let (key, data) = make_dataset(ctx, &truth, batch, seed, s, &mut out, &alphas)?;
                let (est, gram) = fit(&basis, &data.batch(), &data.outputs, &weighting)?;
                let pred = predict_all(&est, &weighting, &test_inputs);
                let report = empirical_bochner_error(&test_truth, &pred, &weighting)?;
                let kerr = kernel_error(&est, KERNEL_GRID)?;
                let view = opwls::evaluation::operator_matrix_view(&est)?;
                let k = view.nrows().min(view.ncols());
                let off = opwls::evaluation::off_diagonal_fraction(&view.view((0, 0), (k, k)).into_owned());
                if trial == 0 {
                    out.coefficients.push(CoefficientTable {
                        name: format!("N{n_eff}_{}", s.label()),
                        rows: coefficient_rows(&basis, &|m| (m + 1).to_string()),
                        values: est.coefficients().clone(),
                    });
                }
                out.fits.push(FitRecord {
                    label: format!("N={n_eff}"),
                    n_eff,
                    sampling: s,
                    trial,
                    m,
                    gram,
                    rank: est.rank,
                    test: Some(report),
                    extras: vec![
                        ("kernel_sup_error".into(), kerr),
                        ("off_diagonal_fraction".into(), off),
                        ("stable".into(), gram.stable(cfg.delta) as u8 as f64),
                    ],
                    dataset: Some(key),
                });
            }
        }
    }
    Ok(out)
}

/// Solver configuration for the Burgers truth, with explicit overrides applied.
pub fn burgers_config(cfg: &ExperimentConfig, d_in: usize, d_out: usize) -> Result<BurgersConfig, CliError> {
    let s = &cfg.solver;
    let mut bc = BurgersConfig::with_defaults(s.nu, d_in, d_out);
    bc.t_final = s.t_final;
    bc.dt = s.dt.unwrap_or_else(|| default_dt(s.nu, s.t_final));
    if let Some(d) = s.d_solve {
        bc.d_solve = d;
        bc.grid = 2 * d + 1;
    }
    bc.validate(d_in, d_out)?;
    Ok(bc)
}

fn burgers(ctx: &Context) -> Result<RunOutput, CliError> {
    let cfg = ctx.config;
    let set_cfg = cfg.index_set.as_ref().expect("validated");
    let rule = cfg.measure.alpha_rule;
    let mut out = RunOutput::default();
    let d_in = match cfg.measure.d_in {
        Some(d) => d,
        None => select_d_in_1d(&rule, cfg.measure.energy_target)?.0,
    };
    let d_out = cfg.d_out.unwrap_or(BURGERS_DEFAULT_D_OUT);
    let bc = burgers_config(cfg, d_in, d_out)?;
    let reference = cfg
        .solver
        .reference_d_out
        .unwrap_or(REFERENCE_FACTOR * d_out)
        .min(bc.d_solve)
        .max(d_out);
    out.note("d_in", d_in);
    out.note("d_out", d_out);
    out.note("reference_d_out", reference);
    out.note("solver", bc);
    if let Ok(frac) = energy_fraction_1d(&rule, d_in) {
        out.note("input_energy_fraction", frac);
    }

    let alphas = alphas_1d(&rule, d_in);
    let measure = ProductMeasure::from_alphas(&alphas)?;
    let truth = Truth::new(OperatorKind::Burgers { config: bc, d_out }, d_in);
    let full_truth = Truth::new(OperatorKind::Burgers { config: bc, d_out: reference }, d_in);
    let weighting = SobolevWeighting::modes_1d(cfg.sobolev_alpha, d_out);
    let full_weighting = SobolevWeighting::modes_1d(cfg.sobolev_alpha, reference);

    let test_inputs = Sampler::base(&measure, default_quadrature_order(set_cfg.degree_cap).max(TEST_Q))?
        .sample_monte_carlo(test_seed(cfg, 0), cfg.test_samples)
        .inputs;
    let test_full = full_truth.apply_all(&test_inputs)?;
    let test_truth: Vec<Vec<f64>> = test_full.iter().map(|g| g[..d_out].to_vec()).collect();
    let zeros: Vec<Vec<f64>> = test_truth.iter().map(|_| vec![0.0; reference]).collect();
    let truncated: Vec<Vec<f64>> = test_truth.iter().map(|g| pad(g.clone(), reference)).collect();
    let truncation = empirical_bochner_error(&test_full, &truncated, &full_weighting)?;
    let trunc_rel = relative_gap(&truncation);
    let baseline = empirical_bochner_error(&test_full, &zeros, &full_weighting)?;
    let lost = energy_fraction_lost(&test_full, d_out)?;
    out.note("output_truncation_error", trunc_rel);
    out.note("output_energy_fraction_lost", lost);
    out.note("test_output_rms_norm", baseline.absolute);

    for (point, &radius) in set_cfg.radii.iter().enumerate() {
        let set = generate(&set_cfg.spec(radius, d_in))?;
        let n_eff = set.len();
        let basis = Arc::new(OperatorBasis::from(opwls::operator_basis::PolyOperatorBasis::new(
            &measure, set, d_out,
        )?));
        let sampler = Sampler::for_basis(&measure, &basis)?;
        let plan = mixture_plan(&basis)?;
        let m = cfg.sample_rule.samples(n_eff, cfg.delta, cfg.epsilon)?;
        ensure_samples(m, n_eff)?;
        for trial in 0..cfg.trials {
            for &s in &cfg.sampling {
                let seed = fit_seed(cfg, point, trial, s);
                let batch = draw_batch(&sampler, &basis, &plan, seed, m, s)?;
                let (key, data) = make_dataset(ctx, &truth, batch, seed, s, &mut out, &alphas)?;
                let (est, gram) = fit(&basis, &data.batch(), &data.outputs, &weighting)?;
                let pred = predict_all(&est, &weighting, &test_inputs);
                let in_span = empirical_bochner_error(&test_truth, &pred, &weighting)?;
                let padded: Vec<Vec<f64>> = pred.into_iter().map(|g| pad(g, reference)).collect();
                let report = empirical_bochner_error(&test_full, &padded, &full_weighting)?;
                if trial == 0 {
                    out.coefficients.push(CoefficientTable {
                        name: format!("k{radius}_{}", s.label()),
                        rows: coefficient_rows(&basis, &|m| (m + 1).to_string()),
                        values: est.coefficients().clone(),
                    });
                }
                out.fits.push(FitRecord {
                    label: format!("k={radius}"),
                    n_eff,
                    sampling: s,
                    trial,
                    m,
                    gram,
                    rank: est.rank,
                    test: Some(report),
                    extras: vec![
                        ("in_span_error".into(), relative_gap(&in_span)),
                        ("truncation_error".into(), trunc_rel),
                        ("energy_fraction_lost".into(), lost),
                        ("stable".into(), gram.stable(cfg.delta) as u8 as f64),
                    ],
                    dataset: Some(key),
                });
            }
        }
    }
    Ok(out)
}

/// Non-product cloud: product draws mixed along neighbouring coordinates,
/// `f'_j = (f_j + f_{j-1} / 2) / 1.5`, which keeps every entry in [-1, 1].
pub fn correlated_cloud(measure: &ProductMeasure, seed: RngSeed, size: usize) -> Result<Vec<Vec<f64>>, CliError> {
    let raw = Sampler::base(measure, CLOUD_Q)?.sample_monte_carlo(seed, size).inputs;
    Ok(raw
        .into_iter()
        .map(|f| {
            (0..f.len())
                .map(|j| if j == 0 { f[0] } else { (f[j] + 0.5 * f[j - 1]) / 1.5 })
                .collect()
        })
        .collect())
}

pub const DISCRETE_DEFAULT_D_IN: usize = 6;
pub const DISCRETE_DEFAULT_CLOUD: usize = 2000;
/// Hyperbolic-cross radius the prefix bases grow from.
pub const PREFIX_START: f64 = 6.0;

fn discrete_draw(plan: &DiscretePlan, seed: RngSeed, m: usize, s: SamplingKind) -> opwls::sampling::DiscreteDraw {
    match s {
        SamplingKind::Optimal => sample_discrete(plan, seed, m),
        SamplingKind::MonteCarlo => sample_uniform_discrete(plan, seed, m),
    }
}

fn discrete_demo(ctx: &Context) -> Result<RunOutput, CliError> {
    let cfg = ctx.config;
    let rule = cfg.measure.alpha_rule;
    let mut out = RunOutput::default();
    let d_in = cfg.measure.d_in.unwrap_or(DISCRETE_DEFAULT_D_IN);
    let d_out = cfg.d_out.unwrap_or(d_in);
    let cap = cfg.index_set.as_ref().map_or(10, |s| s.degree_cap);
    let start = cfg.index_set.as_ref().map_or(PREFIX_START, |s| s.radii[0]);
    let size = cfg.cloud_size.unwrap_or(DISCRETE_DEFAULT_CLOUD);
    let alphas = alphas_1d(&rule, d_in);
    let measure = ProductMeasure::from_alphas(&alphas)?;
    let cloud = correlated_cloud(&measure, seed_of(cfg).derive(7), size)?;
    let truth = match cfg.solver.discrete_truth {
        DiscreteTruth::Poisson1d => Truth::new(OperatorKind::Poisson1d { d_out }, d_in),
        DiscreteTruth::Burgers => Truth::new(
            OperatorKind::Burgers {
                config: burgers_config(cfg, d_in, d_out)?,
                d_out,
            },
            d_in,
        ),
    };
    let weighting = SobolevWeighting::modes_1d(cfg.sobolev_alpha, d_out);
    out.note("d_in", d_in);
    out.note("d_out", d_out);
    out.note("cloud_size", size);

    // test points are uniform over the cloud, i.e. drawn from upsilon
    let test_idx: Vec<usize> = {
        use rand::Rng;
        let seed = test_seed(cfg, 0);
        (0..cfg.test_samples.min(size))
            .map(|i| seed.stream(i as u64).gen_range(0..size))
            .collect()
    };
    let test_inputs: Vec<Vec<f64>> = test_idx.iter().map(|&i| cloud[i].clone()).collect();
    let test_truth = truth.apply_all(&test_inputs)?;

    for (point, &n_eff) in cfg.sizes.iter().enumerate() {
        let raw = prefix_poly_basis(&measure, start, cap, n_eff, d_out)?;
        let plan = build_discrete_plan(cloud.clone(), &OperatorBasis::from(raw))?;
        let probs = plan.probabilities();
        out.note(
            &format!("leverage_N{n_eff}"),
            json!({
                "sum": opwls::evaluation::pairwise_sum(probs),
                "min": probs.iter().cloned().fold(f64::INFINITY, f64::min),
                "max": probs.iter().cloned().fold(0.0, f64::max),
            }),
        );
        let basis = Arc::new(plan.basis().clone());
        let m = cfg.sample_rule.samples(n_eff, cfg.delta, cfg.epsilon)?;
        ensure_samples(m, n_eff)?;
        for trial in 0..cfg.trials {
            for &s in &cfg.sampling {
                let seed = fit_seed(cfg, point, trial, s);
                let batch = plan.batch(&discrete_draw(&plan, seed, m, s));
                let (key, data) = make_dataset(ctx, &truth, batch, seed, s, &mut out, &alphas)?;
                let (est, gram) = fit(&basis, &data.batch(), &data.outputs, &weighting)?;
                let pred = predict_all(&est, &weighting, &test_inputs);
                let report = empirical_bochner_error(&test_truth, &pred, &weighting)?;
                if trial == 0 {
                    out.coefficients.push(CoefficientTable {
                        name: format!("N{n_eff}_{}", s.label()),
                        rows: coefficient_rows(&basis, &|m| (m + 1).to_string()),
                        values: est.coefficients().clone(),
                    });
                }
                out.fits.push(FitRecord {
                    label: format!("N={n_eff}"),
                    n_eff,
                    sampling: s,
                    trial,
                    m,
                    gram,
                    rank: est.rank,
                    test: Some(report),
                    extras: vec![("stable".into(), gram.stable(cfg.delta) as u8 as f64)],
                    dataset: Some(key),
                });
            }
        }
    }
    Ok(out)
}

/// Cheap smooth synthetic operator for timing runs.
fn synthetic_outputs(inputs: &[Vec<f64>], d_out: usize) -> Vec<Vec<f64>> {
    inputs
        .iter()
        .map(|f| {
            (0..d_out)
                .map(|o| {
                    f.iter()
                        .enumerate()
                        .map(|(j, v)| v.powi(1 + (o % 3) as i32) / (1 + j + o) as f64)
                        .sum()
                })
                .collect()
        })
        .collect()
}

pub const COMPLEXITY_DEFAULT_D_OUT: usize = 16;

fn complexity_sweep(ctx: &Context) -> Result<RunOutput, CliError> {
    let cfg = ctx.config;
    let rule = cfg.measure.alpha_rule;
    let mut out = RunOutput::default();
    let d_in = cfg.measure.d_in.unwrap_or(DISCRETE_DEFAULT_D_IN);
    let d_out = cfg.d_out.unwrap_or(COMPLEXITY_DEFAULT_D_OUT);
    let cap = cfg.index_set.as_ref().map_or(10, |s| s.degree_cap);
    let start = cfg.index_set.as_ref().map_or(PREFIX_START, |s| s.radii[0]);
    let measure = ProductMeasure::from_alphas(&alphas_1d(&rule, d_in))?;
    let mut timings = Vec::new();
    for (point, &n_eff) in cfg.sizes.iter().enumerate() {
        let basis = Arc::new(OperatorBasis::from(prefix_poly_basis(&measure, start, cap, n_eff, d_out)?));
        let sampler = Sampler::for_basis(&measure, &basis)?;
        let plan = mixture_plan(&basis)?;
        let m = cfg.sample_rule.samples(n_eff, cfg.delta, cfg.epsilon)?;
        ensure_samples(m, n_eff)?;
        for trial in 0..cfg.trials {
            for &s in &cfg.sampling {
                let seed = fit_seed(cfg, point, trial, s);
                let t0 = Instant::now();
                let batch = draw_batch(&sampler, &basis, &plan, seed, m, s)?;
                let outputs = synthetic_outputs(&batch.inputs, d_out);
                let t1 = Instant::now();
                let system = assemble(&basis, &batch, &outputs)?;
                let t2 = Instant::now();
                let est = solve(&system);
                let t3 = Instant::now();
                let gram = gram_diagnostics(&system)?;
                let (sample_s, assemble_s, solve_s) = (
                    (t1 - t0).as_secs_f64(),
                    (t2 - t1).as_secs_f64(),
                    (t3 - t2).as_secs_f64(),
                );
                timings.push(json!({
                    "N_eff": n_eff, "M": m, "sampling": s.label(), "trial": trial,
                    "sample_s": sample_s, "assemble_s": assemble_s, "solve_s": solve_s,
                    "assemble_dominates": assemble_s >= solve_s,
                }));
                out.fits.push(FitRecord {
                    label: format!("N={n_eff}"),
                    n_eff,
                    sampling: s,
                    trial,
                    m,
                    gram,
                    rank: est.rank,
                    test: None,
                    extras: vec![("residual".into(), est.residual)],
                    dataset: None,
                });
            }
        }
    }
    // ratios of mean solve time when N_eff doubles at the same M
    let mean_solve = |n: usize, m: usize| {
        let v: Vec<f64> = timings
            .iter()
            .filter(|t| t["N_eff"] == n && t["M"] == m)
            .map(|t| t["solve_s"].as_f64().unwrap())
            .collect();
        (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
    };
    let mut ratios = Vec::new();
    for f in &out.fits {
        if f.trial != 0 || f.sampling != cfg.sampling[0] {
            continue;
        }
        if let (Some(a), Some(b)) = (mean_solve(f.n_eff, f.m), mean_solve(2 * f.n_eff, f.m)) {
            ratios.push(json!({"N_eff": f.n_eff, "M": f.m, "solve_ratio": b / a, "in_window": (4.0..=16.0).contains(&(b / a))}));
        }
    }
    out.note("timings", timings);
    out.note("doubling_solve_ratios", ratios);
    Ok(out)
}
