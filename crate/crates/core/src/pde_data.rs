//! Ground-truth operators in sine coordinates and dataset construction.
//!
//! Poisson operators are diagonal and applied exactly. Viscous Burgers is
//! integrated with a sine-Galerkin IMEX Euler scheme: implicit viscosity,
//! explicit pointwise flux `u u_x` evaluated on an interior grid of
//! `2 d_solve + 1` points, which integrates every product of retained modes
//! exactly.

use std::cell::RefCell;
use std::f64::consts::{PI, SQRT_2};
use std::sync::Arc;

use rayon::prelude::*;
use realfft::num_complex::Complex;
use realfft::{RealFftPlanner, RealToComplex};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sampling::SampleBatch;

/// `sqrt(2) sin(n pi x)`.
pub fn sine_mode_1d(n: usize, x: f64) -> f64 {
    SQRT_2 * (n as f64 * PI * x).sin()
}

/// `2 sin(n1 pi x1) sin(n2 pi x2)`.
pub fn sine_mode_2d(n: (usize, usize), x1: f64, x2: f64) -> f64 {
    sine_mode_1d(n.0, x1) * sine_mode_1d(n.1, x2)
}

/// Enumeration order of 2D mode pairs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ModeOrder {
    /// `n1` varies slowest.
    #[default]
    RowMajor,
    /// `n2` varies slowest.
    ColumnMajor,
}

/// All pairs of `[k]^2` (one-based) in the given order.
pub fn modes_2d(k: usize, order: ModeOrder) -> Vec<(usize, usize)> {
    let mut out = Vec::with_capacity(k * k);
    for a in 1..=k {
        for b in 1..=k {
            out.push(match order {
                ModeOrder::RowMajor => (a, b),
                ModeOrder::ColumnMajor => (b, a),
            });
        }
    }
    out
}

/// `-u'' = f` with homogeneous Dirichlet data: `uhat_n = fhat_n / (pi n)^2`.
/// Entry `i` of `fhat` is mode `n = i + 1`.
pub fn poisson_apply_1d(fhat: &[f64]) -> Vec<f64> {
    fhat.iter()
        .enumerate()
        .map(|(i, f)| f / (PI * PI * ((i + 1) * (i + 1)) as f64))
        .collect()
}

/// `Delta u = f` on the unit square: `uhat_n = -fhat_n / (pi^2 |n|^2)`.
pub fn poisson_apply_2d(fhat: &[f64], modes: &[(usize, usize)]) -> Result<Vec<f64>> {
    if fhat.len() != modes.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} coefficients for {} modes",
            fhat.len(),
            modes.len()
        )));
    }
    modes
        .iter()
        .zip(fhat)
        .map(|(&(a, b), f)| {
            if a == 0 || b == 0 {
                return Err(Error::Domain(format!("mode ({a}, {b}) must be one-based")));
            }
            Ok(-f / (PI * PI * (a * a + b * b) as f64))
        })
        .collect()
}

/// Green's function of `-u'' = f` on `[0, 1]`.
pub fn greens_kernel(x: f64, y: f64) -> f64 {
    x.min(y) - x * y
}

/// Interior-grid sine/cosine synthesis and sine analysis.
///
/// With `L = grid + 1` and nodes `x_m = m / L`:
/// `synth_sine`: `out[m-1] = sum_j c[j-1] sin(pi j m / L)`,
/// `synth_cos`: same with cosines, `analyze`: `out[k-1] = sum_m v[m-1] sin(pi k m / L)`.
pub trait GridTransform: Send + Sync {
    fn grid_size(&self) -> usize;
    fn synth_sine(&self, c: &[f64], out: &mut [f64]);
    fn synth_cos(&self, c: &[f64], out: &mut [f64]);
    fn analyze(&self, v: &[f64], out: &mut [f64]);

    /// Sine synthesis of `s` and cosine synthesis of `c` together.
    fn synth_pair(&self, s: &[f64], c: &[f64], u: &mut [f64], ux: &mut [f64]) {
        self.synth_sine(s, u);
        self.synth_cos(c, ux);
    }
}

/// DST-I / DCT via one real FFT of length `2 L`.
pub struct FastSineGrid {
    grid: usize,
    fft: Arc<dyn RealToComplex<f64>>,
}

impl std::fmt::Debug for FastSineGrid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FastSineGrid").field("grid", &self.grid).finish()
    }
}

impl FastSineGrid {
    pub fn new(grid: usize) -> Self {
        let fft = RealFftPlanner::new().plan_fft_forward(2 * (grid + 1));
        Self { grid, fft }
    }

    /// Odd extension of `s` plus even extension of `c`: the transform's
    /// imaginary part carries the sine sums, its real part the cosine sums.
    fn run(&self, s: Option<&[f64]>, c: Option<&[f64]>, sine: Option<&mut [f64]>, cosine: Option<&mut [f64]>) {
        let l = self.grid + 1;
        BUFFERS.with(|cell| {
            let (input, spectrum, scratch) = &mut *cell.borrow_mut();
            input.clear();
            input.resize(2 * l, 0.0);
            spectrum.resize(l + 1, Complex::new(0.0, 0.0));
            scratch.resize(self.fft.get_scratch_len(), Complex::new(0.0, 0.0));
            if let Some(s) = s {
                for (j, &v) in s.iter().enumerate() {
                    input[j + 1] += v;
                    input[2 * l - j - 1] -= v;
                }
            }
            if let Some(c) = c {
                for (j, &v) in c.iter().enumerate() {
                    input[j + 1] += v;
                    input[2 * l - j - 1] += v;
                }
            }
            self.fft
                .process_with_scratch(input, spectrum, scratch)
                .expect("buffer lengths match the plan");
            if let Some(out) = sine {
                for (m, o) in out.iter_mut().enumerate() {
                    *o = -0.5 * spectrum[m + 1].im;
                }
            }
            if let Some(out) = cosine {
                for (m, o) in out.iter_mut().enumerate() {
                    *o = 0.5 * spectrum[m + 1].re;
                }
            }
        })
    }
}

type Buffers = (Vec<f64>, Vec<Complex<f64>>, Vec<Complex<f64>>);

thread_local! {
    static BUFFERS: RefCell<Buffers> = const { RefCell::new((Vec::new(), Vec::new(), Vec::new())) };
}

impl GridTransform for FastSineGrid {
    fn grid_size(&self) -> usize {
        self.grid
    }
    fn synth_sine(&self, c: &[f64], out: &mut [f64]) {
        self.run(Some(c), None, Some(out), None)
    }
    fn synth_cos(&self, c: &[f64], out: &mut [f64]) {
        self.run(None, Some(c), None, Some(out))
    }
    fn analyze(&self, v: &[f64], out: &mut [f64]) {
        self.run(Some(v), None, Some(out), None)
    }
    fn synth_pair(&self, s: &[f64], c: &[f64], u: &mut [f64], ux: &mut [f64]) {
        self.run(Some(s), Some(c), Some(u), Some(ux))
    }
}

/// Dense-matrix reference transform.
#[derive(Debug, Clone)]
pub struct DirectSineGrid {
    grid: usize,
    sin: Vec<f64>,
    cos: Vec<f64>,
}

impl DirectSineGrid {
    pub fn new(grid: usize) -> Self {
        let l = (grid + 1) as f64;
        let mut sin = Vec::with_capacity(grid * grid);
        let mut cos = Vec::with_capacity(grid * grid);
        for m in 1..=grid {
            for j in 1..=grid {
                let t = PI * (j * m) as f64 / l;
                sin.push(t.sin());
                cos.push(t.cos());
            }
        }
        Self { grid, sin, cos }
    }

    fn apply(&self, table: &[f64], c: &[f64], out: &mut [f64]) {
        for (m, o) in out.iter_mut().enumerate() {
            let row = &table[m * self.grid..m * self.grid + c.len()];
            *o = row.iter().zip(c).map(|(a, b)| a * b).sum();
        }
    }
}

impl GridTransform for DirectSineGrid {
    fn grid_size(&self) -> usize {
        self.grid
    }
    fn synth_sine(&self, c: &[f64], out: &mut [f64]) {
        self.apply(&self.sin, c, out)
    }
    fn synth_cos(&self, c: &[f64], out: &mut [f64]) {
        self.apply(&self.cos, c, out)
    }
    fn analyze(&self, v: &[f64], out: &mut [f64]) {
        // the sine table is symmetric in (m, j)
        self.apply(&self.sin, v, out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BurgersConfig {
    pub nu: f64,
    pub t_final: f64,
    pub dt: f64,
    pub d_solve: usize,
    pub grid: usize,
}

/// Smallest `2^m - 1` exceeding `10 max(d_in, d_out)`; keeps the FFT length a power of two.
pub fn default_d_solve(d_in: usize, d_out: usize) -> usize {
    let floor = 10 * d_in.max(d_out);
    let mut d = 1usize;
    while d <= floor {
        d = 2 * d + 1;
    }
    d
}

/// `T / 2000` for `nu >= 1e-2`, `T / 8000` below.
pub fn default_dt(nu: f64, t_final: f64) -> f64 {
    if nu >= 1e-2 {
        t_final / 2000.0
    } else {
        t_final / 8000.0
    }
}

impl BurgersConfig {
    pub const DEFAULT_T: f64 = 0.2;

    pub fn with_defaults(nu: f64, d_in: usize, d_out: usize) -> Self {
        let d_solve = default_d_solve(d_in, d_out);
        Self {
            nu,
            t_final: Self::DEFAULT_T,
            dt: default_dt(nu, Self::DEFAULT_T),
            d_solve,
            grid: 2 * d_solve + 1,
        }
    }

    pub fn steps(&self) -> usize {
        (self.t_final / self.dt).round() as usize
    }

    pub fn validate(&self, d_in: usize, d_out: usize) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if !(self.nu > 0.0) || !self.nu.is_finite() {
            return bad(format!("viscosity {} must be positive", self.nu));
        }
        if !(self.t_final > 0.0) || !(self.dt > 0.0) {
            return bad("terminal time and dt must be positive".into());
        }
        let n = self.t_final / self.dt;
        if (n - n.round()).abs() > 1e-9 * n.max(1.0) {
            return bad(format!("dt {} does not divide T {}", self.dt, self.t_final));
        }
        if self.d_solve <= 10 * d_in.max(d_out) {
            return bad(format!(
                "d_solve {} must exceed 10 max(d_in, d_out) = {}",
                self.d_solve,
                10 * d_in.max(d_out)
            ));
        }
        if self.grid < 2 * self.d_solve {
            return bad(format!("grid {} below 2 d_solve", self.grid));
        }
        Ok(())
    }
}

pub struct BurgersSolver {
    config: BurgersConfig,
    transform: Box<dyn GridTransform>,
    /// `1 / (1 + dt nu pi^2 j^2)`.
    implicit: Vec<f64>,
}

impl std::fmt::Debug for BurgersSolver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("BurgersSolver").field("config", &self.config).finish()
    }
}

struct Workspace {
    a: Vec<f64>,
    b: Vec<f64>,
    u: Vec<f64>,
    ux: Vec<f64>,
    flux: Vec<f64>,
}

impl BurgersSolver {
    pub fn new(config: BurgersConfig) -> Self {
        let grid = config.grid;
        Self::with_transform(config, Box::new(FastSineGrid::new(grid)))
    }

    pub fn with_transform(config: BurgersConfig, transform: Box<dyn GridTransform>) -> Self {
        let implicit = (1..=config.d_solve)
            .map(|j| 1.0 / (1.0 + config.dt * config.nu * PI * PI * (j * j) as f64))
            .collect();
        Self {
            config,
            transform,
            implicit,
        }
    }

    pub fn config(&self) -> &BurgersConfig {
        &self.config
    }

    fn workspace(&self) -> Workspace {
        let g = self.config.grid;
        Workspace {
            a: vec![0.0; self.config.d_solve],
            b: vec![0.0; self.config.d_solve],
            u: vec![0.0; g],
            ux: vec![0.0; g],
            flux: vec![0.0; self.config.d_solve],
        }
    }

    /// One IMEX step in place; returns the largest grid value of `|u_x|`
    /// before the step.
    fn step_with(&self, uhat: &mut [f64], ws: &mut Workspace) -> f64 {
        let l = (self.config.grid + 1) as f64;
        for (j, ((a, b), u)) in ws.a.iter_mut().zip(ws.b.iter_mut()).zip(uhat.iter()).enumerate() {
            *a = SQRT_2 * u;
            *b = SQRT_2 * PI * (j + 1) as f64 * u;
        }
        self.transform.synth_pair(&ws.a, &ws.b, &mut ws.u, &mut ws.ux);
        let max_ux = ws.ux.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for (u, ux) in ws.u.iter_mut().zip(&ws.ux) {
            *u *= ux;
        }
        self.transform.analyze(&ws.u, &mut ws.flux);
        let s = SQRT_2 / l;
        for ((u, f), c) in uhat.iter_mut().zip(&ws.flux).zip(&self.implicit) {
            *u = (*u - self.config.dt * s * f) * c;
        }
        max_ux
    }

    /// Single step on a full-length state (`d_solve` coefficients).
    pub fn step(&self, uhat: &mut [f64]) -> f64 {
        assert_eq!(uhat.len(), self.config.d_solve);
        let mut ws = self.workspace();
        self.step_with(uhat, &mut ws)
    }

    /// Zero-pads `u0hat`, integrates to `T`, and keeps `d_out` modes.
    pub fn solve(&self, u0hat: &[f64], d_out: usize) -> Result<Vec<f64>> {
        let d = self.config.d_solve;
        if u0hat.len() > d || d_out > d {
            return Err(Error::DimensionMismatch(format!(
                "input {} / output {} modes exceed d_solve {d}",
                u0hat.len(),
                d_out
            )));
        }
        let mut state = vec![0.0; d];
        state[..u0hat.len()].copy_from_slice(u0hat);
        let mut ws = self.workspace();
        for step in 0..self.config.steps() {
            self.step_with(&mut state, &mut ws);
            if !state.iter().all(|v| v.is_finite()) {
                return Err(Error::BlowUp { step: step + 1 });
            }
        }
        state.truncate(d_out);
        Ok(state)
    }
}

pub fn burgers_solve(u0hat: &[f64], config: &BurgersConfig, d_out: usize) -> Result<Vec<f64>> {
    BurgersSolver::new(*config).solve(u0hat, d_out)
}

/// Which ground-truth operator produced a dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum OperatorKind {
    Poisson1d { d_out: usize },
    Poisson2d { modes: Vec<(usize, usize)> },
    Burgers { config: BurgersConfig, d_out: usize },
}

/// A ready-to-apply ground truth.
#[derive(Debug)]
pub enum TruthOperator {
    Poisson1d { d_out: usize },
    Poisson2d { modes: Vec<(usize, usize)> },
    Burgers { solver: BurgersSolver, d_out: usize },
}

impl TruthOperator {
    pub fn new(kind: &OperatorKind) -> Self {
        match kind {
            OperatorKind::Poisson1d { d_out } => TruthOperator::Poisson1d { d_out: *d_out },
            OperatorKind::Poisson2d { modes } => TruthOperator::Poisson2d { modes: modes.clone() },
            OperatorKind::Burgers { config, d_out } => TruthOperator::Burgers {
                solver: BurgersSolver::new(*config),
                d_out: *d_out,
            },
        }
    }

    pub fn d_out(&self) -> usize {
        match self {
            TruthOperator::Poisson1d { d_out } | TruthOperator::Burgers { d_out, .. } => *d_out,
            TruthOperator::Poisson2d { modes } => modes.len(),
        }
    }

    pub fn apply(&self, fhat: &[f64]) -> Result<Vec<f64>> {
        match self {
            TruthOperator::Poisson1d { d_out } => {
                let mut u = poisson_apply_1d(&fhat[..fhat.len().min(*d_out)]);
                u.resize(*d_out, 0.0);
                Ok(u)
            }
            TruthOperator::Poisson2d { modes } => poisson_apply_2d(fhat, modes),
            TruthOperator::Burgers { solver, d_out } => solver.solve(fhat, *d_out),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub seed: u64,
    pub sampler: String,
    pub operator: OperatorKind,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DataSet {
    pub inputs: Vec<Vec<f64>>,
    pub outputs: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
    pub provenance: Provenance,
}

impl DataSet {
    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn batch(&self) -> SampleBatch {
        SampleBatch {
            inputs: self.inputs.clone(),
            weights: self.weights.clone(),
        }
    }
}

pub fn apply_all(op: &TruthOperator, inputs: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    inputs.par_iter().map(|f| op.apply(f)).collect()
}

pub fn build_dataset(batch: SampleBatch, provenance: Provenance) -> Result<DataSet> {
    let op = TruthOperator::new(&provenance.operator);
    let outputs = apply_all(&op, &batch.inputs)?;
    Ok(DataSet {
        inputs: batch.inputs,
        outputs,
        weights: batch.weights,
        provenance,
    })
}
