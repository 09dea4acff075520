use std::sync::Arc;

use approx::assert_abs_diff_eq;
use opwls::evaluation::{empirical_bochner_error, reconstruct_kernel, SobolevWeighting};
use opwls::index_sets::{generate, IndexSetKind, IndexSetSpec};
use opwls::measures::ProductMeasure;
use opwls::nalgebra::{DMatrix, DVector};
use opwls::operator_basis::{LinearRankOneBasis, OperatorBasis, PolyOperatorBasis};
use opwls::pde_data::{poisson_apply_1d, BurgersConfig, BurgersSolver};
use opwls::rng::RngSeed;
use opwls::sampling::{mixture_plan, SampleBatch, Sampler};
use opwls::wls_solver::{assemble, gram_diagnostics, solve, OperatorEstimate};
use proptest::prelude::*;
use rand::Rng;

fn poly_system(seed: u64, m: usize, d_out: usize) -> (Arc<OperatorBasis>, SampleBatch, Vec<Vec<f64>>) {
    let measure = ProductMeasure::from_alphas(&[1.0, 4.0, 9.0]).unwrap();
    let set = generate(&IndexSetSpec::isotropic(IndexSetKind::HyperbolicCross, 4.0, 3, 10)).unwrap();
    let basis: Arc<OperatorBasis> = Arc::new(PolyOperatorBasis::new(&measure, set, d_out).unwrap().into());
    let s = Sampler::for_basis(&measure, &basis).unwrap();
    let batch = s
        .sample_optimal(&basis, &mixture_plan(&basis).unwrap(), RngSeed(seed), m)
        .unwrap();
    let outputs = batch
        .inputs
        .iter()
        .map(|f| (0..d_out).map(|o| (f[0] * (o + 1) as f64).sin() + f[1] * f[2]).collect())
        .collect();
    (basis, batch, outputs)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn gram_bounds_quadratic_forms(seed in 0u64..10_000) {
        let (basis, batch, outputs) = poly_system(seed, 400, 2);
        let system = assemble(&basis, &batch, &outputs).unwrap();
        let g = system.gram();
        let summary = gram_diagnostics(&system).unwrap();
        let mut rng = RngSeed(seed).stream(1);
        for _ in 0..100 {
            let a = DVector::from_fn(g.nrows(), |_, _| rng.gen_range(-1.0..1.0));
            let q = (a.transpose() * &g * &a)[(0, 0)];
            let n2 = a.norm_squared();
            let slack = 1e-10 * n2;
            prop_assert!(q >= (1.0 - summary.spectral_gap) * n2 - slack);
            prop_assert!(q <= (1.0 + summary.spectral_gap) * n2 + slack);
        }
    }

    #[test]
    fn uniform_weight_scaling_leaves_coefficients(seed in 0u64..10_000, c in 0.01f64..100.0) {
        let (basis, batch, outputs) = poly_system(seed, 200, 3);
        let a = solve(&assemble(&basis, &batch, &outputs).unwrap());
        let scaled = SampleBatch {
            inputs: batch.inputs.clone(),
            weights: batch.weights.iter().map(|w| w * c).collect(),
        };
        let b = solve(&assemble(&basis, &scaled, &outputs).unwrap());
        let diff = (a.coefficients() - b.coefficients()).abs().max();
        prop_assert!(diff < 1e-10, "max diff {diff}");
        prop_assert!((b.residual - a.residual * c.sqrt()).abs() < 1e-8 * (1.0 + b.residual));
    }

    #[test]
    fn kernel_is_linear_in_coefficients(seed in 0u64..10_000, s in -3.0f64..3.0) {
        let measure = ProductMeasure::from_alphas(&[1.0, 4.0, 9.0]).unwrap();
        let basis: Arc<OperatorBasis> = Arc::new(LinearRankOneBasis::new(&measure, vec![0, 1, 2], 3).unwrap().into());
        let mut rng = RngSeed(seed).stream(0);
        let a = DMatrix::from_fn(3, 3, |_, _| rng.gen_range(-1.0..1.0));
        let b = DMatrix::from_fn(3, 3, |_, _| rng.gen_range(-1.0..1.0));
        let grid = [0.0, 0.13, 0.5, 0.77, 1.0];
        let ka = reconstruct_kernel(&OperatorEstimate::new(basis.clone(), a.clone()).unwrap(), &grid, &grid).unwrap();
        let kb = reconstruct_kernel(&OperatorEstimate::new(basis.clone(), b.clone()).unwrap(), &grid, &grid).unwrap();
        let kc = reconstruct_kernel(&OperatorEstimate::new(basis, a + b * s).unwrap(), &grid, &grid).unwrap();
        for i in 0..grid.len() {
            for j in 0..grid.len() {
                prop_assert!((kc[i][j] - ka[i][j] - s * kb[i][j]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn sobolev_error_grows_with_alpha(errs in prop::collection::vec(prop::collection::vec(-1.0f64..1.0, 5), 1..8), a1 in 0.0f64..2.0, da in 0.0f64..2.0) {
        let zero: Vec<Vec<f64>> = errs.iter().map(|_| vec![0.0; 5]).collect();
        let lo = empirical_bochner_error(&errs, &zero, &SobolevWeighting::modes_1d(a1, 5)).unwrap();
        let hi = empirical_bochner_error(&errs, &zero, &SobolevWeighting::modes_1d(a1 + da, 5)).unwrap();
        prop_assert!(hi.absolute >= lo.absolute * (1.0 - 1e-14));
    }

    #[test]
    fn plain_error_ignores_output_permutation(
        rows in prop::collection::vec(prop::collection::vec(-1.0f64..1.0, 4), 1..6),
        preds in prop::collection::vec(prop::collection::vec(-1.0f64..1.0, 4), 6),
        perm in Just([2usize, 0, 3, 1]),
    ) {
        let preds = &preds[..rows.len()];
        let w = SobolevWeighting::unit(4);
        let base = empirical_bochner_error(&rows, preds, &w).unwrap();
        let p = |v: &Vec<f64>| perm.iter().map(|&i| v[i]).collect::<Vec<f64>>();
        let rows2: Vec<_> = rows.iter().map(p).collect();
        let preds2: Vec<_> = preds.iter().map(p).collect();
        let moved = empirical_bochner_error(&rows2, &preds2, &w).unwrap();
        prop_assert!((base.absolute - moved.absolute).abs() < 1e-14);
        for (a, b) in base.quantiles.iter().zip(&moved.quantiles) {
            prop_assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn poisson_is_linear(a in prop::collection::vec(-1.0f64..1.0, 6), b in prop::collection::vec(-1.0f64..1.0, 6), s in -2.0f64..2.0) {
        let sum: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x + s * y).collect();
        let (ua, ub, us) = (poisson_apply_1d(&a), poisson_apply_1d(&b), poisson_apply_1d(&sum));
        for i in 0..6 {
            prop_assert!((us[i] - ua[i] - s * ub[i]).abs() < 1e-15);
        }
    }
}

/// Full `(N d_out) x (N d_out)` Kronecker system solved directly.
fn monolithic(phi: &DMatrix<f64>, y: &DMatrix<f64>) -> DMatrix<f64> {
    let (m, n) = phi.shape();
    let d = y.ncols();
    let big = DMatrix::from_fn(m * d, n * d, |r, c| {
        let (i, o) = (r / d, r % d);
        let (l, p) = (c / d, c % d);
        if o == p {
            phi[(i, l)]
        } else {
            0.0
        }
    });
    let rhs = DVector::from_fn(m * d, |r, _| y[(r / d, r % d)]);
    let sol = big.svd(true, true).solve(&rhs, 1e-14).unwrap();
    DMatrix::from_fn(n, d, |l, o| sol[l * d + o])
}

#[test]
fn block_solve_equals_monolithic_solve() {
    for trial in 0..10u64 {
        let mut rng = RngSeed(trial).stream(9);
        let n = rng.gen_range(2..=20);
        let d_out = rng.gen_range(1..=5);
        let set = generate(&IndexSetSpec::isotropic(IndexSetKind::LpBall { p: 1.0 }, 6.0, 3, 10)).unwrap();
        let measure = ProductMeasure::from_alphas(&[1.0, 2.0, 3.0]).unwrap();
        let basis: Arc<OperatorBasis> =
            Arc::new(PolyOperatorBasis::new(&measure, set[..n].to_vec(), d_out).unwrap().into());
        let m = 3 * n + 5;
        let batch = Sampler::base(&measure, 30).unwrap().sample_monte_carlo(RngSeed(100 + trial), m);
        let batch = SampleBatch {
            weights: (0..m).map(|_| rng.gen_range(0.5..2.0)).collect(),
            ..batch
        };
        let outputs: Vec<Vec<f64>> = (0..m).map(|_| (0..d_out).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
        let system = assemble(&basis, &batch, &outputs).unwrap();
        let block = solve(&system);
        let full = monolithic(system.design(), system.targets());
        let diff = (block.coefficients() - full).abs().max();
        assert!(diff < 1e-10, "trial {trial}: {diff}");
    }
}

fn l2(u: &[f64]) -> f64 {
    u.iter().map(|v| v * v).sum::<f64>().sqrt()
}

#[test]
fn burgers_energy_is_nearly_dissipated() {
    let cfg = BurgersConfig::with_defaults(0.05, 8, 8);
    let solver = BurgersSolver::new(cfg);
    let mut u = vec![0.0; cfg.d_solve];
    u[..8].copy_from_slice(&[0.6, -0.4, 0.3, 0.2, -0.1, 0.1, 0.05, -0.02]);
    for _ in 0..cfg.steps() {
        let before = l2(&u);
        let max_ux = solver.step(&mut u);
        assert!(l2(&u) <= before * (1.0 + max_ux * cfg.dt) + 1e-15);
    }
}

#[test]
fn refining_the_grid_does_not_move_the_solution() {
    let base = BurgersConfig::with_defaults(0.1, 8, 8);
    let mut fine = base;
    fine.grid = 2 * base.grid + 1;
    let u0 = [0.5, -0.3, 0.25, 0.1, -0.1, 0.05, 0.03, -0.02];
    let a = BurgersSolver::new(base).solve(&u0, 64).unwrap();
    let b = BurgersSolver::new(fine).solve(&u0, 64).unwrap();
    let diff = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    assert!(diff <= 1e-10, "{diff}");
}

#[test]
fn time_step_refinement_converges_at_first_order() {
    let u0 = [0.5, -0.3, 0.25, 0.1, -0.1, 0.05, 0.03, -0.02];
    let solve_with = |steps: usize| {
        let mut c = BurgersConfig::with_defaults(0.1, 8, 8);
        c.dt = c.t_final / steps as f64;
        BurgersSolver::new(c).solve(&u0, 8).unwrap()
    };
    let (a, b, c) = (solve_with(500), solve_with(1000), solve_with(2000));
    let e1 = l2(&a.iter().zip(&b).map(|(x, y)| x - y).collect::<Vec<_>>());
    let e2 = l2(&b.iter().zip(&c).map(|(x, y)| x - y).collect::<Vec<_>>());
    // IMEX Euler: halving dt halves the increment
    assert_abs_diff_eq!(e1 / e2, 2.0, epsilon = 0.2);
}
