//! Measures, truncation rules and bases shared by the experiments.

use opwls::index_sets::{first_n, generate, IndexSetKind, IndexSetSpec, MultiIndex};
use opwls::measures::ProductMeasure;
use opwls::operator_basis::PolyOperatorBasis;
use opwls::pde_data::{modes_2d, ModeOrder};

use crate::config::{AlphaRule, ModeNorm};
use crate::error::CliError;

/// Terms summed exactly before the integral tail estimate kicks in.
const EXACT_TERMS: usize = 200_000;
const MAX_SIDE: usize = 20_000;

fn variance(rule: &AlphaRule, norm: f64) -> f64 {
    1.0 / (2.0 * rule.scale * norm.powf(rule.exponent) + 3.0)
}

pub fn alphas_1d(rule: &AlphaRule, d: usize) -> Vec<f64> {
    (1..=d).map(|n| rule.scale * (n as f64).powf(rule.exponent)).collect()
}

pub fn mode_norm(rule: &AlphaRule, m: (usize, usize)) -> f64 {
    match rule.norm {
        ModeNorm::L1 => (m.0 + m.1) as f64,
        ModeNorm::Linf => m.0.max(m.1) as f64,
    }
}

pub fn alphas_2d(rule: &AlphaRule, modes: &[(usize, usize)]) -> Vec<f64> {
    modes
        .iter()
        .map(|&m| rule.scale * mode_norm(rule, m).powf(rule.exponent))
        .collect()
}

fn require_summable(rule: &AlphaRule, min_exponent: f64) -> Result<(), CliError> {
    if !(rule.scale > 0.0) || !(rule.exponent > min_exponent) {
        return Err(CliError::Validation(format!(
            "energy rule needs alpha scale > 0 and exponent > {min_exponent}"
        )));
    }
    Ok(())
}

/// Total input energy `sum_n sigma_n^2` over all 1D modes.
pub fn total_energy_1d(rule: &AlphaRule) -> Result<f64, CliError> {
    require_summable(rule, 1.0)?;
    let head: f64 = (1..=EXACT_TERMS).map(|n| variance(rule, n as f64)).sum();
    // integral of 1 / (2 s x^e) beyond the last exact term
    let x0 = EXACT_TERMS as f64 + 0.5;
    let e = rule.exponent;
    Ok(head + 1.0 / (2.0 * rule.scale * (e - 1.0) * x0.powf(e - 1.0)))
}

/// Smallest prefix `d` of 1D modes capturing `target` of the energy.
pub fn select_d_in_1d(rule: &AlphaRule, target: f64) -> Result<(usize, f64), CliError> {
    let total = total_energy_1d(rule)?;
    let mut kept = 0.0;
    for n in 1..=EXACT_TERMS {
        kept += variance(rule, n as f64);
        if kept >= target * total {
            return Ok((n, kept / total));
        }
    }
    Err(CliError::Validation("energy target not reached by the 1D mode rule".into()))
}

pub fn energy_fraction_1d(rule: &AlphaRule, d: usize) -> Result<f64, CliError> {
    let total = total_energy_1d(rule)?;
    Ok((1..=d).map(|n| variance(rule, n as f64)).sum::<f64>() / total)
}

/// Number of pairs `(n1, n2) >= (1, 1)` on the shell of mode norm `s`.
fn shell_count(norm: ModeNorm, s: usize) -> usize {
    match norm {
        ModeNorm::L1 => s.saturating_sub(1),
        ModeNorm::Linf => 2 * s - 1,
    }
}

/// Total energy over all 2D modes, summed by norm shells.
pub fn total_energy_2d(rule: &AlphaRule) -> Result<f64, CliError> {
    require_summable(rule, 2.0)?;
    let head: f64 = (1..=EXACT_TERMS)
        .map(|s| shell_count(rule.norm, s) as f64 * variance(rule, s as f64))
        .sum();
    let x0 = EXACT_TERMS as f64 + 0.5;
    let e = rule.exponent;
    let per_shell = match rule.norm {
        ModeNorm::L1 => 1.0,
        ModeNorm::Linf => 2.0,
    };
    Ok(head + per_shell / (2.0 * rule.scale * (e - 2.0) * x0.powf(e - 2.0)))
}

fn square_energy(rule: &AlphaRule, k: usize) -> f64 {
    let mut s = 0.0;
    for a in 1..=k {
        for b in 1..=k {
            s += variance(rule, mode_norm(rule, (a, b)));
        }
    }
    s
}

/// Smallest side `K` such that `[K]^2` captures `target` of the energy.
pub fn select_side_2d(rule: &AlphaRule, target: f64) -> Result<(usize, f64), CliError> {
    let total = total_energy_2d(rule)?;
    let mut kept = 0.0;
    for k in 1..=MAX_SIDE {
        // add the new row and column of the square
        for j in 1..k {
            kept += variance(rule, mode_norm(rule, (k, j))) + variance(rule, mode_norm(rule, (j, k)));
        }
        kept += variance(rule, mode_norm(rule, (k, k)));
        if kept >= target * total {
            return Ok((k, kept / total));
        }
    }
    Err(CliError::Validation("energy target not reached by the 2D mode rule".into()))
}

pub fn energy_fraction_2d(rule: &AlphaRule, k: usize) -> Result<f64, CliError> {
    Ok(square_energy(rule, k) / total_energy_2d(rule)?)
}

/// Retained 2D input modes with their product measure.
#[derive(Debug, Clone)]
pub struct Modes2d {
    pub side: usize,
    pub modes: Vec<(usize, usize)>,
    pub measure: ProductMeasure,
    pub energy_fraction: f64,
}

pub fn modes_2d_setup(
    rule: &AlphaRule,
    side: Option<usize>,
    target: f64,
    order: ModeOrder,
) -> Result<Modes2d, CliError> {
    let (side, energy_fraction) = match side {
        Some(k) => (k, energy_fraction_2d(rule, k).unwrap_or(f64::NAN)),
        None => select_side_2d(rule, target)?,
    };
    let modes = modes_2d(side, order);
    let measure = ProductMeasure::from_alphas(&alphas_2d(rule, &modes))?;
    Ok(Modes2d {
        side,
        modes,
        measure,
        energy_fraction,
    })
}

/// First `n_eff` members, in graded order, of the smallest set of the given
/// kind with radius at least `start` holding `n_eff` members.
pub fn prefix_index_set(
    kind: IndexSetKind,
    start: f64,
    gamma: Vec<f64>,
    degree_cap: usize,
    n_eff: usize,
) -> Result<(Vec<MultiIndex>, f64), CliError> {
    let mut radius = start;
    loop {
        let spec = IndexSetSpec::new(kind, radius, gamma.clone(), degree_cap);
        let set = generate(&spec)?;
        if set.len() >= n_eff {
            return Ok((first_n(&set, n_eff), radius));
        }
        if radius > 1e6 {
            return Err(CliError::Validation(format!("no set of this kind reaches {n_eff} members")));
        }
        radius += 1.0;
    }
}

/// Polynomial basis on the first `n_eff` members of an isotropic hyperbolic
/// cross grown from radius `start`.
pub fn prefix_poly_basis(
    measure: &ProductMeasure,
    start: f64,
    degree_cap: usize,
    n_eff: usize,
    d_out: usize,
) -> Result<PolyOperatorBasis, CliError> {
    let d = measure.dim();
    let (set, _) = prefix_index_set(IndexSetKind::HyperbolicCross, start, vec![1.0; d], degree_cap, n_eff)?;
    Ok(PolyOperatorBasis::new(measure, set, d_out)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_d_energy_matches_known_sum() {
        // sum 1/(2 n^2 + 3) = (pi sqrt(3/2) coth(pi sqrt(3/2)) - 1) / 6
        let r = AlphaRule::default();
        let z = std::f64::consts::PI * 1.5f64.sqrt();
        let exact = (z / z.tanh() - 1.0) / 6.0;
        assert!((total_energy_1d(&r).unwrap() - exact).abs() < 1e-9);
        let (d, frac) = select_d_in_1d(&r, 0.95).unwrap();
        assert!(frac >= 0.95);
        assert!(energy_fraction_1d(&r, d - 1).unwrap() < 0.95);
    }

    #[test]
    fn cubic_l1_square_side_for_default_target() {
        let r = AlphaRule {
            scale: 1.0,
            exponent: 3.0,
            norm: ModeNorm::L1,
        };
        let (k, frac) = select_side_2d(&r, 0.95).unwrap();
        assert!(frac >= 0.95);
        assert!((30..=45).contains(&k), "side {k}");
        assert!((energy_fraction_2d(&r, k).unwrap() - frac).abs() < 1e-12);
    }

    #[test]
    fn prefix_set_is_downward_closed() {
        let (set, radius) = prefix_index_set(IndexSetKind::HyperbolicCross, 6.0, vec![1.0; 6], 10, 100).unwrap();
        assert_eq!(set.len(), 100);
        assert!(radius > 6.0);
        assert!(opwls::index_sets::is_monotone_lower(&set));
    }
}
