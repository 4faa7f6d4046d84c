use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;

use super::bessel::bessel_j_ladder;
use crate::error::{Error, Result};
use crate::wavepacket::{MomentumWavefunction, SpatialGrid};

/// Allowed norm deficit of a truncated Bessel state.
pub const RESONANT_NORM_TOLERANCE: f64 = 1e-10;

const NEGLIGIBLE_BESSEL: f64 = 1e-16;

/// `(-i)^m`
fn minus_i_pow(m: i64) -> Complex64 {
    match m.rem_euclid(4) {
        0 => Complex64::new(1.0, 0.0),
        1 => Complex64::new(0.0, -1.0),
        2 => Complex64::new(-1.0, 0.0),
        _ => Complex64::new(0.0, 1.0),
    }
}

fn bessel_ladder_checked(half_width: usize, x: f64) -> Result<Vec<f64>> {
    let j = bessel_j_ladder(half_width, x)?;
    let deficit = 1.0 - j.iter().map(|v| v * v).sum::<f64>();
    if deficit > RESONANT_NORM_TOLERANCE {
        return Err(Error::Truncation {
            deficit,
            bound: RESONANT_NORM_TOLERANCE,
        });
    }
    Ok(j)
}

/// Exact-resonance state after `t` kicks, `ψ(m) = (-i)^m J_m(t·φ_d)`.
pub fn resonant_state(t: usize, phi_d: f64, half_width: usize) -> Result<MomentumWavefunction> {
    if half_width < 1 {
        return Err(Error::invalid("half-width must be at least 1"));
    }
    let j = bessel_ladder_checked(half_width, t as f64 * phi_d)?;
    let m = half_width as i64;
    let amps = (-m..=m).zip(&j).map(|(k, v)| minus_i_pow(k) * *v).collect();
    MomentumWavefunction::new(half_width, amps)
}

/// First-order change of the position density produced by one near-resonant
/// free flight that follows the `k`-th kick.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrectionField {
    pub grid: SpatialGrid,
    pub values: Vec<f64>,
    pub epsilon: f64,
    pub bessel_argument: f64,
}

impl CorrectionField {
    /// `(2π/n)·Σ_j C(X_j)`
    pub fn integral(&self) -> f64 {
        self.grid.spacing() * self.values.iter().sum::<f64>()
    }
}

/// Correction after the free flight following kick `k`,
///
/// ```text
/// C(X) = (1/π) Σ_m Σ_{n>m} Re[ e^{i(m-n)X} (n² - m²)(2πiε) i^n J_n(a) (-i)^m J_m(a) ],
/// ```
///
/// with `a = k·φ_d`. Pairs are grouped by `d = n - m`, which turns the double
/// sum into a Fourier series with real coefficients
/// `S_d = Σ_m (2md + d²) J_{m+d} J_m`. The field is computed for unit `ε` and
/// scaled last, so it is exactly linear in `ε`.
pub fn correction_term(
    k: usize,
    phi_d: f64,
    epsilon: f64,
    grid: SpatialGrid,
    half_width: usize,
) -> Result<CorrectionField> {
    if k < 1 {
        return Err(Error::invalid("correction index k must be at least 1"));
    }
    if !epsilon.is_finite() {
        return Err(Error::invalid("epsilon must be finite"));
    }
    grid.require(half_width)?;
    let a = k as f64 * phi_d;
    let j = bessel_ladder_checked(half_width, a)?;
    let base = unit_correction(&j, half_width, grid);
    Ok(CorrectionField {
        grid,
        values: base.into_iter().map(|v| epsilon * v).collect(),
        epsilon,
        bessel_argument: a,
    })
}

fn unit_correction(j: &[f64], half_width: usize, grid: SpatialGrid) -> Vec<f64> {
    let m_max = half_width as i64;
    let at = |m: i64| j[(m + m_max) as usize];

    let max_d = 2 * half_width;
    let mut s = vec![0.0f64; max_d + 1];
    for (d, slot) in s.iter_mut().enumerate().skip(1) {
        let d = d as i64;
        let mut acc = 0.0;
        for m in -m_max..=(m_max - d) {
            let (jm, jn) = (at(m), at(m + d));
            if jm.abs() < NEGLIGIBLE_BESSEL || jn.abs() < NEGLIGIBLE_BESSEL {
                continue;
            }
            acc += (2 * m * d + d * d) as f64 * jn * jm;
        }
        *slot = acc;
    }

    let n = grid.n_points();
    let cos: Vec<f64> = (0..n).map(|j| grid.node(j).cos()).collect();
    let sin: Vec<f64> = (0..n).map(|j| grid.node(j).sin()).collect();
    (0..n)
        .map(|x| {
            let mut acc = 0.0;
            for (d, &sd) in s.iter().enumerate().skip(1) {
                if sd == 0.0 {
                    continue;
                }
                let idx = (d * x) % n;
                // Re[i^{d+1} e^{-i d X}]
                let r = match d % 4 {
                    0 => sin[idx],
                    1 => -cos[idx],
                    2 => -sin[idx],
                    _ => cos[idx],
                };
                acc += sd * r;
            }
            2.0 * acc
        })
        .collect()
}

/// First-order density after `periods` kick-then-free periods.
#[derive(Debug, Clone, PartialEq)]
pub struct PerturbativeDensity {
    pub grid: SpatialGrid,
    pub values: Vec<f64>,
    pub kicks: usize,
    pub epsilon: f64,
}

impl PerturbativeDensity {
    pub fn integral(&self) -> f64 {
        self.grid.spacing() * self.values.iter().sum::<f64>()
    }
}

/// `D_N(X) = 1/2π + Σ_{k=1}^{N} C_k(X)`.
///
/// Kicks leave the position density unchanged, and to first order each free
/// flight adds its own correction on top of the exact-resonance state, so the
/// recursion unrolls into a plain sum.
pub fn perturbative_density(
    periods: usize,
    phi_d: f64,
    epsilon: f64,
    grid: SpatialGrid,
    half_width: usize,
) -> Result<PerturbativeDensity> {
    grid.require(half_width)?;
    let fields: Vec<Result<CorrectionField>> = (1..=periods)
        .into_par_iter()
        .map(|k| correction_term(k, phi_d, epsilon, grid, half_width))
        .collect();
    let mut values = vec![1.0 / (2.0 * PI); grid.n_points()];
    for field in fields {
        for (v, c) in values.iter_mut().zip(field?.values) {
            *v += c;
        }
    }
    Ok(PerturbativeDensity {
        grid,
        values,
        kicks: periods,
        epsilon,
    })
}
