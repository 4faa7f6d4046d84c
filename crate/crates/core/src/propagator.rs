//! One-period Floquet evolution of the δ-kicked rotor,
//!
//! ```text
//! U = exp(-i φ_d cos X) · exp(-i P² / 2ħ_s),
//! ```
//!
//! split into a kick (diagonal on the spatial grid) and a free flight
//! (diagonal on the momentum ladder). Also hosts the dense-matrix oracle and
//! the phase-reversed fidelity protocol.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::Serialize;

use crate::analytics::bessel::bessel_j_orders;
use crate::error::{Error, Result};
use crate::wavepacket::{to_momentum, to_position, MomentumWavefunction, SimConfig, SpatialGrid};

/// Half-width cap for [`evolve_dense`].
pub const DENSE_HALF_WIDTH_CAP: usize = 512;

/// Column-norm defect of a truncated kick matrix above which it is flagged.
pub const KICK_MATRIX_WARN: f64 = 1e-8;

const MAX_GROWS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum KickSign {
    /// `e^{-iφ cos X}`
    Normal,
    /// `e^{+iφ cos X}`
    Reversed,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KickOperator {
    pub phi: f64,
    pub sign: KickSign,
}

impl KickOperator {
    pub fn normal(phi: f64) -> Self {
        Self { phi, sign: KickSign::Normal }
    }

    pub fn reversed(phi: f64) -> Self {
        Self { phi, sign: KickSign::Reversed }
    }

    /// Signed amplitude `s·φ` in `e^{-i s φ cos X}`.
    pub fn signed_phi(&self) -> f64 {
        match self.sign {
            KickSign::Normal => self.phi,
            KickSign::Reversed => -self.phi,
        }
    }

    fn factors(&self, grid: SpatialGrid) -> Vec<Complex64> {
        let a = self.signed_phi();
        grid.nodes()
            .map(|x| Complex64::from_polar(1.0, -a * x.cos()))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum FreePhaseSpec {
    /// `ħ_s = 4πl(1 + ε)`; the exactly resonant part `e^{-i2πlm²}` is the
    /// identity and is dropped, leaving `θ_m = 2πl·m²·ε`.
    ResonantRelative { l: u32, epsilon: f64 },
    /// Arbitrary `ħ_s`, phase `ħ_s m²/2` reduced modulo `2π`.
    General { hbar_s: f64 },
}

impl FreePhaseSpec {
    /// Free-flight phase for order `m` in turns, reduced to `[-1/2, 1/2]`.
    pub fn turns(&self, m: i64) -> f64 {
        let m2 = (m * m) as f64;
        match *self {
            FreePhaseSpec::ResonantRelative { l, epsilon } => {
                let t = l as f64 * m2 * epsilon;
                t - t.round()
            }
            FreePhaseSpec::General { hbar_s } => {
                // ħ_s m²/2 = 2π·(ħ_s/4π)·m². Split the product into its
                // rounded value plus the exact rounding error so the
                // reduction does not lose the fractional part for large m.
                let rate = hbar_s / (4.0 * PI);
                let p = rate * m2;
                let err = rate.mul_add(m2, -p);
                let frac = p - p.round();
                let t = frac + err;
                t - t.round()
            }
        }
    }

    /// Free-flight phase `θ_m` in radians (the factor is `e^{-iθ_m}`).
    pub fn phase(&self, m: i64) -> f64 {
        2.0 * PI * self.turns(m)
    }

    fn factors(&self, half_width: usize) -> Vec<Complex64> {
        let m = half_width as i64;
        (-m..=m)
            .map(|k| Complex64::from_polar(1.0, -self.phase(k)))
            .collect()
    }
}

/// Reusable kick machinery for one ladder/grid pair.
struct Kicker {
    half_width: usize,
    grid: SpatialGrid,
    factors: Vec<Complex64>,
}

impl Kicker {
    fn new(half_width: usize, grid: SpatialGrid, op: KickOperator) -> Result<Self> {
        grid.require(half_width)?;
        Ok(Self {
            half_width,
            grid,
            factors: op.factors(grid),
        })
    }

    fn apply(&self, wf: &MomentumWavefunction) -> Result<MomentumWavefunction> {
        let mut pwf = to_position(wf, self.grid)?;
        for (v, f) in pwf.values_mut().iter_mut().zip(&self.factors) {
            *v *= f;
        }
        let out = to_momentum(&pwf, self.half_width)?;
        out.check_leakage()?;
        Ok(out)
    }
}

/// Multiplies the state by the kick phase on the default grid for its ladder.
pub fn apply_kick(wf: &MomentumWavefunction, op: KickOperator) -> Result<MomentumWavefunction> {
    apply_kick_on(wf, op, SpatialGrid::for_half_width(wf.half_width()))
}

pub fn apply_kick_on(
    wf: &MomentumWavefunction,
    op: KickOperator,
    grid: SpatialGrid,
) -> Result<MomentumWavefunction> {
    Kicker::new(wf.half_width(), grid, op)?.apply(wf)
}

pub fn apply_free(wf: &MomentumWavefunction, spec: FreePhaseSpec) -> MomentumWavefunction {
    let mut out = wf.clone();
    free_in_place(&mut out, &spec.factors(wf.half_width()));
    out
}

fn free_in_place(wf: &mut MomentumWavefunction, factors: &[Complex64]) {
    for (a, f) in wf.amps_mut().iter_mut().zip(factors) {
        *a *= f;
    }
}

/// Evolves `δ_{m,0}` through `config.kicks()` kicks in the configured
/// sequence. With a defaulted basis the ladder is doubled (up to three
/// times) if the state leaks off its edges.
pub fn evolve(config: &SimConfig) -> Result<MomentumWavefunction> {
    let mut cfg = *config;
    let mut grows = 0;
    loop {
        match evolve_fixed(&cfg) {
            Err(e) if cfg.auto_grow() && e.is_leakage() && grows < MAX_GROWS => {
                cfg = cfg.grown();
                grows += 1;
            }
            other => return other,
        }
    }
}

fn evolve_fixed(cfg: &SimConfig) -> Result<MomentumWavefunction> {
    let half_width = cfg.half_width();
    let kicker = Kicker::new(half_width, cfg.grid(), KickOperator::normal(cfg.phi_d()))?;
    let free = cfg.free_phase().factors(half_width);
    let mut wf = MomentumWavefunction::zero_momentum(half_width)?;
    for period in 1..=cfg.kicks() {
        wf = kicker.apply(&wf).map_err(|e| Error::AtPeriod {
            period,
            source: Box::new(e),
        })?;
        if period <= cfg.free_segments() {
            free_in_place(&mut wf, &free);
        }
    }
    Ok(wf)
}

/// Runs the kicks, then one reversed pulse of strength `N·φ_d` with no free
/// flight in between, and returns `|⟨δ_{m,0}|ψ⟩|²`.
pub fn fidelity_protocol(config: &SimConfig) -> Result<f64> {
    if config.kicks() < 1 {
        return Err(Error::invalid("fidelity protocol needs at least one kick"));
    }
    let wf = evolve(config)?;
    let reversal = KickOperator::reversed(config.kicks() as f64 * config.phi_d());
    let grid = if config.grid().supports(wf.half_width()) {
        config.grid()
    } else {
        SpatialGrid::for_half_width(wf.half_width())
    };
    let out = apply_kick_on(&wf, reversal, grid).map_err(|e| Error::AtPeriod {
        period: config.kicks() + 1,
        source: Box::new(e),
    })?;
    Ok(out.amp(0).norm_sqr())
}

/// Kick operator on `m ∈ [-M, M]` with the Bessel band
/// `(-i)^d J_d(φ)`, `d = n - m`, folded modulo `2M + 1`. The folding makes
/// it the exact kick on a `(2M + 1)`-point grid, hence unitary; it differs
/// from the infinite band only through the weight that wraps around.
#[derive(Debug, Clone)]
pub struct KickMatrix {
    pub matrix: DMatrix<Complex64>,
    /// `Σ_{|d| > M} J_d(φ)²`, the part of the band that had to be folded.
    pub wrapped_weight: f64,
}

impl KickMatrix {
    /// Set when the folded tail exceeds [`KICK_MATRIX_WARN`].
    pub fn truncation_warning(&self) -> Option<f64> {
        (self.wrapped_weight > KICK_MATRIX_WARN).then_some(self.wrapped_weight)
    }

    /// `max |U†U - I|` over all entries.
    pub fn unitarity_defect(&self) -> f64 {
        let gram = self.matrix.adjoint() * &self.matrix;
        let n = gram.nrows();
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((gram[(i, j)] - target).norm());
            }
        }
        worst
    }
}

pub fn kick_matrix(phi: f64, half_width: usize) -> Result<KickMatrix> {
    if half_width < 1 {
        return Err(Error::invalid("half-width must be at least 1"));
    }
    if !phi.is_finite() {
        return Err(Error::invalid("kick strength must be finite"));
    }
    let dim = 2 * half_width + 1;
    // Orders beyond |φ| + 60 carry no weight in double precision.
    let reach = (2 * half_width).max(phi.abs().ceil() as usize + 60);
    let j = bessel_j_orders(reach, phi.abs())?;
    // (-i)^d J_d(φ), using J_{-d} = (-1)^d J_d and J_d(-φ) = (-1)^d J_d(φ).
    let coeff = |d: i64| -> Complex64 {
        let a = d.unsigned_abs() as usize;
        let mut v = j[a];
        if d < 0 && a % 2 == 1 {
            v = -v;
        }
        if phi < 0.0 && a % 2 == 1 {
            v = -v;
        }
        let rot = match d.rem_euclid(4) {
            0 => Complex64::new(1.0, 0.0),
            1 => Complex64::new(0.0, -1.0),
            2 => Complex64::new(-1.0, 0.0),
            _ => Complex64::new(0.0, 1.0),
        };
        rot * v
    };
    let mut folded = vec![Complex64::new(0.0, 0.0); dim];
    let reach = reach as i64;
    for d in -reach..=reach {
        folded[d.rem_euclid(dim as i64) as usize] += coeff(d);
    }
    let wrapped_weight = j[half_width + 1..].iter().map(|v| 2.0 * v * v).sum();
    let matrix = DMatrix::from_fn(dim, dim, |r, c| {
        folded[(r as i64 - c as i64).rem_euclid(dim as i64) as usize]
    });
    Ok(KickMatrix {
        matrix,
        wrapped_weight,
    })
}

/// Same contract as [`evolve`], by explicit matrix-vector products.
pub fn evolve_dense(config: &SimConfig) -> Result<MomentumWavefunction> {
    let half_width = config.half_width();
    if half_width > DENSE_HALF_WIDTH_CAP {
        return Err(Error::SizeGuard {
            half_width,
            cap: DENSE_HALF_WIDTH_CAP,
        });
    }
    let kick = kick_matrix(config.phi_d(), half_width)?.matrix;
    let free = DVector::from_vec(config.free_phase().factors(half_width));
    let mut psi = DVector::from_vec(MomentumWavefunction::zero_momentum(half_width)?.into_amps());
    for period in 1..=config.kicks() {
        psi = &kick * psi;
        if period <= config.free_segments() {
            psi.component_mul_assign(&free);
        }
    }
    MomentumWavefunction::new(half_width, psi.iter().copied().collect())
}

/// [`fidelity_protocol`] routed through [`evolve_dense`] and a dense reversal.
pub fn fidelity_dense(config: &SimConfig) -> Result<f64> {
    if config.kicks() < 1 {
        return Err(Error::invalid("fidelity protocol needs at least one kick"));
    }
    let wf = evolve_dense(config)?;
    let reversal = kick_matrix(-(config.kicks() as f64) * config.phi_d(), config.half_width())?;
    let psi = DVector::from_vec(wf.into_amps());
    let out = reversal.matrix.row(config.half_width()) * psi;
    Ok(out[(0, 0)].norm_sqr())
}
