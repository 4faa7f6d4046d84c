//! State representation: amplitudes on the integer momentum ladder, samples on
//! a uniform spatial grid over `[0, 2π)`, and the exact discrete transforms
//! between them,
//!
//! ```text
//! Ψ(X_j) = (2π)^{-1/2} Σ_m ψ(m) e^{i m X_j},   X_j = 2π j / n_points.
//! ```
//!
//! Momentum is `P = m ħ_s`; only the integer index `m` is stored.

use std::cell::RefCell;
use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::propagator::FreePhaseSpec;

/// Largest allowed `|ψ(-M)|² + |ψ(M)|²` before a state counts as leaking off the ladder.
pub const EDGE_LEAKAGE_BOUND: f64 = 1e-14;

/// Extra ladder sites kept beyond the largest Bessel argument `N·φ_d`.
pub const LADDER_MARGIN: usize = 32;

/// Largest `|ε|` accepted by [`SimConfig`].
pub const EPSILON_LIMIT: f64 = 0.5;

#[derive(Debug, Clone, PartialEq)]
pub struct MomentumWavefunction {
    half_width: usize,
    amps: Vec<Complex64>,
}

impl MomentumWavefunction {
    /// Wraps amplitudes for `m = -M..=M` (index `m + M`).
    pub fn new(half_width: usize, amps: Vec<Complex64>) -> Result<Self> {
        if half_width < 1 {
            return Err(Error::invalid("half-width must be at least 1"));
        }
        if amps.len() != 2 * half_width + 1 {
            return Err(Error::invalid(format!(
                "expected {} amplitudes for half-width {half_width}, got {}",
                2 * half_width + 1,
                amps.len()
            )));
        }
        Ok(Self { half_width, amps })
    }

    /// `ψ(m) = δ_{m,0}`: the zero-momentum initial state.
    pub fn zero_momentum(half_width: usize) -> Result<Self> {
        let mut amps = vec![Complex64::new(0.0, 0.0); 2 * half_width + 1];
        if let Some(a) = amps.get_mut(half_width) {
            *a = Complex64::new(1.0, 0.0);
        }
        Self::new(half_width, amps)
    }

    pub fn half_width(&self) -> usize {
        self.half_width
    }

    pub fn amps(&self) -> &[Complex64] {
        &self.amps
    }

    pub(crate) fn amps_mut(&mut self) -> &mut [Complex64] {
        &mut self.amps
    }

    pub fn into_amps(self) -> Vec<Complex64> {
        self.amps
    }

    /// Ladder orders `-M..=M` in storage order.
    pub fn orders(&self) -> impl Iterator<Item = i64> {
        let m = self.half_width as i64;
        -m..=m
    }

    /// Amplitude at order `m`; zero outside the ladder.
    pub fn amp(&self, m: i64) -> Complex64 {
        let idx = m + self.half_width as i64;
        if idx < 0 || idx as usize >= self.amps.len() {
            Complex64::new(0.0, 0.0)
        } else {
            self.amps[idx as usize]
        }
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn edge_occupancy(&self) -> f64 {
        self.amps[0].norm_sqr() + self.amps[self.amps.len() - 1].norm_sqr()
    }

    pub fn check_leakage(&self) -> Result<()> {
        let edge_occupancy = self.edge_occupancy();
        if edge_occupancy < EDGE_LEAKAGE_BOUND {
            Ok(())
        } else {
            Err(Error::Leakage {
                edge_occupancy,
                bound: EDGE_LEAKAGE_BOUND,
            })
        }
    }

    /// `⟨self|other⟩` over the common part of both ladders.
    pub fn inner(&self, other: &Self) -> Complex64 {
        let m = self.half_width.min(other.half_width) as i64;
        (-m..=m).map(|k| self.amp(k).conj() * other.amp(k)).sum()
    }

    /// Re-embeds on a ladder of a different half-width, zero-padding or cutting.
    pub fn resized(&self, half_width: usize) -> Result<Self> {
        let m = half_width as i64;
        let amps = (-m..=m).map(|k| self.amp(k)).collect();
        Self::new(half_width, amps)
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        let m = self.half_width.max(other.half_width) as i64;
        (-m..=m)
            .map(|k| (self.amp(k) - other.amp(k)).norm())
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SpatialGrid {
    n_points: usize,
}

impl SpatialGrid {
    pub fn new(n_points: usize) -> Result<Self> {
        if n_points < 2 {
            return Err(Error::invalid("a spatial grid needs at least 2 points"));
        }
        Ok(Self { n_points })
    }

    /// Smallest power of two with at least `4(M + 1)` points.
    pub fn for_half_width(half_width: usize) -> Self {
        Self {
            n_points: (4 * (half_width + 1)).next_power_of_two(),
        }
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn spacing(&self) -> f64 {
        2.0 * PI / self.n_points as f64
    }

    pub fn node(&self, j: usize) -> f64 {
        2.0 * PI * j as f64 / self.n_points as f64
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n_points).map(|j| self.node(j))
    }

    /// Nyquist margin `n_points ≥ 2(2M + 1)`.
    pub fn supports(&self, half_width: usize) -> bool {
        self.n_points >= 2 * (2 * half_width + 1)
    }

    pub(crate) fn require(&self, half_width: usize) -> Result<()> {
        if self.supports(half_width) {
            Ok(())
        } else {
            Err(Error::GridTooSmall {
                n_points: self.n_points,
                half_width,
            })
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PositionWavefunction {
    grid: SpatialGrid,
    values: Vec<Complex64>,
}

impl PositionWavefunction {
    pub fn new(grid: SpatialGrid, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.n_points() {
            return Err(Error::invalid(format!(
                "expected {} samples, got {}",
                grid.n_points(),
                values.len()
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn grid(&self) -> SpatialGrid {
        self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub(crate) fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    /// `(2π/n)·Σ_j |Ψ(X_j)|²`.
    pub fn norm_sqr(&self) -> f64 {
        self.grid.spacing() * self.values.iter().map(|v| v.norm_sqr()).sum::<f64>()
    }
}

pub(crate) struct Plans {
    pub(crate) forward: Arc<dyn Fft<f64>>,
    pub(crate) inverse: Arc<dyn Fft<f64>>,
}

type PlanCache = (FftPlanner<f64>, HashMap<usize, Arc<Plans>>);

thread_local! {
    static PLANS: RefCell<PlanCache> =
        RefCell::new((FftPlanner::new(), HashMap::new()));
}

pub(crate) fn plans(n: usize) -> Arc<Plans> {
    PLANS.with(|cell| {
        let mut guard = cell.borrow_mut();
        let (planner, cache) = &mut *guard;
        if let Some(p) = cache.get(&n) {
            return Arc::clone(p);
        }
        let p = Arc::new(Plans {
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
        });
        cache.insert(n, Arc::clone(&p));
        p
    })
}

/// Synthesizes `Ψ(X_j)` from ladder amplitudes.
pub fn to_position(wf: &MomentumWavefunction, grid: SpatialGrid) -> Result<PositionWavefunction> {
    grid.require(wf.half_width())?;
    let n = grid.n_points();
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    scatter(wf, &mut buf);
    plans(n).inverse.process(&mut buf);
    let scale = 1.0 / (2.0 * PI).sqrt();
    for v in &mut buf {
        *v *= scale;
    }
    PositionWavefunction::new(grid, buf)
}

/// Projects grid samples onto the ladder `-M..=M`.
pub fn to_momentum(pwf: &PositionWavefunction, half_width: usize) -> Result<MomentumWavefunction> {
    let grid = pwf.grid();
    grid.require(half_width)?;
    let n = grid.n_points();
    let mut buf = pwf.values().to_vec();
    plans(n).forward.process(&mut buf);
    let scale = (2.0 * PI).sqrt() / n as f64;
    let m = half_width as i64;
    let amps = (-m..=m)
        .map(|k| buf[k.rem_euclid(n as i64) as usize] * scale)
        .collect();
    MomentumWavefunction::new(half_width, amps)
}

fn scatter(wf: &MomentumWavefunction, buf: &mut [Complex64]) {
    let n = buf.len() as i64;
    for (k, a) in wf.orders().zip(wf.amps()) {
        buf[k.rem_euclid(n) as usize] = *a;
    }
}

/// Which pulse sequence a kick count `N` denotes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Sequence {
    /// `N` periods, each a kick followed by one free flight; measured after
    /// the last free flight.
    #[default]
    Periods,
    /// `N` kicks separated by `N - 1` free flights; measured right after the
    /// last kick (equivalently, just before an `(N+1)`-th one).
    PulseTrain,
}

impl Sequence {
    /// Number of free flights in a run of `kicks` kicks.
    pub fn free_segments(self, kicks: usize) -> usize {
        match self {
            Sequence::Periods => kicks,
            Sequence::PulseTrain => kicks.saturating_sub(1),
        }
    }
}

/// Run parameters for one simulation. `T_B = 1`, so `epsilon` is the
/// dimensionless deviation `ε/T_B` from the Talbot time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SimConfig {
    pub(crate) phi_d: f64,
    pub(crate) epsilon: f64,
    pub(crate) l: u32,
    pub(crate) kicks: usize,
    pub(crate) half_width: usize,
    pub(crate) n_points: usize,
    pub(crate) sequence: Sequence,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub(crate) hbar_s: Option<f64>,
    pub(crate) auto_grow: bool,
}

impl SimConfig {
    pub fn new(kicks: usize, phi_d: f64, epsilon: f64) -> Result<Self> {
        if !(phi_d.is_finite() && phi_d > 0.0) {
            return Err(Error::invalid(format!("phi_d must be positive, got {phi_d}")));
        }
        if !(epsilon.is_finite() && epsilon.abs() < EPSILON_LIMIT) {
            return Err(Error::invalid(format!(
                "epsilon must satisfy |epsilon| < {EPSILON_LIMIT}, got {epsilon}"
            )));
        }
        let half_width = Self::default_half_width(kicks, phi_d);
        Ok(Self {
            phi_d,
            epsilon,
            l: 1,
            kicks,
            half_width,
            n_points: SpatialGrid::for_half_width(half_width).n_points(),
            sequence: Sequence::Periods,
            hbar_s: None,
            auto_grow: true,
        })
    }

    /// `ceil(N·φ_d) + 32`.
    pub fn default_half_width(kicks: usize, phi_d: f64) -> usize {
        (kicks as f64 * phi_d).ceil() as usize + LADDER_MARGIN
    }

    pub fn with_l(mut self, l: u32) -> Result<Self> {
        if l == 0 {
            return Err(Error::invalid("resonance order l must be positive"));
        }
        self.l = l;
        Ok(self)
    }

    /// Fixes the ladder half-width (and disables auto-grow). The grid grows
    /// to the default for this half-width if it no longer fits.
    pub fn with_half_width(mut self, half_width: usize) -> Result<Self> {
        if half_width < 1 {
            return Err(Error::invalid("half-width must be at least 1"));
        }
        self.half_width = half_width;
        self.auto_grow = false;
        let grid = SpatialGrid { n_points: self.n_points };
        if !grid.supports(half_width) {
            self.n_points = SpatialGrid::for_half_width(half_width).n_points();
        }
        Ok(self)
    }

    pub fn with_n_points(mut self, n_points: usize) -> Result<Self> {
        let grid = SpatialGrid::new(n_points)?;
        grid.require(self.half_width)?;
        self.n_points = n_points;
        Ok(self)
    }

    pub fn with_sequence(mut self, sequence: Sequence) -> Self {
        self.sequence = sequence;
        self
    }

    /// Replaces the resonant-relative free phase by a general `ħ_s`.
    pub fn with_general_hbar(mut self, hbar_s: f64) -> Result<Self> {
        if !(hbar_s.is_finite() && hbar_s > 0.0) {
            return Err(Error::invalid(format!("hbar_s must be positive, got {hbar_s}")));
        }
        self.hbar_s = Some(hbar_s);
        Ok(self)
    }

    pub fn with_kicks(self, kicks: usize) -> Result<Self> {
        let mut next = Self::new(kicks, self.phi_d, self.epsilon)?.with_l(self.l)?;
        next.sequence = self.sequence;
        next.hbar_s = self.hbar_s;
        Ok(next)
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Result<Self> {
        if !(epsilon.is_finite() && epsilon.abs() < EPSILON_LIMIT) {
            return Err(Error::invalid(format!(
                "epsilon must satisfy |epsilon| < {EPSILON_LIMIT}, got {epsilon}"
            )));
        }
        self.epsilon = epsilon;
        Ok(self)
    }

    pub(crate) fn grown(&self) -> Self {
        let half_width = 2 * self.half_width;
        Self {
            half_width,
            n_points: self
                .n_points
                .max(SpatialGrid::for_half_width(half_width).n_points()),
            ..*self
        }
    }

    pub fn phi_d(&self) -> f64 {
        self.phi_d
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn l(&self) -> u32 {
        self.l
    }

    pub fn kicks(&self) -> usize {
        self.kicks
    }

    pub fn half_width(&self) -> usize {
        self.half_width
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn sequence(&self) -> Sequence {
        self.sequence
    }

    pub fn auto_grow(&self) -> bool {
        self.auto_grow
    }

    pub fn grid(&self) -> SpatialGrid {
        SpatialGrid { n_points: self.n_points }
    }

    pub fn free_segments(&self) -> usize {
        self.sequence.free_segments(self.kicks)
    }

    pub fn free_phase(&self) -> FreePhaseSpec {
        match self.hbar_s {
            Some(hbar_s) => FreePhaseSpec::General { hbar_s },
            None => FreePhaseSpec::ResonantRelative {
                l: self.l,
                epsilon: self.epsilon,
            },
        }
    }

    /// Scaled Planck constant in force: `4πl(1 + ε)` unless overridden.
    pub fn hbar_s(&self) -> f64 {
        self.hbar_s
            .unwrap_or(4.0 * PI * self.l as f64 * (1.0 + self.epsilon))
    }
}
