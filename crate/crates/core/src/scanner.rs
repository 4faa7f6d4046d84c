//! ε sweeps around the Talbot time, resonance-width extraction and
//! power-law fits of width against kick number.
//!
//! Widths follow the convention of the profiles they come from:
//!
//! * position mode: σ_X(ε) drops from the uniform value `π/√3` at ε = 0 to a
//!   focal minimum; the width is the FWHM at the level halfway between the
//!   two, with the scan range ending at the focal minimum.
//! * fidelity mode: F(ε) drops from 1; the width is the full width at F = 1/2.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::observables::{fwhm, fwhm_at, position_density, sigma_x, Profile};
use crate::propagator::{evolve, fidelity_protocol};
use crate::wavepacket::{to_position, Sequence, SimConfig, SpatialGrid};

/// Upper bound for [`auto_range`].
pub const EPSILON_CAP: f64 = 0.25;

/// Default number of ε samples per scan.
pub const DEFAULT_POINTS: usize = 65;

/// Smallest scan length, so that ε = 0 is one of an odd number of samples.
pub const MIN_POINTS: usize = 33;

/// Fits with a coefficient of determination below this are refused.
pub const MIN_R_SQUARED: f64 = 0.9;

/// Fixed absolute half level for fidelity profiles.
pub const FIDELITY_HALF_LEVEL: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScanMode {
    Position,
    Fidelity,
}

impl ScanMode {
    pub fn name(self) -> &'static str {
        match self {
            ScanMode::Position => "position",
            ScanMode::Fidelity => "fidelity",
        }
    }
}

/// Parameters shared by every simulation of a scan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScanParams {
    pub phi_d: f64,
    pub l: u32,
    pub sequence: Sequence,
    pub points: usize,
}

impl Default for ScanParams {
    fn default() -> Self {
        Self {
            phi_d: 0.485,
            l: 1,
            sequence: Sequence::PulseTrain,
            points: DEFAULT_POINTS,
        }
    }
}

impl ScanParams {
    fn config(&self, kicks: usize, epsilon: f64) -> Result<SimConfig> {
        Ok(SimConfig::new(kicks, self.phi_d, epsilon)?
            .with_l(self.l)?
            .with_sequence(self.sequence))
    }

    /// One profile sample: σ_X of the final position density, or the
    /// fidelity after the reversal pulse.
    pub fn evaluate(&self, kicks: usize, mode: ScanMode, epsilon: f64) -> Result<f64> {
        let tag = |e| Error::AtEpsilon {
            epsilon,
            source: Box::new(e),
        };
        let cfg = self.config(kicks, epsilon).map_err(tag)?;
        match mode {
            ScanMode::Position => {
                let wf = evolve(&cfg).map_err(tag)?;
                let grid = if cfg.grid().supports(wf.half_width()) {
                    cfg.grid()
                } else {
                    SpatialGrid::for_half_width(wf.half_width())
                };
                let pwf = to_position(&wf, grid).map_err(tag)?;
                sigma_x(&position_density(&pwf)).map_err(tag)
            }
            ScanMode::Fidelity => fidelity_protocol(&cfg).map_err(tag),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpsilonScan {
    pub kicks: usize,
    pub mode: ScanMode,
    pub epsilons: Vec<f64>,
    pub values: Vec<f64>,
}

impl EpsilonScan {
    pub fn profile(&self) -> Result<Profile> {
        Profile::new(self.epsilons.clone(), self.values.clone())
    }

    /// Value at ε = 0 (the centre sample).
    pub fn center(&self) -> f64 {
        self.values[self.values.len() / 2]
    }

    /// Resonance width under the mode's half-level rule.
    pub fn width(&self) -> Result<f64> {
        let profile = self.profile()?;
        match self.mode {
            ScanMode::Position => fwhm(&profile),
            ScanMode::Fidelity if profile.min_edge() < FIDELITY_HALF_LEVEL => {
                fwhm_at(&profile, FIDELITY_HALF_LEVEL)
            }
            ScanMode::Fidelity => fwhm(&profile),
        }
    }
}

/// Uniform, symmetric grid of `points` values on `[-ε_max, ε_max]` with an
/// exact zero in the middle.
pub fn epsilon_grid(epsilon_max: f64, points: usize) -> Result<Vec<f64>> {
    if points < MIN_POINTS || points.is_multiple_of(2) {
        return Err(Error::invalid(format!(
            "scan needs an odd number of points, at least {MIN_POINTS}; got {points}"
        )));
    }
    if !(epsilon_max.is_finite() && epsilon_max > 0.0) {
        return Err(Error::invalid(format!("epsilon_max must be positive, got {epsilon_max}")));
    }
    let half = (points / 2) as i64;
    Ok((-half..=half)
        .map(|i| epsilon_max * i as f64 / half as f64)
        .collect())
}

/// One simulation per ε on a symmetric grid. Samples are computed in
/// parallel and stored by index, so the output does not depend on the
/// thread count.
pub fn scan_epsilon(
    kicks: usize,
    params: &ScanParams,
    mode: ScanMode,
    epsilon_max: f64,
) -> Result<EpsilonScan> {
    if kicks < 1 {
        return Err(Error::invalid("a scan needs at least one kick"));
    }
    let epsilons = epsilon_grid(epsilon_max, params.points)?;
    let values = epsilons
        .par_iter()
        .map(|&e| params.evaluate(kicks, mode, e))
        .collect::<Result<Vec<_>>>()?;
    Ok(EpsilonScan {
        kicks,
        mode,
        epsilons,
        values,
    })
}

/// Doubles `start` until `done(ε)` holds; fails past `cap`.
pub fn double_until(
    start: f64,
    cap: f64,
    mut done: impl FnMut(f64) -> Result<bool>,
) -> Result<f64> {
    if !(start.is_finite() && start > 0.0) {
        return Err(Error::invalid(format!("start must be positive, got {start}")));
    }
    let mut eps = start;
    loop {
        if eps > cap {
            return Err(Error::CapExceeded { cap });
        }
        if done(eps)? {
            return Ok(eps);
        }
        eps *= 2.0;
    }
}

/// Scan half-range for which the width can be read off.
///
/// Starts at `0.1/N²` and doubles. Fidelity mode stops once `F(ε_max)` is
/// below one half. Position mode stops once σ_X has turned back up (the
/// focal minimum is bracketed), then scans that range and returns the
/// abscissa of the first local minimum, so the finished scan ends at the
/// focus.
pub fn auto_range(kicks: usize, params: &ScanParams, mode: ScanMode) -> Result<f64> {
    if kicks < 1 {
        return Err(Error::invalid("auto_range needs at least one kick"));
    }
    let start = 0.1 / (kicks * kicks) as f64;
    let tag = |e| Error::AtKicks {
        kicks,
        source: Box::new(e),
    };
    match mode {
        ScanMode::Fidelity => double_until(start, EPSILON_CAP, |e| {
            Ok(params.evaluate(kicks, mode, e)? < FIDELITY_HALF_LEVEL)
        })
        .map_err(tag),
        ScanMode::Position => {
            let mut previous = PI / 3f64.sqrt();
            let bracket = double_until(start, EPSILON_CAP, |e| {
                let value = params.evaluate(kicks, mode, e)?;
                let turned = value > previous;
                previous = value;
                Ok(turned)
            })
            .map_err(tag)?;
            let scan = scan_epsilon(kicks, params, mode, bracket).map_err(tag)?;
            let mid = scan.values.len() / 2;
            let first_min = (mid + 1..scan.values.len() - 1)
                .find(|&i| scan.values[i + 1] >= scan.values[i])
                .unwrap_or(scan.values.len() - 1);
            Ok(scan.epsilons[first_min])
        }
    }
}

/// Auto-ranged scan and its width.
pub fn resonance_width(kicks: usize, params: &ScanParams, mode: ScanMode) -> Result<(EpsilonScan, f64)> {
    let range = auto_range(kicks, params, mode)?;
    let scan = scan_epsilon(kicks, params, mode, range)?;
    let width = scan.width().map_err(|e| Error::AtKicks {
        kicks,
        source: Box::new(e),
    })?;
    Ok((scan, width))
}

/// Least-squares line through `(ln N, ln width)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PowerLawFit {
    /// Slope; widths scale as `N^gamma`.
    pub gamma: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

impl PowerLawFit {
    pub fn predict(&self, n: f64) -> f64 {
        (self.intercept + self.gamma * n.ln()).exp()
    }
}

pub fn fit_power_law(ns: &[f64], widths: &[f64]) -> Result<PowerLawFit> {
    if ns.len() != widths.len() || ns.len() < 2 {
        return Err(Error::invalid("power-law fit needs at least two paired samples"));
    }
    if ns.iter().chain(widths).any(|v| !(v.is_finite() && *v > 0.0)) {
        return Err(Error::invalid("power-law fit needs positive finite samples"));
    }
    let xs: Vec<f64> = ns.iter().map(|n| n.ln()).collect();
    let ys: Vec<f64> = widths.iter().map(|w| w.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::invalid("power-law fit needs at least two distinct N"));
    }
    let gamma = sxy / sxx;
    let intercept = my - gamma * mx;
    let ss_res: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - intercept - gamma * x).powi(2))
        .sum();
    let r_squared = if syy == 0.0 { 1.0 } else { 1.0 - ss_res / syy };
    Ok(PowerLawFit {
        gamma,
        intercept,
        r_squared,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WidthScaling {
    pub mode: ScanMode,
    pub kicks: Vec<usize>,
    pub widths: Vec<f64>,
    pub fit: PowerLawFit,
}

impl WidthScaling {
    /// Fits measured widths, refusing poor fits.
    pub fn from_widths(mode: ScanMode, kicks: Vec<usize>, widths: Vec<f64>) -> Result<Self> {
        let ns: Vec<f64> = kicks.iter().map(|&n| n as f64).collect();
        let fit = fit_power_law(&ns, &widths)?;
        if !(fit.r_squared >= MIN_R_SQUARED) {
            return Err(Error::FitRefused {
                r_squared: fit.r_squared,
                threshold: MIN_R_SQUARED,
            });
        }
        Ok(Self {
            mode,
            kicks,
            widths,
            fit,
        })
    }

    pub fn strictly_decreasing(&self) -> bool {
        self.widths.windows(2).all(|w| w[1] < w[0])
    }
}

fn check_kick_list(kicks: &[usize]) -> Result<()> {
    if kicks.len() < 4 {
        return Err(Error::invalid("width scaling needs at least four kick numbers"));
    }
    if kicks.iter().any(|&n| n < 2) {
        return Err(Error::invalid("width scaling needs N >= 2"));
    }
    Ok(())
}

pub fn width_scaling(kicks: &[usize], params: &ScanParams, mode: ScanMode) -> Result<WidthScaling> {
    check_kick_list(kicks)?;
    let widths = kicks
        .par_iter()
        .map(|&n| resonance_width(n, params, mode).map(|(_, w)| w))
        .collect::<Result<Vec<_>>>()?;
    WidthScaling::from_widths(mode, kicks.to_vec(), widths)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ComparisonRow {
    pub kicks: usize,
    pub position_width: f64,
    pub fidelity_width: f64,
    /// position / fidelity
    pub ratio: f64,
    /// Fitted fidelity width for `N/2` kicks: the fidelity run that spends
    /// the same total pulse budget (N/2 forward plus N/2 reversed).
    pub fidelity_width_equal_budget: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModeComparison {
    pub position: WidthScaling,
    pub fidelity: WidthScaling,
    pub rows: Vec<ComparisonRow>,
    /// First listed N at which the position width exceeds the fidelity width.
    pub crossover: Option<usize>,
    /// N where the two fitted power laws intersect.
    pub crossover_fit: Option<f64>,
}

pub fn compare_modes(kicks: &[usize], params: &ScanParams) -> Result<ModeComparison> {
    let position = width_scaling(kicks, params, ScanMode::Position)?;
    let fidelity = width_scaling(kicks, params, ScanMode::Fidelity)?;
    Ok(ModeComparison::from_scalings(position, fidelity))
}

impl ModeComparison {
    pub fn from_scalings(position: WidthScaling, fidelity: WidthScaling) -> Self {
        let rows: Vec<ComparisonRow> = position
            .kicks
            .iter()
            .zip(&position.widths)
            .zip(&fidelity.widths)
            .map(|((&kicks, &p), &f)| ComparisonRow {
                kicks,
                position_width: p,
                fidelity_width: f,
                ratio: p / f,
                fidelity_width_equal_budget: fidelity.fit.predict(kicks as f64 / 2.0),
            })
            .collect();
        let crossover = rows
            .iter()
            .find(|r| r.position_width > r.fidelity_width)
            .map(|r| r.kicks);
        let dg = position.fit.gamma - fidelity.fit.gamma;
        let crossover_fit = (dg != 0.0)
            .then(|| ((fidelity.fit.intercept - position.fit.intercept) / dg).exp())
            .filter(|n| n.is_finite());
        Self {
            position,
            fidelity,
            rows,
            crossover,
            crossover_fit,
        }
    }
}
