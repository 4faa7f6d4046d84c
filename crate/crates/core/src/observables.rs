//! Densities and the scalar observables built on them: σ_X on the circle,
//! mean energy, L1 distances and FWHM widths of resonance profiles.
//!
//! Position densities are samples at the grid nodes `X_j = 2πj/n`.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::wavepacket::{plans, MomentumWavefunction, PositionWavefunction, SpatialGrid};

/// Smallest total mass [`sigma_x`] accepts.
pub const MIN_MASS: f64 = 1.0 - 1e-6;

const NEGATIVE_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Support {
    Position { grid: SpatialGrid },
    Momentum { half_width: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Density {
    support: Support,
    values: Vec<f64>,
}

impl Density {
    pub fn position(grid: SpatialGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n_points() {
            return Err(Error::invalid(format!(
                "expected {} density samples, got {}",
                grid.n_points(),
                values.len()
            )));
        }
        Self::checked(Support::Position { grid }, values)
    }

    pub fn momentum(half_width: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != 2 * half_width + 1 {
            return Err(Error::invalid(format!(
                "expected {} probabilities, got {}",
                2 * half_width + 1,
                values.len()
            )));
        }
        Self::checked(Support::Momentum { half_width }, values)
    }

    fn checked(support: Support, values: Vec<f64>) -> Result<Self> {
        if let Some(bad) = values.iter().find(|v| !v.is_finite() || **v < -NEGATIVE_SLACK) {
            return Err(Error::invalid(format!("density value {bad} is negative or not finite")));
        }
        Ok(Self { support, values })
    }

    pub fn support(&self) -> Support {
        self.support
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Integral (position) or sum (momentum).
    pub fn total(&self) -> f64 {
        let sum: f64 = self.values.iter().sum();
        match self.support {
            Support::Position { grid } => grid.spacing() * sum,
            Support::Momentum { .. } => sum,
        }
    }

    fn weight(&self) -> f64 {
        match self.support {
            Support::Position { grid } => grid.spacing(),
            Support::Momentum { .. } => 1.0,
        }
    }
}

/// `|Ψ(X_j)|²`
pub fn position_density(pwf: &PositionWavefunction) -> Density {
    Density {
        support: Support::Position { grid: pwf.grid() },
        values: pwf.values().iter().map(|v| v.norm_sqr()).collect(),
    }
}

/// `|ψ(m)|²`
pub fn momentum_density(wf: &MomentumWavefunction) -> Density {
    Density {
        support: Support::Momentum {
            half_width: wf.half_width(),
        },
        values: wf.amps().iter().map(|a| a.norm_sqr()).collect(),
    }
}

/// Standard deviation of a position density on the circle.
///
/// The density is rotated so its largest sample sits at `X = π` (ties go to
/// the lowest index). The moments are those of the trigonometric
/// interpolant of the samples over `[0, 2π)`, taken mode by mode with
///
/// ```text
/// ∫ X e^{ikX} dX = 2π/(ik),   ∫ X² e^{ikX} dX = 4π²/(ik) + 4π/k²   (k ≠ 0).
/// ```
///
/// Densities of ladder states on a supporting grid are band-limited, so for
/// them this is exact up to rounding; the uniform density gives `π/√3`.
pub fn sigma_x(d: &Density) -> Result<f64> {
    let grid = match d.support {
        Support::Position { grid } => grid,
        Support::Momentum { .. } => {
            return Err(Error::invalid("sigma_x needs a position density"));
        }
    };
    let mass = d.total();
    if !(mass >= MIN_MASS) {
        return Err(Error::Degenerate { mass });
    }
    let n = grid.n_points();
    let peak = d
        .values
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (i, &v)| if v > best.1 { (i, v) } else { best })
        .0;
    let shift = (n / 2 + n - peak) % n;
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    for (i, &v) in d.values.iter().enumerate() {
        buf[(i + shift) % n] = Complex64::new(v, 0.0);
    }
    plans(n).forward.process(&mut buf);
    // c_k = (1/n) Σ_j ρ_j e^{-ikX_j}
    let c: Vec<Complex64> = buf.iter().map(|v| v / n as f64).collect();

    let pi = std::f64::consts::PI;
    let total = 2.0 * pi * c[0].re;
    let mut first = 2.0 * pi * pi * c[0].re;
    let mut second = 8.0 * pi.powi(3) / 3.0 * c[0].re;
    for (k, &ck) in c.iter().enumerate().take((n - 1) / 2 + 1).skip(1) {
        // Modes ±k together; ρ is real so c_{-k} = conj(c_k).
        let kf = k as f64;
        first += 4.0 * pi * ck.im / kf;
        second += 8.0 * pi * pi * ck.im / kf + 8.0 * pi * ck.re / (kf * kf);
    }
    if n % 2 == 0 {
        // Nyquist mode, split evenly between ±n/2.
        let kf = (n / 2) as f64;
        second += 4.0 * pi * c[n / 2].re / (kf * kf);
    }
    let mean = first / total;
    let variance = second / total - mean * mean;
    Ok(variance.max(0.0).sqrt())
}

/// `E = (ħ_s²/2) Σ_m m² |ψ(m)|²`
pub fn mean_energy(wf: &MomentumWavefunction, hbar_s: f64) -> f64 {
    let p2: f64 = wf
        .orders()
        .zip(wf.amps())
        .map(|(m, a)| (m * m) as f64 * a.norm_sqr())
        .sum();
    0.5 * hbar_s * hbar_s * p2
}

pub fn l1_distance(a: &Density, b: &Density) -> Result<f64> {
    if a.support != b.support {
        return Err(Error::SupportMismatch);
    }
    Ok(a.weight()
        * a.values
            .iter()
            .zip(&b.values)
            .map(|(x, y)| (x - y).abs())
            .sum::<f64>())
}

/// Ordinates sampled on a strictly increasing abscissa, e.g. σ_X(ε).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Profile {
    abscissa: Vec<f64>,
    ordinate: Vec<f64>,
}

impl Profile {
    pub const MIN_LEN: usize = 5;

    pub fn new(abscissa: Vec<f64>, ordinate: Vec<f64>) -> Result<Self> {
        if abscissa.len() != ordinate.len() {
            return Err(Error::invalid("profile abscissa and ordinate differ in length"));
        }
        if abscissa.len() < Self::MIN_LEN {
            return Err(Error::invalid(format!(
                "profile needs at least {} samples",
                Self::MIN_LEN
            )));
        }
        if abscissa.iter().chain(&ordinate).any(|v| !v.is_finite()) {
            return Err(Error::invalid("profile values must be finite"));
        }
        if abscissa.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("profile abscissa must be strictly increasing"));
        }
        Ok(Self { abscissa, ordinate })
    }

    pub fn abscissa(&self) -> &[f64] {
        &self.abscissa
    }

    pub fn ordinate(&self) -> &[f64] {
        &self.ordinate
    }

    fn peak_index(&self) -> usize {
        self.ordinate
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |best, (i, &v)| if v > best.1 { (i, v) } else { best })
            .0
    }

    pub fn peak(&self) -> f64 {
        self.ordinate[self.peak_index()]
    }

    pub fn min_edge(&self) -> f64 {
        self.ordinate[0].min(self.ordinate[self.ordinate.len() - 1])
    }

    /// `(peak + min(edge values)) / 2`
    pub fn half_level(&self) -> f64 {
        0.5 * (self.peak() + self.min_edge())
    }
}

/// Full width at the half level `(peak + min edge)/2`.
pub fn fwhm(p: &Profile) -> Result<f64> {
    let level = p.half_level();
    let last = p.ordinate.len() - 1;
    if !(p.ordinate[0] < level && p.ordinate[last] < level) {
        return Err(Error::NoCrossing { level });
    }
    fwhm_at(p, level)
}

/// Width between the first crossings of `level` on either side of the peak,
/// located by linear interpolation between the bracketing samples.
pub fn fwhm_at(p: &Profile, level: f64) -> Result<f64> {
    let peak = p.peak_index();
    if !(p.ordinate[peak] > level) {
        return Err(Error::NoCrossing { level });
    }
    let cross = |inner: usize, outer: usize| {
        let (x0, y0) = (p.abscissa[inner], p.ordinate[inner]);
        let (x1, y1) = (p.abscissa[outer], p.ordinate[outer]);
        x0 + (level - y0) * (x1 - x0) / (y1 - y0)
    };
    let right = (peak + 1..p.ordinate.len())
        .find(|&i| p.ordinate[i] < level)
        .map(|i| cross(i - 1, i));
    let left = (0..peak)
        .rev()
        .find(|&i| p.ordinate[i] < level)
        .map(|i| cross(i + 1, i));
    match (left, right) {
        (Some(l), Some(r)) => Ok(r - l),
        _ => Err(Error::NoCrossing { level }),
    }
}
