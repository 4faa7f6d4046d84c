//! Closed-form machinery at and near the Talbot time.

pub mod bessel;
mod resonance;

pub use bessel::{bessel_j, bessel_j_ladder, bessel_j_orders};
pub use resonance::{
    correction_term, perturbative_density, resonant_state, CorrectionField, PerturbativeDensity,
    RESONANT_NORM_TOLERANCE,
};
