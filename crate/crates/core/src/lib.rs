//! Quantum kicked rotor near the Talbot-time resonance, in position space.
//!
//! States live on the integer momentum ladder `m = -M..=M`; kicks are applied
//! on a uniform spatial grid, free flights on the ladder.

pub mod analytics;
pub mod error;
pub mod observables;
pub mod propagator;
pub mod scanner;
pub mod wavepacket;

pub use error::{Error, Result};
pub use num_complex::Complex64;
pub use observables::{
    fwhm, fwhm_at, l1_distance, mean_energy, momentum_density, position_density, sigma_x, Density,
    Profile, Support,
};
pub use propagator::{
    apply_free, apply_kick, evolve, evolve_dense, fidelity_dense, fidelity_protocol, kick_matrix,
    FreePhaseSpec, KickOperator, KickSign,
};
pub use scanner::{
    auto_range, compare_modes, fit_power_law, scan_epsilon, width_scaling, EpsilonScan,
    ModeComparison, PowerLawFit, ScanMode, ScanParams, WidthScaling,
};
pub use wavepacket::{
    to_momentum, to_position, MomentumWavefunction, PositionWavefunction, Sequence, SimConfig,
    SpatialGrid,
};
