use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("grid of {n_points} points is too small for half-width {half_width} (needs at least {})", 2 * (2 * half_width + 1))]
    GridTooSmall { n_points: usize, half_width: usize },

    #[error("momentum ladder leakage: edge occupancy {edge_occupancy:e} exceeds {bound:e}")]
    Leakage { edge_occupancy: f64, bound: f64 },

    #[error("truncation: norm deficit {deficit:e} exceeds {bound:e}")]
    Truncation { deficit: f64, bound: f64 },

    #[error("bessel_j domain error: order {order}, argument {x}")]
    Domain { order: i64, x: f64 },

    #[error("dense propagation refused: half-width {half_width} above cap {cap}")]
    SizeGuard { half_width: usize, cap: usize },

    #[error("degenerate density: total mass {mass}")]
    Degenerate { mass: f64 },

    #[error("density supports differ")]
    SupportMismatch,

    #[error("profile never falls below the half level {level}; widen the scan range")]
    NoCrossing { level: f64 },

    #[error("epsilon range search exceeded the cap {cap}")]
    CapExceeded { cap: f64 },

    #[error("power-law fit refused: r_squared {r_squared} below {threshold}")]
    FitRefused { r_squared: f64, threshold: f64 },

    #[error("period {period}: {source}")]
    AtPeriod {
        period: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("epsilon {epsilon:e}: {source}")]
    AtEpsilon {
        epsilon: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("kicks {kicks}: {source}")]
    AtKicks {
        kicks: usize,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    /// Innermost error, with period/epsilon/kick tags stripped.
    pub fn root(&self) -> &Error {
        match self {
            Error::AtPeriod { source, .. }
            | Error::AtEpsilon { source, .. }
            | Error::AtKicks { source, .. } => source.root(),
            other => other,
        }
    }

    pub fn is_leakage(&self) -> bool {
        matches!(self.root(), Error::Leakage { .. })
    }
}
