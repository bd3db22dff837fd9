use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("box of edge {edge} holds no interior point at mesh width {mesh}")]
    BoxTooSmall { edge: f64, mesh: f64 },

    #[error("operation requires a compactly supported perturbation, got a periodic background")]
    NotAPerturbation,

    #[error("non-finite potential value {value} at grid point {index}")]
    NonFinitePotential { index: usize, value: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid security distance D({edge}) = {value}: must be finite, nonnegative and at most {max}")]
    InvalidSecurityDistance { edge: f64, value: f64, max: f64 },

    #[error("base point {0:?} is not in the periodicity cell")]
    BasePointOutsideCell(Vec<f64>),

    #[error("factorization breakdown at pivot {pivot_index} (energy {energy})")]
    FactorizationBreakdown { pivot_index: usize, energy: f64 },

    #[error("non-finite energy {0}")]
    NonFiniteEnergy(f64),

    #[error("matrix dimension {dim} exceeds the dense oracle cap {cap}")]
    OracleCapExceeded { dim: usize, cap: usize },

    #[error("operators live on different grids")]
    GridMismatch,

    #[error("interval [{lo}, {hi}] is outside the probed energy range [{probe_lo}, {probe_hi}]")]
    OutsideProbedRange { lo: f64, hi: f64, probe_lo: f64, probe_hi: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("shift {0:?} is not an allowed shift for this box")]
    ShiftNotAllowed(Vec<f64>),

    #[error("non-finite path integral")]
    NonFinitePathIntegral,
}
