use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid geometry: {0}")]
    Geometry(String),

    #[error("coincident sites at ({0:.6}, {1:.6}) mm")]
    CoincidentSites(f64, f64),

    #[error("distance r = {r:.6} mm does not exceed the finite-size offset r_m = {r_m:.6} mm")]
    InsideOffset { r: f64, r_m: f64 },

    #[error("invalid coupling model: {0}")]
    CouplingModel(String),

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("fit did not converge after {0} iterations")]
    FitNotConverged(usize),

    #[error("coupling map grid lies entirely inside the exclusion disk")]
    EmptyGrid,

    #[error("invalid circuit: {0}")]
    Circuit(String),

    #[error("capacitance matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("no interior minimum of the mode gap in the sweep range [{lo}, {hi}] nH")]
    NoInteriorMinimum { lo: f64, hi: f64 },

    #[error("invalid spin system: {0}")]
    SpinSystem(String),

    #[error("Hilbert space dimension {dim} exceeds the cap {cap}")]
    DimensionOverflow { dim: usize, cap: usize },

    #[error("operator is not Hermitian (max deviation {0:.3e})")]
    NotHermitian(f64),

    #[error("state dimension {got} does not match basis dimension {expected}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("eigensolver did not converge after {0} Krylov steps")]
    NotConverged(usize),

    #[error("invalid schedule: {0}")]
    Schedule(String),

    #[error("density matrix invariant violated at t = {t:.6}: {what}")]
    InvariantViolation { t: f64, what: String },

    #[error("config error in `{field}`: {reason}")]
    Config { field: String, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            reason: reason.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
