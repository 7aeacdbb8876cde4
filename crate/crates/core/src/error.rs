use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid truncation: dim = {0} (need at least 2 levels)")]
    InvalidTruncation(usize),

    #[error("truncation too small: dim = {dim}, need at least {required} levels")]
    TruncationInadequate { dim: usize, required: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("g2 undefined: <n> = {n_mean:e} is below the floor {floor:e}")]
    UndefinedG2 { n_mean: f64, floor: f64 },

    #[error(
        "leakage budget exceeded at t = {time}: top-level population {leakage:e} > {budget:e}; \
         raise the truncation dim"
    )]
    LeakageExceeded { time: f64, leakage: f64, budget: f64 },

    #[error("integrator failure at t = {time}: {reason}")]
    Integration { time: f64, reason: String },

    #[error("steady state is not unique: {0}")]
    DegenerateNullSpace(String),

    #[error("steady-state solve failed: {0}")]
    SteadyState(String),

    #[error("eigensolver failure: {0}")]
    EigenSolver(String),

    #[error("escape-rate fit rejected: {0}")]
    FitRejected(String),

    #[error("target P1 = {target} unreachable; maximum attainable P1 = {max_p1}")]
    Unreachable { target: f64, max_p1: f64 },

    #[error("blockade eigenstates not identified: {0}")]
    BlockadeIdentification(String),

    #[error("antiresonance dip unresolved: {0}")]
    UnresolvedDip(String),

    #[error("config error{}: {message}", line.map(|l| format!(" at line {l}")).unwrap_or_default())]
    Config { line: Option<usize>, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Short machine-readable tag used in CLI error records.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidTruncation(_) => "invalid_truncation",
            Error::TruncationInadequate { .. } => "truncation_inadequate",
            Error::InvalidParameter(_) => "invalid_parameter",
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::UndefinedG2 { .. } => "undefined_g2",
            Error::LeakageExceeded { .. } => "leakage_exceeded",
            Error::Integration { .. } => "integration",
            Error::DegenerateNullSpace(_) => "degenerate_null_space",
            Error::SteadyState(_) => "steady_state",
            Error::EigenSolver(_) => "eigensolver",
            Error::FitRejected(_) => "fit_rejected",
            Error::Unreachable { .. } => "unreachable",
            Error::BlockadeIdentification(_) => "blockade_identification",
            Error::UnresolvedDip(_) => "unresolved_dip",
            Error::Config { .. } => "config",
            Error::Io(_) => "io",
        }
    }
}
