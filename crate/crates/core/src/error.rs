use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("harmonic k={k} has |H|={magnitude:e}, below {threshold:e} of the spectral peak")]
    SingularHarmonic { k: i64, magnitude: f64, threshold: f64 },

    #[error("harmonic set falls outside the pulse band: {0}")]
    OffBand(String),

    #[error("simulation grid step {step:e}s exceeds the oversampling limit {limit:e}s")]
    GridTooCoarse { step: f64, limit: f64 },

    #[error("channel grid ends at {grid_end:e}s but integration runs to {required:e}s")]
    GridTooShort { grid_end: f64, required: f64 },

    #[error("mixing matrix is not full column rank (sigma_min/sigma_max = {0:e})")]
    RankDeficient(f64),

    #[error("pencil parameter eta={eta} violates {lower} <= eta <= {upper}")]
    PencilParameter { eta: usize, lower: usize, upper: usize },

    #[error("estimated model order {estimated} exceeds the bound {bound}")]
    OrderOverflow { estimated: usize, bound: usize },

    #[error("eigen-decomposition failed to converge")]
    ConditioningFailure,

    #[error("annihilation system is rank deficient")]
    SingularSystem,

    #[error("delay matrix condition number {0:e} exceeds 1e10")]
    IllConditioned(f64),

    #[error("all traces are zero")]
    AllZero,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid scene: {0}")]
    InvalidScene(String),

    #[error("malformed {what}: {detail}")]
    Format { what: &'static str, detail: String },

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Short stable code used as the prefix of CLI error lines.
    pub fn code(&self) -> &'static str {
        match self {
            Error::SingularHarmonic { .. } | Error::OffBand(_) => "E_BAND",
            Error::GridTooCoarse { .. } | Error::GridTooShort { .. } => "E_GRID",
            Error::RankDeficient(_)
            | Error::OrderOverflow { .. }
            | Error::ConditioningFailure
            | Error::SingularSystem
            | Error::IllConditioned(_) => "E_SOLVE",
            Error::PencilParameter { .. } | Error::InvalidConfig(_) => "E_CONFIG",
            Error::InvalidScene(_) => "E_INVARIANT",
            Error::AllZero => "E_IMAGE",
            Error::Format { .. } => "E_FORMAT",
            Error::Parse { .. } => "E_PARSE",
            Error::Io(_) | Error::Csv(_) => "E_IO",
        }
    }
}
