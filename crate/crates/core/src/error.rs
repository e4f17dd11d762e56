use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("grid needs at least 5 points, got {0}")]
    StencilUnderflow(usize),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("unexpected kernel dimension: {0} near-zero eigenvalues")]
    UnexpectedKernel(usize),
    #[error("no negative eigenvalue found (grid too coarse or assembly bug)")]
    NoNegativeEigenvalue,
    #[error("Φ_E(e+, e-) is numerically zero ({0:e})")]
    DegenerateNormalization(f64),
    #[error("shifted solve at j = {j} is ill-conditioned (jλ1 too close to the spectrum): {detail}")]
    IllConditioned { j: usize, detail: String },
    #[error("constraint projection is rank deficient")]
    RankDeficient,
    #[error("sign condition not achieved within the computed window")]
    SignCondition,
    #[error("state outside the modulation neighbourhood: δ = {delta:e} >= δ0 = {delta0:e}")]
    OutsideNeighbourhood { delta: f64, delta0: f64 },
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("format error: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
