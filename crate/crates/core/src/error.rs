use thiserror::Error;

use crate::eigensolve::SpectralResult;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("tube half-width must be positive, got {0}")]
    NonPositiveWidth(f64),
    #[error("tube half-width {epsilon} violates epsilon < 1/(2 sup|kappa|) = {limit}")]
    WidthTooLarge { epsilon: f64, limit: f64 },
    #[error("transverse coordinate t = {0} outside [-1, 1]")]
    OutOfRange(f64),
    #[error("degenerate metric 1 - eps t kappa = {value} at (s, t) = ({s}, {t})")]
    DegenerateJacobian { s: f64, t: f64, value: f64 },
    #[error("no sign change of the secular function on bracket [{lo}, {hi}]")]
    NoSignChange { lo: f64, hi: f64 },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("field is identically zero")]
    ZeroField,
    #[error("field violates the spinor boundary constraint at node ({i}, {j})")]
    ConstraintViolation { i: usize, j: usize },
    #[error("mass matrix is not positive definite")]
    IndefiniteMass,
    #[error("dense oracle limited to dimension {limit}, got {dim}")]
    TooLarge { dim: usize, limit: usize },
    #[error("eigensolver did not converge after {} iterations", .0.iterations)]
    NotConverged(Box<SpectralResult>),
    #[error("shifted matrix factorization hit a zero pivot at row {row}")]
    SingularShift { row: usize },
    #[error("certification needs a compactly supported curvature profile")]
    UnsupportedProfile,
    #[error("certificate condition fails: I_epsilon = {0} is not positive")]
    NonPositiveCertificate(f64),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
