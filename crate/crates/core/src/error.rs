use thiserror::Error;

/// Errors raised by the numerical layers and the batch front end.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("coefficient p_{k} is not Hermitian at t = {t} (relative defect {defect:.3e})")]
    NonHermitianCoefficient { k: usize, t: f64, defect: f64 },
    #[error("leading coefficient p_0 is singular at t = {t} (smallest singular value {sigma:.3e})")]
    SingularLeadingCoefficient { t: f64, sigma: f64 },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("point {t} lies outside the frame grid [{lo}, {hi}]")]
    PointOutsideGrid { t: f64, lo: f64, hi: f64 },
    #[error("step size underflow at t = {t} (h = {h:.3e})")]
    StepSizeUnderflow { t: f64, h: f64 },
    #[error("frame columns collapsed to rank deficiency at t = {t}")]
    RankCollapse { t: f64 },
    #[error("lambda = {re}{im:+}i lies in the spectrum of A0 (c^(2)(b) not invertible)")]
    LambdaInSpectrumOfA0 { re: f64, im: f64 },
    #[error("Weyl discs do not contract (last change {change:.3e}, disc radius {radius:.3e})")]
    LimitCircleDetected { change: f64, radius: f64 },
    #[error("real lambda is not supported for this operation")]
    RealLambdaUnsupported,
    #[error("operation requires a {0} endpoint")]
    WrongEndpoint(&'static str),
    #[error("boundary pair is rank deficient")]
    RankDeficientPair,
    #[error("Nevanlinna condition {which} violated at lambda = {re}{im:+}i (defect {defect:.3e})")]
    NevanlinnaViolation { which: u8, re: f64, im: f64, defect: f64 },
    #[error("boundary resonance: C0 - C1 M is singular at lambda = {re}{im:+}i")]
    BoundaryResonance { re: f64, im: f64 },
    #[error("quadrature not converged (estimate {estimate:.3e} above {tol:.3e})")]
    QuadratureNotConverged { estimate: f64, tol: f64 },
    #[error("kernel evaluated on the diagonal x = t = {0}")]
    DiagonalPoint(f64),
    #[error("operation requires a constant self-adjoint pair")]
    NotConstantSelfAdjoint,
    #[error("schema error at {path}: {msg}")]
    SchemaError { path: String, msg: String },
    #[error("io error: {0}")]
    IoError(String),
}

pub type Result<T> = std::result::Result<T, Error>;
