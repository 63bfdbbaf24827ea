use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("derivative order {order} exceeds the supported maximum of 4")]
    OrderTooHigh { order: usize },
    #[error("point {point:?} lies outside the chart domain")]
    OutsideChart { point: Vec<f64> },
    #[error("derivative error estimate {estimate:e} exceeds tolerance {tol:e}")]
    ToleranceExceeded { estimate: f64, tol: f64 },
    #[error("inadmissible vector: {reason}")]
    Inadmissible { reason: String },
    #[error("fundamental tensor has {negative} negative eigenvalue(s), expected {expected}")]
    SignatureMismatch { expected: usize, negative: usize },
    #[error("degenerate fundamental tensor (condition number {condition:e})")]
    Degenerate { condition: f64 },
    #[error("Lagrangian has the wrong sign for the declared signature (L = {value})")]
    WrongSign { value: f64 },
    #[error("vectors live at different base points")]
    MismatchedBase,
    #[error("geodesic left the chart at t = {t}")]
    ChartExit { t: f64 },
    #[error("step size underflow at t = {t} (h = {h:e})")]
    StepUnderflow { t: f64, h: f64 },
    #[error("degenerate flag: denominator {denominator:e} below threshold")]
    DegenerateFlag { denominator: f64 },
    #[error("parallel frame drifted by {drift:e} (tolerance {tol:e})")]
    FrameDrift { drift: f64, tol: f64 },
    #[error("N = {n} lies in the forbidden interval {interval}")]
    ForbiddenN { n: f64, interval: String },
    #[error("eps = {eps} outside the admissible range {range}")]
    EpsOutOfRange { eps: f64, range: String },
    #[error("comparison function needs t in [0, {max}], got {t}")]
    ComparisonDomain { t: f64, max: f64 },
    #[error("requested t = {t} lies beyond the first conjugate point {t0}")]
    BeyondConjugate { t: f64, t0: f64 },
    #[error("Newton iteration diverged after {iterations} steps (last iterate {last:?})")]
    NewtonDivergence { iterations: usize, last: Vec<f64> },
    #[error("covector {omega:?} is not in the polar cone")]
    NotPolar { omega: Vec<f64> },
    #[error("function is not temporal at {point:?}")]
    NotTemporal { point: Vec<f64> },
    #[error("density is not positive at {point:?}")]
    NonPositiveDensity { point: Vec<f64> },
    #[error("quadrature error estimate {estimate:e} exceeds budget {tol:e}")]
    Quadrature { estimate: f64, tol: f64 },
    #[error("hypothesis rejected: {0}")]
    Hypothesis(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("invalid parameter {param}: {message}")]
    InvalidParam { param: String, message: String },
    #[error("unknown space {name:?}; available: {available}")]
    UnknownSpace { name: String, available: String },
    #[error("parse error at position {position}: {message}")]
    Parse { position: usize, message: String },
    #[error("invalid scenario field {field}: {message}")]
    Scenario { field: String, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
