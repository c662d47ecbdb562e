use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("input is empty")]
    EmptyInput,
    #[error("length mismatch: {left} points but {right} weights")]
    LengthMismatch { left: usize, right: usize },
    #[error("duplicate point at sorted positions {first} and {second}")]
    DuplicatePoint { first: usize, second: usize },
    #[error("weight at position {index} is not a positive finite number ({value})")]
    NonPositiveWeight { index: usize, value: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("geometric tail extrapolation unstable: last-window term ratios spread {spread:.3} > 0.2")]
    ExtrapolationUnstable { spread: f64 },
    #[error("atom {atom} coincides with node {node}")]
    AtomOnNode { atom: usize, node: usize },
    #[error("evaluation point coincides with node {node}")]
    EvaluationAtNode { node: usize },
    #[error("sparseness ratio {ratio} is not > 1")]
    SparsenessViolation { ratio: f64 },
    #[error("target system is not Bessel-weighted")]
    NotBesselWeighted,
    #[error("boundedness precheck failed: {0}")]
    BoundednessPrecheckFailed(String),
    #[error("truncated system is numerically singular")]
    SingularSystem,
    #[error("condition estimate {cond:e} exceeds cap {cap:e}")]
    ConditionCapExceeded { cond: f64, cap: f64 },
    #[error("ratio {0} must be > 1")]
    InvalidRatio(f64),
    #[error("cluster {cluster} overlaps its neighbour or the target grid")]
    ClusterOverlap { cluster: usize },
    #[error("iteration stalled after {iterations} steps (residual {residual:e})")]
    IterationStalled { iterations: usize, residual: f64 },
    #[error("no invertibility regime detected")]
    RegimeUndetected,
}
