use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("Dirac kernels have no pointwise density")]
    DiracDensityUndefined,
    #[error("negative time {0}")]
    NegativeTime(f64),
    #[error("Laplace transform diverges: Re(lambda) = {re} <= -rate = {bound}")]
    LaplaceDiverges { re: f64, bound: f64 },
    #[error("tail mass must lie in (0, 1), got {0}")]
    InvalidTailMass(f64),
    #[error("invalid kernel: {0}")]
    InvalidKernel(String),
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        message: String,
        line: usize,
        column: usize,
    },
    #[error("invalid value for `{field}`: {message}")]
    Field { field: String, message: String },
    #[error("unknown preset `{0}`")]
    UnknownPreset(String),
    #[error("missing parameter `{0}`")]
    MissingParameter(String),
    #[error("unknown parameter `{0}`")]
    UnknownParameter(String),
    #[error("infeasible parameters: {0}")]
    InfeasibleParameters(String),
    #[error("insufficient history: need {needed}, have {available}")]
    InsufficientHistory { needed: f64, available: f64 },
    #[error("step {h} exceeds the smallest positive discrete delay {tau}")]
    StepTooLarge { h: f64, tau: f64 },
    #[error("time {t} outside trajectory span [{start}, {end}]")]
    OutOfSpan { t: f64, start: f64, end: f64 },
    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),
    #[error("unsupported kernel: {0}")]
    UnsupportedKernel(String),
    #[error("eliminated stages must form one contiguous run that excludes the last stage")]
    NonContiguousElimination,
    #[error("clearance vanishes at candidate equilibrium x = {x} (stage {stage})")]
    ZeroClearanceAtCandidate { x: f64, stage: usize },
    #[error("characteristic function has a pole at lambda = {0}")]
    PoleAtEvaluation(String),
    #[error("analytic and finite-difference characteristic functions disagree (relative {0:e})")]
    CharacteristicMismatch(f64),
    #[error("no admissible equilibrium at sweep parameter {0}")]
    EquilibriumLostDuringSweep(f64),
    #[error("survival factor does not decay for stage {0}; no positive clearance bound")]
    NoDecay(usize),
}
