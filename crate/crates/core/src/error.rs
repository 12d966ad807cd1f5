use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("columns have different lengths (scores {scores}, labels {labels}, groups {groups})")]
    LengthMismatch {
        scores: usize,
        labels: usize,
        groups: usize,
    },
    #[error("dataset has {0} rows, at least 4 are required")]
    TooFewRows(usize),
    #[error("group {0} has no instances")]
    EmptyGroup(u8),
    #[error("group {0} contains only one outcome class")]
    SingleClassGroup(u8),
    #[error("score in row {0} is not finite")]
    NonFiniteScore(usize),
    #[error("invalid group id {value} in row {row}")]
    InvalidGroup { row: usize, value: u8 },
    #[error("invalid ROC curve: {0}")]
    InvalidCurve(String),
    #[error("labels contain a single class; ROC is undefined")]
    SingleClass,
    #[error("scores and labels have different lengths ({0} vs {1})")]
    InputLength(usize, usize),
    #[error("value {value} outside the domain of {what}")]
    Domain { what: &'static str, value: f64 },
    #[error("infeasible configuration: {0}")]
    InfeasibleConfig(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("permutation null degenerate: {0}")]
    DegenerateNull(String),
    #[error("sample {index} is {value}, family {family} needs positive support")]
    NonPositiveSample {
        family: &'static str,
        index: usize,
        value: f64,
    },
    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("{family} fit did not converge: {detail}")]
    NonConvergence {
        family: &'static str,
        detail: String,
    },
    #[error("samples have zero variance")]
    ZeroVariance,
    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    /// True for failures of a numerical procedure, as opposed to bad input data.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::DegenerateNull(_) | Error::NonConvergence { .. } | Error::ZeroVariance
        )
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
