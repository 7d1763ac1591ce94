use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("user fractions sum to {sum}, expected 1")]
    UserFractionSum { sum: f64 },
    #[error("slot fractions sum to {sum}, expected 1")]
    SlotFractionSum { sum: f64 },
    #[error("user class {index}: fraction {value} outside (0, 1]")]
    UserFraction { index: usize, value: f64 },
    #[error("user class {index}: loss probability {value} outside [0, 1]")]
    LossProbability { index: usize, value: f64 },
    #[error("slot class {index}: fraction {value} outside (0, 1]")]
    SlotFraction { index: usize, value: f64 },
    #[error("access constant alpha[{user}][{slot}] = {value} is negative or not finite")]
    NegativeAccess { user: usize, slot: usize, value: f64 },
    #[error("access matrix is {rows}x{cols}, expected {expected_rows}x{expected_cols}")]
    AccessShape {
        rows: usize,
        cols: usize,
        expected_rows: usize,
        expected_cols: usize,
    },
    #[error("epsilon out of range: {0} (must be > -1)")]
    EpsilonOutOfRange(f64),
    #[error("no user classes or no slot classes defined")]
    EmptyClasses,
    #[error("class index out of range: {0}")]
    ClassIndex(usize),
    #[error("access probability {prob} for user class {user}, slot class {slot} exceeds 1 at N = {n}")]
    InfeasibleAccess {
        user: usize,
        slot: usize,
        n: usize,
        prob: f64,
    },
    #[error("degree distribution has no edges (derivative at 1 is zero)")]
    NoEdges,
    #[error("invalid polynomial degree distribution: {0}")]
    InvalidPolynomial(String),
    #[error("slot class {0} receives no transmissions (expected degree is zero)")]
    IdleSlotClass(usize),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("population too small: {0}")]
    Population(String),
    #[error("no grid point satisfies resolution probability >= {target}")]
    Infeasible { target: f64 },
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("unknown preset `{0}`")]
    UnknownPreset(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
