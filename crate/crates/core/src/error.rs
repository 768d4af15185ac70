use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors raised by the library. Variants fall into two families: configuration
/// problems (bad group data, bad arguments) and numerical breakdowns.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("antisymmetry violated for the bracket of X{i} and X{j}")]
    Antisymmetry { i: usize, j: usize },
    #[error("grading violated: [X{i},X{j}] has a component along X{k} of degree {deg_k}, expected {expected}")]
    Grading {
        i: usize,
        j: usize,
        k: usize,
        deg_k: usize,
        expected: usize,
    },
    #[error("Jacobi identity fails on (X{i},X{j},X{k}) with residual {residual:e}")]
    Jacobi {
        i: usize,
        j: usize,
        k: usize,
        residual: f64,
    },
    #[error("generation: the first layer does not generate layer {layer}")]
    Generation { layer: usize },
    #[error("step {0} is not supported (maximum step is 4)")]
    StepTooLarge(usize),
    #[error("invalid group specification: {0}")]
    InvalidSpec(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("points belong to different groups")]
    GroupMismatch,
    #[error("basis index {index} out of range 1..={n}")]
    IndexOutOfRange { index: usize, n: usize },
    #[error("dilation factor must be positive, got {0}")]
    NonPositiveDilation(f64),
    #[error("invalid splitting: {0}")]
    InvalidSplitting(String),
    #[error("point outside the domain of {0}")]
    OutOfDomain(String),
    #[error("backend {backend} is incompatible with {reason}")]
    BackendMismatch {
        backend: &'static str,
        reason: String,
    },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("singular matrix in {0}")]
    Singular(String),
    #[error("curve left the admissible ball around the base point")]
    CurveExit,
    #[error("expression error at column {pos}: {msg}")]
    Expression { pos: usize, msg: String },
    #[error("numerical breakdown: {0}")]
    Numerical(String),
}

impl Error {
    /// True for errors caused by floating point breakdown rather than bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::Numerical(_) | Error::Singular(_) | Error::CurveExit)
    }
}
