use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },

    #[error("variable index {index} out of range for {n} variables")]
    IndexOutOfRange { index: usize, n: usize },

    #[error("system is not square: component {component} has {nvars} variables but there are {ncomponents} components")]
    NotSquare { component: usize, nvars: usize, ncomponents: usize },

    #[error("non-finite matrix entry")]
    NonFinite,

    #[error("basis columns are not orthonormal (defect {0:e})")]
    NotOrthonormal(f64),

    #[error("expected a homogeneous quadratic system: {0}")]
    NotQuadratic(String),

    #[error("relaxation level must be at least 2, got {0}")]
    RelaxationLevel(usize),

    #[error("invalid certificate data: {0}")]
    Certificate(String),

    #[error("SDPA parse error at line {line}: {msg}")]
    Sdpa { line: usize, msg: String },

    #[error("{0}")]
    Input(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
