use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("grid size {0} must be a power of two and at least 16")]
    BadGridSize(usize),
    #[error("half length must be positive, got {0}")]
    BadHalfLength(f64),
    #[error("fields live on different grids")]
    GridMismatch,
    #[error("spectral parameter below unit threshold: |tau| = {0}")]
    SpectralParameter(f64),
    #[error("resolvent shift must be nonzero")]
    SingularResolvent,
    #[error("rescaling factor must be positive, got {0}")]
    BadScale(f64),
    #[error("profile file {path}: {msg}")]
    ProfileFile { path: String, msg: String },
    #[error("small-data regime violated: {0}")]
    SmallData(String),
    #[error("fixed point diverged: sup norm of {field} reached {value:e}")]
    Contraction { field: &'static str, value: f64 },
    #[error("fixed point did not converge in {0} iterations")]
    MaxIterations(usize),
    #[error("Jost Wronskian too small: |W| = {0:e}")]
    Wronskian(f64),
    #[error("singular matrix in {0}")]
    Singular(&'static str),
    #[error("trace series does not converge: spectral radius {0}")]
    SeriesRadius(f64),
    #[error("spectral parameters must differ (tau = {0})")]
    CoincidentParameters(f64),
    #[error("solution blew up at t = {0}")]
    BlowUp(f64),
    #[error("invalid argument: {0}")]
    Invalid(String),
    #[error("config line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
