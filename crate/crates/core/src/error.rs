use std::path::PathBuf;

/// Errors raised by the solvers, diagnostics and the experiment runner.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("grid too small: {cells} cells per axis, stencils need at least 3")]
    GridTooSmall { cells: usize },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("sample circle of radius {radius} around {center:?} leaves the box")]
    OutOfDomain { center: [f64; 2], radius: f64 },

    #[error("time step {dt} violates the stability bound {limit}")]
    Stability { dt: f64, limit: f64 },

    #[error("conjugate gradient did not reach tolerance after {iterations} iterations (residual {residual:e})")]
    SolverDivergence { iterations: usize, residual: f64 },

    #[error("negative density {value} at cell {cell}")]
    NegativeDensity { cell: usize, value: f64 },

    #[error("saturated set is empty")]
    EmptySaturatedSet,

    #[error("overflow: b * u_+ = {value} exceeds 700")]
    Overflow { value: f64 },

    #[error("states must arrive in strictly increasing time order ({previous} then {next})")]
    TimeOrdering { previous: f64, next: f64 },

    #[error("nutrient history covers [{start}, {end}] but [{needed_start}, {needed_end}] is required")]
    Coverage {
        start: f64,
        end: f64,
        needed_start: f64,
        needed_end: f64,
    },

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("{0}")]
    Domain(String),

    #[error("unsupported dimension {0}")]
    UnsupportedDimension(usize),

    #[error("hypothesis violated: {0}")]
    HypothesisViolated(String),

    #[error("radius {radius} is below the resolution floor {floor}")]
    RadiusResolution { radius: f64, floor: f64 },

    #[error("{0} is not a free-boundary point")]
    NotFreeBoundary(String),

    #[error("projected SOR did not converge after {sweeps} sweeps (residual {residual:e})")]
    NonConvergence { sweeps: usize, residual: f64 },

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("config error at line {line}, key `{key}`: {message}")]
    Config {
        line: usize,
        key: String,
        message: String,
    },

    #[error("gamma = {gamma}: {source}")]
    Sweep {
        gamma: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("check `{check}` failed: {source}")]
    Check {
        check: String,
        #[source]
        source: Box<Error>,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
