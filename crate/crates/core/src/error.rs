use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("moment generating function overflows at mu = {mu}")]
    MgfOverflow { mu: f64 },

    #[error("degenerate kernel: {0}")]
    DegenerateKernel(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("singular parameters: {0}")]
    Singular(String),

    #[error("configuration error: {0}")]
    Configuration(String),

    #[error("index {shift} out of range for grid of {len} points")]
    Range { shift: i64, len: usize },

    #[error("minimization failed: {0}")]
    Search(String),

    #[error("front measurement failed: {0}")]
    Measurement(String),

    #[error("no (A5) certificate: {0}")]
    Certificate(String),

    #[error("wave solver did not converge after {} steps", .0.steps)]
    Convergence(Box<crate::waves::ConvergenceFailure>),

    #[error("degenerate data: {0}")]
    DegenerateData(String),

    #[error("evaluation window error: {0}")]
    Window(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
