use thiserror::Error;

/// Errors raised by the simulator and its checkers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameters: {}", .0.join("; "))]
    InvalidParams(Vec<String>),

    #[error("pressure law violates p_rho > 0, p_theta > 0 at the reference state: {0}")]
    PressureLaw(String),

    #[error("Newton iteration for the stationary density did not converge at grid point {index} after {iterations} iterations")]
    NewtonDiverged { index: usize, iterations: usize },

    #[error("stationary density {value} at grid point {index} leaves the pressure-law neighborhood")]
    OutOfNeighborhood { index: usize, value: f64 },

    #[error("field does not decay at the box boundary: boundary max {boundary:e} vs interior max {interior:e}")]
    BoundaryDecay { boundary: f64, interior: f64 },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("density not positive at grid point {index}: n + rho_bar + rho_inf = {value}")]
    DensityNotPositive { index: usize, value: f64 },

    #[error("step rejected after {halvings} consecutive dt halvings at t = {t}")]
    StepRejectionCascade { t: f64, halvings: usize },

    #[error("adaptive quadrature failed: {0}")]
    Quadrature(String),

    #[error("radial quadrature does not resolve time t = {t}: {reason}")]
    QuadratureResolution { t: f64, reason: String },

    #[error("too few samples in fit window: {found} < {needed}")]
    TooFewSamples { found: usize, needed: usize },

    #[error("degenerate series: {0}")]
    DegenerateSeries(String),

    #[error("interpolation exponent infeasible: {0}")]
    Infeasible(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("config line {line}: {msg}")]
    Config { line: usize, msg: String },

    #[error("unknown config key `{0}`")]
    UnknownKey(String),

    #[error("field file format: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
