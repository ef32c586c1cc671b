use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("derivative order {0} is not supported (expected 1..=3)")]
    InvalidOrder(u32),
    #[error("non-finite values in {0}")]
    NonFinite(&'static str),
    #[error("fields live on different grids")]
    GridMismatch,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("radius must be positive, got {0}")]
    NonPositiveRadius(f64),
    #[error("flow is no longer a diffeomorphism: min Jacobian {min_jacobian:e}")]
    NonPositiveJacobian { min_jacobian: f64 },
    #[error("time step {dt:e} exceeds CFL bound {bound:e}")]
    Cfl { dt: f64, bound: f64 },
    #[error("peakons {i} and {j} collide with nonzero combined momentum")]
    Collision { i: usize, j: usize },
    #[error("warp or potential left its positive domain: {0}")]
    Domain(String),
    #[error("singular metric at finite-difference stencil point")]
    SingularMetric,
    #[error("unknown preset `{0}`")]
    UnknownPreset(String),
    #[error("velocity history does not cover t = {0}")]
    OutOfHistory(f64),
    #[error("unsupported: {0}")]
    Unsupported(String),
}
