//! Error type shared across the crate.

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),
    #[error("fewer than three intersections: {0}")]
    FewerThanThreeIntersections(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("outside chart overlap: {0}")]
    ChartOverlap(String),
    #[error("outside admissible window: {0}")]
    Window(String),
    #[error("quadrature failed: {0}")]
    Quadrature(String),
    #[error("step size underflow at t = {t}: {location}")]
    StepUnderflow { t: f64, location: String },
    #[error("newton iteration did not converge: {0}")]
    NewtonNonconvergence(String),
    #[error("no section crossing within t = {0}")]
    NoCrossing(f64),
    #[error("trajectory too short: {0}")]
    TrajectoryTooShort(String),
    #[error("collocation solve failed: {0}")]
    Collocation(String),
    #[error("continuation stalled: {0}")]
    ContinuationStall(String),
    #[error("nonconvergence: {0}")]
    Nonconvergence(String),
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
