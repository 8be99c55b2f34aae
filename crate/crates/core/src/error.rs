use thiserror::Error;

/// Errors raised by the geometry, flow and audit routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("surface is not strictly convex: min principal curvature {min_kappa:.3e} at node {node}")]
    NonConvex { min_kappa: f64, node: usize },

    #[error("singular first fundamental form at node {node} (det = {det:.3e})")]
    SingularMetric { node: usize, det: f64 },

    #[error("non-positive radius {radius:.3e} at node {node}")]
    NegativeRadius { node: usize, radius: f64 },

    #[error("time step collapsed to {dt:.3e} at t = {t}")]
    StepCollapse { t: f64, dt: f64 },

    #[error("inner parallel at offset {t} exceeds the reach: {reason}")]
    ReachExceeded { t: f64, reason: String },

    #[error("root bracket failure along ray {ray}: {reason}")]
    RootBracketFailure { ray: usize, reason: String },

    #[error("inradius {inrad} exceeds the comparison radius {radius}")]
    InradExceedsRadius { inrad: f64, radius: f64 },

    #[error("surface is not h-convex: min principal curvature {min_kappa} < {bound}")]
    NotHConvex { min_kappa: f64, bound: f64 },

    #[error("malformed snapshot: {0}")]
    Snapshot(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures of the numerics (as opposed to bad input or I/O).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NonConvex { .. }
                | Error::SingularMetric { .. }
                | Error::NegativeRadius { .. }
                | Error::StepCollapse { .. }
                | Error::ReachExceeded { .. }
                | Error::RootBracketFailure { .. }
                | Error::NotHConvex { .. }
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
