use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("interpolation stencil leaves the domain at {0:?}")]
    StencilOutsideDomain([f64; 3]),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("region is empty: {0}")]
    EmptyRegion(String),

    #[error("solver did not converge after {sweeps} sweeps (residual {residual:.3e})")]
    NoConvergence { sweeps: usize, residual: f64 },

    #[error("energy increased by {increase:.3e} at iteration {iter}; run aborted")]
    Divergence { iter: usize, increase: f64 },

    #[error("all candidate centers were disqualified")]
    AllCandidatesDisqualified,

    #[error("bubbles overlap: centers {0} and {1} are closer than 4*lambda")]
    OverlappingBubbles(usize, usize),

    #[error("degenerate surface: coincident vertices {0} and {1}")]
    CoincidentVertices(usize, usize),

    #[error("probe sphere exits the domain (center {center:?}, radius {radius})")]
    ProbeOutsideDomain { center: [f64; 3], radius: f64 },

    #[error("field format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
