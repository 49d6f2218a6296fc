use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error(
        "packing stalled after {attempts} consecutive rejections \
         ({placed} inclusions placed, vf {achieved:.5} of target {target:.5})"
    )]
    PackingStalled {
        attempts: usize,
        placed: usize,
        achieved: f64,
        target: f64,
    },

    #[error("solver did not converge in {iterations} iterations (relative residual {residual:.3e})")]
    SolverDiverged { iterations: usize, residual: f64 },

    #[error("normal block of the stiffness matrix is singular")]
    SingularMatrix,

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("degenerate label range in group {0} (max == min)")]
    DegenerateRange(&'static str),

    #[error("split `{0}` is empty")]
    EmptySplit(String),

    #[error("zero label in sample {sample}, component {component}")]
    ZeroLabel { sample: usize, component: usize },

    #[error("need at least 2 samples, got {0}")]
    TooFewSamples(usize),

    #[error("{what} index {index} out of range (len {len})")]
    IndexOutOfRange {
        what: &'static str,
        index: usize,
        len: usize,
    },
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::InvalidConfig(msg.into())
    }

    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::ShapeMismatch(msg.into())
    }
}
