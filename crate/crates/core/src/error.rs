use alloc::string::String;
use alloc::vec::Vec;

/// Errors raised by the reduced-basis pipeline.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// A parameter point outside its box, or of the wrong length.
    #[error("parameter {mu:?} outside domain: {reason}")]
    Domain { mu: Vec<f64>, reason: String },

    /// A coefficient function or intermediate value was not finite.
    #[error("non-finite value: {0}")]
    Numeric(String),

    /// Matrix (near-)singular at the given parameter, either a tiny pivot
    /// or a solution missing the relative-residual tolerance.
    #[error("singular system at mu = {mu:?}: {detail}")]
    Singular { mu: Vec<f64>, detail: String },

    /// Dimension or length mismatch between operands.
    #[error("contract violation: {0}")]
    Contract(String),

    /// Requested more basis vectors than the snapshots support.
    #[error("requested {requested} basis vectors but numerical rank is {rank}")]
    Rank { requested: usize, rank: usize },

    /// Operation needs something the object was not built with.
    #[error("configuration error: {0}")]
    Config(String),

    /// Mode not supported (e.g. stability constant of a non-symmetric model).
    #[error("unsupported: {0}")]
    Unsupported(String),

    /// Stability constant was not strictly positive.
    #[error("degenerate stability constant {0:e}")]
    Degenerate(f64),

    /// A partition cell holds no training point, or a point lies in no cell.
    #[error("partition error: {0}")]
    Partition(String),

    /// Sobol estimator denominator vanished.
    #[error("degenerate output: empirical variance is zero")]
    DegenerateOutput,
}

pub type Result<T, E = Error> = core::result::Result<T, E>;
