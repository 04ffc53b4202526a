use alloc::string::String;

/// Errors produced by the numerical pipeline.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),
    /// Model parameters violate the family invariants.
    #[error("invalid parameters for {family}: phi={phi}, theta={theta}")]
    InvalidParams { family: &'static str, phi: f64, theta: f64 },
    /// Not enough data to carry out the operation.
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    /// A fit has fewer distinct support points than free parameters.
    #[error("underdetermined: {0}")]
    Underdetermined(String),
    /// Two inputs that must have equal length do not.
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    /// Every weight of a weighted sum vanished.
    #[error("all weights are zero")]
    AllZeroWeights,
    /// A linear system had no unique least-squares solution.
    #[error("rank-deficient design matrix")]
    RankDeficient,
    /// A series or continued fraction failed to converge.
    #[error("no convergence: {0}")]
    NoConvergence(String),
    /// A moment integral does not exist.
    #[error("moment of order {order} diverges")]
    DivergentMoment { order: u32 },
    /// The fitted drift does not pull the process back to its mean.
    #[error("not mean-reverting: k={0}")]
    NotMeanReverting(f64),
    /// A diffusion function returned a negative value during simulation.
    #[error("negative diffusion {value} at step {step} (state {state})")]
    NegativeDiffusion { step: usize, state: f64, value: f64 },
    /// The simulated state stopped being finite.
    #[error("non-finite state at step {0}")]
    NonFiniteState(usize),
    /// The synthetic generator rejected too many steps.
    #[error("generator rejection rate {rate} exceeds {limit}")]
    GeneratorAbort { rate: f64, limit: f64 },
}

pub type Result<T> = core::result::Result<T, Error>;
