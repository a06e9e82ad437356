//! Crate-wide error type.
//!
//! Formula evaluation is total except at explicit pole configurations, so most
//! public functions return [`Result`]. Error variants carry a human-readable
//! description of the offending configuration (which factor vanished, which
//! cardinality was violated, ...) rather than structured payloads; callers
//! that need to branch do so on the variant, not the message.

/// Errors produced by construction, evaluation and solving routines.
#[derive(Debug, Clone, thiserror::Error)]
pub enum Error {
    /// A rate function or one of its set products was evaluated at a pole.
    #[error("pole: {0}")]
    Pole(String),

    /// Parameter-set sizes violate a formula's cardinality constraints.
    #[error("cardinality mismatch: {0}")]
    Cardinality(String),

    /// Vector or matrix dimensions do not match the model.
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// The chain model failed an internal consistency check.
    #[error("model inconsistency: {0}")]
    Model(String),

    /// A transfer matrix (or a product of transfer matrices) is not invertible.
    #[error("singular transfer matrix: {0}")]
    SingularTransfer(String),

    /// Argument sets share an element where disjointness is required.
    #[error("overlapping parameter sets: {0}")]
    Overlap(String),

    /// The requested evaluation strategy does not apply in this mode.
    #[error("strategy not applicable: {0}")]
    Strategy(String),

    /// Exact rational interpolation could not reconstruct a function.
    #[error("rational interpolation failed: {0}")]
    Interpolation(String),

    /// Bethe-equation residuals exceed the on-shell tolerance.
    #[error("state is not on shell: {0}")]
    NotOnShell(String),

    /// The iterative solver exhausted its iteration or restart budget.
    #[error("no convergence: {0}")]
    NoConvergence(String),

    /// A root collection contains (numerically) repeated elements.
    #[error("degenerate roots: {0}")]
    DegenerateRoots(String),

    /// A logarithmic-branch assignment could not be satisfied.
    #[error("branch assignment failed: {0}")]
    Branch(String),

    /// Homotopy continuation in the twist parameter lost the root.
    #[error("continuation failed: {0}")]
    Continuation(String),

    /// Every admissible row normalizer vanished.
    #[error("all row normalizers vanish: {0}")]
    OmegaAllZero(String),

    /// The requested quantity is undefined for these inputs (guarded case).
    #[error("not applicable: {0}")]
    NotApplicable(String),

    /// Malformed configuration (CLI flags or TOML file).
    #[error("config error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
