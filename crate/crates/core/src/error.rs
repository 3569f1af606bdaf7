use thiserror::Error;

/// Errors raised by solvers, certifiers and validators.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Dimensions or shapes of the inputs disagree.
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// The LP solver lost numerical control (singular basis, iteration cap, residual blow-up).
    #[error("solver failure: {0}")]
    SolverFailure(String),

    /// A structural assumption of the certificate theory does not hold for this instance
    /// (empty feasible set, unbounded minimizer).
    #[error("assumption violated ({assumption}): {detail}")]
    AssumptionViolation {
        assumption: &'static str,
        detail: String,
    },

    /// The compression set could not reproduce the full-sample solution.
    #[error("degenerate problem: {0}")]
    DegenerateProblem(String),

    /// A discarded sample is not violated by the final solution.
    #[error("degenerate removal: discarded sample {index} is not violated by the final solution")]
    DegenerateRemoval { index: usize },

    /// The second stage of a cascade is infeasible for the first-stage decision.
    #[error("second stage infeasible at the first-stage decision; multisample lies outside the feasible set F")]
    FeasibilitySetF,

    /// Greedy removal ran out of candidates that reduce the target objective.
    #[error("only {achieved} of {requested} removals reduced the target objective")]
    PartialRemoval { achieved: usize, requested: usize },

    /// No ε in (0,1) (or no admissible query) satisfies q ≤ β.
    #[error("infeasible certificate query: {0}")]
    InfeasibleQuery(String),

    /// Sample-size search exceeded its cap.
    #[error("sample size exceeds cap of {cap}")]
    SampleSizeOverflow { cap: usize },

    /// A certificate was requested for a record that cannot carry one.
    #[error("certificate refused: {0}")]
    CertificateRefused(String),
}

pub type Result<T> = std::result::Result<T, Error>;
