use thiserror::Error;

/// Errors surfaced by the solver and diagnostic layers.
#[derive(Debug, Clone, Error)]
pub enum Error {
    /// A precondition on a parameter or shape was violated.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A field operation produced or received a non-finite value.
    #[error("non-finite value in field ({context})")]
    NonFinite { context: &'static str },

    /// The stationary iteration exhausted its budget. Usually signals a
    /// grid too coarse for the requested D, or an extreme parameter set.
    #[error("stationary solve did not converge at D={d}: residual {residual:.3e} after {outer_iters} outer iterations")]
    NonConvergence {
        d: f64,
        residual: f64,
        outer_iters: usize,
    },

    /// Newton damping could not keep the iterate inside v > 0.
    #[error("stationary iterate left the positive cone at D={d} (step-size failure)")]
    NonPositivity { d: f64 },

    /// A tridiagonal system was (numerically) singular.
    #[error("linear solve failure at t={t}: zero pivot in tridiagonal elimination")]
    LinearSolveFailure { t: f64 },

    /// Initial data left the admissible cone u > 0, v >= 0.
    #[error("perturbation eps={eps} violates positivity (min u0 = {min_u:.3e}, min v0 = {min_v:.3e})")]
    PositivityViolation { eps: f64, min_u: f64, min_v: f64 },

    /// The antiderivative of u - reference does not vanish at x = 1,
    /// i.e. the state's mass disagrees with the reference mass.
    #[error("mass mismatch: |phi(1)| = {endpoint:.3e} exceeds {bound:.3e}")]
    MassMismatch { endpoint: f64, bound: f64 },

    /// Too few usable samples for a decay fit.
    #[error("insufficient data for decay fit: {usable} samples above floor (need >= {needed})")]
    InsufficientData { usable: usize, needed: usize },
}
