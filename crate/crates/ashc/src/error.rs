use thiserror::Error;

/// Error type shared by every module of the crate.
#[derive(Debug, Clone, Error)]
pub enum Error {
    /// Mismatched vector/matrix dimensions in an argument.
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// The Jacobi eigensolver hit its sweep cap before reaching the
    /// requested off-diagonal tolerance.
    #[error(
        "eigensolver did not converge after {sweeps} sweeps \
         (max off-diagonal {residual:.3e}, tolerance {tol:.3e})"
    )]
    NonConvergence {
        sweeps: usize,
        residual: f64,
        tol: f64,
    },

    /// A certificate-level requirement failed (positive definiteness,
    /// rank, feedback identity, ...).
    #[error("certificate error: {0}")]
    Certificate(String),

    /// An argument lies outside the domain on which the guarantees hold.
    #[error("domain error: {0}")]
    Domain(String),

    /// A callable produced a non-finite value.
    #[error("evaluation error: non-finite value in `{field}` at {location}")]
    NonFinite { field: String, location: String },

    /// A grid enumeration would exceed the configured point cap.
    #[error("grid refused: {count} points exceeds cap of {cap}")]
    GridCap { count: u128, cap: u128 },

    /// The operation needs a plant capability that is absent
    /// (e.g. the affine-in-state form).
    #[error("unsupported plant: {0}")]
    UnsupportedPlant(String),

    /// A reference schedule is invalid for the given plant.
    #[error("schedule error: {0}")]
    Schedule(String),

    /// A constructor invariant was violated; names the identity that failed.
    #[error("construction error: {0}")]
    Construction(String),

    /// Numerical integration aborted.
    #[error("integration error at t = {t}: {reason}")]
    Integration { t: f64, reason: String },

    /// Any other invalid argument.
    #[error("invalid argument: {0}")]
    Argument(String),
}
