use thiserror::Error;

/// Errors raised across the crate.
///
/// [`Error::Hypothesis`] is kept apart from the rest: it means the input does
/// not satisfy the standing assumptions of a check (a critical or parabolic
/// point on the sample set, a non-superattracting chart centre), which callers
/// usually want to report rather than treat as a crash.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid map: {0}")]
    InvalidMap(String),
    #[error("numerator and denominator share a root (relative resultant {0:.3e})")]
    NotCoprime(f64),
    #[error("root finder did not converge after {iterations} iterations (degree {degree})")]
    RootFinding { degree: usize, iterations: usize },
    #[error("root residual {residual:.3e} above tolerance {tol:.1e}")]
    Residual { residual: f64, tol: f64 },
    #[error("cycle does not close: gap {0:.3e}")]
    CycleNotClosed(f64),
    #[error("preimage tree exceeds {0} points")]
    PreimageCap(usize),
    #[error("no attracting cycle supplied")]
    NoAttractor,
    #[error("attractor {0} sits in an unresolved cell; increase resolution or iterations")]
    UnresolvedAttractor(usize),
    #[error("no boundary samples between basins {0} and {1} at this resolution")]
    EmptyBoundary(usize, usize),
    #[error("hypothesis not met: {0}")]
    Hypothesis(String),
    #[error("branch ambiguity at step {step}: preimage distances {near:.3e} vs {next:.3e}")]
    BranchAmbiguity { step: usize, near: f64, next: f64 },
    #[error("ray at angle {0} did not land within {1} steps")]
    NoLanding(String, usize),
    #[error("marked point within {0:.1e} of the curve; side is undecidable")]
    MarkedOnCurve(f64),
    #[error("lift matched {count} candidate pairs (need exactly one)")]
    LiftMismatch { count: usize },
    #[error("pullback did not converge: {0}")]
    Pullback(String),
    #[error("newton iteration diverged (last residual {0:.3e})")]
    NewtonDivergence(f64),
    #[error("|rho| = {0} is not 1")]
    NotUnitModulus(f64),
    #[error("rotation-number bisection failed: {0}")]
    Bracketing(String),
    #[error("circle lift jumps by {0:.3} between adjacent samples")]
    LiftDiscontinuity(f64),
    #[error("invalid argument: {0}")]
    Invalid(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
