use thiserror::Error;

/// Which admissibility condition of the contact state was violated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Violation {
    /// Contact distance reached zero or became negative.
    Distance,
    /// Contact angle left the open interval (0, pi).
    Angle,
    /// `1 + rho * kappa_o` is non-positive, so the shadow point stalls or reverses.
    ShadowSpeed,
    /// A state or derivative became non-finite.
    NonFinite,
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let msg = match self {
            Violation::Distance => "rho <= 0",
            Violation::Angle => "alpha outside (0, pi)",
            Violation::ShadowSpeed => "1 + rho*kappa_o <= 0",
            Violation::NonFinite => "non-finite state",
        };
        f.write_str(msg)
    }
}

#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("curve construction failed: {0}")]
    Construction(String),

    #[error("shadow-speed singularity: 1 + rho*kappa_o = {denominator:.3e}")]
    Singularity { denominator: f64 },

    #[error("closest-point tracking lost ahead of s_o = {hint:.6}")]
    TrackingLost { hint: f64 },

    #[error("inadmissible contact state at s = {s:.6}: {violation}")]
    Inadmissible { s: f64, violation: Violation },

    #[error("arm reconstruction mismatch at s = {s:.6}: residual {residual:.3e}")]
    ReconstructionMismatch { s: f64, residual: f64 },

    #[error("empty contact set: no grasp to evaluate")]
    EmptyGrasp,

    #[error("no admissible positive equilibrium distance for mu2 = {mu2}, kappa_bar = {kappa_bar}")]
    InfeasibleGains { mu2: f64, kappa_bar: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("optimization failed: {0}")]
    OptimizationFailed(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
