//! Feedback curvature law and its closed-loop equilibrium.
//!
//! The arm curvature is set from the measured contact state,
//! `kappa = -mu1 cos(alpha) + (rho - mu2) sin(alpha)`. On an object segment
//! of constant curvature `kbar >= 0` the closed loop converges to
//! `(rho_d, pi/2)` where `rho_d` is the positive root of
//! `kbar rho^2 + (1 - mu2 kbar) rho - (mu2 + kbar) = 0`, certified by the
//! Lyapunov function `V = -ln(sin alpha) + (rho - mu2)^2 / 2 - ln(1 + rho kbar)`.

use serde::{Deserialize, Serialize};

use crate::contact::{integrate_with_law, ContactState, ContactTrajectory};
use crate::curves::{Boundary, RadiusProfile};
use crate::error::{Error, Result};
use crate::profile::Profile;

/// How the distance gain `mu2` varies along the arm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mu2 {
    Constant(f64),
    /// `mu2(s) = r(s) - 1/(r_obj + r(s))`, which places the equilibrium at
    /// the local arm radius on a circle of radius `r_obj`.
    Adaptive {
        radius: RadiusProfile,
        object_radius: f64,
    },
    /// `mu2(s) = rho_d(s) - kappa_o / (1 + rho_d(s) kappa_o)` with the local
    /// object curvature; an extrapolation to non-constant curvature.
    QuasiStatic {
        rho_d: Profile,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeedbackGains {
    pub mu1: f64,
    pub mu2: Mu2,
}

impl FeedbackGains {
    pub fn constant(mu1: f64, mu2: f64) -> Self {
        FeedbackGains { mu1, mu2: Mu2::Constant(mu2) }
    }

    pub fn mu2_at(&self, s: f64, length: f64, kappa_o: f64) -> f64 {
        match self.mu2 {
            Mu2::Constant(v) => v,
            Mu2::Adaptive { radius, object_radius } => adaptive_mu2(radius.eval(s, length), object_radius),
            Mu2::QuasiStatic { rho_d } => {
                let r = rho_d.eval(s, length);
                r - kappa_o / (1.0 + r * kappa_o)
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mu1 >= 0.0) || !self.mu1.is_finite() {
            return Err(Error::InvalidParameter(format!("mu1 must be non-negative, got {}", self.mu1)));
        }
        Ok(())
    }
}

/// Closed-loop curvature `-mu1 cos(alpha) + (rho - mu2) sin(alpha)`.
#[inline]
pub fn feedback_curvature(rho: f64, alpha: f64, mu1: f64, mu2: f64) -> f64 {
    let (s, c) = alpha.sin_cos();
    -mu1 * c + (rho - mu2) * s
}

/// Equilibrium contact distance for given gains.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Equilibrium {
    pub rho: f64,
    /// Two admissible positive roots existed; the smaller was returned.
    pub ambiguous: bool,
}

/// Positive root of `kbar rho^2 + (1 - mu2 kbar) rho - (mu2 + kbar) = 0`
/// with `1 + rho kbar > 0`.
pub fn equilibrium_rho(mu2: f64, kappa_bar: f64) -> Result<Equilibrium> {
    let infeasible = || Error::InfeasibleGains { mu2, kappa_bar };
    if !(mu2.is_finite() && kappa_bar.is_finite()) {
        return Err(infeasible());
    }
    if kappa_bar == 0.0 {
        return if mu2 > 0.0 { Ok(Equilibrium { rho: mu2, ambiguous: false }) } else { Err(infeasible()) };
    }
    let a = kappa_bar;
    let b = 1.0 - mu2 * kappa_bar;
    let c = -(mu2 + kappa_bar);
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        return Err(infeasible());
    }
    // cancellation-free form
    let q = -0.5 * (b + disc.sqrt().copysign(b));
    let mut roots = Vec::with_capacity(2);
    if q != 0.0 {
        roots.push(q / a);
        roots.push(c / q);
    } else {
        roots.push(0.0);
    }
    let mut admissible: Vec<f64> = roots.into_iter().filter(|&r| r > 0.0 && 1.0 + r * kappa_bar > 0.0).collect();
    admissible.sort_by(f64::total_cmp);
    admissible.dedup();
    match admissible.as_slice() {
        [] => Err(infeasible()),
        [r] => Ok(Equilibrium { rho: *r, ambiguous: false }),
        [r, ..] => Ok(Equilibrium { rho: *r, ambiguous: true }),
    }
}

/// Distance gain placing the equilibrium at `r_arm` around a circle of
/// radius `r_obj`: `r_arm - 1/(r_obj + r_arm)`.
pub fn adaptive_mu2(r_arm: f64, r_obj: f64) -> f64 {
    r_arm - 1.0 / (r_obj + r_arm)
}

/// Integrates the contact kinematics under the feedback law.
pub fn integrate_closed_loop<B: Boundary + ?Sized>(
    boundary: &B,
    gains: &FeedbackGains,
    initial: ContactState,
    length: f64,
    steps: usize,
    radius: RadiusProfile,
) -> Result<ContactTrajectory> {
    gains.validate()?;
    integrate_with_law(
        boundary,
        |s, rho, alpha, kappa_o| feedback_curvature(rho, alpha, gains.mu1, gains.mu2_at(s, length, kappa_o)),
        initial,
        length,
        steps,
        radius,
    )
}

/// Pointwise equilibrium distance at the local object curvature along a
/// trajectory; `None` where no admissible root exists.
pub fn quasi_static_reference(traj: &ContactTrajectory, gains: &FeedbackGains) -> Vec<Option<f64>> {
    (0..traj.nodes())
        .map(|j| {
            let ko = traj.kappa_o[j];
            let mu2 = gains.mu2_at(traj.arclength(j), traj.length, ko);
            equilibrium_rho(mu2, ko).ok().map(|e| e.rho)
        })
        .collect()
}

/// Lyapunov function of the closed loop on a constant-curvature segment.
pub fn lyapunov_value(rho: f64, alpha: f64, mu2: f64, kappa_bar: f64) -> Result<f64> {
    let sin = alpha.sin();
    let d = 1.0 + rho * kappa_bar;
    if !(alpha > 0.0 && alpha < std::f64::consts::PI) || !(d > 0.0) {
        return Err(Error::Domain(format!(
            "Lyapunov function undefined at rho = {rho}, alpha = {alpha}, kappa_bar = {kappa_bar}"
        )));
    }
    Ok(-sin.ln() + 0.5 * (rho - mu2).powi(2) - d.ln())
}

/// Outcome of [`verify_lyapunov_decrease`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LyapunovReport {
    /// Largest forward-difference `dV/ds` over all steps.
    pub max_increase: f64,
    pub worst_increase_step: usize,
    /// Largest `|dV/ds - (-mu1 cos^2(alpha)/sin(alpha))|` using five-point central differences.
    pub max_rate_error: f64,
    pub worst_rate_step: usize,
    pub monotone: bool,
    pub rate_matches: bool,
}

impl LyapunovReport {
    pub fn passed(&self) -> bool {
        self.monotone && self.rate_matches
    }
}

pub const LYAPUNOV_INCREASE_TOL: f64 = 1e-6;
pub const LYAPUNOV_RATE_TOL: f64 = 1e-4;

/// Checks that `V` decreases along a closed-loop trajectory on an object of
/// constant curvature `kappa_bar` and that its rate matches the analytic
/// derivative `-mu1 cos^2(alpha)/sin(alpha)`.
pub fn verify_lyapunov_decrease(traj: &ContactTrajectory, mu1: f64, mu2: f64, kappa_bar: f64) -> Result<LyapunovReport> {
    let v: Vec<f64> =
        (0..traj.nodes()).map(|j| lyapunov_value(traj.rho[j], traj.alpha[j], mu2, kappa_bar)).collect::<Result<_>>()?;
    let h = traj.h;
    let mut report = LyapunovReport {
        max_increase: f64::NEG_INFINITY,
        worst_increase_step: 0,
        max_rate_error: 0.0,
        worst_rate_step: 0,
        monotone: true,
        rate_matches: true,
    };
    for j in 0..v.len() - 1 {
        let d = (v[j + 1] - v[j]) / h;
        if d > report.max_increase {
            report.max_increase = d;
            report.worst_increase_step = j;
        }
    }
    // five-point central difference, fourth order in h
    for j in 2..v.len().saturating_sub(2) {
        let d = (v[j - 2] - 8.0 * v[j - 1] + 8.0 * v[j + 1] - v[j + 2]) / (12.0 * h);
        let (s, c) = traj.alpha[j].sin_cos();
        let err = (d + mu1 * c * c / s).abs();
        if err > report.max_rate_error {
            report.max_rate_error = err;
            report.worst_rate_step = j;
        }
    }
    report.monotone = report.max_increase <= LYAPUNOV_INCREASE_TOL;
    report.rate_matches = report.max_rate_error <= LYAPUNOV_RATE_TOL;
    Ok(report)
}
