//! Reduced contact kinematics between the arm centerline and its shadow curve
//! on the object boundary.
//!
//! The state is the contact distance `rho`, the contact angle `alpha` (from
//! the arm tangent to the contact vector) and the shadow arclength `s_o`:
//!
//! ```text
//! drho/ds   = -cos(alpha)
//! dalpha/ds = -kappa + kappa_o sin(alpha) / (1 + rho kappa_o)
//! ds_o/ds   = sin(alpha) / (1 + rho kappa_o)
//! ```

use std::f64::consts::PI;

use crate::curves::{integrate_arm, ArmCenterline, ArmPose, Boundary, RadiusProfile};
use crate::error::{Error, Result, Violation};
use crate::geom::wrap_pi;
use crate::ode::{hermite, rk4_step};

/// Speed of the shadow point along the boundary per unit arm arclength.
pub fn shadow_speed(rho: f64, alpha: f64, kappa_o: f64) -> Result<f64> {
    let denom = 1.0 + rho * kappa_o;
    if !(denom > 0.0) {
        return Err(Error::Singularity { denominator: denom });
    }
    Ok(alpha.sin() / denom)
}

/// Right-hand side `(drho/ds, dalpha/ds)` of the contact kinematics.
pub fn contact_rhs(rho: f64, alpha: f64, kappa: f64, kappa_o: f64) -> Result<(f64, f64)> {
    let nu = shadow_speed(rho, alpha, kappa_o)?;
    Ok((-alpha.cos(), -kappa + kappa_o * nu))
}

/// Initial or instantaneous contact state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContactState {
    pub rho: f64,
    pub alpha: f64,
    pub s_o: f64,
}

impl ContactState {
    pub fn new(rho: f64, alpha: f64, s_o: f64) -> Self {
        ContactState { rho, alpha, s_o }
    }
}

/// Checks the admissible region and returns the shadow speed.
pub(crate) fn admissible_speed(s: f64, rho: f64, alpha: f64, kappa_o: f64) -> Result<(f64, f64)> {
    if !(rho.is_finite() && alpha.is_finite() && kappa_o.is_finite()) {
        return Err(Error::Inadmissible { s, violation: Violation::NonFinite });
    }
    if rho <= 0.0 {
        return Err(Error::Inadmissible { s, violation: Violation::Distance });
    }
    if alpha <= 0.0 || alpha >= PI {
        return Err(Error::Inadmissible { s, violation: Violation::Angle });
    }
    let denom = 1.0 + rho * kappa_o;
    if denom <= 0.0 {
        return Err(Error::Inadmissible { s, violation: Violation::ShadowSpeed });
    }
    Ok((alpha.sin() / denom, denom))
}

/// Closed intervals of arm arclength where the arm touches the object.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ContactSet {
    pub intervals: Vec<(f64, f64)>,
}

impl ContactSet {
    /// Builds `{ s : depth(s) >= threshold }` from grid samples, locating
    /// interval ends by linear interpolation between nodes.
    pub fn from_depth(h: f64, depth: &[f64], threshold: f64) -> Self {
        let mut intervals = Vec::new();
        let n = depth.len();
        if n == 0 {
            return ContactSet { intervals };
        }
        let inside = |j: usize| depth[j] >= threshold;
        let crossing = |j: usize| {
            let (a, b) = (depth[j] - threshold, depth[j + 1] - threshold);
            j as f64 * h + h * (a / (a - b))
        };
        let mut start = if inside(0) { Some(0.0) } else { None };
        for j in 0..n - 1 {
            match (inside(j), inside(j + 1)) {
                (false, true) => start = Some(crossing(j)),
                (true, false) => {
                    let end = crossing(j);
                    intervals.push((start.take().unwrap_or(0.0), end));
                }
                _ => {}
            }
        }
        if let Some(s0) = start {
            intervals.push((s0, (n - 1) as f64 * h));
        }
        ContactSet { intervals }
    }

    pub fn is_empty(&self) -> bool {
        self.total_length() <= 0.0
    }

    pub fn total_length(&self) -> f64 {
        self.intervals.iter().map(|(a, b)| b - a).sum()
    }

    pub fn contains(&self, s: f64) -> bool {
        self.intervals.iter().any(|&(a, b)| s >= a && s <= b)
    }
}

/// Contact profiles sampled on the uniform arm grid `s_j = j*h`.
#[derive(Debug, Clone)]
pub struct ContactTrajectory {
    pub length: f64,
    pub h: f64,
    pub rho: Vec<f64>,
    pub alpha: Vec<f64>,
    /// Shadow arclength, unwrapped (may exceed the perimeter).
    pub s_o: Vec<f64>,
    pub nu_o: Vec<f64>,
    /// Arm curvature applied at each node.
    pub kappa: Vec<f64>,
    /// Object curvature at the shadow point.
    pub kappa_o: Vec<f64>,
    pub radius: RadiusProfile,
    /// Contact depth `r(s) - rho(s)`.
    pub delta: Vec<f64>,
    pub contact: ContactSet,
}

impl ContactTrajectory {
    /// Builds a trajectory from node profiles, deriving depth and contact set.
    #[allow(clippy::too_many_arguments)]
    pub fn assemble(
        length: f64,
        h: f64,
        rho: Vec<f64>,
        alpha: Vec<f64>,
        s_o: Vec<f64>,
        nu_o: Vec<f64>,
        kappa: Vec<f64>,
        kappa_o: Vec<f64>,
        radius: RadiusProfile,
    ) -> Self {
        let delta: Vec<f64> = (0..rho.len()).map(|j| radius.eval(j as f64 * h, length) - rho[j]).collect();
        let contact = ContactSet::from_depth(h, &delta, 0.0);
        ContactTrajectory { length, h, rho, alpha, s_o, nu_o, kappa, kappa_o, radius, delta, contact }
    }

    pub fn nodes(&self) -> usize {
        self.rho.len()
    }

    pub fn steps(&self) -> usize {
        self.rho.len() - 1
    }

    pub fn arclength(&self, j: usize) -> f64 {
        j as f64 * self.h
    }

    pub fn final_state(&self) -> ContactState {
        let n = self.steps();
        ContactState::new(self.rho[n], self.alpha[n], self.s_o[n])
    }

    fn cell(&self, s: f64) -> (usize, f64) {
        let n = self.steps();
        let u = (s / self.h).clamp(0.0, n as f64);
        let j = (u.floor() as usize).min(n - 1);
        (j, u - j as f64)
    }

    /// Shadow arclength at any `s` in `[0, L]` by cubic Hermite interpolation.
    pub fn shadow_arclength(&self, s: f64) -> f64 {
        let (j, t) = self.cell(s);
        hermite(self.s_o[j], self.s_o[j + 1], self.nu_o[j], self.nu_o[j + 1], self.h, t)
    }

    /// Contact distance at any `s` in `[0, L]` by cubic Hermite interpolation.
    pub fn rho_at(&self, s: f64) -> f64 {
        let (j, t) = self.cell(s);
        hermite(self.rho[j], self.rho[j + 1], -self.alpha[j].cos(), -self.alpha[j + 1].cos(), self.h, t)
    }

    /// Contact set with a relaxed depth threshold `delta >= -tolerance`.
    pub fn contact_set_with_tolerance(&self, tolerance: f64) -> ContactSet {
        ContactSet::from_depth(self.h, &self.delta, -tolerance)
    }

    /// CSV rows `s, rho, alpha, s_o, nu_o, delta, in_contact`.
    pub fn rows(&self) -> impl Iterator<Item = [f64; 7]> + '_ {
        (0..self.nodes()).map(move |j| {
            [
                self.arclength(j),
                self.rho[j],
                self.alpha[j],
                self.s_o[j],
                self.nu_o[j],
                self.delta[j],
                if self.delta[j] >= 0.0 { 1.0 } else { 0.0 },
            ]
        })
    }
}

/// Integrates the contact kinematics with curvature supplied by
/// `law(s, rho, alpha, kappa_o)`.
///
/// Open-loop profiles ignore the state arguments; feedback laws use them.
pub fn integrate_with_law<B, F>(
    boundary: &B,
    law: F,
    initial: ContactState,
    length: f64,
    steps: usize,
    radius: RadiusProfile,
) -> Result<ContactTrajectory>
where
    B: Boundary + ?Sized,
    F: Fn(f64, f64, f64, f64) -> f64,
{
    if !(length > 0.0) || steps < 2 {
        return Err(Error::InvalidParameter("arm length must be positive and steps >= 2".into()));
    }
    let h = length / steps as f64;
    let mut rhs = |s: f64, x: &[f64; 3]| -> Result<[f64; 3]> {
        let kappa_o = boundary.curvature(x[2]);
        let (nu, _) = admissible_speed(s, x[0], x[1], kappa_o)?;
        let kappa = law(s, x[0], x[1], kappa_o);
        Ok([-x[1].cos(), -kappa + kappa_o * nu, nu])
    };
    let n = steps + 1;
    let mut rho = Vec::with_capacity(n);
    let mut alpha = Vec::with_capacity(n);
    let mut s_o = Vec::with_capacity(n);
    let mut nu_o = Vec::with_capacity(n);
    let mut kappa = Vec::with_capacity(n);
    let mut kappa_o = Vec::with_capacity(n);
    let mut x = [initial.rho, initial.alpha, initial.s_o];
    for j in 0..n {
        let s = j as f64 * h;
        let ko = boundary.curvature(x[2]);
        let (nu, _) = admissible_speed(s, x[0], x[1], ko)?;
        rho.push(x[0]);
        alpha.push(x[1]);
        s_o.push(x[2]);
        nu_o.push(nu);
        kappa.push(law(s, x[0], x[1], ko));
        kappa_o.push(ko);
        if j < steps {
            x = rk4_step(&mut rhs, s, &x, h)?;
        }
    }
    Ok(ContactTrajectory::assemble(length, h, rho, alpha, s_o, nu_o, kappa, kappa_o, radius))
}

/// Integrates the contact kinematics for an open-loop curvature profile.
pub fn integrate_contact<B, K>(
    boundary: &B,
    kappa: K,
    initial: ContactState,
    length: f64,
    steps: usize,
    radius: RadiusProfile,
) -> Result<ContactTrajectory>
where
    B: Boundary + ?Sized,
    K: Fn(f64) -> f64,
{
    integrate_with_law(boundary, |s, _, _, _| kappa(s), initial, length, steps, radius)
}

/// Arm base pose consistent with a contact state: the base sits at distance
/// `rho` outside the boundary point `s_o`, heading at angle `alpha` clockwise
/// from the contact vector.
pub fn base_pose_for<B: Boundary + ?Sized>(boundary: &B, state: ContactState) -> ArmPose {
    let p = boundary.point(state.s_o);
    let normal = p.normal();
    ArmPose { position: p.position - normal * state.rho, angle: p.tangent_angle + PI / 2.0 - state.alpha }
}

/// Contact state of an arm base pose, via the closest boundary point.
pub fn contact_state_for<B: Boundary + ?Sized>(boundary: &B, pose: ArmPose, hint: Option<f64>) -> Result<ContactState> {
    let cp = boundary.closest_point(pose.position, hint)?;
    let v = cp.position - pose.position;
    let alpha = wrap_pi(v.angle() - pose.angle);
    if !(alpha > 0.0 && alpha < PI) {
        return Err(Error::Inadmissible { s: 0.0, violation: Violation::Angle });
    }
    if !(cp.distance > 0.0) {
        return Err(Error::Inadmissible { s: 0.0, violation: Violation::Distance });
    }
    Ok(ContactState::new(cp.distance, alpha, cp.s_o))
}

/// Rebuilds the arm centerline from its base pose and checks it against the
/// trajectory: `|gamma(s_o) - r| = rho` and `(gamma(s_o) - r) . t = 0`.
pub fn reconstruct_arm<B, K>(boundary: &B, traj: &ContactTrajectory, kappa: K, base: ArmPose) -> Result<ArmCenterline>
where
    B: Boundary + ?Sized,
    K: Fn(f64) -> f64,
{
    let arm = integrate_arm(kappa, base, traj.length, traj.steps(), traj.radius)?;
    let tol = 1e-4 * traj.length;
    for j in 0..traj.nodes() {
        let p = boundary.point(traj.s_o[j]);
        let v = p.position - arm.positions[j];
        let dist_err = (v.norm() - traj.rho[j]).abs();
        let ortho = v.dot(p.tangent()).abs();
        let residual = dist_err.max(ortho);
        if !(residual <= tol) {
            return Err(Error::ReconstructionMismatch { s: traj.arclength(j), residual });
        }
    }
    Ok(arm)
}

/// Geometric cross-check of an integrated trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrossCheck {
    pub max_rel_rho: f64,
    pub max_rel_alpha: f64,
    pub max_orthogonality: f64,
    pub samples: usize,
}

/// Recomputes `rho` and `alpha` at `samples` points by closest-point queries
/// from the reconstructed arm (tracking forward from the base) and compares
/// them with the integrated profiles.
pub fn cross_validate<B: Boundary + ?Sized>(
    boundary: &B,
    traj: &ContactTrajectory,
    arm: &ArmCenterline,
    samples: usize,
) -> Result<CrossCheck> {
    let n = traj.steps();
    let mut hint = traj.s_o[0];
    let mut out = CrossCheck { max_rel_rho: 0.0, max_rel_alpha: 0.0, max_orthogonality: 0.0, samples };
    for i in 0..samples {
        let j = if samples == 1 { 0 } else { i * n / (samples - 1) };
        let r = arm.positions[j];
        let cp = boundary.closest_point(r, Some(hint))?;
        hint = cp.s_o;
        let v = cp.position - r;
        let alpha_geo = wrap_pi(v.angle() - arm.angles[j]);
        let rel_rho = (cp.distance - traj.rho[j]).abs() / traj.rho[j];
        let rel_alpha = (alpha_geo - traj.alpha[j]).abs() / traj.alpha[j];
        let t = boundary.point(cp.s_o).tangent();
        out.max_rel_rho = out.max_rel_rho.max(rel_rho);
        out.max_rel_alpha = out.max_rel_alpha.max(rel_alpha);
        out.max_orthogonality = out.max_orthogonality.max(v.dot(t).abs());
    }
    Ok(out)
}

/// Reconstructs the arm from the base pose implied by the trajectory's initial state.
pub fn arm_from_trajectory<B, K>(boundary: &B, traj: &ContactTrajectory, kappa: K) -> Result<ArmCenterline>
where
    B: Boundary + ?Sized,
    K: Fn(f64) -> f64,
{
    let base = base_pose_for(boundary, ContactState::new(traj.rho[0], traj.alpha[0], traj.s_o[0]));
    reconstruct_arm(boundary, traj, kappa, base)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curves::{BoundaryCurve, StraightBoundary, DEFAULT_SAMPLES};
    use crate::geom::Vec2;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn shadow_speed_cases() {
        assert!((shadow_speed(3.0, FRAC_PI_2, 0.0).unwrap() - 1.0).abs() < 1e-15);
        assert!((shadow_speed(1.0, FRAC_PI_2, 0.2).unwrap() - 1.0 / 1.2).abs() < 1e-15);
        assert!(matches!(shadow_speed(5.0, FRAC_PI_2, -0.2), Err(Error::Singularity { .. })));
    }

    #[test]
    fn rhs_cases() {
        let (rho, ko) = (1.3, 0.2);
        let (a, b) = contact_rhs(rho, FRAC_PI_2, ko / (1.0 + rho * ko), ko).unwrap();
        assert!(a.abs() < 1e-15 && b.abs() < 1e-15);
        let (a, b) = contact_rhs(1.0, FRAC_PI_2, 0.0, 0.2).unwrap();
        assert!(a.abs() < 1e-15 && (b - 1.0 / 6.0).abs() < 1e-15);
        let (a, b) = contact_rhs(2.0, PI / 3.0, 0.1, 0.0).unwrap();
        assert!((a + 0.5).abs() < 1e-15 && (b + 0.1).abs() < 1e-15);
    }

    #[test]
    fn circle_equilibrium_is_invariant() {
        let c = BoundaryCurve::circle(5.0, Vec2::ZERO, DEFAULT_SAMPLES).unwrap();
        let r = RadiusProfile::constant(1.0).unwrap();
        let init = ContactState::new(1.0, FRAC_PI_2, 0.0);
        let traj = integrate_contact(&c, |_| 1.0 / 6.0, init, 20.0, 2000, r).unwrap();
        for j in 0..traj.nodes() {
            assert!((traj.rho[j] - 1.0).abs() < 1e-12);
            assert!((traj.alpha[j] - FRAC_PI_2).abs() < 1e-12);
        }
        // nu_o = 5/6, so s_o(L) = 20 * 5/6
        assert!((traj.s_o[2000] - 20.0 * 5.0 / 6.0).abs() < 1e-9);
        assert_eq!(traj.contact.intervals, vec![(0.0, 20.0)]);

        let arm = arm_from_trajectory(&c, &traj, |_| 1.0 / 6.0).unwrap();
        for p in &arm.positions {
            assert!((p.norm() - 6.0).abs() < 1e-9);
        }
    }

    #[test]
    fn straight_boundary_limit() {
        let line = StraightBoundary { origin: Vec2::ZERO, tangent_angle: 0.0 };
        let r = RadiusProfile::constant(0.5).unwrap();
        let init = ContactState::new(2.0, FRAC_PI_2, 3.0);
        let traj = integrate_contact(&line, |_| 0.0, init, 10.0, 100, r).unwrap();
        for j in 0..traj.nodes() {
            assert!((traj.rho[j] - 2.0).abs() < 1e-14);
            assert!((traj.s_o[j] - (3.0 + traj.arclength(j))).abs() < 1e-12);
        }
        assert!(traj.contact.is_empty());
        let arm = arm_from_trajectory(&line, &traj, |_| 0.0).unwrap();
        for p in &arm.positions {
            assert!((p.y + 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn inadmissible_state_aborts_with_location() {
        let line = StraightBoundary { origin: Vec2::ZERO, tangent_angle: 0.0 };
        let r = RadiusProfile::constant(0.5).unwrap();
        // heading straight at the line: rho hits zero at s = 1
        let init = ContactState::new(1.0, 0.01, 0.0);
        let err = integrate_contact(&line, |_| 0.0, init, 2.0, 200, r).unwrap_err();
        match err {
            Error::Inadmissible { s, violation } => {
                assert_eq!(violation, Violation::Distance);
                assert!(s > 0.9 && s < 1.1, "s = {s}");
            }
            e => panic!("unexpected {e:?}"),
        }
    }

    #[test]
    fn contact_set_interpolates_endpoints() {
        let depth = [-1.0, 1.0, 1.0, -1.0, -1.0, 0.5];
        let cs = ContactSet::from_depth(1.0, &depth, 0.0);
        assert_eq!(cs.intervals, vec![(0.5, 2.5), (4.0 + 2.0 / 3.0, 5.0)]);
        assert!(cs.contains(1.0) && !cs.contains(3.5));
        assert!(ContactSet::from_depth(1.0, &[-1.0, -2.0], 0.0).is_empty());
    }

    #[test]
    fn base_pose_round_trip() {
        let e = BoundaryCurve::ellipse(8.0, 4.0, Vec2::ZERO, DEFAULT_SAMPLES).unwrap();
        let state = ContactState::new(5.3, 1.8, 0.0);
        let pose = base_pose_for(&e, state);
        let back = contact_state_for(&e, pose, None).unwrap();
        assert!((back.rho - 5.3).abs() < 1e-9);
        assert!((back.alpha - 1.8).abs() < 1e-9);
        assert!(back.s_o.min(e.len() - back.s_o) < 1e-8);
    }
}
