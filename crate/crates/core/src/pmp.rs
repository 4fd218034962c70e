//! Optimal curvature control of the arm by a forward-backward sweep.
//!
//! The cost is `J = int_0^L kappa^2/2 + chi (|rho - rho_d|^2/2 + 1 - cos(alpha - alpha_d)) ds`
//! subject to the contact kinematics. With costates `(p1, p2)` the control
//! Hamiltonian is
//!
//! ```text
//! H = -p1 cos(alpha) + p2 (-kappa + kappa_o sin(alpha)/(1 + rho kappa_o)) - l(rho, alpha, kappa)
//! ```
//!
//! and `dH/dkappa = -p2 - kappa`, so the stationary control is `kappa = -p2`.
//!
//! On objects whose curvature varies along the boundary the shadow
//! arclength `s_o` is a state as well; a third costate `p3` carries its
//! sensitivity. It vanishes identically for constant curvature, where the
//! two-costate system is recovered exactly.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::contact::{admissible_speed, ContactState, ContactTrajectory};
use crate::curves::{Boundary, BoundaryCurve, RadiusProfile};
use crate::error::{Error, Result};
use crate::feedback::{integrate_closed_loop, FeedbackGains, Mu2};
use crate::profile::{GridProfile, Profile};

/// Pointwise tracking targets and weight.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackingTarget {
    pub rho_d: f64,
    pub alpha_d: f64,
    pub chi: f64,
}

/// Integrand of the cost.
#[inline]
pub fn running_cost(rho: f64, alpha: f64, rho_d: f64, alpha_d: f64, chi: f64, kappa: f64) -> f64 {
    let e = rho - rho_d;
    0.5 * kappa * kappa + chi * (0.5 * e * e + 1.0 - (alpha - alpha_d).cos())
}

fn denominator(rho: f64, kappa_o: f64) -> Result<f64> {
    let d = 1.0 + rho * kappa_o;
    if !(d > 0.0) {
        return Err(Error::Singularity { denominator: d });
    }
    Ok(d)
}

/// Control Hamiltonian.
pub fn hamiltonian(rho: f64, alpha: f64, p1: f64, p2: f64, kappa: f64, kappa_o: f64, target: &TrackingTarget) -> Result<f64> {
    let d = denominator(rho, kappa_o)?;
    let l = running_cost(rho, alpha, target.rho_d, target.alpha_d, target.chi, kappa);
    Ok(-p1 * alpha.cos() + p2 * (-kappa + kappa_o * alpha.sin() / d) - l)
}

/// `(dp1/ds, dp2/ds)` for the two-costate system.
pub fn costate_rhs(rho: f64, alpha: f64, p1: f64, p2: f64, kappa_o: f64, target: &TrackingTarget) -> Result<(f64, f64)> {
    let d = denominator(rho, kappa_o)?;
    let (sin, cos) = alpha.sin_cos();
    let dp1 = kappa_o * kappa_o * p2 * sin / (d * d) + target.chi * (rho - target.rho_d);
    let dp2 = -p1 * sin - kappa_o * p2 * cos / d + target.chi * (alpha - target.alpha_d).sin();
    Ok((dp1, dp2))
}

/// Soft interior barrier `-w [ln(rho/(rho + rho_ref)) + ln(sin alpha)]`,
/// added to the optimized objective and reported separately from `J`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Barrier {
    pub weight: f64,
    pub rho_ref: f64,
}

pub const DEFAULT_BARRIER_WEIGHT: f64 = 1e-3;

impl Barrier {
    pub fn none() -> Self {
        Barrier { weight: 0.0, rho_ref: 1.0 }
    }

    #[inline]
    pub fn value(&self, rho: f64, alpha: f64) -> f64 {
        if self.weight == 0.0 {
            return 0.0;
        }
        -self.weight * ((rho / (rho + self.rho_ref)).ln() + alpha.sin().ln())
    }

    #[inline]
    pub fn d_rho(&self, rho: f64) -> f64 {
        -self.weight * self.rho_ref / (rho * (rho + self.rho_ref))
    }

    #[inline]
    pub fn d_alpha(&self, alpha: f64) -> f64 {
        -self.weight * alpha.cos() / alpha.sin()
    }
}

/// Product `f_x^T c + w (l_x + b_x)` of the transposed state Jacobian of
/// the cost-augmented dynamics with a multiplier `(c, w)`.
#[allow(clippy::too_many_arguments)]
#[inline]
fn jacobian_transpose(
    rho: f64,
    alpha: f64,
    kappa_o: f64,
    kappa_o_slope: f64,
    c: [f64; 3],
    w: f64,
    target: &TrackingTarget,
    barrier: &Barrier,
) -> Result<[f64; 3]> {
    let d = denominator(rho, kappa_o)?;
    let (sin, cos) = alpha.sin_cos();
    let d2 = d * d;
    let l_rho = target.chi * (rho - target.rho_d) + barrier.d_rho(rho);
    let l_alpha = target.chi * (alpha - target.alpha_d).sin() + barrier.d_alpha(alpha);
    Ok([
        -(kappa_o * kappa_o * c[1] + kappa_o * c[2]) * sin / d2 + w * l_rho,
        c[0] * sin + (kappa_o * c[1] + c[2]) * cos / d + w * l_alpha,
        kappa_o_slope * sin * (c[1] - rho * c[2]) / d2,
    ])
}

/// Full costate right-hand side `(p1, p2, p3)` including the barrier and the
/// shadow-arclength costate.
#[inline]
pub fn costate_rhs_full(
    rho: f64,
    alpha: f64,
    p: [f64; 3],
    kappa_o: f64,
    kappa_o_slope: f64,
    target: &TrackingTarget,
    barrier: &Barrier,
) -> Result<[f64; 3]> {
    jacobian_transpose(rho, alpha, kappa_o, kappa_o_slope, [-p[0], -p[1], -p[2]], 1.0, target, barrier)
}

/// Optimal control problem definition.
#[derive(Debug, Clone, Copy)]
pub struct OcpSpec<'a, B: Boundary + ?Sized = BoundaryCurve> {
    pub boundary: &'a B,
    pub length: f64,
    pub rho_d: Profile,
    pub alpha_d: Profile,
    pub chi: f64,
    /// `(rho_0, alpha_0)` and the base shadow arclength.
    pub initial: ContactState,
    /// Arm cross-section radius, used for the contact set.
    pub radius: RadiusProfile,
}

impl<'a, B: Boundary + ?Sized> OcpSpec<'a, B> {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if !(self.chi > 0.0 && self.chi.is_finite()) {
            return bad(format!("chi must be positive, got {}", self.chi));
        }
        if !(self.length > 0.0 && self.length.is_finite()) {
            return bad(format!("arm length must be positive, got {}", self.length));
        }
        if !(self.rho_d.min() > 0.0) {
            return bad("rho_d must be positive".into());
        }
        if !(self.alpha_d.min() > 0.0 && self.alpha_d.max() < PI) {
            return bad("alpha_d must lie in (0, pi)".into());
        }
        let s = self.initial;
        if !(s.rho > 0.0 && s.alpha > 0.0 && s.alpha < PI && s.s_o.is_finite()) {
            return bad(format!("initial state ({}, {}) is not admissible", s.rho, s.alpha));
        }
        Ok(())
    }

    pub fn target(&self, s: f64) -> TrackingTarget {
        TrackingTarget { rho_d: self.rho_d.eval(s, self.length), alpha_d: self.alpha_d.eval(s, self.length), chi: self.chi }
    }

    /// Barrier with the reference distance at the base target.
    pub fn barrier(&self, weight: f64) -> Barrier {
        Barrier { weight, rho_ref: self.rho_d.eval(0.0, self.length) }
    }
}

/// RK4 stage: arclength, state, applied curvature, object curvature.
#[derive(Debug, Clone, Copy)]
struct Stage {
    s: f64,
    x: [f64; 3],
    kappa: f64,
    kappa_o: f64,
}

/// Forward pass result.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub trajectory: ContactTrajectory,
    /// Tracking cost `J`.
    pub cost: f64,
    pub barrier: f64,
    stages: Vec<[Stage; 4]>,
}

impl Evaluation {
    pub fn objective(&self) -> f64 {
        self.cost + self.barrier
    }
}

/// Dynamics augmented with the running cost and the barrier.
fn augmented_rhs<B: Boundary + ?Sized>(spec: &OcpSpec<'_, B>, barrier: &Barrier, st: &Stage) -> Result<[f64; 5]> {
    let [rho, alpha, _] = st.x;
    let (nu, _) = admissible_speed(st.s, rho, alpha, st.kappa_o)?;
    let t = spec.target(st.s);
    Ok([
        -alpha.cos(),
        -st.kappa + st.kappa_o * nu,
        nu,
        running_cost(rho, alpha, t.rho_d, t.alpha_d, t.chi, st.kappa),
        barrier.value(rho, alpha),
    ])
}

/// Integrates the state for a nodal curvature profile (linear in between)
/// with RK4, accumulating the cost and barrier as extra quadrature states.
pub fn evaluate<B: Boundary + ?Sized>(spec: &OcpSpec<'_, B>, kappa: &GridProfile, barrier: &Barrier) -> Result<Evaluation> {
    let steps = kappa.steps();
    let h = spec.length / steps as f64;
    let k = &kappa.values;
    let n = steps + 1;
    let mut rho = Vec::with_capacity(n);
    let mut alpha = Vec::with_capacity(n);
    let mut s_o = Vec::with_capacity(n);
    let mut nu_o = Vec::with_capacity(n);
    let mut kappa_o = Vec::with_capacity(n);
    let mut stages = Vec::with_capacity(steps);
    let mut x = [spec.initial.rho, spec.initial.alpha, spec.initial.s_o];
    let mut cost = 0.0;
    let mut bar = 0.0;
    let stage = |s: f64, x: [f64; 3], kappa: f64| Stage { s, x, kappa, kappa_o: spec.boundary.curvature(x[2]) };
    let shift = |x: &[f64; 3], c: f64, d: &[f64; 5]| [x[0] + c * d[0], x[1] + c * d[1], x[2] + c * d[2]];
    for j in 0..=steps {
        let s = j as f64 * h;
        let ko = spec.boundary.curvature(x[2]);
        let (nu, _) = admissible_speed(s, x[0], x[1], ko)?;
        rho.push(x[0]);
        alpha.push(x[1]);
        s_o.push(x[2]);
        nu_o.push(nu);
        kappa_o.push(ko);
        if j == steps {
            break;
        }
        let km = 0.5 * (k[j] + k[j + 1]);
        let st1 = Stage { s, x, kappa: k[j], kappa_o: ko };
        let d1 = augmented_rhs(spec, barrier, &st1)?;
        let st2 = stage(s + 0.5 * h, shift(&x, 0.5 * h, &d1), km);
        let d2 = augmented_rhs(spec, barrier, &st2)?;
        let st3 = stage(s + 0.5 * h, shift(&x, 0.5 * h, &d2), km);
        let d3 = augmented_rhs(spec, barrier, &st3)?;
        let st4 = stage(s + h, shift(&x, h, &d3), k[j + 1]);
        let d4 = augmented_rhs(spec, barrier, &st4)?;
        let inc = |i: usize| h / 6.0 * (d1[i] + 2.0 * d2[i] + 2.0 * d3[i] + d4[i]);
        x = [x[0] + inc(0), x[1] + inc(1), x[2] + inc(2)];
        cost += inc(3);
        bar += inc(4);
        stages.push([st1, st2, st3, st4]);
    }
    if !(cost.is_finite() && bar.is_finite()) {
        return Err(Error::Domain("non-finite cost".into()));
    }
    let trajectory = ContactTrajectory::assemble(spec.length, h, rho, alpha, s_o, nu_o, k.clone(), kappa_o, spec.radius);
    Ok(Evaluation { trajectory, cost, barrier: bar, stages })
}

/// Costates on the arm grid.
#[derive(Debug, Clone, PartialEq)]
pub struct CostateTrajectory {
    pub h: f64,
    pub p1: Vec<f64>,
    pub p2: Vec<f64>,
    /// Shadow-arclength costate; identically zero on constant curvature.
    pub p3: Vec<f64>,
    /// `p2` as seen by the nodal curvature: the cost gradient is
    /// `kappa + control_p2` in the piecewise-linear `L2` metric.
    pub control_p2: Vec<f64>,
    /// Partial derivatives of the objective with respect to each nodal curvature.
    pub sensitivity: Vec<f64>,
}

impl CostateTrajectory {
    pub fn nodes(&self) -> usize {
        self.p1.len()
    }
}

/// Applies the piecewise-linear mass matrix `h/6 tridiag(1, [2 4 .. 4 2], 1)`.
pub fn mass_apply(h: f64, v: &[f64]) -> Vec<f64> {
    let n = v.len();
    (0..n)
        .map(|i| {
            let diag = if i == 0 || i == n - 1 { 2.0 } else { 4.0 };
            let left = if i > 0 { v[i - 1] } else { 0.0 };
            let right = if i + 1 < n { v[i + 1] } else { 0.0 };
            h / 6.0 * (diag * v[i] + left + right)
        })
        .collect()
}

/// Solves `M u = g` for the mass matrix of [`mass_apply`] (Thomas algorithm).
pub fn mass_solve(h: f64, g: &[f64]) -> Vec<f64> {
    let n = g.len();
    let a = h / 6.0;
    let diag = |i: usize| if i == 0 || i == n - 1 { 2.0 * a } else { 4.0 * a };
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    c[0] = a / diag(0);
    d[0] = g[0] / diag(0);
    for i in 1..n {
        let m = diag(i) - a * c[i - 1];
        c[i] = a / m;
        d[i] = (g[i] - a * d[i - 1]) / m;
    }
    let mut u = vec![0.0; n];
    u[n - 1] = d[n - 1];
    for i in (0..n - 1).rev() {
        u[i] = d[i] - c[i] * u[i + 1];
    }
    u
}

/// Integrates the costates backward from `(0, 0, 0)` at `s = L`.
///
/// The scheme is the exact adjoint of the RK4 forward pass, so the
/// resulting gradient is that of the discrete objective. It reuses the
/// stored forward stages, including the shadow map `s_o(s)`.
pub fn backward_sweep<B: Boundary + ?Sized>(
    spec: &OcpSpec<'_, B>,
    eval: &Evaluation,
    barrier: &Barrier,
) -> Result<CostateTrajectory> {
    let n = eval.trajectory.nodes();
    let h = eval.trajectory.h;
    let mut p1 = vec![0.0; n];
    let mut p2 = vec![0.0; n];
    let mut p3 = vec![0.0; n];
    let mut g = vec![0.0; n];
    let mut lam = [0.0f64; 3];
    let jt = |st: &Stage, c: [f64; 3], w: f64| {
        let slope = spec.boundary.curvature_slope(st.x[2]);
        jacobian_transpose(st.x[0], st.x[1], st.kappa_o, slope, c, w, &spec.target(st.s), barrier)
    };
    // d(rhs)/d(kappa) = (0, -1, 0, kappa, 0)
    let dk = |st: &Stage, c: [f64; 3], w: f64| -c[1] + w * st.kappa;
    let lin =
        |a: &[f64; 3], ca: f64, b: &[f64; 3], cb: f64| [ca * a[0] + cb * b[0], ca * a[1] + cb * b[1], ca * a[2] + cb * b[2]];
    for j in (0..n - 1).rev() {
        let [st1, st2, st3, st4] = &eval.stages[j];
        let (w1, w2) = (h / 6.0, h / 3.0);
        let c4 = lin(&lam, w1, &lam, 0.0);
        let a4 = jt(st4, c4, w1)?;
        let c3 = lin(&lam, w2, &a4, h);
        let a3 = jt(st3, c3, w2)?;
        let c2 = lin(&lam, w2, &a3, 0.5 * h);
        let a2 = jt(st2, c2, w2)?;
        let c1 = lin(&lam, w1, &a2, 0.5 * h);
        let a1 = jt(st1, c1, w1)?;
        for i in 0..3 {
            lam[i] += a1[i] + a2[i] + a3[i] + a4[i];
        }
        let mid = 0.5 * (dk(st2, c2, w2) + dk(st3, c3, w2));
        g[j] += dk(st1, c1, w1) + mid;
        g[j + 1] += dk(st4, c4, w1) + mid;
        if !lam.iter().all(|v| v.is_finite()) {
            return Err(Error::Domain(format!("non-finite costate at s = {}", j as f64 * h)));
        }
        p1[j] = -lam[0];
        p2[j] = -lam[1];
        p3[j] = -lam[2];
    }
    let riesz = mass_solve(h, &g);
    let control_p2 = riesz.iter().zip(&eval.trajectory.kappa).map(|(r, k)| r - k).collect();
    Ok(CostateTrajectory { h, p1, p2, p3, control_p2, sensitivity: g })
}

/// Gradient-ascent update on the Hamiltonian: `kappa + eta (-p2 - kappa)`.
pub fn gradient_step(kappa: &[f64], p2: &[f64], eta: f64) -> Vec<f64> {
    assert!(eta > 0.0, "step size must be positive");
    kappa.iter().zip(p2).map(|(&k, &p)| k + eta * (-p - k)).collect()
}

/// Cost gradient `kappa + p2` on the grid (the negated Hamiltonian slope).
pub fn cost_gradient(kappa: &[f64], costates: &CostateTrajectory) -> Vec<f64> {
    kappa.iter().zip(&costates.control_p2).map(|(k, p)| k + p).collect()
}

/// Directional derivative of the objective from the costates,
/// `int (kappa + p2) dkappa ds` with both factors piecewise linear.
pub fn adjoint_directional_derivative(costates: &CostateTrajectory, direction: &[f64]) -> f64 {
    costates.sensitivity.iter().zip(direction).map(|(g, d)| g * d).sum()
}

/// Result of comparing the adjoint gradient with central differences.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradientCheck {
    pub adjoint: f64,
    pub finite_difference: f64,
    pub relative_error: f64,
}

/// Smooth random direction: a few sine modes with seeded amplitudes.
pub fn random_direction(length: f64, steps: usize, seed: u64) -> GridProfile {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let modes: Vec<(f64, f64, f64)> =
        (1..=4).map(|k| (rng.gen_range(-1.0..1.0), k as f64, rng.gen_range(0.0..2.0 * PI))).collect();
    GridProfile::from_fn(length, steps, |s| {
        modes.iter().map(|&(a, k, phase)| a * (k * PI * s / length + phase).sin()).sum::<f64>() * 0.05
    })
}

/// Compares the adjoint directional derivative of the objective at `kappa`
/// with a central difference of step `eps`.
pub fn check_gradient<B: Boundary + ?Sized>(
    spec: &OcpSpec<'_, B>,
    kappa: &GridProfile,
    direction: &GridProfile,
    barrier: &Barrier,
    eps: f64,
) -> Result<GradientCheck> {
    let base = evaluate(spec, kappa, barrier)?;
    let costates = backward_sweep(spec, &base, barrier)?;
    let adjoint = adjoint_directional_derivative(&costates, &direction.values);
    let shifted = |sign: f64| GridProfile {
        h: kappa.h,
        values: kappa.values.iter().zip(&direction.values).map(|(k, d)| k + sign * eps * d).collect(),
    };
    let plus = evaluate(spec, &shifted(1.0), barrier)?.objective();
    let minus = evaluate(spec, &shifted(-1.0), barrier)?.objective();
    let fd = (plus - minus) / (2.0 * eps);
    Ok(GradientCheck { adjoint, finite_difference: fd, relative_error: (adjoint - fd).abs() / fd.abs().max(f64::MIN_POSITIVE) })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Fixed-step sweep `kappa <- kappa + eta (-p2 - kappa)`.
    GradientAscent,
    /// Limited-memory quasi-Newton on the same gradient with a backtracking
    /// line search.
    QuasiNewton,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialGuess {
    Zero,
    /// Curvature of a closed-loop feedback run tracking `rho_d`.
    Feedback,
    Profile(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub method: Method,
    pub eta: f64,
    /// Double `eta` after this many accepted steps; 0 disables adaptation.
    pub adapt_every: usize,
    pub steps: usize,
    pub max_iterations: usize,
    pub gradient_tol: f64,
    pub relative_cost_tol: f64,
    pub cost_window: usize,
    pub barrier_weight: f64,
    pub memory: usize,
    /// Largest change of any nodal curvature in one quasi-Newton step.
    pub max_step: f64,
    pub initial_guess: InitialGuess,
    /// Also solve from a feedback-law warm start and keep the better result.
    pub feedback_restart: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            method: Method::QuasiNewton,
            eta: 1e-6,
            adapt_every: 0,
            steps: 2000,
            max_iterations: 500_000,
            gradient_tol: 1e-4,
            relative_cost_tol: 1e-8,
            cost_window: 100,
            barrier_weight: DEFAULT_BARRIER_WEIGHT,
            memory: 12,
            max_step: 0.5,
            initial_guess: InitialGuess::Zero,
            feedback_restart: true,
        }
    }
}

impl SolverConfig {
    /// Plain sweep with the given step size.
    pub fn gradient_ascent(eta: f64) -> Self {
        SolverConfig { method: Method::GradientAscent, eta, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParameter(m.into()));
        if !(self.eta > 0.0) {
            return bad("eta must be positive");
        }
        if self.steps < 2 {
            return bad("need at least 2 grid steps");
        }
        if !(self.gradient_tol > 0.0) || !(self.relative_cost_tol >= 0.0) {
            return bad("tolerances must be positive");
        }
        if !(self.barrier_weight >= 0.0) {
            return bad("barrier weight must be non-negative");
        }
        if !(self.max_step > 0.0) {
            return bad("max_step must be positive");
        }
        if self.memory == 0 {
            return bad("quasi-Newton memory must be at least 1");
        }
        if let InitialGuess::Profile(v) = &self.initial_guess {
            if v.len() < 2 || v.iter().any(|x| !x.is_finite()) {
                return bad("initial curvature profile needs at least 2 finite values");
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    /// `max |kappa + p2|` fell below the gradient tolerance.
    Stationary,
    /// Relative cost change over the window fell below tolerance.
    CostStalled,
    MaxIterations,
    /// No admissible descent step could be found.
    StepFailure,
}

impl StopReason {
    pub fn is_converged(self) -> bool {
        matches!(self, StopReason::Stationary | StopReason::CostStalled)
    }
}

#[derive(Debug, Clone)]
pub struct SolveReport {
    pub iterations: usize,
    /// Tracking cost `J` per iteration.
    pub cost_history: Vec<f64>,
    /// Barrier term per iteration.
    pub barrier_history: Vec<f64>,
    /// `max |kappa + p2|` per iteration.
    pub gradient_history: Vec<f64>,
    pub kappa: GridProfile,
    pub trajectory: ContactTrajectory,
    pub costates: CostateTrajectory,
    pub converged: bool,
    pub reason: StopReason,
    pub eta: f64,
    pub evaluations: usize,
    /// The reported solution started from the feedback warm start.
    pub warm_started: bool,
}

impl SolveReport {
    pub fn final_cost(&self) -> f64 {
        *self.cost_history.last().expect("at least one iterate")
    }

    pub fn final_objective(&self) -> f64 {
        self.final_cost() + self.barrier_history.last().expect("at least one iterate")
    }

    pub fn stationarity(&self) -> f64 {
        *self.gradient_history.last().expect("at least one iterate")
    }
}

/// Curvature of a closed-loop feedback run with `mu2` chosen so the local
/// equilibrium matches `rho_d`.
pub fn feedback_warm_start<B: Boundary + ?Sized>(spec: &OcpSpec<'_, B>, steps: usize) -> Result<GridProfile> {
    let gains = FeedbackGains { mu1: 1.0, mu2: Mu2::QuasiStatic { rho_d: spec.rho_d } };
    let traj = integrate_closed_loop(spec.boundary, &gains, spec.initial, spec.length, steps, spec.radius)?;
    Ok(GridProfile::new(traj.h, traj.kappa))
}

fn initial_profile<B: Boundary + ?Sized>(spec: &OcpSpec<'_, B>, cfg: &SolverConfig) -> Result<GridProfile> {
    Ok(match &cfg.initial_guess {
        InitialGuess::Zero => GridProfile::zeros(spec.length, cfg.steps),
        InitialGuess::Feedback => feedback_warm_start(spec, cfg.steps)?,
        InitialGuess::Profile(v) => GridProfile::new(spec.length / (v.len() - 1) as f64, v.clone()).resample(cfg.steps),
    })
}

struct Iterate {
    kappa: GridProfile,
    eval: Evaluation,
    costates: CostateTrajectory,
    grad: Vec<f64>,
    grad_max: f64,
}

fn make_iterate<B: Boundary + ?Sized>(spec: &OcpSpec<'_, B>, kappa: GridProfile, barrier: &Barrier) -> Result<Iterate> {
    let eval = evaluate(spec, &kappa, barrier)?;
    let costates = backward_sweep(spec, &eval, barrier)?;
    let grad = cost_gradient(&kappa.values, &costates);
    let grad_max = grad.iter().fold(0.0f64, |m, g| m.max(g.abs()));
    Ok(Iterate { kappa, eval, costates, grad, grad_max })
}

struct History {
    cost: Vec<f64>,
    barrier: Vec<f64>,
    objective: Vec<f64>,
    gradient: Vec<f64>,
}

impl History {
    fn push(&mut self, it: &Iterate) {
        self.cost.push(it.eval.cost);
        self.barrier.push(it.eval.barrier);
        self.objective.push(it.eval.objective());
        self.gradient.push(it.grad_max);
    }

    fn stop(&self, cfg: &SolverConfig, grad_max: f64) -> Option<StopReason> {
        if grad_max < cfg.gradient_tol {
            return Some(StopReason::Stationary);
        }
        let k = self.objective.len();
        if cfg.cost_window > 0 && k > cfg.cost_window {
            let now = self.objective[k - 1];
            let then = self.objective[k - 1 - cfg.cost_window];
            if (then - now).abs() <= cfg.relative_cost_tol * now.abs().max(f64::MIN_POSITIVE) {
                return Some(StopReason::CostStalled);
            }
        }
        None
    }
}

/// Solves the optimal control problem.
///
/// Admissibility failures in the forward pass halve the step and retry from
/// the previous iterate. Hitting the iteration cap returns a report with
/// `converged == false`. With `feedback_restart` the problem is also solved
/// from a feedback-law warm start and the lower final objective wins; this
/// also covers initial guesses that are not admissible.
pub fn solve<B: Boundary + ?Sized>(spec: &OcpSpec<'_, B>, cfg: &SolverConfig) -> Result<SolveReport> {
    spec.validate()?;
    cfg.validate()?;
    let primary = initial_profile(spec, cfg).and_then(|k| solve_from(spec, cfg, k, false));
    if !cfg.feedback_restart || cfg.initial_guess == InitialGuess::Feedback {
        return primary;
    }
    let alternate = feedback_warm_start(spec, cfg.steps).and_then(|k| solve_from(spec, cfg, k, true));
    match (primary, alternate) {
        (Ok(a), Ok(b)) => {
            let evaluations = a.evaluations + b.evaluations;
            let mut best = if b.final_objective() < a.final_objective() { b } else { a };
            best.evaluations = evaluations;
            Ok(best)
        }
        (Ok(a), Err(_)) => Ok(a),
        (Err(_), Ok(b)) => Ok(b),
        (Err(e), Err(w)) => Err(Error::OptimizationFailed(format!("initial guess failed ({e}); warm start failed ({w})"))),
    }
}

fn solve_from<B: Boundary + ?Sized>(
    spec: &OcpSpec<'_, B>,
    cfg: &SolverConfig,
    guess: GridProfile,
    warm_started: bool,
) -> Result<SolveReport> {
    let barrier = spec.barrier(cfg.barrier_weight);
    let start = make_iterate(spec, guess, &barrier)?;
    let mut hist = History { cost: Vec::new(), barrier: Vec::new(), objective: Vec::new(), gradient: Vec::new() };
    let (it, reason, eta, iterations, evals) = match cfg.method {
        Method::GradientAscent => run_gradient(spec, cfg, &barrier, start, &mut hist),
        Method::QuasiNewton => run_quasi_newton(spec, cfg, &barrier, start, &mut hist),
    };
    Ok(SolveReport {
        iterations,
        cost_history: hist.cost,
        barrier_history: hist.barrier,
        gradient_history: hist.gradient,
        kappa: it.kappa,
        trajectory: it.eval.trajectory,
        costates: it.costates,
        converged: reason.is_converged(),
        reason,
        eta,
        evaluations: evals + 1,
        warm_started,
    })
}

const MIN_ETA: f64 = 1e-30;

fn run_gradient<B: Boundary + ?Sized>(
    spec: &OcpSpec<'_, B>,
    cfg: &SolverConfig,
    barrier: &Barrier,
    mut it: Iterate,
    hist: &mut History,
) -> (Iterate, StopReason, f64, usize, usize) {
    let mut eta = cfg.eta;
    let mut accepted = 0usize;
    let mut evals = 0usize;
    let mut k = 0usize;
    hist.push(&it);
    loop {
        if let Some(r) = hist.stop(cfg, it.grad_max) {
            return (it, r, eta, k, evals);
        }
        if k >= cfg.max_iterations {
            return (it, StopReason::MaxIterations, eta, k, evals);
        }
        let next = loop {
            let p2 = &it.costates.control_p2;
            let values = gradient_step(&it.kappa.values, p2, eta);
            evals += 1;
            match make_iterate(spec, GridProfile::new(it.kappa.h, values), barrier) {
                Ok(n) if cfg.adapt_every == 0 || n.eval.objective() <= it.eval.objective() => break Some(n),
                _ => {
                    eta *= 0.5;
                    accepted = 0;
                    if eta < MIN_ETA {
                        break None;
                    }
                }
            }
        };
        let Some(next) = next else {
            return (it, StopReason::StepFailure, eta, k, evals);
        };
        it = next;
        k += 1;
        accepted += 1;
        if cfg.adapt_every > 0 && accepted.is_multiple_of(cfg.adapt_every) {
            eta *= 2.0;
        }
        hist.push(&it);
    }
}

/// Inner product in the piecewise-linear `L2` metric.
fn mdot(h: f64, a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(mass_apply(h, b)).map(|(x, y)| x * y).sum()
}

fn run_quasi_newton<B: Boundary + ?Sized>(
    spec: &OcpSpec<'_, B>,
    cfg: &SolverConfig,
    barrier: &Barrier,
    mut it: Iterate,
    hist: &mut History,
) -> (Iterate, StopReason, f64, usize, usize) {
    const ARMIJO: f64 = 1e-4;
    const MAX_BACKTRACK: usize = 50;
    let h = it.kappa.h;
    let mut mem_s: Vec<Vec<f64>> = Vec::new();
    let mut mem_y: Vec<Vec<f64>> = Vec::new();
    let mut mem_rho: Vec<f64> = Vec::new();
    let mut evals = 0usize;
    let mut k = 0usize;
    let mut last_t = 1.0;
    hist.push(&it);
    loop {
        if let Some(r) = hist.stop(cfg, it.grad_max) {
            return (it, r, last_t, k, evals);
        }
        if k >= cfg.max_iterations {
            return (it, StopReason::MaxIterations, last_t, k, evals);
        }
        // two-loop recursion in the weighted inner product
        let mut q = it.grad.clone();
        let m = mem_s.len();
        let mut a = vec![0.0; m];
        for i in (0..m).rev() {
            a[i] = mem_rho[i] * mdot(h, &mem_s[i], &q);
            for (qj, yj) in q.iter_mut().zip(&mem_y[i]) {
                *qj -= a[i] * yj;
            }
        }
        let gamma = if m > 0 {
            mdot(h, &mem_s[m - 1], &mem_y[m - 1]) / mdot(h, &mem_y[m - 1], &mem_y[m - 1])
        } else {
            let gn = mdot(h, &it.grad, &it.grad).sqrt();
            (cfg.eta.max(1.0 / gn.max(1e-300))).min(1.0)
        };
        for qj in q.iter_mut() {
            *qj *= gamma;
        }
        for i in 0..m {
            let b = mem_rho[i] * mdot(h, &mem_y[i], &q);
            for (qj, sj) in q.iter_mut().zip(&mem_s[i]) {
                *qj += (a[i] - b) * sj;
            }
        }
        let mut dir: Vec<f64> = q.iter().map(|v| -v).collect();
        let mut slope = mdot(h, &it.grad, &dir);
        if !(slope < 0.0) {
            mem_s.clear();
            mem_y.clear();
            mem_rho.clear();
            dir = it.grad.iter().map(|g| -g * gamma.abs().max(cfg.eta)).collect();
            slope = mdot(h, &it.grad, &dir);
        }
        let f0 = it.eval.objective();
        let dmax = dir.iter().fold(0.0f64, |m, d| m.max(d.abs()));
        let mut t = (cfg.max_step / dmax).min(1.0);
        let mut found = None;
        for _ in 0..MAX_BACKTRACK {
            let values: Vec<f64> = it.kappa.values.iter().zip(&dir).map(|(k, d)| k + t * d).collect();
            evals += 1;
            if let Ok(cand) = make_iterate(spec, GridProfile::new(it.kappa.h, values), barrier) {
                if cand.eval.objective() <= f0 + ARMIJO * t * slope {
                    found = Some(cand);
                    break;
                }
            }
            t *= 0.5;
        }
        let Some(next) = found else {
            if mem_s.is_empty() {
                return (it, StopReason::StepFailure, last_t, k, evals);
            }
            mem_s.clear();
            mem_y.clear();
            mem_rho.clear();
            continue;
        };
        last_t = t;
        let s: Vec<f64> = next.kappa.values.iter().zip(&it.kappa.values).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = next.grad.iter().zip(&it.grad).map(|(a, b)| a - b).collect();
        let sy = mdot(h, &s, &y);
        if sy > 1e-12 * mdot(h, &y, &y).sqrt() * mdot(h, &s, &s).sqrt() && sy > 0.0 {
            if mem_s.len() == cfg.memory {
                mem_s.remove(0);
                mem_y.remove(0);
                mem_rho.remove(0);
            }
            mem_s.push(s);
            mem_y.push(y);
            mem_rho.push(1.0 / sy);
        }
        it = next;
        k += 1;
        hist.push(&it);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Vec2;
    use std::f64::consts::FRAC_PI_2;

    fn target() -> TrackingTarget {
        TrackingTarget { rho_d: 1.0, alpha_d: FRAC_PI_2, chi: 10.0 }
    }

    #[test]
    fn running_cost_cases() {
        assert_eq!(running_cost(1.0, 0.3, 1.0, 0.3, 10.0, 0.0), 0.0);
        assert!((running_cost(2.0, 0.3, 1.0, 0.3, 10.0, 0.0) - 5.0).abs() < 1e-14);
        assert!((running_cost(1.0, 0.3 + PI, 1.0, 0.3, 10.0, 0.0) - 20.0).abs() < 1e-13);
    }

    #[test]
    fn hamiltonian_cases() {
        let t = target();
        assert_eq!(hamiltonian(1.0, FRAC_PI_2, 0.0, 0.0, 0.0, 0.0, &t).unwrap(), 0.0);
        assert!(hamiltonian(1.0, FRAC_PI_2, 1.0, 0.0, 0.0, 0.0, &t).unwrap().abs() < 1e-15);
        // stationary in kappa at -p2
        let h = |k: f64| hamiltonian(1.2, 1.3, 0.4, -0.7, k, 0.2, &t).unwrap();
        let e = 1e-5;
        assert!(((h(0.7 + e) - h(0.7 - e)) / (2.0 * e)).abs() < 1e-9);
        assert!(h(0.7) > h(0.6) && h(0.7) > h(0.8));
        assert!(matches!(hamiltonian(10.0, 1.0, 0.0, 0.0, 0.0, -0.2, &t), Err(Error::Singularity { .. })));
    }

    #[test]
    fn costate_rhs_cases() {
        let t = target();
        assert_eq!(costate_rhs(1.0, FRAC_PI_2, 0.0, 0.0, 0.3, &t).unwrap(), (0.0, 0.0));
        let (a, b) = costate_rhs(1.0, FRAC_PI_2, 0.0, 1.0, 0.2, &t).unwrap();
        assert!((a - 0.04 / 1.44).abs() < 1e-15 && b.abs() < 1e-15);
        let (a, b) = costate_rhs(1.0, FRAC_PI_2, 1.0, 0.0, 0.2, &t).unwrap();
        assert!(a.abs() < 1e-15 && (b + 1.0).abs() < 1e-15);
        // full system reduces to the two-costate one
        let full = costate_rhs_full(1.3, 1.1, [0.2, -0.4, 0.0], 0.2, 0.0, &t, &Barrier::none()).unwrap();
        let (a, b) = costate_rhs(1.3, 1.1, 0.2, -0.4, 0.2, &t).unwrap();
        assert_eq!(full, [a, b, 0.0]);
    }

    #[test]
    fn gradient_step_cases() {
        assert_eq!(gradient_step(&[0.0; 3], &[0.0; 3], 0.3), vec![0.0; 3]);
        assert_eq!(gradient_step(&[1.0], &[-1.0], 0.5), vec![1.0]);
        assert_eq!(gradient_step(&[0.0, 0.0], &[1.0, 1.0], 1e-6), vec![-1e-6, -1e-6]);
    }

    #[test]
    fn barrier_derivatives() {
        let b = Barrier { weight: 1e-3, rho_ref: 0.7 };
        let e = 1e-6;
        let fd = (b.value(0.4 + e, 1.2) - b.value(0.4 - e, 1.2)) / (2.0 * e);
        assert!((fd - b.d_rho(0.4)).abs() < 1e-9);
        let fd = (b.value(0.4, 1.2 + e) - b.value(0.4, 1.2 - e)) / (2.0 * e);
        assert!((fd - b.d_alpha(1.2)).abs() < 1e-9);
    }

    fn circle_spec(c: &BoundaryCurve) -> OcpSpec<'_> {
        OcpSpec {
            boundary: c,
            length: 6.0,
            rho_d: Profile::Constant(1.0),
            alpha_d: Profile::Constant(FRAC_PI_2),
            chi: 10.0,
            initial: ContactState::new(1.0, FRAC_PI_2, 0.0),
            radius: RadiusProfile::constant(1.0).unwrap(),
        }
    }

    #[test]
    fn perfect_tracking_gives_zero_costates() {
        let c = BoundaryCurve::circle(2.5, Vec2::ZERO, 1024).unwrap();
        let spec = circle_spec(&c);
        let k_eq = 0.4 / 1.4;
        let kappa = GridProfile::from_fn(6.0, 200, |_| k_eq);
        let ev = evaluate(&spec, &kappa, &Barrier::none()).unwrap();
        let co = backward_sweep(&spec, &ev, &Barrier::none()).unwrap();
        assert!(co.p1.iter().chain(&co.p2).chain(&co.p3).all(|p| p.abs() < 1e-9));
        assert_eq!((co.p1[200], co.p2[200], co.p3[200]), (0.0, 0.0, 0.0));
        assert!((ev.cost - 0.5 * k_eq * k_eq * 6.0).abs() < 1e-9);
    }

    #[test]
    fn adjoint_matches_finite_differences() {
        let c = BoundaryCurve::ellipse(4.0, 2.5, Vec2::ZERO, 1024).unwrap();
        let mut spec = circle_spec(&c);
        spec.initial = ContactState::new(1.4, 1.5, 0.0);
        let kappa = GridProfile::from_fn(6.0, 400, |s| 0.1 + 0.02 * s);
        let barrier = spec.barrier(1e-3);
        for seed in 0..3 {
            let dir = random_direction(6.0, 400, seed);
            let chk = check_gradient(&spec, &kappa, &dir, &barrier, 1e-5).unwrap();
            assert!(chk.relative_error < 1e-4, "{chk:?}");
        }
    }

    #[test]
    fn solver_reaches_stationarity_on_circle() {
        let c = BoundaryCurve::circle(2.5, Vec2::ZERO, 1024).unwrap();
        let mut spec = circle_spec(&c);
        spec.initial = ContactState::new(1.5, 1.4, 0.0);
        let cfg = SolverConfig { steps: 400, ..SolverConfig::default() };
        let rep = solve(&spec, &cfg).unwrap();
        assert!(rep.converged, "{:?} after {}", rep.reason, rep.iterations);
        let t = rep.trajectory.final_state();
        assert!((t.rho - 1.0).abs() < 0.05 && (t.alpha - FRAC_PI_2).abs() < 0.1);
        assert_eq!(*rep.costates.p2.last().unwrap(), 0.0);
    }

    #[test]
    fn gradient_ascent_decreases_cost() {
        let c = BoundaryCurve::circle(2.5, Vec2::ZERO, 1024).unwrap();
        let mut spec = circle_spec(&c);
        spec.initial = ContactState::new(1.5, 1.4, 0.0);
        let cfg = SolverConfig { steps: 200, max_iterations: 50, ..SolverConfig::gradient_ascent(1e-3) };
        let rep = solve(&spec, &cfg).unwrap();
        assert_eq!(rep.reason, StopReason::MaxIterations);
        assert!(!rep.converged);
        for w in rep.cost_history.windows(2) {
            assert!(w[1] <= w[0] + 1e-12);
        }
    }

    #[test]
    fn config_validation() {
        assert!(SolverConfig { eta: 0.0, ..SolverConfig::default() }.validate().is_err());
        let c = BoundaryCurve::circle(2.5, Vec2::ZERO, 64).unwrap();
        let mut spec = circle_spec(&c);
        spec.chi = 0.0;
        assert!(spec.validate().is_err());
    }
}
