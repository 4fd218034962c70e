//! Object boundaries parameterized by arclength, and the arm centerline.
//!
//! A [`BoundaryCurve`] stores `N` uniform arclength samples of a closed,
//! counterclockwise curve together with periodic cubic splines for the
//! position, the tangent angle and the curvature. Non-trivial shapes
//! (ellipse, polar-perturbed circle) are reparameterized by arclength from
//! an analytic parameterization through a dense quadrature table.

use std::f64::consts::{PI, TAU};

use crate::error::{Error, Result};
use crate::geom::{wrap_period, Vec2};
use crate::ode::rk4_integrate;
use crate::quadrature::{adaptive_simpson, gauss5};
use crate::spline::{MonotoneCubic, PeriodicSpline};

/// Default number of arclength samples stored per boundary.
pub const DEFAULT_SAMPLES: usize = 4096;

/// Position, tangent angle and curvature of a boundary point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryPoint {
    pub position: Vec2,
    pub tangent_angle: f64,
    pub curvature: f64,
}

impl BoundaryPoint {
    pub fn tangent(&self) -> Vec2 {
        Vec2::from_angle(self.tangent_angle)
    }

    /// Left normal; points into the object for a counterclockwise boundary.
    pub fn normal(&self) -> Vec2 {
        self.tangent().perp()
    }
}

/// Result of a closest-point query.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClosestPoint {
    pub s_o: f64,
    pub distance: f64,
    pub position: Vec2,
    /// Set when several well-separated boundary points are equidistant; the
    /// smallest arclength is returned in that case.
    pub ambiguous: bool,
}

/// Anything the contact kinematics can follow as a shadow curve.
pub trait Boundary: Send + Sync {
    fn point(&self, s_o: f64) -> BoundaryPoint;

    fn curvature(&self, s_o: f64) -> f64 {
        self.point(s_o).curvature
    }

    /// Derivative of the curvature with respect to arclength.
    fn curvature_slope(&self, s_o: f64) -> f64;

    /// Perimeter for closed boundaries, `None` for unbounded ones.
    fn length(&self) -> Option<f64>;

    /// Closest boundary point to `p`. Without a hint the global minimizer is
    /// returned; with a hint, the nearest local minimizer at or after it.
    fn closest_point(&self, p: Vec2, hint: Option<f64>) -> Result<ClosestPoint>;
}

/// Analytic closed curve on the parameter interval `[0, 2*pi)`, traversed
/// counterclockwise.
pub trait ParametricCurve {
    fn position(&self, t: f64) -> Vec2;
    fn velocity(&self, t: f64) -> Vec2;
    fn acceleration(&self, t: f64) -> Vec2;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ellipse {
    pub semi_major: f64,
    pub semi_minor: f64,
    pub center: Vec2,
}

impl ParametricCurve for Ellipse {
    fn position(&self, t: f64) -> Vec2 {
        self.center + Vec2::new(self.semi_major * t.cos(), self.semi_minor * t.sin())
    }
    fn velocity(&self, t: f64) -> Vec2 {
        Vec2::new(-self.semi_major * t.sin(), self.semi_minor * t.cos())
    }
    fn acceleration(&self, t: f64) -> Vec2 {
        Vec2::new(-self.semi_major * t.cos(), -self.semi_minor * t.sin())
    }
}

/// Polar graph `r(psi) = R (1 + amplitude cos(mode psi))` about `center`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeformedCircle {
    pub base_radius: f64,
    pub amplitude: f64,
    pub mode: u32,
    pub center: Vec2,
}

impl DeformedCircle {
    fn radial(&self, t: f64) -> (f64, f64, f64) {
        let m = self.mode as f64;
        let r0 = self.base_radius;
        let (s, c) = (m * t).sin_cos();
        (r0 * (1.0 + self.amplitude * c), -r0 * self.amplitude * m * s, -r0 * self.amplitude * m * m * c)
    }
}

impl ParametricCurve for DeformedCircle {
    fn position(&self, t: f64) -> Vec2 {
        let (r, _, _) = self.radial(t);
        self.center + Vec2::from_angle(t) * r
    }
    fn velocity(&self, t: f64) -> Vec2 {
        let (r, dr, _) = self.radial(t);
        let u = Vec2::from_angle(t);
        u * dr + u.perp() * r
    }
    fn acceleration(&self, t: f64) -> Vec2 {
        let (r, dr, ddr) = self.radial(t);
        let u = Vec2::from_angle(t);
        u * (ddr - r) + u.perp() * (2.0 * dr)
    }
}

/// Shape the boundary was built from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Shape {
    Circle { radius: f64, center: Vec2 },
    Ellipse(Ellipse),
    DeformedCircle(DeformedCircle),
}

/// Closed arclength-parameterized planar curve.
#[derive(Debug, Clone)]
pub struct BoundaryCurve {
    shape: Shape,
    length: f64,
    h: f64,
    positions: Vec<Vec2>,
    tangent_angles: Vec<f64>,
    curvatures: Vec<f64>,
    x: PeriodicSpline,
    y: PeriodicSpline,
    /// Tangent angle minus the uniform turning `2*pi*s/L`; periodic.
    phi_periodic: PeriodicSpline,
    kappa: PeriodicSpline,
}

impl BoundaryCurve {
    /// Circle of the given radius; `s_o = 0` sits on the positive x axis.
    pub fn circle(radius: f64, center: Vec2, samples: usize) -> Result<Self> {
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(Error::InvalidParameter(format!("circle radius must be positive, got {radius}")));
        }
        check_samples(samples)?;
        let length = TAU * radius;
        let h = length / samples as f64;
        let mut positions = Vec::with_capacity(samples);
        let mut angles = Vec::with_capacity(samples);
        for k in 0..samples {
            let t = TAU * k as f64 / samples as f64;
            positions.push(center + Vec2::from_angle(t) * radius);
            angles.push(t + PI / 2.0);
        }
        let curvatures = vec![1.0 / radius; samples];
        Ok(Self::from_samples(Shape::Circle { radius, center }, length, h, positions, angles, curvatures))
    }

    pub fn ellipse(semi_major: f64, semi_minor: f64, center: Vec2, samples: usize) -> Result<Self> {
        if !(semi_minor > 0.0) || !(semi_major >= semi_minor) || !semi_major.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "ellipse axes must satisfy semi_major >= semi_minor > 0, got ({semi_major}, {semi_minor})"
            )));
        }
        let e = Ellipse { semi_major, semi_minor, center };
        Self::from_parametric(Shape::Ellipse(e), &e, samples)
    }

    pub fn deformed_circle(base_radius: f64, amplitude: f64, mode: u32, center: Vec2, samples: usize) -> Result<Self> {
        if !(base_radius > 0.0) || !base_radius.is_finite() {
            return Err(Error::InvalidParameter(format!("base radius must be positive, got {base_radius}")));
        }
        if !(amplitude.abs() < 1.0) {
            return Err(Error::Construction(format!("|amplitude| must be < 1 for a simple polar graph, got {amplitude}")));
        }
        let d = DeformedCircle { base_radius, amplitude, mode, center };
        let curve = Self::from_parametric(Shape::DeformedCircle(d), &d, samples)?;
        if curve.curvatures.iter().any(|k| !k.is_finite()) {
            return Err(Error::Construction("non-finite curvature".into()));
        }
        Ok(curve)
    }

    /// Arclength-reparameterizes an analytic counterclockwise closed curve.
    pub fn from_parametric<C: ParametricCurve>(shape: Shape, curve: &C, samples: usize) -> Result<Self> {
        check_samples(samples)?;
        let speed = |t: f64| curve.velocity(t).norm();
        // dense parameter -> arclength table
        let dense = 8 * samples;
        let dt = TAU / dense as f64;
        let mut ts = Vec::with_capacity(dense + 1);
        let mut arc = Vec::with_capacity(dense + 1);
        let mut acc = 0.0;
        ts.push(0.0);
        arc.push(0.0);
        for i in 0..dense {
            let a = i as f64 * dt;
            acc += adaptive_simpson(&speed, a, a + dt, 1e-10 / dense as f64);
            ts.push(a + dt);
            arc.push(acc);
        }
        let length = acc;
        if !(length > 0.0) || !length.is_finite() {
            return Err(Error::Construction("degenerate perimeter".into()));
        }
        let inverse = MonotoneCubic::new(arc.clone(), ts.clone());
        let h = length / samples as f64;
        let mut positions = Vec::with_capacity(samples);
        let mut angles = Vec::with_capacity(samples);
        let mut curvatures = Vec::with_capacity(samples);
        let mut prev_angle: Option<f64> = None;
        for k in 0..samples {
            let target = k as f64 * h;
            let mut t = inverse.eval(target);
            // Newton polish on S(t) = target
            for _ in 0..4 {
                let i = ((t / dt).floor() as usize).min(dense - 1);
                let s_t = arc[i] + gauss5(speed, ts[i], t);
                let step = (s_t - target) / speed(t);
                t -= step;
                if step.abs() < 1e-15 {
                    break;
                }
            }
            let v = curve.velocity(t);
            let a = curve.acceleration(t);
            let sp = v.norm();
            positions.push(curve.position(t));
            curvatures.push(v.cross(a) / (sp * sp * sp));
            let raw = v.angle();
            let ang = match prev_angle {
                None => raw,
                Some(p) => p + crate::geom::wrap_pi(raw - p),
            };
            prev_angle = Some(ang);
            angles.push(ang);
        }
        let turning = angles[samples - 1] + crate::geom::wrap_pi(angles[0] - angles[samples - 1]) - angles[0];
        if (turning - TAU).abs() > 1e-6 {
            return Err(Error::Construction(format!("curve must be simple and counterclockwise (total turning {turning:.6})")));
        }
        Ok(Self::from_samples(shape, length, h, positions, angles, curvatures))
    }

    fn from_samples(
        shape: Shape,
        length: f64,
        h: f64,
        positions: Vec<Vec2>,
        tangent_angles: Vec<f64>,
        curvatures: Vec<f64>,
    ) -> Self {
        let x = PeriodicSpline::new(positions.iter().map(|p| p.x).collect(), h);
        let y = PeriodicSpline::new(positions.iter().map(|p| p.y).collect(), h);
        let phi_periodic =
            PeriodicSpline::new(tangent_angles.iter().enumerate().map(|(k, a)| a - TAU * (k as f64 * h) / length).collect(), h);
        let kappa = PeriodicSpline::new(curvatures.clone(), h);
        BoundaryCurve { shape, length, h, positions, tangent_angles, curvatures, x, y, phi_periodic, kappa }
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn len(&self) -> f64 {
        self.length
    }

    pub fn sample_count(&self) -> usize {
        self.positions.len()
    }

    pub fn sample_spacing(&self) -> f64 {
        self.h
    }

    pub fn positions(&self) -> &[Vec2] {
        &self.positions
    }

    pub fn tangent_angles(&self) -> &[f64] {
        &self.tangent_angles
    }

    pub fn curvatures(&self) -> &[f64] {
        &self.curvatures
    }

    /// Mean of the boundary samples.
    pub fn centroid(&self) -> Vec2 {
        let n = self.positions.len() as f64;
        let sum = self.positions.iter().fold(Vec2::ZERO, |acc, p| acc + *p);
        sum * (1.0 / n)
    }

    /// Evaluates the boundary at `s_o`, wrapped into `[0, L_o)` first.
    pub fn eval(&self, s_o: f64) -> BoundaryPoint {
        let s = wrap_period(s_o, self.length);
        BoundaryPoint {
            position: Vec2::new(self.x.eval(s), self.y.eval(s)),
            tangent_angle: self.phi_periodic.eval(s) + TAU * s / self.length,
            curvature: self.kappa.eval(s),
        }
    }

    /// Tangent angle continued across laps, so it stays continuous for any real `s_o`.
    pub fn unwrapped_tangent_angle(&self, s_o: f64) -> f64 {
        self.phi_periodic.eval(s_o) + TAU * s_o / self.length
    }

    /// Spline position and its first two arclength derivatives.
    fn position_jet(&self, s: f64) -> (Vec2, Vec2, Vec2) {
        let (x, dx, ddx) = self.x.eval_all(s);
        let (y, dy, ddy) = self.y.eval_all(s);
        (Vec2::new(x, y), Vec2::new(dx, dy), Vec2::new(ddx, ddy))
    }

    fn dist2(&self, p: Vec2, s: f64) -> f64 {
        let q = Vec2::new(self.x.eval(s), self.y.eval(s));
        (q - p).norm_squared()
    }

    /// Minimizes the squared distance in `[lo, hi]` by golden section, then
    /// polishes the orthogonality condition with Newton steps.
    fn refine(&self, p: Vec2, lo: f64, hi: f64) -> f64 {
        const INV_PHI: f64 = 0.618_033_988_749_894_8;
        let tol = 1e-10 * self.length;
        let (mut a, mut b) = (lo, hi);
        let mut c = b - INV_PHI * (b - a);
        let mut d = a + INV_PHI * (b - a);
        let mut fc = self.dist2(p, c);
        let mut fd = self.dist2(p, d);
        while b - a > tol {
            if fc < fd {
                b = d;
                d = c;
                fd = fc;
                c = b - INV_PHI * (b - a);
                fc = self.dist2(p, c);
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + INV_PHI * (b - a);
                fd = self.dist2(p, d);
            }
        }
        let mut s = 0.5 * (a + b);
        for _ in 0..8 {
            let (q, dq, ddq) = self.position_jet(s);
            let g = (q - p).dot(dq);
            let gp = dq.norm_squared() + (q - p).dot(ddq);
            if !(gp > 0.0) {
                break;
            }
            let next = s - g / gp;
            if next < lo || next > hi {
                break;
            }
            let done = (next - s).abs() < 1e-15 * self.length.max(1.0);
            s = next;
            if done {
                break;
            }
        }
        s
    }

    fn closest_global(&self, p: Vec2) -> ClosestPoint {
        let n = self.positions.len();
        let d2: Vec<f64> = self.positions.iter().map(|q| (*q - p).norm_squared()).collect();
        let (kmin, &dmin) = d2.iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1)).expect("non-empty samples");
        let thresh = dmin * (1.0 + 2e-9) + 1e-300;
        let candidates: Vec<usize> = (0..n).filter(|&k| d2[k] <= thresh).collect();
        let circ = |a: usize, b: usize| {
            let d = a.abs_diff(b);
            d.min(n - d)
        };
        let ambiguous = candidates.iter().any(|&k| circ(k, kmin) > 2);
        let k = if ambiguous { candidates[0] } else { kmin };
        let s_k = k as f64 * self.h;
        let (lo, hi) = (s_k - self.h, s_k + self.h);
        let f = [self.dist2(p, lo), d2[k], self.dist2(p, hi)];
        let spread = f.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - f.iter().cloned().fold(f64::INFINITY, f64::min);
        let s = if spread <= 1e-14 * d2[k].max(1e-300) { s_k } else { self.refine(p, lo, hi) };
        self.finish(p, wrap_period(s, self.length), ambiguous)
    }

    fn closest_tracking(&self, p: Vec2, hint: f64) -> Result<ClosestPoint> {
        let h = self.h;
        let steps = (0.25 * self.length / h).ceil() as usize;
        let f = |j: isize| self.dist2(p, hint + j as f64 * h);
        let mut prev = f(-1);
        let mut cur = f(0);
        for j in 0..=steps as isize {
            let next = f(j + 1);
            if cur <= prev && cur <= next {
                let s_j = hint + j as f64 * h;
                let s = self.refine(p, s_j - h, s_j + h);
                return Ok(self.finish(p, s, false));
            }
            prev = cur;
            cur = next;
        }
        Err(Error::TrackingLost { hint })
    }

    fn finish(&self, p: Vec2, s: f64, ambiguous: bool) -> ClosestPoint {
        let q = Vec2::new(self.x.eval(s), self.y.eval(s));
        ClosestPoint { s_o: s, distance: (q - p).norm(), position: q, ambiguous }
    }

    /// Residual `|(gamma(s_o) - p) . t(s_o)|` of the first-order optimality condition.
    pub fn orthogonality_residual(&self, p: Vec2, s_o: f64) -> f64 {
        let (q, dq, _) = self.position_jet(s_o);
        ((q - p).dot(dq) / dq.norm()).abs()
    }

    /// Exports the samples as CSV rows `s_o, x, y, phi, kappa_o`.
    pub fn sample_rows(&self) -> impl Iterator<Item = [f64; 5]> + '_ {
        (0..self.positions.len()).map(move |k| {
            let p = self.positions[k];
            [k as f64 * self.h, p.x, p.y, self.tangent_angles[k], self.curvatures[k]]
        })
    }

    /// Intersection of the ray `origin + lambda*dir` (lambda > 0) with the
    /// sampled polygon farthest from the origin; used to find where a ray
    /// from an interior point leaves the object.
    pub fn ray_exit(&self, origin: Vec2, dir: Vec2) -> Option<f64> {
        let n = self.positions.len();
        let mut best: Option<f64> = None;
        for k in 0..n {
            let a = self.positions[k];
            let b = self.positions[(k + 1) % n];
            let e = b - a;
            let denom = dir.cross(e);
            if denom.abs() < 1e-300 {
                continue;
            }
            let w = a - origin;
            let lambda = w.cross(e) / denom;
            let mu = w.cross(dir) / denom;
            if lambda > 0.0 && (-1e-12..=1.0 + 1e-12).contains(&mu) {
                best = Some(best.map_or(lambda, |b: f64| b.max(lambda)));
            }
        }
        best
    }
}

impl Boundary for BoundaryCurve {
    fn point(&self, s_o: f64) -> BoundaryPoint {
        self.eval(s_o)
    }

    #[inline]
    fn curvature(&self, s_o: f64) -> f64 {
        self.kappa.eval(s_o)
    }

    #[inline]
    fn curvature_slope(&self, s_o: f64) -> f64 {
        self.kappa.eval_all(s_o).1
    }

    fn length(&self) -> Option<f64> {
        Some(self.length)
    }

    fn closest_point(&self, p: Vec2, hint: Option<f64>) -> Result<ClosestPoint> {
        match hint {
            None => Ok(self.closest_global(p)),
            Some(h) => self.closest_tracking(p, h),
        }
    }
}

/// Unbounded straight boundary with the object on its left.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StraightBoundary {
    pub origin: Vec2,
    pub tangent_angle: f64,
}

impl Boundary for StraightBoundary {
    fn point(&self, s_o: f64) -> BoundaryPoint {
        BoundaryPoint {
            position: self.origin + Vec2::from_angle(self.tangent_angle) * s_o,
            tangent_angle: self.tangent_angle,
            curvature: 0.0,
        }
    }

    fn curvature(&self, _s_o: f64) -> f64 {
        0.0
    }

    fn curvature_slope(&self, _s_o: f64) -> f64 {
        0.0
    }

    fn length(&self) -> Option<f64> {
        None
    }

    fn closest_point(&self, p: Vec2, _hint: Option<f64>) -> Result<ClosestPoint> {
        let t = Vec2::from_angle(self.tangent_angle);
        let s_o = (p - self.origin).dot(t);
        let q = self.origin + t * s_o;
        Ok(ClosestPoint { s_o, distance: (q - p).norm(), position: q, ambiguous: false })
    }
}

fn check_samples(samples: usize) -> Result<()> {
    if samples < 16 {
        return Err(Error::InvalidParameter(format!("need at least 16 boundary samples, got {samples}")));
    }
    Ok(())
}

/// Linearly tapered arm cross-section radius `r(s)`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct RadiusProfile {
    pub base: f64,
    pub tip: f64,
}

impl RadiusProfile {
    pub fn new(base: f64, tip: f64) -> Result<Self> {
        if !(base > 0.0 && tip > 0.0) {
            return Err(Error::InvalidParameter(format!("arm radii must be positive, got ({base}, {tip})")));
        }
        Ok(RadiusProfile { base, tip })
    }

    pub fn constant(r: f64) -> Result<Self> {
        Self::new(r, r)
    }

    /// Taper from `L/20` at the base to `L/200` at the tip.
    pub fn standard_taper(arm_length: f64) -> Self {
        RadiusProfile { base: arm_length / 20.0, tip: arm_length / 200.0 }
    }

    pub fn eval(&self, s: f64, arm_length: f64) -> f64 {
        let u = (s / arm_length).clamp(0.0, 1.0);
        self.base + (self.tip - self.base) * u
    }
}

/// Base position and heading of the arm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArmPose {
    pub position: Vec2,
    pub angle: f64,
}

/// Arm centerline sampled on a uniform arclength grid.
#[derive(Debug, Clone)]
pub struct ArmCenterline {
    pub length: f64,
    pub base: ArmPose,
    pub positions: Vec<Vec2>,
    pub angles: Vec<f64>,
    pub curvatures: Vec<f64>,
    pub radius: RadiusProfile,
}

impl ArmCenterline {
    pub fn step(&self) -> f64 {
        self.length / (self.positions.len() - 1) as f64
    }

    pub fn arclength(&self, j: usize) -> f64 {
        j as f64 * self.step()
    }

    pub fn radius_at(&self, j: usize) -> f64 {
        self.radius.eval(self.arclength(j), self.length)
    }

    pub fn tip(&self) -> Vec2 {
        *self.positions.last().expect("non-empty centerline")
    }
}

/// Integrates `dr/ds = (cos theta, sin theta)`, `dtheta/ds = kappa(s)` with
/// fixed-step RK4.
pub fn integrate_arm<K: Fn(f64) -> f64>(
    kappa: K,
    base: ArmPose,
    length: f64,
    steps: usize,
    radius: RadiusProfile,
) -> Result<ArmCenterline> {
    if !(length > 0.0) || steps == 0 {
        return Err(Error::InvalidParameter("arm length and step count must be positive".into()));
    }
    let h = length / steps as f64;
    let nodes = rk4_integrate(
        |s, x: &[f64; 3]| {
            let (sn, cs) = x[2].sin_cos();
            Ok::<_, Error>([cs, sn, kappa(s)])
        },
        0.0,
        [base.position.x, base.position.y, base.angle],
        h,
        steps,
    )?;
    Ok(ArmCenterline {
        length,
        base,
        positions: nodes.iter().map(|x| Vec2::new(x[0], x[1])).collect(),
        angles: nodes.iter().map(|x| x[2]).collect(),
        curvatures: (0..=steps).map(|j| kappa(j as f64 * h)).collect(),
        radius,
    })
}
