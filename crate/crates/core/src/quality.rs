//! Continuum grasp maps, the grasp Gramian and quality metrics, quality maps
//! over base placements, and the outer placement search.

use std::cell::RefCell;
use std::f64::consts::{FRAC_PI_2, PI};

use argmin::core::{CostFunction, Executor};
use argmin::solver::neldermead::NelderMead;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::contact::{contact_state_for, ContactSet, ContactTrajectory};
use crate::curves::{ArmPose, Boundary, BoundaryCurve, RadiusProfile};
use crate::eigen::{eigen_sym3, Mat3, SymEigen};
use crate::error::{Error, Result};
use crate::geom::{wrap_period, Vec2};
use crate::pmp::{evaluate, feedback_warm_start, solve, Barrier, InitialGuess, OcpSpec, SolverConfig};
use crate::profile::{GridProfile, Profile};
use crate::quadrature::GAUSS5;

/// 3x2 map from a local contact force `(tangential, normal)` to the global
/// wrench `(fx, fy, moment)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointGraspMap(pub [[f64; 2]; 3]);

/// `G = [I; (gamma^perp)^T] R(phi)` with `gamma^perp` the quarter turn of `gamma`.
pub fn point_grasp_map(gamma: Vec2, phi: f64) -> PointGraspMap {
    let (s, c) = phi.sin_cos();
    let gp = gamma.perp();
    PointGraspMap([[c, -s], [s, c], [gp.x * c + gp.y * s, -gp.x * s + gp.y * c]])
}

impl PointGraspMap {
    pub fn apply(&self, f: [f64; 2]) -> [f64; 3] {
        self.0.map(|row| row[0] * f[0] + row[1] * f[1])
    }

    pub fn apply_transpose(&self, w: [f64; 3]) -> [f64; 2] {
        let g = &self.0;
        [g[0][0] * w[0] + g[1][0] * w[1] + g[2][0] * w[2], g[0][1] * w[0] + g[1][1] * w[1] + g[2][1] * w[2]]
    }

    pub fn gram(&self) -> Mat3 {
        let g = &self.0;
        let mut m = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                m[i][j] = g[i][0] * g[j][0] + g[i][1] * g[j][1];
            }
        }
        m
    }
}

/// `G G^T`, which does not depend on the tangent angle.
pub fn point_gram(gamma: Vec2) -> Mat3 {
    let gp = gamma.perp();
    [[1.0, 0.0, gp.x], [0.0, 1.0, gp.y], [gp.x, gp.y, gamma.norm_squared()]]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    /// Smallest eigenvalue of `W`.
    pub q1: f64,
    /// Determinant of `W`.
    pub q2: f64,
    /// Inverse condition number `lambda_min / lambda_max`.
    pub q3: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Q1,
    Q2,
    Q3,
}

impl Metric {
    pub const ALL: [Metric; 3] = [Metric::Q1, Metric::Q2, Metric::Q3];

    pub fn from_index(i: usize) -> Result<Self> {
        match i {
            1 => Ok(Metric::Q1),
            2 => Ok(Metric::Q2),
            3 => Ok(Metric::Q3),
            _ => Err(Error::InvalidParameter(format!("metric index must be 1, 2 or 3, got {i}"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Metric::Q1 => "Q1",
            Metric::Q2 => "Q2",
            Metric::Q3 => "Q3",
        }
    }
}

impl Metrics {
    pub fn get(&self, m: Metric) -> f64 {
        match m {
            Metric::Q1 => self.q1,
            Metric::Q2 => self.q2,
            Metric::Q3 => self.q3,
        }
    }
}

/// Grasp Gramian `W = int_S G G^T ds` with its spectrum and metrics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GraspGramian {
    pub w: Mat3,
    pub eigen: SymEigen,
    pub metrics: Metrics,
}

impl GraspGramian {
    pub fn from_matrix(w: Mat3) -> Self {
        let eigen = eigen_sym3(&w);
        let [l1, l2, l3] = eigen.values;
        let q3 = if l1 > 0.0 { (l3 / l1).clamp(0.0, 1.0) } else { 0.0 };
        GraspGramian { w, eigen, metrics: Metrics { q1: l3, q2: l1 * l2 * l3, q3 } }
    }

    pub fn eigenvalues(&self) -> [f64; 3] {
        self.eigen.values
    }

    /// Singular values of the continuum grasp map, `sqrt(lambda)`.
    pub fn singular_values(&self) -> [f64; 3] {
        self.eigen.values.map(|l| l.max(0.0).sqrt())
    }
}

/// Quadrature nodes and weights over a contact set: five-point Gauss rule
/// on panels no longer than `step`.
pub fn contact_quadrature(contact: &ContactSet, step: f64) -> Vec<(f64, f64)> {
    let mut nodes = Vec::new();
    for &(a, b) in &contact.intervals {
        if !(b > a) {
            continue;
        }
        let panels = ((b - a) / step).ceil().max(1.0) as usize;
        let w = (b - a) / panels as f64;
        for k in 0..panels {
            let c = a + (k as f64 + 0.5) * w;
            for &(x, wt) in &GAUSS5 {
                nodes.push((c + 0.5 * w * x, 0.5 * w * wt));
            }
        }
    }
    nodes
}

fn require_contact(contact: &ContactSet) -> Result<()> {
    if contact.is_empty() {
        return Err(Error::EmptyGrasp);
    }
    Ok(())
}

/// Gramian over a contact set in arm arclength, with `shadow` mapping arm
/// arclength to boundary arclength.
pub fn gramian<B, F>(boundary: &B, contact: &ContactSet, shadow: F, step: f64) -> Result<GraspGramian>
where
    B: Boundary + ?Sized,
    F: Fn(f64) -> f64,
{
    require_contact(contact)?;
    let mut w = [[0.0; 3]; 3];
    for (s, wt) in contact_quadrature(contact, step) {
        let g = point_gram(boundary.point(shadow(s)).position);
        for i in 0..3 {
            for j in i..3 {
                w[i][j] += wt * g[i][j];
            }
        }
    }
    for i in 0..3 {
        for j in 0..i {
            w[i][j] = w[j][i];
        }
    }
    Ok(GraspGramian::from_matrix(w))
}

/// Gramian of a solved trajectory; the contact set is `delta >= -tolerance`.
pub fn trajectory_gramian<B: Boundary + ?Sized>(boundary: &B, traj: &ContactTrajectory, tolerance: f64) -> Result<GraspGramian> {
    let contact = traj.contact_set_with_tolerance(tolerance);
    gramian(boundary, &contact, |s| traj.shadow_arclength(s), traj.h)
}

/// Net global wrench `int_S G(s) f(s) ds` of a local force profile.
pub fn continuum_wrench<B, F, P>(boundary: &B, contact: &ContactSet, shadow: F, force: P, step: f64) -> Result<[f64; 3]>
where
    B: Boundary + ?Sized,
    F: Fn(f64) -> f64,
    P: Fn(f64) -> [f64; 2],
{
    require_contact(contact)?;
    let mut out = [0.0; 3];
    for (s, wt) in contact_quadrature(contact, step) {
        let p = boundary.point(shadow(s));
        let r = point_grasp_map(p.position, p.tangent_angle).apply(force(s));
        for i in 0..3 {
            out[i] += wt * r[i];
        }
    }
    Ok(out)
}

/// Singular values of the discretized grasp operator against `sqrt(lambda(W))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SingularValueReport {
    /// From orthogonal iteration on force profiles, descending.
    pub iterated: [f64; 3],
    /// Square roots of the Gramian eigenvalues, descending.
    pub gramian: [f64; 3],
    pub top_relative_error: f64,
    pub iterations: usize,
}

/// Verifies `sigma = sqrt(lambda(W))` by orthogonal (block power) iteration
/// of `G* G` on force profiles sampled with a composite midpoint rule, which
/// is independent of the Gauss quadrature used for `W`.
pub fn singular_values_check<B, F>(boundary: &B, contact: &ContactSet, shadow: F, step: f64) -> Result<SingularValueReport>
where
    B: Boundary + ?Sized,
    F: Fn(f64) -> f64,
{
    let gram = gramian(boundary, contact, &shadow, step)?;
    // midpoint samples at a quarter of the step
    let mut maps = Vec::new();
    let mut weights = Vec::new();
    for &(a, b) in &contact.intervals {
        if !(b > a) {
            continue;
        }
        let n = ((b - a) / (0.25 * step)).ceil().max(1.0) as usize;
        let w = (b - a) / n as f64;
        for k in 0..n {
            let p = boundary.point(shadow(a + (k as f64 + 0.5) * w));
            maps.push(point_grasp_map(p.position, p.tangent_angle));
            weights.push(w);
        }
    }
    let m = maps.len();
    let apply = |f: &[[f64; 2]]| {
        let mut out = [0.0; 3];
        for k in 0..m {
            let r = maps[k].apply(f[k]);
            for i in 0..3 {
                out[i] += weights[k] * r[i];
            }
        }
        out
    };
    let inner =
        |f: &[[f64; 2]], g: &[[f64; 2]]| (0..m).map(|k| weights[k] * (f[k][0] * g[k][0] + f[k][1] * g[k][1])).sum::<f64>();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut basis: Vec<Vec<[f64; 2]>> =
        (0..3).map(|_| (0..m).map(|_| [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)]).collect()).collect();
    let orthonormalize = |basis: &mut Vec<Vec<[f64; 2]>>| {
        for i in 0..basis.len() {
            for j in 0..i {
                let c = inner(&basis[i], &basis[j]);
                let (head, tail) = basis.split_at_mut(i);
                for (x, y) in tail[0].iter_mut().zip(&head[j]) {
                    x[0] -= c * y[0];
                    x[1] -= c * y[1];
                }
            }
            let n = inner(&basis[i], &basis[i]).sqrt();
            if n > 0.0 {
                for x in basis[i].iter_mut() {
                    x[0] /= n;
                    x[1] /= n;
                }
            }
        }
    };
    orthonormalize(&mut basis);
    let mut sigma = [0.0; 3];
    let mut iterations = 0;
    for it in 1..=2000 {
        iterations = it;
        let mut next: Vec<Vec<[f64; 2]>> = basis
            .iter()
            .map(|f| {
                let w = apply(f);
                maps.iter().map(|g| g.apply_transpose(w)).collect()
            })
            .collect();
        orthonormalize(&mut next);
        let mut s = [0.0; 3];
        for (i, f) in next.iter().enumerate() {
            let w = apply(f);
            s[i] = (w[0] * w[0] + w[1] * w[1] + w[2] * w[2]).sqrt();
        }
        let change = (0..3).map(|i| (s[i] - sigma[i]).abs()).fold(0.0, f64::max);
        sigma = s;
        basis = next;
        if change <= 1e-14 * sigma[0].max(f64::MIN_POSITIVE) {
            break;
        }
    }
    sigma.sort_by(|a, b| b.total_cmp(a));
    let reference = gram.singular_values();
    Ok(SingularValueReport {
        iterated: sigma,
        gramian: reference,
        top_relative_error: (sigma[0] - reference[0]).abs() / reference[0].max(f64::MIN_POSITIVE),
        iterations,
    })
}

/// Places the base at distance `d` from the boundary on the ray at angle
/// `psi` from the object centroid, heading `psi + pi/2`.
pub fn place_base(curve: &BoundaryCurve, d: f64, psi: f64) -> Result<ArmPose> {
    if !(d > 0.0) {
        return Err(Error::InvalidParameter(format!("placement distance must be positive, got {d}")));
    }
    let origin = curve.centroid();
    let dir = Vec2::from_angle(psi);
    let exit =
        curve.ray_exit(origin, dir).ok_or_else(|| Error::Domain(format!("ray at psi = {psi} does not leave the object")))?;
    let dist = |t: f64| curve.closest_point(origin + dir * t, None).map(|c| c.distance);
    let mut lo = exit;
    let mut hi = exit + d;
    let mut grow = 0;
    while dist(hi)? < d {
        lo = hi;
        hi += d;
        grow += 1;
        if grow > 60 {
            return Err(Error::Domain("distance along the ray never reaches d".into()));
        }
    }
    while hi - lo > 1e-10 * (1.0 + hi) {
        let mid = 0.5 * (lo + hi);
        if dist(mid)? < d {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(ArmPose { position: origin + dir * (0.5 * (lo + hi)), angle: psi + FRAC_PI_2 })
}

/// Arm and targets for the inner grasp solve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ArmConfig {
    /// Arm length as a fraction of the object perimeter.
    pub length_fraction: f64,
    pub radius: f64,
    pub rho_d: f64,
    pub alpha_d: f64,
    pub chi: f64,
}

impl Default for ArmConfig {
    fn default() -> Self {
        ArmConfig { length_fraction: 0.5, radius: 1.0, rho_d: 1.0, alpha_d: FRAC_PI_2, chi: 10.0 }
    }
}

/// Polar placement grid `d in [d_min, d_max]`, `psi in [0, 2 pi)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Disc {
    pub d_min: f64,
    pub d_max: f64,
    pub n_d: usize,
    pub n_psi: usize,
}

impl Default for Disc {
    fn default() -> Self {
        Disc { d_min: 3.0, d_max: 13.0, n_d: 24, n_psi: 96 }
    }
}

impl Disc {
    pub fn validate(&self) -> Result<()> {
        if !(self.d_min > 0.0 && self.d_max >= self.d_min) || self.n_d == 0 || self.n_psi == 0 {
            return Err(Error::InvalidParameter(format!("disc needs 0 < d_min <= d_max and non-empty grid, got {self:?}")));
        }
        if self.n_d == 1 && self.d_max != self.d_min {
            return Err(Error::InvalidParameter("a single distance row needs d_min == d_max".into()));
        }
        Ok(())
    }

    pub fn distances(&self) -> Vec<f64> {
        if self.n_d == 1 {
            return vec![self.d_min];
        }
        let step = (self.d_max - self.d_min) / (self.n_d - 1) as f64;
        (0..self.n_d).map(|i| self.d_min + i as f64 * step).collect()
    }

    pub fn angles(&self) -> Vec<f64> {
        (0..self.n_psi).map(|k| 2.0 * PI * k as f64 / self.n_psi as f64).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QualityConfig {
    pub disc: Disc,
    pub arm: ArmConfig,
    pub solver: SolverConfig,
    /// Arm points with depth `delta >= -contact_tolerance` count as touching.
    pub contact_tolerance: f64,
}

impl Default for QualityConfig {
    fn default() -> Self {
        QualityConfig {
            disc: Disc::default(),
            arm: ArmConfig::default(),
            solver: SolverConfig { steps: 800, relative_cost_tol: 0.0, max_iterations: 20_000, ..SolverConfig::default() },
            contact_tolerance: 1e-2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CellStatus {
    Ok,
    /// The inner solve stopped at the iteration cap; metrics are of its
    /// final admissible iterate.
    NotConverged,
    EmptyContact,
    PlacementFailed,
    SolveFailed,
}

impl CellStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            CellStatus::Ok => "ok",
            CellStatus::NotConverged => "not_converged",
            CellStatus::EmptyContact => "empty_contact",
            CellStatus::PlacementFailed => "placement_failed",
            CellStatus::SolveFailed => "solve_failed",
        }
    }
}

impl std::str::FromStr for CellStatus {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "ok" => CellStatus::Ok,
            "not_converged" => CellStatus::NotConverged,
            "empty_contact" => CellStatus::EmptyContact,
            "placement_failed" => CellStatus::PlacementFailed,
            "solve_failed" => CellStatus::SolveFailed,
            _ => return Err(Error::Domain(format!("unknown cell status {s:?}"))),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub d: f64,
    pub psi: f64,
    pub base: Option<ArmPose>,
    /// Missing whenever no grasp could be evaluated.
    pub metrics: Option<Metrics>,
    pub status: CellStatus,
    pub kappa: Option<GridProfile>,
    /// Final objective of the inner solve.
    pub objective: Option<f64>,
}

impl Cell {
    fn failed(d: f64, psi: f64, base: Option<ArmPose>, status: CellStatus) -> Self {
        Cell { d, psi, base, metrics: None, status, kappa: None, objective: None }
    }

    pub fn value(&self, m: Metric) -> Option<f64> {
        self.metrics.map(|q| q.get(m))
    }
}

#[derive(Debug, Clone)]
pub struct QualityMap {
    pub distances: Vec<f64>,
    pub angles: Vec<f64>,
    /// Row-major by distance.
    pub cells: Vec<Cell>,
}

impl QualityMap {
    pub fn cell(&self, i_d: usize, i_psi: usize) -> &Cell {
        &self.cells[i_d * self.angles.len() + i_psi]
    }

    pub fn row(&self, i_d: usize) -> &[Cell] {
        let n = self.angles.len();
        &self.cells[i_d * n..(i_d + 1) * n]
    }

    /// Mean of a metric over the available cells of each distance row.
    pub fn row_means(&self, m: Metric) -> Vec<Option<f64>> {
        (0..self.distances.len())
            .map(|i| {
                let vals: Vec<f64> = self.row(i).iter().filter_map(|c| c.value(m)).collect();
                (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
            })
            .collect()
    }

    pub fn max_value(&self, m: Metric) -> Option<f64> {
        self.cells.iter().filter_map(|c| c.value(m)).reduce(f64::max)
    }

    pub fn failures(&self) -> usize {
        self.cells.iter().filter(|c| c.metrics.is_none()).count()
    }
}

/// Inner grasp problem for a base pose.
pub fn grasp_spec<'a>(curve: &'a BoundaryCurve, arm: &ArmConfig, pose: ArmPose) -> Result<OcpSpec<'a>> {
    let initial = contact_state_for(curve, pose, None)?;
    Ok(OcpSpec {
        boundary: curve,
        length: arm.length_fraction * curve.len(),
        rho_d: Profile::Constant(arm.rho_d),
        alpha_d: Profile::Constant(arm.alpha_d),
        chi: arm.chi,
        initial,
        radius: RadiusProfile::constant(arm.radius)?,
    })
}

/// Places the base, solves for the grasp and evaluates its metrics.
///
/// A warm-start profile is tried first; if that solve fails or stops short,
/// the configured cold solve runs instead.
pub fn solve_cell(curve: &BoundaryCurve, cfg: &QualityConfig, d: f64, psi: f64, warm: Option<&GridProfile>) -> Cell {
    cell_solve(curve, cfg, d, psi, warm, true).expect("cold fallback always yields a cell")
}

fn cell_solve(
    curve: &BoundaryCurve,
    cfg: &QualityConfig,
    d: f64,
    psi: f64,
    warm: Option<&GridProfile>,
    cold_fallback: bool,
) -> Option<Cell> {
    let Ok(pose) = place_base(curve, d, psi) else {
        return Some(Cell::failed(d, psi, None, CellStatus::PlacementFailed));
    };
    let Ok(spec) = grasp_spec(curve, &cfg.arm, pose) else {
        return Some(Cell::failed(d, psi, Some(pose), CellStatus::PlacementFailed));
    };
    let warm_report = warm.and_then(|k| admissible_warm(&spec, cfg, k)).and_then(|k| {
        let wcfg = SolverConfig { initial_guess: InitialGuess::Profile(k.values), feedback_restart: false, ..cfg.solver.clone() };
        solve(&spec, &wcfg).ok().filter(|r| r.converged)
    });
    let report = match warm_report {
        Some(r) => r,
        None if !cold_fallback => return None,
        None => match solve(&spec, &cfg.solver) {
            Ok(r) => r,
            Err(_) => return Some(Cell::failed(d, psi, Some(pose), CellStatus::SolveFailed)),
        },
    };
    let status = if report.converged { CellStatus::Ok } else { CellStatus::NotConverged };
    let objective = Some(report.final_objective());
    let (metrics, status) = match trajectory_gramian(curve, &report.trajectory, cfg.contact_tolerance) {
        Ok(g) => (Some(g.metrics), status),
        Err(_) => (None, CellStatus::EmptyContact),
    };
    Some(Cell { d, psi, base: Some(pose), metrics, status, kappa: Some(report.kappa), objective })
}

/// A neighbour's profile can leave the admissible set near the base once
/// the base moves. In that case it is blended toward the feedback warm start
/// until the forward pass succeeds.
fn admissible_warm<B: Boundary + ?Sized>(spec: &OcpSpec<'_, B>, cfg: &QualityConfig, warm: &GridProfile) -> Option<GridProfile> {
    let steps = cfg.solver.steps;
    let warm = warm.resample(steps);
    let barrier = spec.barrier(cfg.solver.barrier_weight);
    if evaluate(spec, &warm, &barrier).is_ok() {
        return Some(warm);
    }
    let fb = feedback_warm_start(spec, steps).ok()?;
    [0.75, 0.5, 0.25].into_iter().find_map(|lam| {
        let v = warm.values.iter().zip(&fb.values).map(|(w, f)| lam * w + (1.0 - lam) * f).collect();
        let k = GridProfile::new(warm.h, v);
        evaluate(spec, &k, &barrier).is_ok().then_some(k)
    })
}

/// One distance row: a sequential sweep in `psi`, each cell warm-started
/// from its predecessor, then the chain is carried on around the circle as
/// long as a warm start from the predecessor lowers a cell's objective.
fn sweep_row(curve: &BoundaryCurve, cfg: &QualityConfig, d: f64, angles: &[f64]) -> Vec<Cell> {
    let n = angles.len();
    let mut row: Vec<Cell> = Vec::with_capacity(n);
    for &psi in angles {
        let warm = row.last().and_then(|c| c.kappa.as_ref());
        row.push(solve_cell(curve, cfg, d, psi, warm));
    }
    if n < 2 {
        return row;
    }
    for k in 0..n {
        let prev = &row[(k + n - 1) % n];
        let (Some(kappa), Some(prev_obj)) = (prev.kappa.clone(), prev.objective) else { break };
        let current = row[k].objective.unwrap_or(f64::INFINITY);
        if current <= prev_obj {
            break;
        }
        match cell_solve(curve, cfg, d, angles[k], Some(&kappa), false) {
            Some(cell) if cell.objective.is_some_and(|o| o < current) => row[k] = cell,
            _ => break,
        }
    }
    row
}

/// Quality map over the placement disc. Distance rows run in parallel and
/// each row is swept sequentially, so results do not depend on the thread
/// count.
pub fn quality_map(curve: &BoundaryCurve, cfg: &QualityConfig) -> Result<QualityMap> {
    cfg.disc.validate()?;
    cfg.solver.validate()?;
    let distances = cfg.disc.distances();
    let angles = cfg.disc.angles();
    let rows: Vec<Vec<Cell>> = distances.par_iter().map(|&d| sweep_row(curve, cfg, d, &angles)).collect();
    Ok(QualityMap { distances, angles, cells: rows.into_iter().flatten().collect() })
}

/// Best placement found by the outer search.
#[derive(Debug, Clone)]
pub struct Optimum {
    pub metric: Metric,
    pub d: f64,
    pub psi: f64,
    pub base: ArmPose,
    pub metrics: Metrics,
    pub value: f64,
    pub kappa: GridProfile,
    pub trajectory: ContactTrajectory,
    pub evaluations: usize,
    /// `(d, psi, best value)` reached from each start.
    pub starts: Vec<(f64, f64, f64)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchConfig {
    pub starts: usize,
    pub max_iterations: u64,
    pub seed: u64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig { starts: 5, max_iterations: 40, seed: 0 }
    }
}

struct PlacementProblem<'a> {
    curve: &'a BoundaryCurve,
    cfg: &'a QualityConfig,
    metric: Metric,
    start: (f64, f64),
    start_cell: Cell,
    best: RefCell<Cell>,
    evaluations: RefCell<usize>,
}

impl PlacementProblem<'_> {
    fn cell_at(&self, d: f64, psi: f64) -> Cell {
        if (d, psi) == self.start {
            return self.start_cell.clone();
        }
        *self.evaluations.borrow_mut() += 1;
        let warm = self.best.borrow().kappa.clone();
        solve_cell(self.curve, self.cfg, d, psi, warm.as_ref())
    }
}

impl CostFunction for PlacementProblem<'_> {
    type Param = Vec<f64>;
    type Output = f64;

    fn cost(&self, p: &Vec<f64>) -> std::result::Result<f64, argmin::core::Error> {
        let (d, psi) = (p[0], p[1]);
        let disc = &self.cfg.disc;
        if d < disc.d_min || d > disc.d_max {
            // worse than any feasible placement, sloped back toward the disc
            return Ok(1.0 + (disc.d_min - d).max(d - disc.d_max));
        }
        let cell = self.cell_at(d, psi);
        let Some(v) = cell.value(self.metric) else {
            return Ok(1.0);
        };
        let better = self.best.borrow().value(self.metric).is_none_or(|b| v > b);
        if better {
            *self.best.borrow_mut() = cell;
        }
        Ok(-v)
    }
}

/// Maximizes a quality metric over base placements by Nelder-Mead in
/// `(d, psi)`, multi-started from the best cells of a coarse map.
pub fn maximize_quality(
    curve: &BoundaryCurve,
    cfg: &QualityConfig,
    coarse: &QualityMap,
    metric: Metric,
    search: &SearchConfig,
) -> Result<Optimum> {
    let mut ranked: Vec<&Cell> = coarse.cells.iter().filter(|c| c.value(metric).is_some()).collect();
    ranked.sort_by(|a, b| b.value(metric).unwrap().total_cmp(&a.value(metric).unwrap()));
    ranked.truncate(search.starts.max(1));
    if ranked.is_empty() {
        return Err(Error::OptimizationFailed("no coarse cell produced a grasp".into()));
    }
    let disc = &cfg.disc;
    let dd = if disc.n_d > 1 { (disc.d_max - disc.d_min) / (disc.n_d - 1) as f64 } else { 1.0 };
    let dpsi = 2.0 * PI / disc.n_psi as f64;
    let mut best: Option<Cell> = None;
    let mut evaluations = 0;
    let mut starts = Vec::new();
    for (k, start) in ranked.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(search.seed.wrapping_add(k as u64));
        let theta: f64 = rng.gen_range(0.0..2.0 * PI);
        let (u1, u2): (f64, f64) = (rng.gen_range(0.5..1.5), rng.gen_range(0.5..1.5));
        let x0 = vec![start.d, start.psi];
        let e1 = [0.5 * dd * u1 * theta.cos(), 0.5 * dpsi * u1 * theta.sin()];
        let e2 = [-0.5 * dd * u2 * theta.sin(), 0.5 * dpsi * u2 * theta.cos()];
        let simplex = vec![x0.clone(), vec![x0[0] + e1[0], x0[1] + e1[1]], vec![x0[0] + e2[0], x0[1] + e2[1]]];
        let problem = PlacementProblem {
            curve,
            cfg,
            metric,
            start: (start.d, start.psi),
            start_cell: (*start).clone(),
            best: RefCell::new((*start).clone()),
            evaluations: RefCell::new(0),
        };
        let v0 = start.value(metric).unwrap();
        let solver = NelderMead::new(simplex)
            .with_sd_tolerance(1e-9 * v0.abs().max(f64::MIN_POSITIVE))
            .map_err(|e| Error::OptimizationFailed(e.to_string()))?;
        let run = Executor::new(problem, solver)
            .configure(|state| state.max_iters(search.max_iterations))
            .run()
            .map_err(|e| Error::OptimizationFailed(e.to_string()))?;
        let problem = run.problem.problem.expect("problem returned by executor");
        evaluations += *problem.evaluations.borrow();
        let found = problem.best.into_inner();
        let v = found.value(metric).expect("best cell has metrics");
        starts.push((found.d, wrap_period(found.psi, 2.0 * PI), v));
        if best.as_ref().is_none_or(|b| v > b.value(metric).unwrap()) {
            best = Some(found);
        }
    }
    let best = best.expect("at least one start");
    let kappa = best.kappa.clone().expect("solved cell keeps its curvature");
    let base = best.base.expect("solved cell has a base");
    let spec = grasp_spec(curve, &cfg.arm, base)?;
    let eval = evaluate(&spec, &kappa, &Barrier::none())?;
    let metrics = best.metrics.expect("metrics");
    Ok(Optimum {
        metric,
        d: best.d,
        psi: wrap_period(best.psi, 2.0 * PI),
        base,
        metrics,
        value: metrics.get(metric),
        kappa,
        trajectory: eval.trajectory,
        evaluations,
        starts,
    })
}
