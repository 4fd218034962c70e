//! Runs a prepared scenario and collects its artifacts.

use std::f64::consts::FRAC_PI_2;

use anyhow::{Context, Result};
use continuum_grasp::contact::{arm_from_trajectory, reconstruct_arm, ContactTrajectory};
use continuum_grasp::curves::{ArmCenterline, ArmPose, BoundaryCurve};
use continuum_grasp::feedback::{integrate_closed_loop, quasi_static_reference};
use continuum_grasp::pmp::{self, Barrier};
use continuum_grasp::profile::GridProfile;
use continuum_grasp::quality::{self, Metric, QualityConfig, QualityMap};

use crate::artifacts::{ArmRow, Artifacts, CostRow, ObjectRow, OptimumRow, QualityRow, ReferenceRow, TrajectoryRow};
use crate::scenario::{FeedbackSetup, GraspSetup, Prepared, PreparedTask};

/// Artifacts plus the one-line summary of a run.
pub struct Outcome {
    pub artifacts: Artifacts,
    pub summary: String,
}

pub fn run(p: &Prepared) -> Result<Outcome> {
    let (mut artifacts, detail) = match &p.task {
        PreparedTask::Grasp(g) => grasp(&p.curve, g)?,
        PreparedTask::Map(cfg) => map(&p.curve, cfg)?,
        PreparedTask::Maximize { cfg, metrics, search } => maximize(&p.curve, cfg, metrics, search)?,
        PreparedTask::Feedback(f) => feedback(&p.curve, f)?,
    };
    artifacts.object = object_rows(&p.curve);
    Ok(Outcome { artifacts, summary: format!("{} {}: {detail}", p.task.kind().as_str(), p.name) })
}

fn object_rows(curve: &BoundaryCurve) -> Vec<ObjectRow> {
    curve.sample_rows().map(|[s_o, x, y, phi, kappa_o]| ObjectRow { s_o, x, y, phi, kappa_o }).collect()
}

fn trajectory_rows(t: &ContactTrajectory) -> Vec<TrajectoryRow> {
    t.rows()
        .map(|[s, rho, alpha, s_o, nu_o, delta, c]| TrajectoryRow { s, rho, alpha, s_o, nu_o, delta, in_contact: c as u8 })
        .collect()
}

fn arm_rows(arm: &ArmCenterline) -> Vec<ArmRow> {
    (0..arm.positions.len())
        .map(|j| ArmRow {
            s: arm.arclength(j),
            x: arm.positions[j].x,
            y: arm.positions[j].y,
            theta: arm.angles[j],
            radius: arm.radius_at(j),
        })
        .collect()
}

fn grasp(curve: &BoundaryCurve, g: &GraspSetup) -> Result<(Artifacts, String)> {
    let spec = g.spec(curve);
    let rep = pmp::solve(&spec, &g.solver).context("optimal grasp solve")?;
    let arm = arm_from_trajectory(curve, &rep.trajectory, |s| rep.kappa.eval(s)).context("arm reconstruction")?;
    let traj = &rep.trajectory;
    let reference = (0..traj.nodes())
        .map(|j| {
            let s = traj.arclength(j);
            ReferenceRow { s, rho_ref: Some(g.rho_d.eval(s, g.length)), alpha_ref: Some(g.alpha_d.eval(s, g.length)) }
        })
        .collect();
    let cost = (0..rep.cost_history.len())
        .map(|k| CostRow {
            iteration: k,
            cost: rep.cost_history[k],
            barrier: rep.barrier_history[k],
            stationarity: rep.gradient_history[k],
        })
        .collect();
    let detail = format!(
        "final cost J = {:.6e} ({:?} after {} iterations, max |kappa + p2| = {:.2e})",
        rep.final_cost(),
        rep.reason,
        rep.iterations,
        rep.stationarity()
    );
    let artifacts = Artifacts {
        trajectory: Some(trajectory_rows(traj)),
        arm: Some(arm_rows(&arm)),
        reference: Some(reference),
        cost: Some(cost),
        ..Artifacts::default()
    };
    Ok((artifacts, detail))
}

fn quality_rows(m: &QualityMap) -> Vec<QualityRow> {
    m.cells
        .iter()
        .map(|c| QualityRow {
            d: c.d,
            psi: c.psi,
            x0: c.base.map(|b| b.position.x),
            y0: c.base.map(|b| b.position.y),
            theta0: c.base.map(|b| b.angle),
            q1: c.value(Metric::Q1),
            q2: c.value(Metric::Q2),
            q3: c.value(Metric::Q3),
            status: c.status.as_str().to_string(),
        })
        .collect()
}

/// Centerline of the grasp solved for a base pose and curvature profile.
fn cell_arm(
    curve: &BoundaryCurve,
    cfg: &QualityConfig,
    base: ArmPose,
    kappa: &GridProfile,
) -> Result<(ContactTrajectory, ArmCenterline)> {
    let spec = quality::grasp_spec(curve, &cfg.arm, base)?;
    let ev = pmp::evaluate(&spec, kappa, &Barrier::none())?;
    let arm = reconstruct_arm(curve, &ev.trajectory, |s| kappa.eval(s), base)?;
    Ok((ev.trajectory, arm))
}

fn best_cell(m: &QualityMap, metric: Metric) -> Option<&quality::Cell> {
    m.cells.iter().filter(|c| c.value(metric).is_some()).fold(None, |best: Option<&quality::Cell>, c| match best {
        Some(b) if b.value(metric) >= c.value(metric) => Some(b),
        _ => Some(c),
    })
}

fn map_summary(m: &QualityMap) -> String {
    let missing = m.cells.iter().filter(|c| c.metrics.is_none()).count();
    let mut parts = Vec::new();
    for metric in Metric::ALL {
        match best_cell(m, metric) {
            Some(c) => parts.push(format!(
                "best {} = {:.6e} at (d, psi) = ({:.4}, {:.4})",
                metric.name(),
                c.value(metric).unwrap_or(f64::NAN),
                c.d,
                c.psi
            )),
            None => parts.push(format!("no {} values", metric.name())),
        }
    }
    format!("{}; {missing} of {} cells missing", parts.join(", "), m.cells.len())
}

fn map(curve: &BoundaryCurve, cfg: &QualityConfig) -> Result<(Artifacts, String)> {
    let m = quality::quality_map(curve, cfg)?;
    let mut overlay_arms = Vec::new();
    for metric in Metric::ALL {
        if let Some(c) = best_cell(&m, metric) {
            let (Some(base), Some(kappa)) = (c.base, c.kappa.as_ref()) else { continue };
            let (_, arm) =
                cell_arm(curve, cfg, base, kappa).with_context(|| format!("arm for the best {} cell", metric.name()))?;
            overlay_arms.push((metric.name().to_string(), arm_rows(&arm)));
        }
    }
    let detail = map_summary(&m);
    Ok((Artifacts { quality: Some(quality_rows(&m)), overlay_arms, ..Artifacts::default() }, detail))
}

fn maximize(
    curve: &BoundaryCurve,
    cfg: &QualityConfig,
    metrics: &[Metric],
    search: &quality::SearchConfig,
) -> Result<(Artifacts, String)> {
    let coarse = quality::quality_map(curve, cfg)?;
    let mut optimum = Vec::new();
    let mut overlay_arms = Vec::new();
    let mut parts = Vec::new();
    for &metric in metrics {
        let opt = quality::maximize_quality(curve, cfg, &coarse, metric, search)
            .with_context(|| format!("maximizing {}", metric.name()))?;
        let arm = reconstruct_arm(curve, &opt.trajectory, |s| opt.kappa.eval(s), opt.base)?;
        overlay_arms.push((metric.name().to_string(), arm_rows(&arm)));
        optimum.push(OptimumRow {
            metric: metric.name().to_string(),
            d: opt.d,
            psi: opt.psi,
            x0: opt.base.position.x,
            y0: opt.base.position.y,
            theta0: opt.base.angle,
            q1: opt.metrics.q1,
            q2: opt.metrics.q2,
            q3: opt.metrics.q3,
            evaluations: opt.evaluations,
        });
        parts.push(format!("best {} = {:.6e} at (d, psi) = ({:.4}, {:.4})", metric.name(), opt.value, opt.d, opt.psi));
    }
    let artifacts =
        Artifacts { quality: Some(quality_rows(&coarse)), optimum: Some(optimum), overlay_arms, ..Artifacts::default() };
    Ok((artifacts, parts.join(", ")))
}

fn feedback(curve: &BoundaryCurve, f: &FeedbackSetup) -> Result<(Artifacts, String)> {
    let traj =
        integrate_closed_loop(curve, &f.gains, f.initial, f.length, f.steps, f.radius).context("closed-loop integration")?;
    let kappa = GridProfile::new(traj.h, traj.kappa.clone());
    let arm = arm_from_trajectory(curve, &traj, |s| kappa.eval(s)).context("arm reconstruction")?;
    let eq = quasi_static_reference(&traj, &f.gains);
    let reference = eq
        .iter()
        .enumerate()
        .map(|(j, r)| ReferenceRow { s: traj.arclength(j), rho_ref: *r, alpha_ref: Some(FRAC_PI_2) })
        .collect();
    let end = traj.final_state();
    let rho_err = eq
        .last()
        .copied()
        .flatten()
        .map_or("undefined (no admissible equilibrium)".to_string(), |r| format!("{:.6e}", (end.rho - r).abs()));
    let detail =
        format!("terminal tracking error |rho - rho_eq| = {rho_err}, |alpha - pi/2| = {:.6e}", (end.alpha - FRAC_PI_2).abs());
    let artifacts = Artifacts {
        trajectory: Some(trajectory_rows(&traj)),
        arm: Some(arm_rows(&arm)),
        reference: Some(reference),
        ..Artifacts::default()
    };
    Ok((artifacts, detail))
}
