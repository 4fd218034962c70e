#![allow(dead_code)]

use std::f64::consts::FRAC_PI_2;

use continuum_grasp::contact::{ContactState, ContactTrajectory};
use continuum_grasp::curves::{BoundaryCurve, RadiusProfile, DEFAULT_SAMPLES};
use continuum_grasp::pmp::OcpSpec;
use continuum_grasp::profile::{GridProfile, Profile};
use continuum_grasp::Vec2;

pub struct Scenario {
    pub name: &'static str,
    pub curve: BoundaryCurve,
    pub rho0: f64,
    pub alpha0: f64,
}

pub fn circle() -> Scenario {
    Scenario { name: "circle", curve: BoundaryCurve::circle(5.0, Vec2::ZERO, DEFAULT_SAMPLES).unwrap(), rho0: 5.0, alpha0: 1.6 }
}

pub fn ellipse() -> Scenario {
    Scenario {
        name: "ellipse",
        curve: BoundaryCurve::ellipse(8.0, 4.0, Vec2::ZERO, DEFAULT_SAMPLES).unwrap(),
        rho0: 5.3,
        alpha0: 1.8,
    }
}

pub fn deformed() -> Scenario {
    Scenario {
        name: "deformed",
        curve: BoundaryCurve::deformed_circle(5.0, 0.15, 3, Vec2::ZERO, DEFAULT_SAMPLES).unwrap(),
        rho0: 4.7,
        alpha0: 1.4,
    }
}

pub fn all() -> Vec<Scenario> {
    vec![circle(), ellipse(), deformed()]
}

impl Scenario {
    /// Grasp problem with arm length 2/3 of the perimeter and a tapered target distance.
    pub fn spec(&self) -> OcpSpec<'_> {
        let l = 2.0 * self.curve.len() / 3.0;
        OcpSpec {
            boundary: &self.curve,
            length: l,
            rho_d: Profile::Linear { start: l / 20.0, end: l / 200.0 },
            alpha_d: Profile::Constant(FRAC_PI_2),
            chi: 10.0,
            initial: ContactState::new(self.rho0, self.alpha0, 0.0),
            radius: RadiusProfile::standard_taper(l),
        }
    }
}

/// Tracking errors over the distal half of the arm.
pub struct Tracking {
    pub mean_rho_rel: f64,
    pub mean_alpha: f64,
    /// Relative L2 distance of the arm curvature from `kappa_o / (1 + rho kappa_o)`.
    pub kappa_rel: f64,
}

pub fn tracking(spec: &OcpSpec<'_>, traj: &ContactTrajectory, kappa: &GridProfile) -> Tracking {
    let n = traj.nodes();
    let (mut er, mut ea, mut num, mut den) = (0.0, 0.0, 0.0, 0.0);
    let start = n / 2;
    for j in start..n {
        let s = traj.arclength(j);
        er += (traj.rho[j] / spec.rho_d.eval(s, spec.length) - 1.0).abs();
        ea += (traj.alpha[j] - FRAC_PI_2).abs();
        let k_ref = traj.kappa_o[j] / (1.0 + traj.rho[j] * traj.kappa_o[j]);
        num += (kappa.values[j] - k_ref).powi(2);
        den += k_ref * k_ref;
    }
    let m = (n - start) as f64;
    Tracking { mean_rho_rel: er / m, mean_alpha: ea / m, kappa_rel: (num / den).sqrt() }
}

/// Spearman rank correlation.
pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    fn ranks(v: &[f64]) -> Vec<f64> {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
        let mut r = vec![0.0; v.len()];
        let mut i = 0;
        while i < idx.len() {
            let mut j = i;
            while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
                j += 1;
            }
            let avg = 0.5 * (i + j) as f64 + 1.0;
            for k in i..=j {
                r[idx[k]] = avg;
            }
            i = j + 1;
        }
        r
    }
    let (rx, ry) = (ranks(x), ranks(y));
    let n = x.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    cov / (vx * vy).sqrt()
}
