use std::f64::consts::PI;

use continuum_grasp::contact::ContactSet;
use continuum_grasp::curves::{BoundaryCurve, DEFAULT_SAMPLES};
use continuum_grasp::eigen::{eigen_sym3, eigenvalues_sym3, mat_vec, Mat3};
use continuum_grasp::quality::*;
use continuum_grasp::Vec2;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Roots of the characteristic cubic by the trigonometric formula, descending.
fn cubic_roots(a: &Mat3) -> [f64; 3] {
    let p1 = a[0][1].powi(2) + a[0][2].powi(2) + a[1][2].powi(2);
    let q = (a[0][0] + a[1][1] + a[2][2]) / 3.0;
    let p2 = (a[0][0] - q).powi(2) + (a[1][1] - q).powi(2) + (a[2][2] - q).powi(2) + 2.0 * p1;
    let p = (p2 / 6.0).sqrt();
    if p == 0.0 {
        return [q; 3];
    }
    let mut b = *a;
    for (i, row) in b.iter_mut().enumerate() {
        for (j, x) in row.iter_mut().enumerate() {
            *x = (a[i][j] - if i == j { q } else { 0.0 }) / p;
        }
    }
    let det = b[0][0] * (b[1][1] * b[2][2] - b[1][2] * b[2][1]) - b[0][1] * (b[1][0] * b[2][2] - b[1][2] * b[2][0])
        + b[0][2] * (b[1][0] * b[2][1] - b[1][1] * b[2][0]);
    let phi = (det / 2.0).clamp(-1.0, 1.0).acos() / 3.0;
    let e1 = q + 2.0 * p * phi.cos();
    let e3 = q + 2.0 * p * (phi + 2.0 * PI / 3.0).cos();
    [e1, 3.0 * q - e1 - e3, e3]
}

#[allow(clippy::needless_range_loop)]
fn random_sym(rng: &mut ChaCha8Rng) -> Mat3 {
    let mut m = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in i..3 {
            let v = rng.gen_range(-10.0..10.0);
            m[i][j] = v;
            m[j][i] = v;
        }
    }
    m
}

#[test]
fn eigenvalues_match_cubic_formula() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..100 {
        let m = random_sym(&mut rng);
        let jac = eigenvalues_sym3(&m);
        let cub = cubic_roots(&m);
        let scale = jac.iter().map(|x| x.abs()).fold(0.0, f64::max);
        for k in 0..3 {
            assert!((jac[k] - cub[k]).abs() <= 1e-9 * scale, "{m:?}: {jac:?} vs {cub:?}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 256, ..ProptestConfig::default() })]

    #[test]
    fn eigenpairs_have_small_residuals(seed in any::<u64>()) {
        let m = random_sym(&mut ChaCha8Rng::seed_from_u64(seed));
        let e = eigen_sym3(&m);
        let norm = m.iter().flatten().map(|x| x * x).sum::<f64>().sqrt();
        for k in 0..3 {
            let mv = mat_vec(&m, &e.vectors[k]);
            let r = (0..3).map(|i| (mv[i] - e.values[k] * e.vectors[k][i]).powi(2)).sum::<f64>().sqrt();
            prop_assert!(r <= 1e-9 * norm);
        }
    }
}

fn ellipse() -> BoundaryCurve {
    BoundaryCurve::ellipse(8.0, 4.0, Vec2::new(0.7, -0.4), DEFAULT_SAMPLES).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 48, ..ProptestConfig::default() })]

    #[test]
    fn gramian_invariants(a in 0.0f64..38.0, len in 0.05f64..30.0, gap in 0.0f64..5.0, len2 in 0.0f64..6.0) {
        let c = ellipse();
        let mut intervals = vec![(a, a + len)];
        if len2 > 0.0 {
            intervals.push((a + len + gap + 1e-3, a + len + gap + 1e-3 + len2));
        }
        let g = gramian(&c, &ContactSet { intervals }, |s| s, 0.05).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                prop_assert_eq!(g.w[i][j], g.w[j][i]);
            }
        }
        let trace = g.w[0][0] + g.w[1][1] + g.w[2][2];
        prop_assert!(g.eigenvalues().iter().all(|l| l / trace >= -1e-10));
        let [l1, l2, l3] = g.eigenvalues();
        let prod = l1 * l2 * l3;
        prop_assert!((g.metrics.q2 - prod).abs() <= 1e-8 * prod.abs().max(f64::MIN_POSITIVE));
        prop_assert!((0.0..=1.0).contains(&g.metrics.q3));
    }

    #[test]
    fn force_block_is_translation_invariant(tx in -5.0f64..5.0, ty in -5.0f64..5.0, a in 0.0f64..30.0, len in 1.0f64..20.0) {
        let c0 = BoundaryCurve::ellipse(8.0, 4.0, Vec2::ZERO, 2048).unwrap();
        let c1 = BoundaryCurve::ellipse(8.0, 4.0, Vec2::new(tx, ty), 2048).unwrap();
        let set = ContactSet { intervals: vec![(a, a + len)] };
        let w0 = gramian(&c0, &set, |s| s, 0.05).unwrap().w;
        let w1 = gramian(&c1, &set, |s| s, 0.05).unwrap().w;
        for i in 0..2 {
            for j in 0..2 {
                prop_assert!((w0[i][j] - w1[i][j]).abs() <= 1e-9 * len);
            }
        }
        // gamma^perp shifts by t^perp = (-ty, tx)
        prop_assert!((w1[0][2] - (w0[0][2] - ty * len)).abs() <= 1e-8 * len * 10.0);
        prop_assert!((w1[1][2] - (w0[1][2] + tx * len)).abs() <= 1e-8 * len * 10.0);
    }

    #[test]
    fn power_iteration_agrees_with_gramian(a in 0.0f64..38.0, len in 0.5f64..30.0) {
        let c = ellipse();
        let rep = singular_values_check(&c, &ContactSet { intervals: vec![(a, a + len)] }, |s| s, 0.1).unwrap();
        prop_assert!(rep.top_relative_error < 1e-4, "{:?}", rep);
    }
}

#[test]
fn half_circle_wrench_matches_dense_sum() {
    let r = 5.0;
    let c = BoundaryCurve::circle(r, Vec2::ZERO, DEFAULT_SAMPLES).unwrap();
    let set = ContactSet { intervals: vec![(0.0, PI * r)] };
    let step = 0.05;
    let w = continuum_wrench(&c, &set, |s| s, |_| [0.0, 1.0], step).unwrap();
    // midpoint sum on the analytic arc at ten times the resolution
    let n = (10.0 * PI * r / step).ceil() as usize * 10;
    let dth = PI / n as f64;
    let mut dense = [0.0; 3];
    for k in 0..n {
        let th = (k as f64 + 0.5) * dth;
        let gamma = Vec2::new(r * th.cos(), r * th.sin());
        let g = point_grasp_map(gamma, th + PI / 2.0).apply([0.0, 1.0]);
        for i in 0..3 {
            dense[i] += g[i] * r * dth;
        }
    }
    for i in 0..3 {
        assert!((w[i] - dense[i]).abs() < 1e-6, "{w:?} vs {dense:?}");
    }
}

#[test]
fn gramian_is_converged_in_quadrature() {
    let c = BoundaryCurve::circle(5.0, Vec2::ZERO, DEFAULT_SAMPLES).unwrap();
    let cfg = QualityConfig::default();
    let cell = solve_cell(&c, &cfg, 3.0, 0.0, None);
    assert_eq!(cell.status, CellStatus::Ok);
    let base = cell.base.unwrap();
    let kappa = cell.kappa.unwrap();
    let initial = continuum_grasp::contact::contact_state_for(&c, base, None).unwrap();
    let traj = continuum_grasp::contact::integrate_contact(
        &c,
        |s| kappa.eval(s),
        initial,
        c.len() / 2.0,
        kappa.steps(),
        continuum_grasp::curves::RadiusProfile::constant(1.0).unwrap(),
    )
    .unwrap();
    let contact = traj.contact_set_with_tolerance(cfg.contact_tolerance);
    let coarse = gramian(&c, &contact, |s| traj.shadow_arclength(s), traj.h).unwrap();
    let fine = gramian(&c, &contact, |s| traj.shadow_arclength(s), traj.h / 2.0).unwrap();
    for m in Metric::ALL {
        let (a, b) = (coarse.metrics.get(m), fine.metrics.get(m));
        assert!((a - b).abs() <= 1e-6 * b.abs(), "{}: {a} vs {b}", m.name());
    }
    let stored = cell.metrics.unwrap();
    for m in Metric::ALL {
        assert!((coarse.metrics.get(m) - stored.get(m)).abs() <= 1e-9 * stored.get(m).abs());
    }
}

#[test]
fn unreachable_cells_are_missing_not_zero() {
    let c = BoundaryCurve::circle(5.0, Vec2::ZERO, DEFAULT_SAMPLES).unwrap();
    let cfg = QualityConfig { disc: Disc { d_min: 13.0, d_max: 13.0, n_d: 1, n_psi: 2 }, ..QualityConfig::default() };
    let map = quality_map(&c, &cfg).unwrap();
    for cell in &map.cells {
        assert_eq!(cell.status, CellStatus::EmptyContact);
        assert!(cell.metrics.is_none());
    }
    assert_eq!(map.row_means(Metric::Q1), vec![None]);
}

// Arms always wrap counterclockwise, so mirror images are not grid cells;
// a half turn about the center is.
#[test]
fn ellipse_map_has_half_turn_symmetry() {
    let c = BoundaryCurve::ellipse(8.0, 4.0, Vec2::ZERO, DEFAULT_SAMPLES).unwrap();
    let cfg = QualityConfig { disc: Disc { d_min: 3.0, d_max: 3.0, n_d: 1, n_psi: 16 }, ..QualityConfig::default() };
    let map = quality_map(&c, &cfg).unwrap();
    let n = map.angles.len();
    let mut compared = 0;
    for k in 0..n / 2 {
        for m in Metric::ALL {
            let (Some(v), Some(w)) = (map.cell(0, k).value(m), map.cell(0, k + n / 2).value(m)) else { continue };
            assert!((v - w).abs() <= 1e-3 * v.abs().max(w.abs()), "{} at psi index {k}: {v} vs {w}", m.name());
            compared += 1;
        }
    }
    assert!(compared >= 3 * n / 2 - 3, "only {compared} pairs");
}

#[test]
fn circle_optimum_sits_at_closest_distance() {
    let c = BoundaryCurve::circle(5.0, Vec2::ZERO, DEFAULT_SAMPLES).unwrap();
    let cfg = QualityConfig { disc: Disc { d_min: 3.0, d_max: 13.0, n_d: 3, n_psi: 4 }, ..QualityConfig::default() };
    let coarse = quality_map(&c, &cfg).unwrap();
    let search = SearchConfig { starts: 2, max_iterations: 10, seed: 1 };
    let opt = maximize_quality(&c, &cfg, &coarse, Metric::Q1, &search).unwrap();
    let best_coarse = coarse.max_value(Metric::Q1).unwrap();
    assert!(opt.value >= best_coarse, "{} < {best_coarse}", opt.value);
    assert!(opt.d < 3.0 + 0.5 * (13.0 - 3.0) / 2.0, "d* = {}", opt.d);
    assert_eq!(opt.trajectory.nodes(), opt.kappa.values.len());
}
