use std::f64::consts::FRAC_PI_2;

use continuum_grasp::contact::ContactState;
use continuum_grasp::curves::{BoundaryCurve, RadiusProfile};
use continuum_grasp::feedback::*;
use continuum_grasp::Vec2;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig { cases: 512, ..ProptestConfig::default() })]

    #[test]
    fn equilibrium_solves_quadratic(kbar in 0.0f64..3.0, offset in 1e-6f64..6.0) {
        let mu2 = -kbar + offset;
        let eq = equilibrium_rho(mu2, kbar).unwrap();
        let (a, b, c) = (kbar, 1.0 - mu2 * kbar, -(mu2 + kbar));
        let r = eq.rho;
        let residual = a * r * r + b * r + c;
        let scale = a.abs().max(b.abs()).max(c.abs()) * r.max(1.0).powi(2);
        prop_assert!(residual.abs() <= 1e-12 * scale, "residual {residual}");
        prop_assert!(r > 0.0);
        // stationarity of V in rho at the equilibrium
        prop_assert!(((r - mu2) - kbar / (1.0 + r * kbar)).abs() < 1e-10 * r.max(1.0));
    }

    #[test]
    fn adaptive_gain_round_trips(r_arm in 0.05f64..3.0, r_obj in 0.3f64..50.0) {
        let eq = equilibrium_rho(adaptive_mu2(r_arm, r_obj), 1.0 / r_obj).unwrap();
        prop_assert!((eq.rho - r_arm).abs() < 1e-10, "{} vs {r_arm}", eq.rho);
        prop_assert!(!eq.ambiguous);
    }
}

#[test]
fn lyapunov_gradient_vanishes_at_equilibrium() {
    let (kbar, mu2) = (0.4, adaptive_mu2(1.0, 2.5));
    let rho = equilibrium_rho(mu2, kbar).unwrap().rho;
    let e = 1e-5;
    let v = |r: f64, a: f64| lyapunov_value(r, a, mu2, kbar).unwrap();
    let dr = (v(rho + e, FRAC_PI_2) - v(rho - e, FRAC_PI_2)) / (2.0 * e);
    let da = (v(rho, FRAC_PI_2 + e) - v(rho, FRAC_PI_2 - e)) / (2.0 * e);
    assert!(dr.abs() < 1e-8 && da.abs() < 1e-8, "{dr} {da}");
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, ..ProptestConfig::default() })]

    #[test]
    fn closed_loop_descends_lyapunov(
        r_obj in 2.0f64..8.0,
        rho_d in 0.5f64..2.0,
        mu1 in 0.5f64..2.0,
        rho0 in 0.5f64..3.0,
        alpha0 in 0.7f64..2.4,
    ) {
        let c = BoundaryCurve::circle(r_obj, Vec2::ZERO, 2048).unwrap();
        let kbar = 1.0 / r_obj;
        let mu2 = adaptive_mu2(rho_d, r_obj);
        let gains = FeedbackGains::constant(mu1, mu2);
        let traj = integrate_closed_loop(&c, &gains, ContactState::new(rho0, alpha0, 0.0), 30.0, 6000, RadiusProfile::constant(0.5).unwrap());
        prop_assume!(traj.is_ok());
        let traj = traj.unwrap();
        let rep = verify_lyapunov_decrease(&traj, mu1, mu2, kbar).unwrap();
        prop_assert!(rep.passed(), "{rep:?}");
    }
}

#[test]
fn terminal_error_shrinks_with_length() {
    let c = BoundaryCurve::circle(2.5, Vec2::ZERO, 4096).unwrap();
    let gains = FeedbackGains::constant(1.0, adaptive_mu2(1.0, 2.5));
    let err = |l: f64| {
        let t = integrate_closed_loop(
            &c,
            &gains,
            ContactState::new(2.0, 1.0, 0.0),
            l,
            (l * 200.0) as usize,
            RadiusProfile::constant(1.0).unwrap(),
        )
        .unwrap()
        .final_state();
        (t.rho - 1.0).abs() + (t.alpha - FRAC_PI_2).abs()
    };
    let errors: Vec<f64> = [5.0, 10.0, 20.0].into_iter().map(err).collect();
    assert!(errors[1] <= 0.5 * errors[0] && errors[2] <= 0.5 * errors[1], "{errors:?}");
}

#[test]
fn equilibrium_start_has_flat_lyapunov() {
    let c = BoundaryCurve::circle(2.5, Vec2::ZERO, 4096).unwrap();
    let mu2 = adaptive_mu2(1.0, 2.5);
    let gains = FeedbackGains::constant(1.0, mu2);
    let traj = integrate_closed_loop(
        &c,
        &gains,
        ContactState::new(1.0, FRAC_PI_2, 0.0),
        20.0,
        2000,
        RadiusProfile::constant(1.0).unwrap(),
    )
    .unwrap();
    let v0 = lyapunov_value(1.0, FRAC_PI_2, mu2, 0.4).unwrap();
    for j in 0..traj.nodes() {
        let v = lyapunov_value(traj.rho[j], traj.alpha[j], mu2, 0.4).unwrap();
        assert!((v - v0).abs() < 1e-10 * traj.h * j.max(1) as f64 + 1e-12);
    }
}
