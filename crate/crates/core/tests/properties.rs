use std::f64::consts::PI;
use std::sync::Arc;

use conelab_core::cone::{advected_vorticity_check, curl_identity_residual, CHECK_RADII};
use conelab_core::dynamics::{ch2_rhs, Ch2State, ChState, Evolve};
use conelab_core::euler::{ch2_lift_residual, divergence_report, euler_consistency_residual, random_band_limited};
use conelab_core::peakon::{peakon_run, CollisionRule, GreenKernel, PeakonEnsemble};
use conelab_core::warped::curvature::{cone_sectional_numerator, CurvatureReading};
use conelab_core::warped::{conserved_c, integrate_geodesic, kinetic_energy, GeodesicState, Quadratic, Reciprocal};
use conelab_core::warped::WarpedConfig;
use conelab_core::{Grid1D, PeriodicField};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn random_field(n: usize, kmax: usize, seed: u64) -> PeriodicField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    random_band_limited(Grid1D::periodic(n).unwrap(), kmax, &mut rng)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn divergence_vanishes_for_any_velocity(seed in 0u64..10_000, kmax in 1usize..40) {
        let u = random_field(128, kmax, seed);
        prop_assert!(divergence_report(&u, &CHECK_RADII).unwrap().linf <= 1e-10);
    }

    #[test]
    fn ch_tendencies_satisfy_every_lifted_identity(seed in 0u64..10_000, kmax in 1usize..30) {
        let u = random_field(256, kmax, seed);
        let s = ChState::from_velocity(&u, 0.5).unwrap();
        let (u, ut) = (s.velocity(), s.velocity_tendency());
        prop_assert!(euler_consistency_residual(&u, &ut).unwrap().l2 <= 1e-9);
        prop_assert!(advected_vorticity_check(&u, &ut).unwrap() <= 1e-9);
        prop_assert!(curl_identity_residual(&u) <= 1e-10);
    }

    #[test]
    fn perturbed_tendencies_are_detected(seed in 0u64..10_000, eps in 1e-3f64..1e-1) {
        let u = random_field(128, 10, seed);
        let s = ChState::from_velocity(&u, 0.5).unwrap();
        let ut = s.velocity_tendency();
        let bump = PeriodicField::from_fn(*u.grid(), |x| eps * (2.0 * x).cos());
        let rep = euler_consistency_residual(&s.velocity(), &(&ut + &bump)).unwrap();
        prop_assert!(rep.l2_abs > 0.1 * eps);
    }

    #[test]
    fn ch2_lift_vanishes_on_ch2_tendencies(seed in 0u64..10_000, gravity in 0.1f64..4.0) {
        let u = random_field(128, 12, seed);
        let wobble = random_field(128, 6, seed + 1);
        let rho = wobble.scale(0.3 / wobble.max_abs().max(1e-12)).map(|v| v + 1.0);
        let s = Ch2State::from_velocity(&u, rho, 0.5, gravity).unwrap();
        let (mt, rhot) = ch2_rhs(&s).unwrap();
        let rep = ch2_lift_residual(&s.velocity(), &s.rho, &mt.helmholtz_inv(0.5), &rhot, 0.5, gravity, Some(8)).unwrap();
        prop_assert!(rep.dx.l2 <= 1e-9 && rep.dy.l2 <= 1e-9);
        prop_assert!(rep.grid2d_deviation.unwrap() <= 1e-11);
    }

    #[test]
    fn curvature_pairing_is_symmetric_and_degenerate_on_lines(
        theta in 0.0f64..(2.0 * PI),
        r in 0.2f64..5.0,
        x in prop::array::uniform3(-1.0f64..1.0),
        y in prop::array::uniform3(-1.0f64..1.0),
        s in -2.0f64..2.0,
    ) {
        let p = [theta, r, 0.3];
        let reading = CurvatureReading::WarpingFunction;
        let xy = cone_sectional_numerator(&p, &x, &y, reading).unwrap();
        let yx = cone_sectional_numerator(&p, &y, &x, reading).unwrap();
        prop_assert!((xy - yx).abs() <= 1e-9 * (1.0 + xy.abs()));
        let line = [s * x[0], s * x[1], s * x[2]];
        let scale = cone_sectional_numerator(&p, &x, &[0.0, 1.0, 0.0], reading).unwrap().abs() + 1.0;
        prop_assert!(cone_sectional_numerator(&p, &x, &line, reading).unwrap().abs() <= 1e-9 * scale * r.powi(-10).max(1.0));
    }

    #[test]
    fn warped_geodesics_keep_their_invariants(x0 in -1.0f64..1.0, v0 in -1.0f64..1.0, yd in 0.1f64..2.0) {
        let v = Arc::new(Quadratic { offset: 1.0, stiffness: vec![1.0] });
        let c = WarpedConfig::flat(1, 1, Arc::new(Reciprocal(v))).unwrap();
        let s0 = GeodesicState { x: vec![x0], xdot: vec![v0], y: vec![0.0], ydot: vec![yd], t: 0.0 };
        let path = integrate_geodesic(&s0, &c, 1e-3, 2.0).unwrap();
        let (c0, e0) = (conserved_c(&s0, &c), kinetic_energy(&s0, &c));
        for s in &path {
            prop_assert!((conserved_c(s, &c) - c0).abs() <= 1e-9 * c0);
            prop_assert!((kinetic_energy(s, &c) - e0).abs() <= 1e-9 * e0);
        }
    }

    #[test]
    fn peakon_invariants(q1 in 0.5f64..2.5, gap in 1.5f64..3.0, p1 in 0.2f64..1.5, p2 in 0.2f64..1.5) {
        let kernel = GreenKernel::circle(0.5, 2.0 * PI).unwrap();
        let e = PeakonEnsemble::new(vec![q1, q1 + gap], vec![p1, p2], kernel).unwrap();
        let traj = peakon_run(&e, 1e-3, 0.5, CollisionRule::default()).unwrap();
        let rec = traj.records();
        let (h0, m0) = (rec[0].hamiltonian, e.total_momentum());
        for r in &rec {
            prop_assert!((r.hamiltonian - h0).abs() <= 1e-9 * h0);
        }
        let last = traj.ensemble_at_index(rec.len() - 1);
        prop_assert!((last.total_momentum() - m0).abs() <= 1e-12 * m0);
    }
}
