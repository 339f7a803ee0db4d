use std::f64::consts::{PI, TAU};
use std::sync::OnceLock;

use proptest::prelude::*;

use impulsive_core::dynamics::{impulse_map, inverse_impulse_map, SpecDocument};
use impulsive_core::fixed_point::norm;
use impulsive_core::harmonic::{find_harmonic, HarmonicSearch};
use impulsive_core::integrator::{flow, poincare};
use impulsive_core::oracle::{det, oracle_flow, oracle_poincare, LinearOracleSpec};
use impulsive_core::rotation::{track_angle, winding, ORIGIN_GUARD};
use impulsive_core::subharmonic::{
    build_translated_system, classify, classify_annulus, HarmonicOrbit, SyntheticTwist,
    TranslatedSystem, TwistMap, TwistParams, DEFAULT_QUAD_ORDER,
};
use impulsive_core::{
    CartesianState, Forcing, IntegratorConfig, RestoringForce, Side, SystemSpec,
};

fn forced(a: f64, t1: f64) -> SystemSpec {
    SystemSpec::new(
        RestoringForce::Asinh,
        Forcing::Cosine { amplitude: 0.5, phase: 0.0 },
        a,
        vec![t1],
    )
    .unwrap()
}

fn translated() -> &'static TranslatedSystem {
    static TS: OnceLock<TranslatedSystem> = OnceLock::new();
    TS.get_or_init(|| {
        let spec = forced(0.2, PI);
        let cfg = IntegratorConfig::default();
        let sol = find_harmonic(&spec, 2.44140625, &cfg, &HarmonicSearch::default()).unwrap();
        let z = sol.fixed_point.z;
        let orbit = HarmonicOrbit::from_fixed_point(&spec, z, sol.fixed_point.residual, &cfg, 1e-6).unwrap();
        build_translated_system(&spec, orbit, DEFAULT_QUAD_ORDER).unwrap()
    })
}

fn polar(r: f64, ang: f64) -> [f64; 2] {
    [r * ang.cos(), r * ang.sin()]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn impulse_then_inverse_is_identity(a in -0.9f64..3.0, x in -1e3f64..1e3, y in -1e3f64..1e3) {
        let spec = forced(a, 1.0);
        let pre = CartesianState::new(1.0, x, y).with_side(Side::PreImpulse);
        let back = inverse_impulse_map(&spec, &impulse_map(&spec, &pre).unwrap()).unwrap();
        let scale = norm([x, y]).max(1e-300);
        prop_assert!(norm([back.x - x, back.y - y]) <= 4.0 * f64::EPSILON * scale);
        prop_assert_eq!(back.side, Side::PreImpulse);
    }

    #[test]
    fn tracked_angle_is_continuous_across_jumps(
        a in -0.5f64..2.0,
        t1 in 0.3f64..6.0,
        r in 0.5f64..30.0,
        ang in 0.0f64..TAU,
    ) {
        let spec = forced(a, t1);
        let z0 = polar(r, ang);
        let traj = flow(&spec, CartesianState::new(0.0, z0[0], z0[1]), 2.0 * TAU, &IntegratorConfig::default()).unwrap();
        let rec = track_angle(&traj, ORIGIN_GUARD).unwrap();
        let mut jumps = 0;
        for (i, w) in traj.samples.windows(2).enumerate() {
            if w[0].side == Side::PreImpulse && w[1].side == Side::PostImpulse {
                jumps += 1;
                prop_assert_eq!(rec.theta[i].to_bits(), rec.theta[i + 1].to_bits());
                let ratio = w[1].radius() / w[0].radius();
                prop_assert!(((ratio - (1.0 + a)) / (1.0 + a)).abs() <= 1e-15);
            }
        }
        prop_assert_eq!(jumps, 2);
    }

    #[test]
    fn winding_is_additive(r in 0.5f64..40.0, ang in 0.0f64..TAU) {
        let spec = forced(0.2, PI);
        let cfg = IntegratorConfig::default();
        let z0 = polar(r, ang);
        let both = winding(&spec, z0, 2, &cfg, ORIGIN_GUARD).unwrap().delta_theta;
        let first = winding(&spec, z0, 1, &cfg, ORIGIN_GUARD).unwrap().delta_theta;
        let z1 = poincare(&spec, z0, 1, &cfg).unwrap();
        let second = winding(&spec, z1, 1, &cfg, ORIGIN_GUARD).unwrap().delta_theta;
        prop_assert!((both - first - second).abs() <= 1e-7, "{} vs {}", both, first + second);
    }

    #[test]
    fn poincare_iterates_compose(r in 0.5f64..20.0, ang in 0.0f64..TAU) {
        let spec = forced(0.2, PI);
        let cfg = IntegratorConfig::default();
        let z0 = polar(r, ang);
        let twice = poincare(&spec, z0, 2, &cfg).unwrap();
        let step = poincare(&spec, poincare(&spec, z0, 1, &cfg).unwrap(), 1, &cfg).unwrap();
        prop_assert!(norm([twice[0] - step[0], twice[1] - step[1]]) <= 1e-8 * norm(twice).max(1.0));
    }

    #[test]
    fn oracle_determinant_scales_with_the_jumps(
        omega in 0.2f64..3.0,
        a in -0.5f64..1.0,
        k in 1usize..4,
        n in 1usize..5,
    ) {
        let times: Vec<f64> = (0..k).map(|j| TAU * (j as f64 + 0.5) / k as f64).collect();
        let spec = LinearOracleSpec::new(omega, a, times).unwrap();
        let m = oracle_poincare(&spec, n).unwrap();
        let expect = (1.0 + a).powi((2 * k * n) as i32);
        prop_assert!(((det(&m) - expect) / expect).abs() <= 1e-12);
    }

    #[test]
    fn integrator_tracks_the_oracle(
        omega in 0.3f64..2.5,
        a in 0.0f64..1.0,
        t1 in 0.1f64..6.1,
        r in 0.1f64..10.0,
        ang in 0.0f64..TAU,
        t_end in 0.1f64..TAU,
    ) {
        let spec = LinearOracleSpec::new(omega, a, vec![t1]).unwrap();
        let z0 = polar(r, ang);
        let traj = flow(&spec.system(), CartesianState::new(0.0, z0[0], z0[1]), t_end, &IntegratorConfig::default()).unwrap();
        let got = traj.final_point();
        let want = oracle_flow(&spec, z0, t_end).unwrap();
        prop_assert!(norm([got[0] - want[0], got[1] - want[1]]) <= 1e-9 * norm(want));
    }

    #[test]
    fn stiffness_is_positive_and_consistent(t in 0.0f64..TAU, lu in -3.0f64..6.0, neg in any::<bool>()) {
        let ts = translated();
        let u = if neg { -(10f64.powf(lu)) } else { 10f64.powf(lu) };
        let xbar = ts.orbit().at(t)[0];
        let q = ts.stiffness_quadrature(xbar, u);
        let d = ts.stiffness_quotient(xbar, u);
        prop_assert!(q > 0.0 && d > 0.0);
        prop_assert!((q - d).abs() <= 1e-9, "u = {}: {} vs {}", u, q, d);
    }

    #[test]
    fn annulus_grid_agrees_with_pointwise_classification(lambda in 0.5f64..1.5, n_r in 2usize..10, n_t in 1usize..12) {
        let (c, e) = (1.0, 3.0);
        let params = TwistParams::default();
        let map = SyntheticTwist::ExpandingRotation { c, e, lambda };
        let grid = classify_annulus(&map, c, e, n_r, n_t, &params).unwrap();
        prop_assert_eq!(grid.len(), n_r * n_t);
        for s in &grid {
            let z = [s.x, s.y];
            let ev = map.evaluate(z).unwrap();
            prop_assert_eq!((s.in_e, s.in_j), classify(z, &ev, c, &params));
            prop_assert!(s.rho >= c && s.rho <= e);
        }
    }

    #[test]
    fn spec_documents_round_trip(a in -0.9f64..2.0, amp in -2.0f64..2.0, t1 in 0.0f64..6.28) {
        let spec = forced(a, t1).with_forcing(Forcing::Cosine { amplitude: amp, phase: 0.25 });
        let doc = spec.document().unwrap();
        let text = serde_json::to_string(&doc).unwrap();
        let back = SpecDocument::from_json(&text).unwrap().build().unwrap();
        prop_assert_eq!(back.hash(), spec.hash());
        prop_assert_eq!(back.document().unwrap(), doc);
    }
}
