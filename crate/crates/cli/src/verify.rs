//! Oracle and invariant checks behind the `verify` command.

use std::f64::consts::{PI, TAU};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use impulsive_core::dynamics::{impulse_map, inverse_impulse_map};
use impulsive_core::integrator::{flow, poincare};
use impulsive_core::oracle::{det, oracle_flow, oracle_poincare, LinearOracleSpec};
use impulsive_core::report::{to_json_string, Envelope};
use impulsive_core::rotation::{track_angle, winding, ORIGIN_GUARD};
use impulsive_core::{
    CartesianState, Forcing, IntegratorConfig, RestoringForce, Side, SystemSpec, Trajectory,
};

use crate::VerdictFailed;

pub const CONSERVATION_REL_TOL: f64 = 1e-12;
pub const CONSERVATION_ABS_TOL: f64 = 1e-14;

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub cases: usize,
    /// Largest observed error.
    pub worst: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl Check {
    fn new(name: &'static str, errors: &[f64], tolerance: f64) -> Self {
        let worst = errors.iter().copied().fold(0.0, f64::max);
        let finite = errors.iter().all(|e| e.is_finite());
        Self {
            name,
            cases: errors.len(),
            worst,
            tolerance,
            pass: finite && !errors.is_empty() && worst <= tolerance,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct VerifyReport {
    pub seed: u64,
    pub checks: Vec<Check>,
    pub pass: bool,
}

fn rel_err(a: [f64; 2], b: [f64; 2]) -> f64 {
    let diff = (a[0] - b[0]).hypot(a[1] - b[1]);
    diff / b[0].hypot(b[1]).max(1e-300)
}

fn random_schedule(rng: &mut ChaCha8Rng, k: usize) -> Vec<f64> {
    let mut t: Vec<f64> = (0..k).map(|_| rng.gen_range(0.05..TAU - 0.05)).collect();
    t.sort_by(f64::total_cmp);
    t.dedup_by(|a, b| (*a - *b).abs() < 1e-3);
    t
}

/// Angle mismatches and radius-ratio errors over every jump of `traj`.
fn jump_errors(traj: &Trajectory, a: f64, angles: &mut Vec<f64>, ratios: &mut Vec<f64>) -> anyhow::Result<()> {
    let rec = track_angle(traj, ORIGIN_GUARD)?;
    for (i, w) in traj.samples.windows(2).enumerate() {
        if w[0].side == Side::PreImpulse && w[1].side == Side::PostImpulse {
            let same = rec.theta[i].to_bits() == rec.theta[i + 1].to_bits();
            angles.push(if same { 0.0 } else { 1.0 });
            let ratio = w[1].radius() / w[0].radius();
            ratios.push(((ratio - (1.0 + a)) / (1.0 + a)).abs());
        }
    }
    Ok(())
}

pub fn run_suite(seed: u64) -> anyhow::Result<VerifyReport> {
    let cfg = IntegratorConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut checks = Vec::new();

    // Closed-form examples.
    let ex = [
        rel_err(oracle_flow(&LinearOracleSpec::new(1.0, 0.0, vec![])?, [1.0, 0.0], PI / 2.0)?, [0.0, -1.0]),
        rel_err(oracle_flow(&LinearOracleSpec::new(1.0, 1.0, vec![PI])?, [1.0, 0.0], TAU)?, [2.0, 0.0]),
        rel_err(oracle_flow(&LinearOracleSpec::new(2.0, 0.0, vec![])?, [1.0, 0.0], TAU)?, [1.0, 0.0]),
    ];
    checks.push(Check::new("oracle_examples", &ex, 1e-15));

    // Integrator against the oracle, plus jump invariants along the way.
    let mut flow_err = Vec::new();
    let mut det_err = Vec::new();
    let mut angles = Vec::new();
    let mut ratios = Vec::new();
    for omega in [0.5, 1.0, 2.0] {
        for a in [0.0, 0.5, 1.0] {
            for k in [1, 3] {
                let spec = LinearOracleSpec::new(omega, a, random_schedule(&mut rng, k))?;
                let sys = spec.system();
                let ang = rng.gen_range(0.0..TAU);
                let r = rng.gen_range(0.5..5.0);
                let z0 = [r * ang.cos(), r * ang.sin()];
                let traj = flow(&sys, CartesianState::new(0.0, z0[0], z0[1]), TAU, &cfg)?;
                flow_err.push(rel_err(traj.final_point(), oracle_flow(&spec, z0, TAU)?));
                jump_errors(&traj, a, &mut angles, &mut ratios)?;
                let m = oracle_poincare(&spec, 2)?;
                let expect = (1.0 + a).powi(2 * 2 * spec.schedule.len() as i32);
                det_err.push(((det(&m) - expect) / expect).abs());
            }
        }
    }
    checks.push(Check::new("flow_matches_oracle", &flow_err, 1e-9));
    checks.push(Check::new("oracle_poincare_determinant", &det_err, 1e-14));

    // Energy along the conservative asinh flow. Energies reach ~50 in the
    // radius-10 disk, so an absolute 1e-9 drift needs tighter tolerances
    // than the defaults.
    let tight = IntegratorConfig::with_tolerances(CONSERVATION_REL_TOL, CONSERVATION_ABS_TOL);
    let asinh = SystemSpec::new(RestoringForce::Asinh, Forcing::Zero, 0.0, vec![])?;
    let mut drift = Vec::new();
    for _ in 0..100 {
        let r = 10.0 * rng.gen::<f64>().sqrt();
        let ang = rng.gen_range(0.0..TAU);
        let z0 = CartesianState::new(0.0, r * ang.cos(), r * ang.sin());
        let traj = flow(&asinh, z0, TAU, &tight)?;
        let g = asinh.g();
        let e = |s: &CartesianState| 0.5 * s.y * s.y + g.potential(s.x);
        let e0 = e(&z0);
        drift.push(traj.samples.iter().map(|s| (e(s) - e0).abs()).fold(0.0, f64::max));
    }
    checks.push(Check::new("asinh_energy_conservation", &drift, 1e-9));

    // Jumps on a forced nonlinear system too.
    let forced = SystemSpec::new(
        RestoringForce::Asinh,
        Forcing::Cosine { amplitude: 0.5, phase: 0.0 },
        0.2,
        vec![PI],
    )?;
    let mut inverse_err = Vec::new();
    let mut additivity = Vec::new();
    for _ in 0..8 {
        let ang = rng.gen_range(0.0..TAU);
        let r = rng.gen_range(1.0..20.0);
        let z0 = [r * ang.cos(), r * ang.sin()];
        let traj = flow(&forced, CartesianState::new(0.0, z0[0], z0[1]), 2.0 * TAU, &cfg)?;
        jump_errors(&traj, 0.2, &mut angles, &mut ratios)?;

        let pre = CartesianState::new(PI, z0[0], z0[1]).with_side(Side::PreImpulse);
        let back = inverse_impulse_map(&forced, &impulse_map(&forced, &pre)?)?;
        inverse_err.push(rel_err(back.point(), pre.point()));

        let two = winding(&forced, z0, 2, &cfg, ORIGIN_GUARD)?.delta_theta;
        let first = winding(&forced, z0, 1, &cfg, ORIGIN_GUARD)?.delta_theta;
        let second = winding(&forced, poincare(&forced, z0, 1, &cfg)?, 1, &cfg, ORIGIN_GUARD)?.delta_theta;
        additivity.push((two - first - second).abs());
    }
    checks.push(Check::new("jump_preserves_angle", &angles, 0.0));
    checks.push(Check::new("jump_scales_radius", &ratios, 1e-15));
    checks.push(Check::new("impulse_inverse_identity", &inverse_err, 1e-15));
    checks.push(Check::new("winding_additivity", &additivity, 1e-7));

    let pass = checks.iter().all(|c| c.pass);
    Ok(VerifyReport { seed, checks, pass })
}

pub fn cmd_verify(out: &Path, seed: Option<u64>) -> anyhow::Result<()> {
    let seed_value = seed.unwrap_or(0);
    let report = run_suite(seed_value)?;
    println!("verify  seed = {seed_value}");
    println!("  {:<30}  {:>6}  {:>12}  {:>10}  verdict", "check", "cases", "worst", "tolerance");
    for c in &report.checks {
        println!(
            "  {:<30}  {:>6}  {:>12.3e}  {:>10.1e}  {}",
            c.name,
            c.cases,
            c.worst,
            c.tolerance,
            if c.pass { "PASS" } else { "FAIL" }
        );
    }
    let pass = report.pass;
    let failed: Vec<&str> = report.checks.iter().filter(|c| !c.pass).map(|c| c.name).collect();
    let env = Envelope::new("verify", "builtin-suite".into(), &IntegratorConfig::default(), seed, if pass { "ok" } else { "fail" }, report);
    std::fs::write(out.join("verify.json"), to_json_string(&env))?;
    if pass {
        Ok(())
    } else {
        Err(VerdictFailed(format!("checks failed: {}", failed.join(", "))).into())
    }
}
