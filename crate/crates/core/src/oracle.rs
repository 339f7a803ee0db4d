//! Closed-form flow of x'' + ω²x = 0 with linear impulses.
//!
//! Between impulses the flow is the matrix
//! M(Δt) = [[cos ωΔt, sin(ωΔt)/ω], [−ω sin ωΔt, cos ωΔt]]; a jump is the
//! scalar (1 + a)·Id, which commutes with M, so the flow from 0⁺ to t is
//! (1 + a)^N·M(t) with N the number of impulses in (0, t].

use std::f64::consts::TAU;

use crate::dynamics::{Forcing, ImpulseSchedule, RestoringForce, SystemSpec};
use crate::error::{Error, Result};

pub type Matrix2 = [[f64; 2]; 2];

#[derive(Debug, Clone, PartialEq)]
pub struct LinearOracleSpec {
    pub omega: f64,
    pub a: f64,
    pub schedule: ImpulseSchedule,
}

impl LinearOracleSpec {
    pub fn new(omega: f64, a: f64, impulse_times: Vec<f64>) -> Result<Self> {
        if !(omega > 0.0 && omega.is_finite()) {
            return Err(Error::InvalidSpec(format!("ω = {omega} must be positive")));
        }
        if !(1.0 + a > 0.0) {
            return Err(Error::InvalidSpec(format!("1 + a must be positive, a = {a}")));
        }
        Ok(Self {
            omega,
            a,
            schedule: ImpulseSchedule::new(impulse_times)?,
        })
    }

    /// The matching problem instance, g(x) = ω²x and p ≡ 0.
    pub fn system(&self) -> SystemSpec {
        SystemSpec::new(
            RestoringForce::Linear {
                omega_sq: self.omega * self.omega,
            },
            Forcing::Zero,
            self.a,
            self.schedule.times().to_vec(),
        )
        .expect("oracle spec is a valid system")
    }
}

/// cos and sin of 2π·turns. Exact at quarter turns.
pub fn cos_sin_turns(turns: f64) -> (f64, f64) {
    let frac = turns - turns.floor();
    let quarters = frac * 4.0;
    if quarters == quarters.round() {
        return match quarters as i64 % 4 {
            0 => (1.0, 0.0),
            1 => (0.0, 1.0),
            2 => (-1.0, 0.0),
            _ => (0.0, -1.0),
        };
    }
    let ang = TAU * frac;
    (ang.cos(), ang.sin())
}

/// M(Δt) from its phase ωΔt expressed in turns (units of 2π).
fn segment_matrix(omega: f64, phase_turns: f64) -> Matrix2 {
    let (c, s) = cos_sin_turns(phase_turns);
    [[c, s / omega], [-omega * s, c]]
}

pub fn mat_mul(a: &Matrix2, b: &Matrix2) -> Matrix2 {
    let mut out = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            out[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    out
}

pub fn mat_vec(m: &Matrix2, z: [f64; 2]) -> [f64; 2] {
    [m[0][0] * z[0] + m[0][1] * z[1], m[1][0] * z[0] + m[1][1] * z[1]]
}

pub fn det(m: &Matrix2) -> f64 {
    m[0][0] * m[1][1] - m[0][1] * m[1][0]
}

/// Exact state at `t_end` from (0⁺, z0).
pub fn oracle_flow(spec: &LinearOracleSpec, z0: [f64; 2], t_end: f64) -> Result<[f64; 2]> {
    if !(t_end >= 0.0) {
        return Err(Error::InvalidArgument(format!("t_end = {t_end} must be ≥ 0")));
    }
    let jumps = spec.schedule.instants_in(0.0, t_end).len();
    let scale = (1.0 + spec.a).powi(jumps as i32);
    let m = segment_matrix(spec.omega, spec.omega * t_end / TAU);
    let z = mat_vec(&m, z0);
    Ok([scale * z[0], scale * z[1]])
}

/// ((1 + a)^k·M(2π))^n, with the phase ωn reduced exactly.
pub fn oracle_poincare(spec: &LinearOracleSpec, n: usize) -> Result<Matrix2> {
    if n == 0 {
        return Err(Error::InvalidArgument("n must be ≥ 1".into()));
    }
    let scale = (1.0 + spec.a).powi((spec.schedule.len() * n) as i32);
    let m = segment_matrix(spec.omega, spec.omega * n as f64);
    Ok([
        [scale * m[0][0], scale * m[0][1]],
        [scale * m[1][0], scale * m[1][1]],
    ])
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    #[test]
    fn flow_examples() {
        let s = LinearOracleSpec::new(1.0, 0.0, vec![]).unwrap();
        let z = oracle_flow(&s, [1.0, 0.0], FRAC_PI_2).unwrap();
        assert!(z[0].abs() < 1e-16 && (z[1] + 1.0).abs() < 1e-16);

        let s = LinearOracleSpec::new(2.0, 0.0, vec![]).unwrap();
        assert_eq!(oracle_flow(&s, [1.0, 0.0], TAU).unwrap(), [1.0, 0.0]);
    }

    #[test]
    fn one_impulse_full_period_by_explicit_composition() {
        // Independent route: M(π) · 2 · M(π) applied step by step.
        let s = LinearOracleSpec::new(1.0, 1.0, vec![PI]).unwrap();
        let half = [[PI.cos(), PI.sin()], [-PI.sin(), PI.cos()]];
        let z_mid = mat_vec(&half, [1.0, 0.0]);
        let z_jump = [2.0 * z_mid[0], 2.0 * z_mid[1]];
        let z_end = mat_vec(&half, z_jump);
        let z = oracle_flow(&s, [1.0, 0.0], TAU).unwrap();
        assert!((z[0] - z_end[0]).abs() < 1e-15 && (z[1] - z_end[1]).abs() < 1e-15);
        assert_eq!(z, [2.0, 0.0]);
    }

    #[test]
    fn poincare_examples() {
        let s = LinearOracleSpec::new(1.0, 0.0, vec![]).unwrap();
        assert_eq!(oracle_poincare(&s, 1).unwrap(), [[1.0, 0.0], [0.0, 1.0]]);
        let s = LinearOracleSpec::new(1.0, 1.0, vec![PI]).unwrap();
        assert_eq!(oracle_poincare(&s, 2).unwrap(), [[4.0, 0.0], [0.0, 4.0]]);
        let s = LinearOracleSpec::new(0.5, 0.0, vec![]).unwrap();
        assert_eq!(oracle_poincare(&s, 1).unwrap(), [[-1.0, 0.0], [0.0, -1.0]]);
    }

    #[test]
    fn segment_composition_agrees_with_closed_form() {
        let s = LinearOracleSpec::new(1.7, 0.3, vec![0.5, 2.0, 4.4]).unwrap();
        let z0 = [0.4, -1.1];
        let t_end = 2.5 * TAU;
        let mut t = 0.0;
        let mut z = z0;
        for b in s.schedule.instants_in(0.0, t_end).into_iter().chain([t_end]) {
            let dt = b - t;
            let w = s.omega * dt;
            let m = [[w.cos(), w.sin() / s.omega], [-s.omega * w.sin(), w.cos()]];
            z = mat_vec(&m, z);
            if b != t_end || s.schedule.is_instant(b) {
                z = [1.3 * z[0], 1.3 * z[1]];
            }
            t = b;
        }
        let exact = oracle_flow(&s, z0, t_end).unwrap();
        assert!((z[0] - exact[0]).abs() < 1e-13 && (z[1] - exact[1]).abs() < 1e-13);
    }

    #[test]
    fn determinant_scales_with_the_jumps() {
        for (omega, a, times, n) in [
            (1.0, 0.5, vec![1.0], 3usize),
            (0.5, 1.0, vec![0.0, 3.0], 2),
            (1.3, 0.25, vec![0.2, 2.0, 5.0], 4),
        ] {
            let k = times.len();
            let s = LinearOracleSpec::new(omega, a, times).unwrap();
            let m = oracle_poincare(&s, n).unwrap();
            let expected = (1.0f64 + a).powi((2 * k * n) as i32);
            assert!((det(&m) - expected).abs() <= 1e-14 * expected, "{}", det(&m));
        }
    }

    #[test]
    fn norm_is_constant_between_impulses_for_unit_frequency() {
        let s = LinearOracleSpec::new(1.0, 0.5, vec![2.0]).unwrap();
        let z0 = [0.6, 0.8];
        for &t in &[0.5, 1.9, 2.1, 6.0] {
            let z = oracle_flow(&s, z0, t).unwrap();
            let expected = if t > 2.0 { 1.5 } else { 1.0 };
            assert!((z[0].hypot(z[1]) - expected).abs() < 1e-15);
        }
    }
}
