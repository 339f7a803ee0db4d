//! Continuous polar angle along trajectories.
//!
//! Both coordinates are multiplied by the same positive factor at an
//! impulse, so the angle is continuous across jumps; the tracker copies the
//! unwrapped value across each jump event instead of recomputing it.

use std::f64::consts::{PI, TAU};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{CartesianState, ImpulsiveSystem, Side, Window};
use crate::error::{Error, Result};
use crate::integrator::{flow, IntegratorConfig, Trajectory};

/// Default radius below which the polar angle is treated as undefined.
pub const ORIGIN_GUARD: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RotationRecord {
    /// Initial angle in [0, 2π).
    pub theta0: f64,
    pub times: Vec<f64>,
    /// Unwrapped angle, one value per trajectory sample.
    pub theta: Vec<f64>,
    /// θ(t_end) − θ(t_start).
    pub delta_theta: f64,
    pub min_radius: f64,
}

impl RotationRecord {
    /// Unwrapped angle at `t`, linear between stored samples.
    pub fn theta_at(&self, t: f64) -> Option<f64> {
        let n = self.times.len();
        if n == 0 || t < self.times[0] || t > self.times[n - 1] {
            return None;
        }
        let i = self.times.partition_point(|&s| s <= t);
        if i == 0 {
            return Some(self.theta[0]);
        }
        let (t0, th0) = (self.times[i - 1], self.theta[i - 1]);
        if i == n || self.times[i] == t0 {
            return Some(th0);
        }
        let (t1, th1) = (self.times[i], self.theta[i]);
        Some(th0 + (th1 - th0) * (t - t0) / (t1 - t0))
    }

    /// Net rotation over [t_a, t_b].
    pub fn delta_between(&self, t_a: f64, t_b: f64) -> Option<f64> {
        Some(self.theta_at(t_b)? - self.theta_at(t_a)?)
    }
}

fn wrap(d: f64) -> f64 {
    let mut d = d % TAU;
    if d > PI {
        d -= TAU;
    } else if d <= -PI {
        d += TAU;
    }
    d
}

fn angle_of(z: [f64; 2]) -> f64 {
    z[1].atan2(z[0])
}

/// Unwrapped angle along `traj`. Consecutive samples whose wrapped angle
/// difference exceeds π/2 are subdivided with the dense interpolant, so the
/// per-sample increment stays below π.
pub fn track_angle(traj: &Trajectory, origin_guard: f64) -> Result<RotationRecord> {
    let samples = &traj.samples;
    if samples.is_empty() {
        return Err(Error::InvalidArgument("empty trajectory".into()));
    }
    let guard_check = |s: &CartesianState| -> Result<f64> {
        let r = s.radius();
        if r < origin_guard {
            Err(Error::NearOrigin {
                t: s.t,
                radius: r,
                guard: origin_guard,
            })
        } else {
            Ok(r)
        }
    };
    let mut min_radius = guard_check(&samples[0])?;
    let first = angle_of(samples[0].point());
    let theta0 = first.rem_euclid(TAU);
    let mut theta = Vec::with_capacity(samples.len());
    theta.push(theta0);
    let mut prev_raw = first;
    for i in 1..samples.len() {
        let (a, b) = (&samples[i - 1], &samples[i]);
        min_radius = min_radius.min(guard_check(b)?);
        let last = *theta.last().unwrap();
        if b.side == Side::PostImpulse && a.side == Side::PreImpulse && a.t == b.t {
            theta.push(last);
            prev_raw = angle_of(b.point());
            continue;
        }
        let raw = angle_of(b.point());
        let mut d = wrap(raw - prev_raw);
        if d.abs() > PI / 2.0 {
            d = refine(traj, a, b, origin_guard, 0)?;
        }
        theta.push(last + d);
        prev_raw = raw;
    }
    let delta_theta = theta.last().unwrap() - theta0;
    Ok(RotationRecord {
        theta0,
        times: samples.iter().map(|s| s.t).collect(),
        theta,
        delta_theta,
        min_radius,
    })
}

fn refine(
    traj: &Trajectory,
    a: &CartesianState,
    b: &CartesianState,
    guard: f64,
    depth: usize,
) -> Result<f64> {
    let direct = wrap(angle_of(b.point()) - angle_of(a.point()));
    if direct.abs() <= PI / 2.0 {
        return Ok(direct);
    }
    if depth >= 30 || traj.steps.is_empty() {
        if direct.abs() < PI {
            return Ok(direct);
        }
        return Err(Error::InvalidArgument(format!(
            "angle increment between t={} and t={} is ambiguous",
            a.t, b.t
        )));
    }
    let tm = 0.5 * (a.t + b.t);
    let z = traj
        .eval(tm, false)
        .ok_or_else(|| Error::InvalidArgument(format!("no dense output at t={tm}")))?;
    let mid = CartesianState::new(tm, z[0], z[1]);
    if mid.radius() < guard {
        return Err(Error::NearOrigin {
            t: tm,
            radius: mid.radius(),
            guard,
        });
    }
    Ok(refine(traj, a, &mid, guard, depth + 1)? + refine(traj, &mid, b, guard, depth + 1)?)
}

/// Net rotation of the trajectory started at `z0` (time 0⁺) over
/// `periods` periods.
pub fn winding<S: ImpulsiveSystem + ?Sized>(
    sys: &S,
    z0: [f64; 2],
    periods: usize,
    cfg: &IntegratorConfig,
    origin_guard: f64,
) -> Result<RotationRecord> {
    let traj = flow(
        sys,
        CartesianState::new(0.0, z0[0], z0[1]),
        TAU * periods as f64,
        cfg,
    )?;
    track_angle(&traj, origin_guard)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TwistVerdict {
    TwistNegative,
    NotNegative,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpeedWitness {
    pub sample: usize,
    pub theta0: f64,
    pub t: f64,
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeedScanReport {
    pub r0: f64,
    pub theta0_grid: Vec<f64>,
    /// max θ'(t) over the dense samples of each trajectory.
    pub max_rate: Vec<f64>,
    pub verdict: TwistVerdict,
    pub witness: SpeedWitness,
}

/// θ' = (x·y' − y·x') / r² along one period from `n_samples` equispaced
/// starts on the circle of radius `r0`. Samples at impulse instants are
/// skipped; every other dense sample is included.
pub fn angular_speed_sign_scan<S: ImpulsiveSystem + ?Sized>(
    sys: &S,
    r0: f64,
    n_samples: usize,
    cfg: &IntegratorConfig,
) -> Result<SpeedScanReport> {
    if !(r0 > 0.0) || n_samples == 0 {
        return Err(Error::InvalidArgument(
            "speed scan needs r0 > 0 and at least one sample".into(),
        ));
    }
    let grid: Vec<f64> = (0..n_samples)
        .map(|i| TAU * i as f64 / n_samples as f64)
        .collect();
    let maxima: Vec<Result<(f64, f64)>> = grid
        .par_iter()
        .map(|&ang| {
            let z0 = CartesianState::new(0.0, r0 * ang.cos(), r0 * ang.sin());
            let traj = flow(sys, z0, TAU, cfg)?;
            let mut best = (f64::NEG_INFINITY, 0.0);
            for s in traj.samples.iter().filter(|s| s.side == Side::Regular) {
                let f = sys.field(s.t, Window { start: s.t, end: s.t }, s.point())?;
                let r2 = s.x * s.x + s.y * s.y;
                let rate = (s.x * f[1] - s.y * f[0]) / r2;
                if rate > best.0 {
                    best = (rate, s.t);
                }
            }
            Ok(best)
        })
        .collect();
    let mut max_rate = Vec::with_capacity(n_samples);
    let mut witness = SpeedWitness {
        sample: 0,
        theta0: 0.0,
        t: 0.0,
        rate: f64::NEG_INFINITY,
    };
    for (i, m) in maxima.into_iter().enumerate() {
        let (rate, t) = m?;
        if rate > witness.rate {
            witness = SpeedWitness {
                sample: i,
                theta0: grid[i],
                t,
                rate,
            };
        }
        max_rate.push(rate);
    }
    let verdict = if witness.rate < 0.0 {
        TwistVerdict::TwistNegative
    } else {
        TwistVerdict::NotNegative
    };
    Ok(SpeedScanReport {
        r0,
        theta0_grid: grid,
        max_rate,
        verdict,
        witness,
    })
}

/// `{r0, theta0_grid, delta_theta[], verdict}` export.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindingReport {
    pub r0: f64,
    pub theta0_grid: Vec<f64>,
    pub delta_theta: Vec<f64>,
    /// Pass when every one-period rotation lies strictly inside (−2π, 0).
    pub verdict: crate::dynamics::Verdict,
}

pub fn winding_report<S: ImpulsiveSystem + ?Sized>(
    sys: &S,
    r0: f64,
    n_samples: usize,
    cfg: &IntegratorConfig,
) -> Result<WindingReport> {
    if !(r0 > 0.0) || n_samples == 0 {
        return Err(Error::InvalidArgument(
            "winding report needs r0 > 0 and at least one sample".into(),
        ));
    }
    let grid: Vec<f64> = (0..n_samples)
        .map(|i| TAU * i as f64 / n_samples as f64)
        .collect();
    let deltas: Result<Vec<f64>> = grid
        .par_iter()
        .map(|&ang| {
            winding(sys, [r0 * ang.cos(), r0 * ang.sin()], 1, cfg, ORIGIN_GUARD)
                .map(|r| r.delta_theta)
        })
        .collect();
    let delta_theta = deltas?;
    let ok = delta_theta.iter().all(|&d| d > -TAU && d < 0.0);
    Ok(WindingReport {
        r0,
        theta0_grid: grid,
        delta_theta,
        verdict: crate::dynamics::Verdict::from_bool(ok),
    })
}
