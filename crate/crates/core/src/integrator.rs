//! Impulsive flow: adaptive Dormand–Prince 5(4) between impulse instants,
//! exact jump map at each instant.
//!
//! Impulse instants are known in advance, so they are segment boundaries and
//! never stepped across. Stored states follow the right-continuous
//! convention: the state kept at t_j is the post-impulse value, and the left
//! limit lives in the [`JumpEvent`] record. An initial condition is itself a
//! post-impulse value, so an impulse scheduled exactly at the start time is
//! not applied again.

use std::f64::consts::TAU;
use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::dynamics::{CartesianState, ImpulsiveSystem, Side, Window};
use crate::error::{Error, Result};
use crate::rotation::RotationRecord;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegratorConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Upper bound on an accepted step; also bounds the spacing of stored
    /// samples.
    pub max_step: f64,
    /// Keep the per-step interpolation coefficients.
    pub dense: bool,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            rel_tol: 1e-10,
            abs_tol: 1e-12,
            max_step: 0.1,
            dense: true,
        }
    }
}

impl IntegratorConfig {
    pub fn with_tolerances(rel_tol: f64, abs_tol: f64) -> Self {
        Self {
            rel_tol,
            abs_tol,
            ..Self::default()
        }
    }

    /// Both tolerances scaled by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            rel_tol: self.rel_tol * factor,
            abs_tol: self.abs_tol * factor,
            ..*self
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0 && self.abs_tol > 0.0 && self.max_step > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "integrator tolerances and max step must be positive: {self:?}"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JumpEvent {
    pub t: f64,
    pub pre: [f64; 2],
    pub post: [f64; 2],
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct IntegrationStats {
    pub steps: usize,
    pub rejected: usize,
    pub rhs_evals: usize,
    pub rel_tol: f64,
    pub abs_tol: f64,
}

/// Continuous extension of one accepted step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DenseStep {
    pub t0: f64,
    pub h: f64,
    coeffs: [[f64; 2]; 5],
}

impl DenseStep {
    pub fn t1(&self) -> f64 {
        self.t0 + self.h
    }

    pub fn eval(&self, t: f64) -> [f64; 2] {
        let s = (t - self.t0) / self.h;
        let s1 = 1.0 - s;
        let c = &self.coeffs;
        let mut out = [0.0; 2];
        for (i, o) in out.iter_mut().enumerate() {
            *o = c[0][i] + s * (c[1][i] + s1 * (c[2][i] + s * (c[3][i] + s1 * c[4][i])));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trajectory {
    pub samples: Vec<CartesianState>,
    pub jumps: Vec<JumpEvent>,
    pub steps: Vec<DenseStep>,
    pub stats: IntegrationStats,
}

impl Trajectory {
    pub fn start(&self) -> &CartesianState {
        &self.samples[0]
    }

    pub fn end(&self) -> &CartesianState {
        self.samples.last().expect("trajectory has at least one sample")
    }

    pub fn final_point(&self) -> [f64; 2] {
        self.end().point()
    }

    /// Interpolated state. At an impulse instant the post-impulse value is
    /// returned unless `left_limit` is set.
    pub fn eval(&self, t: f64, left_limit: bool) -> Option<[f64; 2]> {
        if self.steps.is_empty() {
            return None;
        }
        let idx = if left_limit {
            self.steps.partition_point(|s| s.t1() < t)
        } else {
            self.steps.partition_point(|s| s.t1() <= t)
        };
        let idx = idx.min(self.steps.len() - 1);
        let step = &self.steps[idx];
        if t < step.t0 - 1e-12 * step.h.abs() || t > step.t1() + 1e-12 * step.h.abs() {
            return None;
        }
        Some(step.eval(t))
    }

    /// Minimum of |z| over samples and three interior points of every
    /// dense step.
    pub fn min_radius(&self) -> f64 {
        let mut m = self
            .samples
            .iter()
            .map(|s| s.radius())
            .fold(f64::INFINITY, f64::min);
        for step in &self.steps {
            for frac in [0.25, 0.5, 0.75] {
                let z = step.eval(step.t0 + frac * step.h);
                m = m.min(z[0].hypot(z[1]));
            }
        }
        m
    }

    pub fn max_radius(&self) -> f64 {
        self.samples
            .iter()
            .map(|s| s.radius())
            .fold(0.0, f64::max)
    }

    /// Writes `t,x,y,r,theta_unwrapped,event_flag` rows, preceded by a
    /// comment line carrying the spec hash and tolerances. `event_flag` is −1
    /// for pre-impulse rows, 1 for post-impulse rows and 0 otherwise.
    pub fn write_csv<W: Write>(
        &self,
        rotation: Option<&RotationRecord>,
        spec_hash: &str,
        mut out: W,
    ) -> io::Result<()> {
        writeln!(
            out,
            "# spec_hash={spec_hash} rel_tol={:e} abs_tol={:e}",
            self.stats.rel_tol, self.stats.abs_tol
        )?;
        writeln!(out, "t,x,y,r,theta_unwrapped,event_flag")?;
        for (i, s) in self.samples.iter().enumerate() {
            let theta = rotation
                .and_then(|r| r.theta.get(i).copied())
                .unwrap_or(f64::NAN);
            let flag = match s.side {
                Side::PreImpulse => -1,
                Side::PostImpulse => 1,
                Side::Regular => 0,
            };
            writeln!(
                out,
                "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{}",
                s.t,
                s.x,
                s.y,
                s.radius(),
                theta,
                flag
            )?;
        }
        Ok(())
    }
}

// Dormand–Prince 5(4) tableau.
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

const SAFETY: f64 = 0.9;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 10.0;
const MAX_STEPS_PER_SEGMENT: usize = 5_000_000;

fn axpy(y: [f64; 2], terms: &[(f64, [f64; 2])], h: f64) -> [f64; 2] {
    let mut out = y;
    for (c, k) in terms {
        out[0] += h * c * k[0];
        out[1] += h * c * k[1];
    }
    out
}

enum Observe<'a> {
    Record(&'a mut Trajectory),
    Discard,
}

struct Stepper<'a, S: ImpulsiveSystem + ?Sized> {
    sys: &'a S,
    cfg: &'a IntegratorConfig,
    stats: IntegrationStats,
    h: Option<f64>,
}

impl<'a, S: ImpulsiveSystem + ?Sized> Stepper<'a, S> {
    fn eval(&mut self, t: f64, w: Window, z: [f64; 2]) -> Result<[f64; 2]> {
        self.stats.rhs_evals += 1;
        let f = self.sys.field(t, w, z)?;
        if !(f[0].is_finite() && f[1].is_finite()) {
            return Err(Error::NonFinite {
                function: "field",
                t,
                x: z[0],
                y: z[1],
            });
        }
        Ok(f)
    }

    fn error_norm(&self, y0: [f64; 2], y1: [f64; 2], err: [f64; 2]) -> f64 {
        let mut acc = 0.0;
        for i in 0..2 {
            let sc = self.cfg.abs_tol + self.cfg.rel_tol * y0[i].abs().max(y1[i].abs());
            acc += (err[i] / sc).powi(2);
        }
        (acc / 2.0).sqrt()
    }

    fn initial_step(&mut self, t: f64, w: Window, y: [f64; 2], f0: [f64; 2], span: f64) -> Result<f64> {
        let sc = |i: usize| self.cfg.abs_tol + self.cfg.rel_tol * y[i].abs();
        let d0 = ((y[0] / sc(0)).powi(2) + (y[1] / sc(1)).powi(2)).sqrt() / 2f64.sqrt();
        let d1 = ((f0[0] / sc(0)).powi(2) + (f0[1] / sc(1)).powi(2)).sqrt() / 2f64.sqrt();
        let mut h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
        h0 = h0.min(span).min(self.cfg.max_step);
        let y1 = [y[0] + h0 * f0[0], y[1] + h0 * f0[1]];
        let f1 = self.eval(t + h0, w, y1)?;
        let d2 = (((f1[0] - f0[0]) / sc(0)).powi(2) + ((f1[1] - f0[1]) / sc(1)).powi(2)).sqrt()
            / 2f64.sqrt()
            / h0;
        let h1 = if d1.max(d2) <= 1e-15 {
            (h0 * 1e-3).max(1e-6)
        } else {
            (0.01 / d1.max(d2)).powf(1.0 / 5.0)
        };
        Ok((100.0 * h0).min(h1).min(span).min(self.cfg.max_step))
    }

    /// Integrates the smooth flow over [w.start, w.end] from `y`.
    fn segment(&mut self, w: Window, mut y: [f64; 2], obs: &mut Observe<'_>) -> Result<[f64; 2]> {
        let mut t = w.start;
        let t_end = w.end;
        if t_end <= t {
            return Ok(y);
        }
        let mut k1 = self.eval(t, w, y)?;
        let mut h = match self.h {
            Some(h) => h,
            None => self.initial_step(t, w, y, k1, t_end - t)?,
        };
        let mut steps = 0usize;
        let min_h = 1e-14 * t_end.abs().max(1.0);
        loop {
            let remaining = t_end - t;
            let h_want = h.min(self.cfg.max_step);
            let last = h_want >= remaining * (1.0 - 1e-12);
            let h_eff = if last { remaining } else { h_want };
            let t_new = if last { t_end } else { t + h_eff };
            let k2 = self.eval(t + C2 * h_eff, w, axpy(y, &[(A21, k1)], h_eff))?;
            let k3 = self.eval(t + C3 * h_eff, w, axpy(y, &[(A31, k1), (A32, k2)], h_eff))?;
            let k4 = self.eval(
                t + C4 * h_eff,
                w,
                axpy(y, &[(A41, k1), (A42, k2), (A43, k3)], h_eff),
            )?;
            let k5 = self.eval(
                t + C5 * h_eff,
                w,
                axpy(y, &[(A51, k1), (A52, k2), (A53, k3), (A54, k4)], h_eff),
            )?;
            let k6 = self.eval(
                t_new,
                w,
                axpy(y, &[(A61, k1), (A62, k2), (A63, k3), (A64, k4), (A65, k5)], h_eff),
            )?;
            let y1 = axpy(y, &[(A71, k1), (A73, k3), (A74, k4), (A75, k5), (A76, k6)], h_eff);
            let k7 = self.eval(t_new, w, y1)?;
            let mut err = [0.0; 2];
            for i in 0..2 {
                err[i] = h_eff
                    * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
            }
            let en = self.error_norm(y, y1, err);
            let fac = if en == 0.0 {
                FAC_MAX
            } else {
                (SAFETY * en.powf(-0.2)).clamp(FAC_MIN, FAC_MAX)
            };
            if en <= 1.0 {
                self.stats.steps += 1;
                steps += 1;
                if let Observe::Record(traj) = obs {
                    let mut coeffs = [[0.0; 2]; 5];
                    for i in 0..2 {
                        let dy = y1[i] - y[i];
                        let bspl = h_eff * k1[i] - dy;
                        coeffs[0][i] = y[i];
                        coeffs[1][i] = dy;
                        coeffs[2][i] = bspl;
                        coeffs[3][i] = dy - h_eff * k7[i] - bspl;
                        coeffs[4][i] = h_eff
                            * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i]
                                + D7 * k7[i]);
                    }
                    let step = DenseStep {
                        t0: t,
                        h: h_eff,
                        coeffs,
                    };
                    if self.cfg.dense {
                        traj.steps.push(step);
                    }
                    traj.samples.push(CartesianState::new(t_new, y1[0], y1[1]));
                }
                t = t_new;
                y = y1;
                k1 = k7;
                let h_next = h_eff * fac;
                if last {
                    self.h = Some(h_next.max(h_want));
                    return Ok(y);
                }
                h = h_next;
            } else {
                self.stats.rejected += 1;
                h = h_eff * fac.min(1.0);
            }
            if h < min_h {
                return Err(Error::Integration {
                    t,
                    reason: format!("step size underflow (h = {h:e})"),
                    partial: None,
                });
            }
            if steps > MAX_STEPS_PER_SEGMENT {
                return Err(Error::Integration {
                    t,
                    reason: "step budget exhausted".into(),
                    partial: None,
                });
            }
        }
    }
}

fn drive<S: ImpulsiveSystem + ?Sized>(
    sys: &S,
    t0: f64,
    z0: [f64; 2],
    t_end: f64,
    cfg: &IntegratorConfig,
    obs: &mut Observe<'_>,
) -> Result<[f64; 2]> {
    cfg.validate()?;
    if !(t_end > t0) {
        return Err(Error::InvalidArgument(format!(
            "t_end = {t_end} must exceed the start time {t0}"
        )));
    }
    if !(z0[0].is_finite() && z0[1].is_finite() && t0.is_finite()) {
        return Err(Error::InvalidArgument("initial state must be finite".into()));
    }
    let gain = 1.0 + sys.impulse_gain();
    let mut stepper = Stepper {
        sys,
        cfg,
        stats: IntegrationStats {
            rel_tol: cfg.rel_tol,
            abs_tol: cfg.abs_tol,
            ..Default::default()
        },
        h: None,
    };
    let mut t = t0;
    let mut y = z0;
    let instants = sys.schedule().instants_in(t0, t_end);
    // Period multiples are also segment ends so that Poincaré sections
    // appear as stored samples.
    let mut boundaries = instants.clone();
    let m_lo = (t0 / TAU).floor() as i64 + 1;
    let m_hi = (t_end / TAU).ceil() as i64;
    boundaries.extend(
        (m_lo..=m_hi)
            .map(|m| TAU * m as f64)
            .filter(|&s| s > t0 && s < t_end),
    );
    boundaries.push(t_end);
    boundaries.sort_by(f64::total_cmp);
    boundaries.dedup();
    for b in boundaries {
        let window = Window { start: t, end: b };
        y = match stepper.segment(window, y, obs) {
            Ok(y) => y,
            Err(e) => {
                if let Observe::Record(traj) = obs {
                    traj.stats = stepper.stats;
                }
                return Err(e);
            }
        };
        t = b;
        if instants.binary_search_by(|s| s.total_cmp(&b)).is_ok() {
            let post = [gain * y[0], gain * y[1]];
            if let Observe::Record(traj) = obs {
                if let Some(last) = traj.samples.last_mut() {
                    last.side = Side::PreImpulse;
                }
                traj.samples
                    .push(CartesianState::new(b, post[0], post[1]).with_side(Side::PostImpulse));
                traj.jumps.push(JumpEvent { t: b, pre: y, post });
            }
            y = post;
        }
    }
    if let Observe::Record(traj) = obs {
        traj.stats = stepper.stats;
    }
    Ok(y)
}

/// Trajectory from `z0` (taken as a right limit) to `t_end`.
pub fn flow<S: ImpulsiveSystem + ?Sized>(
    sys: &S,
    z0: CartesianState,
    t_end: f64,
    cfg: &IntegratorConfig,
) -> Result<Trajectory> {
    let mut traj = Trajectory::default();
    traj.samples.push(z0.with_side(if sys.schedule().is_instant(z0.t) {
        Side::PostImpulse
    } else {
        Side::Regular
    }));
    match drive(sys, z0.t, z0.point(), t_end, cfg, &mut Observe::Record(&mut traj)) {
        Ok(_) => Ok(traj),
        Err(Error::Integration { t, reason, .. }) => Err(Error::Integration {
            t,
            reason,
            partial: Some(Box::new(traj)),
        }),
        Err(e) => Err(e),
    }
}

/// Final state only, without storing samples.
pub fn propagate<S: ImpulsiveSystem + ?Sized>(
    sys: &S,
    t0: f64,
    z0: [f64; 2],
    t_end: f64,
    cfg: &IntegratorConfig,
) -> Result<[f64; 2]> {
    drive(sys, t0, z0, t_end, cfg, &mut Observe::Discard)
}

/// n-th iterate of the period map, starting at t = 0⁺.
pub fn poincare<S: ImpulsiveSystem + ?Sized>(
    sys: &S,
    z0: [f64; 2],
    n: usize,
    cfg: &IntegratorConfig,
) -> Result<[f64; 2]> {
    if n == 0 {
        return Err(Error::InvalidArgument("poincare iterate count must be ≥ 1".into()));
    }
    propagate(sys, 0.0, z0, TAU * n as f64, cfg)
}

/// Geometric scan of initial radii for the elastic-radius estimator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadiusScan {
    /// First radius tried; defaults to b when `None`.
    pub start: Option<f64>,
    pub factor: f64,
    pub ceiling: f64,
    pub n_angles: usize,
}

impl Default for RadiusScan {
    fn default() -> Self {
        Self {
            start: None,
            factor: 1.25,
            ceiling: 1e9,
            n_angles: 32,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum ElasticRadius {
    Found { radius: f64 },
    NotFound { ceiling: f64 },
}

impl ElasticRadius {
    pub fn radius(&self) -> Option<f64> {
        match self {
            ElasticRadius::Found { radius } => Some(*radius),
            ElasticRadius::NotFound { .. } => None,
        }
    }
}

/// Whether every trajectory started on the circle of radius `r` stays at
/// distance ≥ b from the origin over (0, 2π·periods]. A slack of
/// 10·(abs_tol + rel_tol·b) absorbs integration error.
pub fn circle_stays_outside<S: ImpulsiveSystem + ?Sized>(
    sys: &S,
    r: f64,
    b: f64,
    periods: usize,
    n_angles: usize,
    cfg: &IntegratorConfig,
) -> Result<bool> {
    use rayon::prelude::*;
    let slack = 10.0 * (cfg.abs_tol + cfg.rel_tol * b);
    let dense = IntegratorConfig { dense: true, ..*cfg };
    let results: Vec<Result<bool>> = (0..n_angles)
        .into_par_iter()
        .map(|i| {
            let ang = TAU * i as f64 / n_angles as f64;
            let z0 = CartesianState::new(0.0, r * ang.cos(), r * ang.sin());
            let traj = flow(sys, z0, TAU * periods as f64, &dense)?;
            Ok(traj.min_radius() >= b - slack)
        })
        .collect();
    let mut all = true;
    for r in results {
        all &= r?;
    }
    Ok(all)
}

/// Smallest scanned radius r_b whose circle keeps |z(t)| ≥ b over one
/// period.
pub fn elastic_radius<S: ImpulsiveSystem + ?Sized>(
    sys: &S,
    b: f64,
    cfg: &IntegratorConfig,
    scan: &RadiusScan,
) -> Result<ElasticRadius> {
    elastic_radius_over(sys, b, 1, cfg, scan)
}

/// [`elastic_radius`] over `periods` periods instead of one.
pub fn elastic_radius_over<S: ImpulsiveSystem + ?Sized>(
    sys: &S,
    b: f64,
    periods: usize,
    cfg: &IntegratorConfig,
    scan: &RadiusScan,
) -> Result<ElasticRadius> {
    if periods == 0 {
        return Err(Error::InvalidArgument("elastic radius needs at least one period".into()));
    }
    if !(b > 0.0) {
        return Err(Error::InvalidArgument(format!("b = {b} must be positive")));
    }
    if !(scan.factor > 1.0) || scan.n_angles == 0 {
        return Err(Error::InvalidArgument("radius scan needs factor > 1 and n_angles ≥ 1".into()));
    }
    let mut r = scan.start.unwrap_or(b);
    while r <= scan.ceiling {
        if circle_stays_outside(sys, r, b, periods, scan.n_angles, cfg)? {
            return Ok(ElasticRadius::Found { radius: r });
        }
        r *= scan.factor;
    }
    Ok(ElasticRadius::NotFound {
        ceiling: scan.ceiling,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{Forcing, RestoringForce, SystemSpec};
    use std::f64::consts::{FRAC_PI_2, PI};

    fn linear(a: f64, times: Vec<f64>) -> SystemSpec {
        SystemSpec::new(RestoringForce::Linear { omega_sq: 1.0 }, Forcing::Zero, a, times).unwrap()
    }

    #[test]
    fn quarter_rotation() {
        let s = linear(0.0, vec![]);
        let traj = flow(&s, CartesianState::new(0.0, 1.0, 0.0), FRAC_PI_2, &Default::default()).unwrap();
        let z = traj.final_point();
        assert!(z[0].abs() < 1e-9 && (z[1] + 1.0).abs() < 1e-9, "{z:?}");
    }

    #[test]
    fn one_impulse_doubles_the_full_turn() {
        let s = linear(1.0, vec![PI]);
        let traj = flow(&s, CartesianState::new(0.0, 1.0, 0.0), TAU, &Default::default()).unwrap();
        let z = traj.final_point();
        assert!((z[0] - 2.0).abs() < 1e-9 && z[1].abs() < 1e-9, "{z:?}");
        assert_eq!(traj.jumps.len(), 1);
        let j = traj.jumps[0];
        assert_eq!(j.post, [2.0 * j.pre[0], 2.0 * j.pre[1]]);
    }

    #[test]
    fn short_window_is_euler_consistent() {
        let s = SystemSpec::new(
            RestoringForce::Asinh,
            Forcing::Cosine {
                amplitude: 0.5,
                phase: 0.0,
            },
            0.2,
            vec![PI],
        )
        .unwrap();
        let z0 = CartesianState::new(0.3, 1.5, -0.5);
        let eps = 1e-6;
        let z = flow(&s, z0, z0.t + eps, &Default::default()).unwrap().final_point();
        let f = crate::dynamics::eval_field(&s, &z0).unwrap();
        assert!((z[0] - (z0.x + eps * f[0])).abs() < 1e-11);
        assert!((z[1] - (z0.y + eps * f[1])).abs() < 1e-11);
    }

    #[test]
    fn impulse_at_start_is_not_reapplied() {
        let s = linear(1.0, vec![0.0]);
        let traj = flow(&s, CartesianState::new(0.0, 1.0, 0.0), TAU, &Default::default()).unwrap();
        // One jump, at the end of the window (0, 2π].
        assert_eq!(traj.jumps.len(), 1);
        assert_eq!(traj.jumps[0].t, TAU);
        assert_eq!(traj.samples[0].side, Side::PostImpulse);
        let z = traj.final_point();
        assert!((z[0] - 2.0).abs() < 1e-9);
    }

    #[test]
    fn poincare_examples() {
        let s = linear(0.0, vec![]);
        let z = poincare(&s, [0.3, -0.7], 1, &Default::default()).unwrap();
        assert!((z[0] - 0.3).abs() < 1e-9 && (z[1] + 0.7).abs() < 1e-9);
        let s = linear(1.0, vec![PI]);
        let z = poincare(&s, [1.0, 0.0], 2, &Default::default()).unwrap();
        assert!((z[0] - 4.0).abs() < 1e-8 && z[1].abs() < 1e-8, "{z:?}");
        assert!(poincare(&s, [1.0, 0.0], 0, &Default::default()).is_err());
    }

    #[test]
    fn samples_are_ordered_with_paired_jump_states() {
        let s = linear(0.5, vec![1.0, 4.0]);
        let traj = flow(&s, CartesianState::new(0.0, 1.0, 0.0), 3.0 * TAU, &Default::default()).unwrap();
        assert_eq!(traj.jumps.len(), 6);
        for w in traj.samples.windows(2) {
            if w[1].side == Side::PostImpulse {
                assert_eq!(w[0].side, Side::PreImpulse);
                assert_eq!(w[0].t, w[1].t);
            } else {
                assert!(w[1].t > w[0].t);
            }
        }
        let max_gap = traj
            .samples
            .windows(2)
            .map(|w| w[1].t - w[0].t)
            .fold(0.0, f64::max);
        assert!(max_gap <= 0.1 + 1e-12);
    }

    #[test]
    fn dense_output_interpolates_accurately() {
        let s = linear(0.0, vec![]);
        let traj = flow(&s, CartesianState::new(0.0, 1.0, 0.0), TAU, &Default::default()).unwrap();
        for i in 0..100 {
            let t = TAU * (i as f64 + 0.37) / 100.0;
            let z = traj.eval(t, false).unwrap();
            assert!((z[0] - t.cos()).abs() < 1e-8 && (z[1] + t.sin()).abs() < 1e-8);
        }
    }

    #[test]
    fn blow_up_carries_partial_trajectory() {
        let cubic = crate::dynamics::CustomForce {
            name: "anti-cubic".into(),
            value: std::sync::Arc::new(|x: f64| -x * x * x),
            derivative: std::sync::Arc::new(|x: f64| -3.0 * x * x),
            antiderivative: std::sync::Arc::new(|x: f64| -0.25 * x.powi(4)),
        };
        let s = SystemSpec::new(RestoringForce::Custom(cubic), Forcing::Zero, 0.0, vec![]).unwrap();
        let err = flow(&s, CartesianState::new(0.0, 2.0, 2.0), 10.0, &Default::default()).unwrap_err();
        let partial = err.partial_trajectory().expect("partial trajectory");
        assert!(partial.samples.len() > 1);
    }

    #[test]
    fn elastic_radius_examples() {
        let s = linear(0.0, vec![]);
        let scan = RadiusScan {
            n_angles: 8,
            ..Default::default()
        };
        assert_eq!(
            elastic_radius(&s, 1.0, &Default::default(), &scan).unwrap(),
            ElasticRadius::Found { radius: 1.0 }
        );
        let s = linear(1.0, vec![PI]);
        let r = elastic_radius(&s, 1.0, &Default::default(), &scan).unwrap();
        assert!(r.radius().unwrap() <= 1.0);

        let tight = RadiusScan {
            start: Some(0.1),
            factor: 2.0,
            ceiling: 0.5,
            n_angles: 4,
        };
        assert_eq!(
            elastic_radius(&s, 1.0, &Default::default(), &tight).unwrap(),
            ElasticRadius::NotFound { ceiling: 0.5 }
        );
    }
}
