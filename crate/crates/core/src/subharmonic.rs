//! Subharmonic solutions around a harmonic orbit.
//!
//! Writing x = x̄ + u, y = ȳ + v for a 2π-periodic solution (x̄, ȳ) turns
//! the equation into
//!
//! ```text
//! u' = v,  v' = −H(t, u)·u,     H(t, u) = ∫₀¹ g'(x̄(t) + s·u) ds
//! ```
//!
//! with the same linear impulses. Fixed points of the n-th iterate of this
//! system's period map P₀ are 2πn-periodic solutions of the original one.
//! Far from the origin the polar angle φ of (u, v) turns slowly, near it
//! quickly; the construction picks an inner circle that rotates by more
//! than three quarter turns over n* periods and an outer circle that
//! rotates by less, locates the curve ω* between them where the rotation
//! is exactly three quarter turns (the image is orthogonal to the point),
//! and searches for fixed points of P₀^{n*} from there.

use std::f64::consts::{FRAC_PI_4, PI, SQRT_2, TAU};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{
    check_conditions, CartesianState, Condition, ConditionThresholds, ImpulseSchedule,
    ImpulsiveSystem, RestoringForce, Side, SystemSpec, Window,
};
use crate::error::{Error, Result};
use crate::fixed_point::{candidate_order, newton, norm, NewtonConfig, NewtonOutcome, PlanarMap, PoincareMap};
use crate::integrator::{elastic_radius_over, flow, DenseStep, IntegratorConfig, RadiusScan, Trajectory};
use crate::quadrature::{adaptive, GaussLegendre};
use crate::rotation::{track_angle, RotationRecord, ORIGIN_GUARD};

/// Rotation −2π + π/2 that separates the inner and outer circles.
pub const ROTATION_TARGET: f64 = -1.5 * PI;

/// Below this |u| the effective stiffness is integrated; above it the
/// difference quotient is exact and cheaper.
pub const U_SWITCH: f64 = 1e-3;

pub const DEFAULT_QUAD_ORDER: usize = 16;

/// Origin guard for angle tracking of a trajectory started at `w0`.
fn guard_for(w0: [f64; 2]) -> f64 {
    ORIGIN_GUARD.min(1e-6 * norm(w0))
}

// ---------------------------------------------------------------------------
// Reference orbit

#[derive(Debug, Clone, Copy, PartialEq)]
struct Segment {
    start: f64,
    end: f64,
    first: usize,
    last: usize,
}

/// Dense interpolant of a 2π-periodic solution, extended periodically.
#[derive(Debug, Clone)]
pub struct HarmonicOrbit {
    z0: [f64; 2],
    residual: f64,
    mismatch: f64,
    steps: Vec<DenseStep>,
    segments: Vec<Segment>,
}

impl HarmonicOrbit {
    /// Integrates one period from the fixed point `z0` and keeps the dense
    /// output. Fails when the orbit does not close to `closure_tol`.
    pub fn from_fixed_point<S: ImpulsiveSystem + ?Sized>(
        sys: &S,
        z0: [f64; 2],
        residual: f64,
        cfg: &IntegratorConfig,
        closure_tol: f64,
    ) -> Result<Self> {
        let dense = IntegratorConfig { dense: true, ..*cfg };
        let traj = flow(sys, CartesianState::new(0.0, z0[0], z0[1]), TAU, &dense)?;
        let end = traj.final_point();
        let mismatch = norm([end[0] - z0[0], end[1] - z0[1]]);
        if !(mismatch <= closure_tol) {
            return Err(Error::Precondition(format!(
                "reference orbit from {z0:?} does not close: mismatch {mismatch:e} > {closure_tol:e}"
            )));
        }
        Ok(Self::from_trajectory(&traj, z0, residual, mismatch))
    }

    fn from_trajectory(traj: &Trajectory, z0: [f64; 2], residual: f64, mismatch: f64) -> Self {
        let steps = traj.steps.clone();
        let mut segments: Vec<Segment> = Vec::new();
        let cuts: Vec<f64> = traj.jumps.iter().map(|j| j.t).collect();
        for (i, s) in steps.iter().enumerate() {
            let new_segment = match segments.last() {
                None => true,
                Some(_) => cuts.iter().any(|&c| c == s.t0),
            };
            if new_segment {
                segments.push(Segment {
                    start: s.t0,
                    end: s.t1(),
                    first: i,
                    last: i + 1,
                });
            } else if let Some(seg) = segments.last_mut() {
                seg.end = s.t1();
                seg.last = i + 1;
            }
        }
        Self {
            z0,
            residual,
            mismatch,
            steps,
            segments,
        }
    }

    pub fn fixed_point(&self) -> [f64; 2] {
        self.z0
    }

    pub fn residual(&self) -> f64 {
        self.residual
    }

    /// |z(2π⁺) − z(0⁺)| of the stored period.
    pub fn mismatch(&self) -> f64 {
        self.mismatch
    }

    /// (x̄, ȳ) at `t`. The smooth piece is picked by the window midpoint,
    /// so a field evaluated at either end of an integration window sees the
    /// branch of that window; a degenerate window gives the right limit.
    pub fn eval(&self, t: f64, window: Window) -> [f64; 2] {
        let anchor = window.midpoint();
        let k = (anchor / TAU).floor();
        let mid = anchor - k * TAU;
        let tr = t - k * TAU;
        let si = self
            .segments
            .partition_point(|s| s.end <= mid)
            .min(self.segments.len() - 1);
        let seg = self.segments[si];
        let steps = &self.steps[seg.first..seg.last];
        let j = steps.partition_point(|s| s.t0 <= tr).saturating_sub(1);
        steps[j].eval(tr)
    }

    /// Right limit at `t`.
    pub fn at(&self, t: f64) -> [f64; 2] {
        self.eval(t, Window { start: t, end: t })
    }
}

// ---------------------------------------------------------------------------
// Translated system

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PositivityWitness {
    pub min_h: f64,
    pub t: f64,
    pub u: f64,
}

/// u'' = −H(t, u)·u around a harmonic orbit, with the original impulses.
#[derive(Debug, Clone)]
pub struct TranslatedSystem {
    orbit: HarmonicOrbit,
    g: RestoringForce,
    a: f64,
    schedule: ImpulseSchedule,
    rule: GaussLegendre,
    positivity: PositivityWitness,
}

/// Builds the translated system. The forcing must depend on t only: the
/// reduction subtracts p along the reference orbit and along the perturbed
/// solution, which cancels only when p ignores the state.
pub fn build_translated_system(
    spec: &SystemSpec,
    orbit: HarmonicOrbit,
    quad_order: usize,
) -> Result<TranslatedSystem> {
    if spec.p().depends_on_state() {
        return Err(Error::Unsupported(format!(
            "forcing `{}` depends on (x, y); the translated system needs p = p(t)",
            spec.p().name()
        )));
    }
    if quad_order == 0 {
        return Err(Error::InvalidArgument("quadrature order must be positive".into()));
    }
    let reports = check_conditions(spec, (-1e6, 1e6), 64, &ConditionThresholds::default())?;
    if let Some(r) = reports
        .iter()
        .find(|r| r.condition == Condition::Monotone && !r.verdict.passed())
    {
        return Err(Error::Precondition(format!(
            "g' is not positive on the sampled range (g'({}) = {})",
            r.witness_x, r.witness
        )));
    }
    let mut ts = TranslatedSystem {
        orbit,
        g: spec.g().clone(),
        a: spec.a(),
        schedule: spec.schedule().clone(),
        rule: GaussLegendre::new(quad_order),
        positivity: PositivityWitness {
            min_h: f64::INFINITY,
            t: 0.0,
            u: 0.0,
        },
    };
    let mut us = vec![0.0];
    for e in -4..=6 {
        let m = 10f64.powi(e);
        us.extend([m, -m, 3.0 * m, -3.0 * m]);
    }
    for i in 0..32 {
        let t = TAU * i as f64 / 32.0;
        for &u in &us {
            let h = ts.stiffness(t, Window { start: t, end: t }, u);
            if !(h < ts.positivity.min_h) {
                continue;
            }
            ts.positivity = PositivityWitness { min_h: h, t, u };
        }
    }
    if !(ts.positivity.min_h > 0.0) {
        return Err(Error::NonPositiveStiffness {
            t: ts.positivity.t,
            u: ts.positivity.u,
            value: ts.positivity.min_h,
        });
    }
    Ok(ts)
}

impl TranslatedSystem {
    pub fn orbit(&self) -> &HarmonicOrbit {
        &self.orbit
    }

    pub fn positivity(&self) -> PositivityWitness {
        self.positivity
    }

    pub fn quad_order(&self) -> usize {
        self.rule.order()
    }

    /// H(t, u) on the branch selected by `window`.
    pub fn stiffness(&self, t: f64, window: Window, u: f64) -> f64 {
        let xbar = self.orbit.eval(t, window)[0];
        self.stiffness_at(xbar, u)
    }

    /// ∫₀¹ g'(x̄ + s·u) ds, by quadrature for |u| ≤ [`U_SWITCH`] and by the
    /// difference quotient otherwise. Constant ω² for the linear family.
    pub fn stiffness_at(&self, xbar: f64, u: f64) -> f64 {
        if let RestoringForce::Linear { omega_sq } = self.g {
            return omega_sq;
        }
        if u.abs() <= U_SWITCH {
            self.stiffness_quadrature(xbar, u)
        } else {
            self.stiffness_quotient(xbar, u)
        }
    }

    /// Composite Gauss–Legendre. g' can be sharply peaked on [0, 1] when
    /// |u| is large, so panels are bisected until they agree.
    pub fn stiffness_quadrature(&self, xbar: f64, u: f64) -> f64 {
        adaptive(&self.rule, 0.0, 1.0, 1e-15, 40, |s| self.g.derivative(xbar + s * u))
    }

    /// (g(x̄ + u) − g(x̄))/u; g'(x̄) at u = 0.
    pub fn stiffness_quotient(&self, xbar: f64, u: f64) -> f64 {
        if u == 0.0 {
            return self.g.derivative(xbar);
        }
        (self.g.value(xbar + u) - self.g.value(xbar)) / u
    }
}

impl ImpulsiveSystem for TranslatedSystem {
    fn field(&self, t: f64, window: Window, z: [f64; 2]) -> Result<[f64; 2]> {
        let h = self.stiffness(t, window, z[0]);
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::NonPositiveStiffness { t, u: z[0], value: h });
        }
        Ok([z[1], -h * z[0]])
    }

    fn impulse_gain(&self) -> f64 {
        self.a
    }

    fn schedule(&self) -> &ImpulseSchedule {
        &self.schedule
    }
}

// ---------------------------------------------------------------------------
// Angle diagnostics

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhiProbe {
    pub w0: [f64; 2],
    pub horizon: usize,
    pub delta_phi: f64,
    /// φ decreases across every stored sample and every step interior
    /// probe between impulses, and is unchanged across each impulse.
    pub strictly_decreasing: bool,
    /// Largest increment seen between impulses (negative when decreasing).
    pub max_increment: f64,
    pub pass: bool,
    pub record: RotationRecord,
}

/// Angle history of the translated flow from `w0` over `horizon` periods.
/// Passes when φ dropped by more than `min_decrease`.
pub fn phi_divergence_probe<S: ImpulsiveSystem + ?Sized>(
    ts: &S,
    w0: [f64; 2],
    horizon: usize,
    cfg: &IntegratorConfig,
    min_decrease: f64,
) -> Result<PhiProbe> {
    if !(norm(w0) > 0.0) || horizon == 0 {
        return Err(Error::InvalidArgument(
            "divergence probe needs w0 ≠ 0 and a positive horizon".into(),
        ));
    }
    let dense = IntegratorConfig { dense: true, ..*cfg };
    let traj = flow(ts, CartesianState::new(0.0, w0[0], w0[1]), TAU * horizon as f64, &dense)?;
    let record = track_angle(&traj, guard_for(w0))?;
    let (strictly_decreasing, max_increment) = monotonicity(&traj, &record);
    Ok(PhiProbe {
        w0,
        horizon,
        delta_phi: record.delta_theta,
        strictly_decreasing,
        max_increment,
        pass: record.delta_theta < -min_decrease,
        record,
    })
}

fn wrap(d: f64) -> f64 {
    (d + PI).rem_euclid(TAU) - PI
}

fn angle_of(z: [f64; 2]) -> f64 {
    z[1].atan2(z[0])
}

fn monotonicity(traj: &Trajectory, rec: &RotationRecord) -> (bool, f64) {
    let s = &traj.samples;
    let mut ok = true;
    let mut max_inc = f64::NEG_INFINITY;
    for i in 1..s.len() {
        let jump = s[i - 1].side == Side::PreImpulse && s[i].side == Side::PostImpulse;
        if jump {
            ok &= rec.theta[i].to_bits() == rec.theta[i - 1].to_bits();
            continue;
        }
        let inc = rec.theta[i] - rec.theta[i - 1];
        max_inc = max_inc.max(inc);
        ok &= inc < 0.0;
        // Interior points of the step, unwrapped against the left sample.
        let (t0, t1) = (s[i - 1].t, s[i].t);
        let a0 = angle_of(s[i - 1].point());
        let mut prev = rec.theta[i - 1];
        for f in [0.25, 0.5, 0.75] {
            let t = t0 + f * (t1 - t0);
            if let Some(z) = traj.eval(t, true) {
                let th = rec.theta[i - 1] + wrap(angle_of(z) - a0);
                ok &= th < prev;
                prev = th;
            }
        }
        ok &= rec.theta[i] < prev;
    }
    (ok, max_inc)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SectorOutcome {
    /// φ reached −π/4 while ρ ≥ b.
    Crossed,
    /// ρ dropped below b first; τ is the partial time.
    ExitedBelowB,
    /// Neither happened within the horizon cap; τ is the cap time and a
    /// lower bound on the crossing time.
    HorizonCap,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SectorCrossing {
    pub rho0: f64,
    pub tau: f64,
    pub outcome: SectorOutcome,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SectorTimeReport {
    pub b: f64,
    pub c: f64,
    /// Sampled sup of H over the sector |φ| < π/4, ρ ≥ b.
    pub delta_sq: f64,
    pub sup_witness: (f64, f64),
    /// (2/δ)·arctan(1/δ).
    pub bound: f64,
    pub crossings: Vec<SectorCrossing>,
    /// No start left through ρ < b, and every crossing time (or the cap
    /// time, for starts that had not crossed) is at least `bound`.
    pub pass: bool,
}

/// Lower bound on the time to cross the sector when H < δ².
pub fn sector_bound(delta_sq: f64) -> f64 {
    let d = delta_sq.sqrt();
    2.0 / d * (1.0 / d).atan()
}

/// Sampled sup of H(t, u) over t ∈ [0, 2π] (both limits at impulse
/// instants) and u ∈ [b/√2, 10⁶·b/√2], the u-range of the sector.
pub fn sector_sup_stiffness(ts: &TranslatedSystem, b: f64, n_t: usize, n_u: usize) -> (f64, (f64, f64)) {
    let u_lo = b / SQRT_2;
    let mut windows: Vec<(f64, Window)> = (0..n_t)
        .map(|i| {
            let t = TAU * i as f64 / n_t as f64;
            (t, Window { start: t, end: t })
        })
        .collect();
    for &tj in ts.schedule.times() {
        windows.push((tj, Window { start: tj - 1e-3, end: tj }));
    }
    let mut best = (f64::NEG_INFINITY, (0.0, 0.0));
    for (t, w) in windows {
        let xbar = ts.orbit.eval(t, w)[0];
        for j in 0..n_u {
            let u = u_lo * 1e6f64.powf(j as f64 / (n_u - 1).max(1) as f64);
            let h = ts.stiffness_at(xbar, u);
            if h > best.0 {
                best = (h, (t, u));
            }
        }
    }
    best
}

/// Time for the flow from ρ₀·(cos π/4, sin π/4) at t = 0 to reach φ = −π/4,
/// or to leave ρ ≥ b, whichever comes first.
pub fn sector_crossing<S: ImpulsiveSystem + ?Sized>(
    ts: &S,
    b: f64,
    rho0: f64,
    cfg: &IntegratorConfig,
    cap_periods: usize,
) -> Result<SectorCrossing> {
    let dense = IntegratorConfig { dense: true, ..*cfg };
    let mut z = [rho0 * FRAC_PI_4.cos(), rho0 * FRAC_PI_4.sin()];
    let mut phi_start = FRAC_PI_4;
    for k in 0..cap_periods {
        let t0 = TAU * k as f64;
        let traj = flow(ts, CartesianState::new(t0, z[0], z[1]), t0 + TAU, &dense)?;
        let rec = track_angle(&traj, guard_for([b, 0.0]))?;
        let phi = |i: usize| phi_start + rec.theta[i] - rec.theta[0];
        let s = &traj.samples;
        for i in 1..s.len() {
            let crossed = phi(i) <= -FRAC_PI_4;
            let exited = s[i].radius() < b;
            if !(crossed || exited) {
                continue;
            }
            let (ta, tb) = (s[i - 1].t, s[i].t);
            if ta == tb {
                let outcome = if exited && !crossed {
                    SectorOutcome::ExitedBelowB
                } else {
                    SectorOutcome::Crossed
                };
                return Ok(SectorCrossing { rho0, tau: tb, outcome });
            }
            let a0 = angle_of(s[i - 1].point());
            let phi0 = phi(i - 1);
            let at = |t: f64| traj.eval(t, true).unwrap_or_else(|| s[i].point());
            let t_cross = crossed.then(|| {
                bisect_time(ta, tb, |t| phi0 + wrap(angle_of(at(t)) - a0) <= -FRAC_PI_4)
            });
            let t_exit = exited.then(|| bisect_time(ta, tb, |t| norm(at(t)) < b));
            return Ok(match (t_cross, t_exit) {
                (Some(tc), Some(te)) if te < tc => SectorCrossing {
                    rho0,
                    tau: te,
                    outcome: SectorOutcome::ExitedBelowB,
                },
                (Some(tc), _) => SectorCrossing {
                    rho0,
                    tau: tc,
                    outcome: SectorOutcome::Crossed,
                },
                (None, Some(te)) => SectorCrossing {
                    rho0,
                    tau: te,
                    outcome: SectorOutcome::ExitedBelowB,
                },
                (None, None) => unreachable!("one of the two conditions triggered"),
            });
        }
        phi_start += rec.delta_theta;
        z = traj.final_point();
    }
    Ok(SectorCrossing {
        rho0,
        tau: TAU * cap_periods as f64,
        outcome: SectorOutcome::HorizonCap,
    })
}

/// First time in (lo, hi] where `hit` holds, assuming it holds at hi.
fn bisect_time(mut lo: f64, mut hi: f64, hit: impl Fn(f64) -> bool) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if hit(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

/// Sector crossings from `n_starts` radii c·2^{i/2} on the entry ray.
pub fn sector_time(
    ts: &TranslatedSystem,
    b: f64,
    c: f64,
    n_starts: usize,
    cfg: &IntegratorConfig,
) -> Result<SectorTimeReport> {
    if !(b > 0.0 && c >= b) || n_starts == 0 {
        return Err(Error::InvalidArgument(format!(
            "sector time needs c ≥ b > 0 and at least one start (b = {b}, c = {c})"
        )));
    }
    let (delta_sq, sup_witness) = sector_sup_stiffness(ts, b, 64, 256);
    let bound = sector_bound(delta_sq);
    let crossings: Result<Vec<SectorCrossing>> = (0..n_starts)
        .into_par_iter()
        .map(|i| sector_crossing(ts, b, c * 2f64.powf(0.5 * i as f64), cfg, 64))
        .collect();
    let crossings = crossings?;
    // A start still inside the sector at the cap has τ > cap time, which
    // bounds the crossing time from below just as well.
    let pass = crossings
        .iter()
        .all(|c| c.outcome != SectorOutcome::ExitedBelowB && c.tau >= bound);
    Ok(SectorTimeReport {
        b,
        c,
        delta_sq,
        sup_witness,
        bound,
        crossings,
        pass,
    })
}

// ---------------------------------------------------------------------------
// Twist engine

/// Image of a point together with the continuous rotation angle that
/// carried it there.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwistEval {
    pub image: [f64; 2],
    pub rotation: f64,
}

/// A planar map whose images come with a continuous rotation angle.
pub trait TwistMap: Sync {
    fn evaluate(&self, z: [f64; 2]) -> Result<TwistEval>;
}

/// The map part of a [`TwistMap`], for the fixed-point solvers.
pub struct ImageOf<'a, T: TwistMap + ?Sized>(pub &'a T);

impl<T: TwistMap + ?Sized> PlanarMap for ImageOf<'_, T> {
    fn apply(&self, z: [f64; 2]) -> Result<[f64; 2]> {
        Ok(self.0.evaluate(z)?.image)
    }
}

/// n-th iterate of the period map, with the rotation read off the angle
/// tracker.
pub struct PeriodMapTwist<'a, S: ImpulsiveSystem + ?Sized> {
    pub system: &'a S,
    pub iterate: usize,
    pub cfg: IntegratorConfig,
}

impl<S: ImpulsiveSystem + ?Sized> TwistMap for PeriodMapTwist<'_, S> {
    fn evaluate(&self, z: [f64; 2]) -> Result<TwistEval> {
        let traj = flow(
            self.system,
            CartesianState::new(0.0, z[0], z[1]),
            TAU * self.iterate as f64,
            &self.cfg,
        )?;
        let rec = track_angle(&traj, guard_for(z))?;
        Ok(TwistEval {
            image: traj.final_point(),
            rotation: rec.delta_theta,
        })
    }
}

/// Closed-form maps for exercising the engine without integration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SyntheticTwist {
    /// (ρ, φ) ↦ (ρ, φ + τ(ρ)), τ linear from −3π/2 − 0.1 at c to
    /// −3π/2 + 0.1 at e.
    Rotation { c: f64, e: f64 },
    Identity,
    /// (ρ, φ) ↦ (λρ, φ + τ(ρ)), τ linear from −π/2 at c to −π/2 − 0.5 at e.
    ExpandingRotation { c: f64, e: f64, lambda: f64 },
}

impl SyntheticTwist {
    pub fn polar(&self, rho: f64) -> (f64, f64) {
        match *self {
            SyntheticTwist::Rotation { c, e } => {
                (rho, ROTATION_TARGET + 0.1 * (2.0 * (rho - c) / (e - c) - 1.0))
            }
            SyntheticTwist::Identity => (rho, 0.0),
            SyntheticTwist::ExpandingRotation { c, e, lambda } => {
                (lambda * rho, -0.5 * PI - 0.5 * (rho - c) / (e - c))
            }
        }
    }
}

impl TwistMap for SyntheticTwist {
    fn evaluate(&self, z: [f64; 2]) -> Result<TwistEval> {
        if let SyntheticTwist::Identity = self {
            return Ok(TwistEval { image: z, rotation: 0.0 });
        }
        let rho = norm(z);
        let (r, tau) = self.polar(rho);
        let ang = angle_of(z) + tau;
        Ok(TwistEval {
            image: [r * ang.cos(), r * ang.sin()],
            rotation: tau,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwistParams {
    /// E = {|F(z)| ≤ (1 + e_tol)·|z|}.
    pub e_tol: f64,
    /// J = {|⟨Lz, F(z)⟩| ≤ j_tol·|Lz|·|F(z)|, |F(z)| ≥ r_U}.
    pub j_tol: f64,
    /// r_U = origin_fraction · c.
    pub origin_fraction: f64,
    pub l: [[f64; 2]; 2],
}

impl Default for TwistParams {
    fn default() -> Self {
        Self {
            e_tol: 1e-12,
            j_tol: 1e-9,
            origin_fraction: 1e-6,
            l: [[1.0, 0.0], [0.0, 1.0]],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SetSample {
    pub x: f64,
    pub y: f64,
    pub rho: f64,
    pub angle: f64,
    pub rotation: f64,
    pub in_e: bool,
    pub in_j: bool,
}

fn inner(l: &[[f64; 2]; 2], z: [f64; 2], f: [f64; 2]) -> (f64, f64) {
    let lz = [l[0][0] * z[0] + l[0][1] * z[1], l[1][0] * z[0] + l[1][1] * z[1]];
    (lz[0] * f[0] + lz[1] * f[1], norm(lz))
}

/// E and J membership of `z` given its image.
pub fn classify(z: [f64; 2], eval: &TwistEval, c: f64, params: &TwistParams) -> (bool, bool) {
    let nz = norm(z);
    let nf = norm(eval.image);
    let in_e = nf <= nz * (1.0 + params.e_tol);
    let (dot, nlz) = inner(&params.l, z, eval.image);
    let in_j = nf >= params.origin_fraction * c && dot.abs() <= params.j_tol * nlz * nf;
    (in_e, in_j)
}

fn sample_at<T: TwistMap + ?Sized>(
    map: &T,
    rho: f64,
    angle: f64,
    c: f64,
    params: &TwistParams,
) -> Result<SetSample> {
    let z = [rho * angle.cos(), rho * angle.sin()];
    let ev = map.evaluate(z)?;
    let (in_e, in_j) = classify(z, &ev, c, params);
    Ok(SetSample {
        x: z[0],
        y: z[1],
        rho,
        angle,
        rotation: ev.rotation,
        in_e,
        in_j,
    })
}

/// E/J membership on an `n_r × n_theta` polar grid of the annulus
/// c ≤ ρ ≤ e, radii including both ends. Row-major in radius.
pub fn classify_annulus<T: TwistMap + ?Sized>(
    map: &T,
    c: f64,
    e: f64,
    n_r: usize,
    n_theta: usize,
    params: &TwistParams,
) -> Result<Vec<SetSample>> {
    if !(0.0 < c && c < e) || n_r < 2 || n_theta == 0 {
        return Err(Error::InvalidArgument("annulus grid needs 0 < c < e, n_r ≥ 2".into()));
    }
    (0..n_r * n_theta)
        .into_par_iter()
        .map(|k| {
            let (i, j) = (k / n_theta, k % n_theta);
            let rho = c + (e - c) * i as f64 / (n_r - 1) as f64;
            sample_at(map, rho, TAU * j as f64 / n_theta as f64, c, params)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OmegaStar {
    pub x: f64,
    pub y: f64,
    pub rho: f64,
    pub angle: f64,
    pub rotation: f64,
    /// |⟨Lω, F(ω)⟩|.
    pub orthogonality: f64,
    /// |⟨Lω, F(ω)⟩| / (|Lω|·|F(ω)|), the cosine of the angle between them.
    pub orthogonality_normalized: f64,
    /// Rotation within the bisection tolerance of the target.
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeResult {
    pub angle: f64,
    pub samples: Vec<SetSample>,
    pub meets_e: bool,
    pub meets_j: bool,
    pub omega_star: Option<OmegaStar>,
    /// Points where |F(z)| − |z| changes sign along the probe.
    pub e_boundary: Vec<[f64; 2]>,
    /// Points where the rotation crosses a multiple of −2π.
    pub resonances: Vec<[f64; 2]>,
}

/// Radial probe at `angle` from ρ = c to ρ = e.
pub fn probe<T: TwistMap + ?Sized>(
    map: &T,
    c: f64,
    e: f64,
    angle: f64,
    n_samples: usize,
    rotation_tol: f64,
    params: &TwistParams,
) -> Result<ProbeResult> {
    if !(0.0 < c && c < e) || n_samples < 2 {
        return Err(Error::InvalidArgument("probe needs 0 < c < e and two samples".into()));
    }
    let radii: Vec<f64> = (0..n_samples)
        .map(|i| c + (e - c) * i as f64 / (n_samples - 1) as f64)
        .collect();
    let samples: Result<Vec<SetSample>> = radii
        .par_iter()
        .map(|&r| sample_at(map, r, angle, c, params))
        .collect();
    let samples = samples?;
    let point = |rho: f64| [rho * angle.cos(), rho * angle.sin()];
    let eval_at = |rho: f64| map.evaluate(point(rho));

    let mut meets_j = samples.iter().any(|s| s.in_j);
    let dot_at = |s: &SetSample, ev: [f64; 2]| inner(&params.l, [s.x, s.y], ev).0;
    let mut e_boundary = Vec::new();
    let mut resonances = Vec::new();
    let mut prev: Option<(SetSample, TwistEval)> = None;
    for s in &samples {
        let ev = map.evaluate([s.x, s.y])?;
        if let Some((p, pev)) = prev {
            if dot_at(&p, pev.image).signum() != dot_at(s, ev.image).signum()
                && norm(pev.image) >= params.origin_fraction * c
                && norm(ev.image) >= params.origin_fraction * c
            {
                meets_j = true;
            }
            if p.in_e != s.in_e {
                let growth = |rho: f64| -> Result<f64> { Ok(norm(eval_at(rho)?.image) - rho) };
                e_boundary.push(point(bisect_root(p.rho, s.rho, growth, 60)?));
            }
            let (m_lo, m_hi) = (p.rotation / TAU, s.rotation / TAU);
            let crossed = m_lo.floor() != m_hi.floor() || m_lo.ceil() != m_hi.ceil();
            if crossed {
                let m = m_lo.max(m_hi).floor();
                if m <= -1.0 {
                    let f = |rho: f64| -> Result<f64> { Ok(eval_at(rho)?.rotation - m * TAU) };
                    resonances.push(point(bisect_root(p.rho, s.rho, f, 60)?));
                }
            }
        }
        prev = Some((*s, ev));
    }

    let omega_star = match samples
        .windows(2)
        .find(|w| (w[0].rotation - ROTATION_TARGET) * (w[1].rotation - ROTATION_TARGET) <= 0.0)
    {
        Some(w) => Some(locate_omega_star(map, w[0].rho, w[1].rho, angle, rotation_tol, params)?),
        None => None,
    };
    Ok(ProbeResult {
        angle,
        meets_e: samples.iter().any(|s| s.in_e),
        meets_j,
        samples,
        omega_star,
        e_boundary,
        resonances,
    })
}

/// Sign-change bisection of `f` on [lo, hi].
fn bisect_root(
    mut lo: f64,
    mut hi: f64,
    f: impl Fn(f64) -> Result<f64>,
    iterations: usize,
) -> Result<f64> {
    let f_lo = f(lo)?;
    for _ in 0..iterations {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if (f(mid)? > 0.0) == (f_lo > 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Bisection in ρ ∈ [rho_lo, rho_hi] on the ray at `angle` for the point
/// whose rotation is [`ROTATION_TARGET`]; the rotation must straddle the
/// target at the ends.
pub fn locate_omega_star<T: TwistMap + ?Sized>(
    map: &T,
    rho_lo: f64,
    rho_hi: f64,
    angle: f64,
    rotation_tol: f64,
    params: &TwistParams,
) -> Result<OmegaStar> {
    let point = |rho: f64| [rho * angle.cos(), rho * angle.sin()];
    let (mut lo, mut hi) = (rho_lo, rho_hi);
    let ev_lo = map.evaluate(point(lo))?;
    let ev_hi = map.evaluate(point(hi))?;
    if (ev_lo.rotation - ROTATION_TARGET) * (ev_hi.rotation - ROTATION_TARGET) > 0.0 {
        return Err(Error::InvalidArgument(format!(
            "rotation does not straddle the target on [{lo}, {hi}]: {} .. {}",
            ev_lo.rotation, ev_hi.rotation
        )));
    }
    let lo_below = ev_lo.rotation < ROTATION_TARGET;
    let (mut best_rho, mut best) = if (ev_lo.rotation - ROTATION_TARGET).abs()
        <= (ev_hi.rotation - ROTATION_TARGET).abs()
    {
        (lo, ev_lo)
    } else {
        (hi, ev_hi)
    };
    for _ in 0..200 {
        if (best.rotation - ROTATION_TARGET).abs() <= rotation_tol {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let ev = map.evaluate(point(mid))?;
        if (ev.rotation - ROTATION_TARGET).abs() < (best.rotation - ROTATION_TARGET).abs() {
            best_rho = mid;
            best = ev;
        }
        if (ev.rotation < ROTATION_TARGET) == lo_below {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let z = point(best_rho);
    let (dot, nlz) = inner(&params.l, z, best.image);
    Ok(OmegaStar {
        x: z[0],
        y: z[1],
        rho: best_rho,
        angle,
        rotation: best.rotation,
        orthogonality: dot.abs(),
        orthogonality_normalized: dot.abs() / (nlz * norm(best.image)),
        converged: (best.rotation - ROTATION_TARGET).abs() <= rotation_tol,
    })
}

// ---------------------------------------------------------------------------
// Annulus construction

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SubharmonicSearch {
    /// First b tried when sizing the sector; doubled until the sector
    /// bound exceeds 2nπ.
    pub b_start: f64,
    pub b_doublings: u32,
    pub elastic: RadiusScan,
    /// Largest n* tried.
    pub horizon_cap: usize,
    pub circle_samples: usize,
    /// e_n = 2^i·c_n, i ≤ outer_doublings.
    pub outer_doublings: u32,
    pub probes: usize,
    pub probe_samples: usize,
    pub rotation_tol: f64,
    pub twist: TwistParams,
    pub newton: NewtonConfig,
    pub min_separation: f64,
}

impl Default for SubharmonicSearch {
    fn default() -> Self {
        Self {
            b_start: 1.0,
            b_doublings: 40,
            elastic: RadiusScan::default(),
            horizon_cap: 64,
            circle_samples: 16,
            outer_doublings: 20,
            probes: 8,
            probe_samples: 33,
            rotation_tol: 1e-10,
            twist: TwistParams::default(),
            newton: NewtonConfig {
                residual_target: 1e-7,
                ..NewtonConfig::default()
            },
            min_separation: 1e-4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinimalityScreen {
    pub threshold: f64,
    /// Distance to the nearest fixed point of P₀^k found from the
    /// candidate, for k = 1..=n; the origin counts for every k.
    pub distances: Vec<f64>,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubharmonicFixedPoint {
    /// In translated coordinates (u, v).
    pub x: f64,
    pub y: f64,
    pub residual: f64,
    /// The same point in the original coordinates, x̄(0) + u.
    pub original: [f64; 2],
    pub seed: [f64; 2],
    pub in_annulus: bool,
    pub minimality: MinimalityScreen,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwistCertificate {
    pub n: usize,
    pub b: f64,
    pub delta_sq: f64,
    pub sector_bound: f64,
    pub c_n: f64,
    pub e_n: f64,
    pub n_star: usize,
    pub inner_rotations: Vec<f64>,
    pub outer_rotations: Vec<f64>,
    /// ω* on the first probe where it was located.
    pub omega_star: Option<OmegaStar>,
    pub probes: Vec<ProbeResult>,
    pub every_probe_meets_e: bool,
    pub every_probe_meets_j: bool,
    pub fixed_point: Option<SubharmonicFixedPoint>,
    #[serde(rename = "E_samples")]
    pub e_samples: Vec<SetSample>,
    #[serde(rename = "J_samples")]
    pub j_samples: Vec<SetSample>,
    /// Why no fixed point is reported, for a partial certificate.
    pub failure: Option<String>,
    pub note: String,
}

impl TwistCertificate {
    pub fn inner_condition_holds(&self) -> bool {
        self.inner_rotations.iter().all(|&r| r < ROTATION_TARGET)
    }

    pub fn outer_condition_holds(&self) -> bool {
        self.outer_rotations
            .iter()
            .all(|&r| r > ROTATION_TARGET && r < 0.0)
    }
}

/// Rotation after each of the first `periods` periods from `n_samples`
/// equispaced points of the circle of radius `r`; `out[i][k-1]` is the
/// rotation of sample i over k periods.
pub fn circle_rotations<S: ImpulsiveSystem + ?Sized>(
    sys: &S,
    r: f64,
    periods: usize,
    n_samples: usize,
    cfg: &IntegratorConfig,
) -> Result<Vec<Vec<f64>>> {
    (0..n_samples)
        .into_par_iter()
        .map(|i| {
            let ang = TAU * i as f64 / n_samples as f64;
            let z = [r * ang.cos(), r * ang.sin()];
            let traj = flow(sys, CartesianState::new(0.0, z[0], z[1]), TAU * periods as f64, cfg)?;
            let rec = track_angle(&traj, guard_for(z))?;
            let th0 = rec.theta[0];
            (1..=periods)
                .map(|k| {
                    rec.theta_at(TAU * k as f64)
                        .map(|th| th - th0)
                        .ok_or_else(|| Error::InvalidArgument("rotation record too short".into()))
                })
                .collect()
        })
        .collect::<Result<Vec<_>>>()
        .map_err(|e| Error::at_sample(0, e))
}

/// Runs the annulus construction and the fixed-point search for P₀^{n*}
/// with n* > n.
pub fn find_subharmonic(
    ts: &TranslatedSystem,
    n: usize,
    cfg: &IntegratorConfig,
    search: &SubharmonicSearch,
) -> Result<TwistCertificate> {
    if n == 0 {
        return Err(Error::InvalidArgument("n must be ≥ 1".into()));
    }
    // (i) sector radius b whose crossing time exceeds n periods, then the
    // radius c_n whose circle stays outside B_b for n periods.
    let mut chosen = None;
    for i in 0..=search.b_doublings {
        let b = search.b_start * 2f64.powi(i as i32);
        let (delta_sq, _) = sector_sup_stiffness(ts, b, 64, 256);
        let bound = sector_bound(delta_sq);
        if bound > TAU * n as f64 {
            chosen = Some((b, delta_sq, bound));
            break;
        }
    }
    let (b, delta_sq, bound) = chosen.ok_or_else(|| Error::SearchExhausted {
        reason: format!("sector bound never exceeds 2nπ up to b = 2^{}", search.b_doublings),
        best: None,
        best_residual: f64::INFINITY,
    })?;
    let scan = RadiusScan {
        start: Some(b),
        ..search.elastic
    };
    let c_n = elastic_radius_over(ts, b, n, cfg, &scan)?
        .radius()
        .ok_or_else(|| Error::SearchExhausted {
            reason: format!("no radius keeps n = {n} periods outside b = {b}"),
            best: None,
            best_residual: f64::INFINITY,
        })?;

    // (ii) smallest n* > n at which the inner circle turns past the target.
    let inner = circle_rotations(ts, c_n, search.horizon_cap, search.circle_samples, cfg)?;
    let n_star = (n + 1..=search.horizon_cap)
        .find(|&k| inner.iter().all(|r| r[k - 1] < ROTATION_TARGET))
        .ok_or(Error::NoIterateFound {
            cap: search.horizon_cap,
        })?;
    let inner_rotations: Vec<f64> = inner.iter().map(|r| r[n_star - 1]).collect();

    // (iii) outer circle turning by less than the target.
    let mut outer = None;
    for i in 1..=search.outer_doublings {
        let e = c_n * 2f64.powi(i as i32);
        let rot = circle_rotations(ts, e, n_star, search.circle_samples, cfg)?;
        let rot: Vec<f64> = rot.iter().map(|r| r[n_star - 1]).collect();
        if rot.iter().all(|&r| r > ROTATION_TARGET && r < 0.0) {
            outer = Some((e, rot));
            break;
        }
    }
    let (e_n, outer_rotations) = outer.ok_or_else(|| Error::SearchExhausted {
        reason: format!(
            "no outer radius up to 2^{}·c_n rotates by less than three quarter turns",
            search.outer_doublings
        ),
        best: None,
        best_residual: f64::INFINITY,
    })?;

    // (iv) radial probes: E/J membership, ω*, and seed points.
    let map = PeriodMapTwist {
        system: ts,
        iterate: n_star,
        cfg: *cfg,
    };
    let probes: Vec<ProbeResult> = (0..search.probes)
        .map(|m| {
            let angle = TAU * m as f64 / search.probes as f64;
            probe(&map, c_n, e_n, angle, search.probe_samples, search.rotation_tol, &search.twist)
        })
        .collect::<Result<_>>()?;

    // (v) fixed points of P₀^{n*} from ω*, the E boundary and the
    // resonant points.
    let mut seeds: Vec<[f64; 2]> = Vec::new();
    for p in &probes {
        if let Some(w) = p.omega_star {
            seeds.push([w.x, w.y]);
        }
        seeds.extend(&p.e_boundary);
        seeds.extend(&p.resonances);
    }
    let image = ImageOf(&map);
    let mut outcomes: Vec<NewtonOutcome> = seeds
        .par_iter()
        .filter_map(|&s| newton(&image, s, &search.newton).ok())
        .filter(|o| o.converged)
        .collect();
    outcomes.sort_by(candidate_order);

    let mut fixed_point = None;
    for o in &outcomes {
        let screen = minimality_screen(ts, o.z, n, cfg, search)?;
        if screen.pass {
            let zbar = ts.orbit.fixed_point();
            let rho = norm(o.z);
            fixed_point = Some(SubharmonicFixedPoint {
                x: o.z[0],
                y: o.z[1],
                residual: o.residual,
                original: [zbar[0] + o.z[0], zbar[1] + o.z[1]],
                seed: o.seed,
                in_annulus: rho >= c_n && rho <= e_n,
                minimality: screen,
            });
            break;
        }
    }
    let failure = fixed_point.is_none().then(|| {
        format!(
            "no fixed point of P₀^{n_star} found from {} seeds ({} Newton runs converged, none \
             passed the minimality screen)",
            seeds.len(),
            outcomes.len()
        )
    });
    let flat = probes.iter().flat_map(|p| p.samples.iter().copied());
    let e_samples: Vec<SetSample> = flat.clone().filter(|s| s.in_e).collect();
    let j_samples: Vec<SetSample> = flat.filter(|s| s.in_j).collect();
    Ok(TwistCertificate {
        n,
        b,
        delta_sq,
        sector_bound: bound,
        c_n,
        e_n,
        n_star,
        inner_rotations,
        outer_rotations,
        omega_star: probes.iter().find_map(|p| p.omega_star),
        every_probe_meets_e: probes.iter().all(|p| p.meets_e),
        every_probe_meets_j: probes.iter().all(|p| p.meets_j),
        probes,
        fixed_point,
        e_samples,
        j_samples,
        failure,
        note: format!(
            "sampled evidence: {} radial probes stand in for all curves joining the circles",
            search.probes
        ),
    })
}

/// Distances from `w` to the fixed points of P₀^k (k ≤ n) that Newton
/// reaches from `w`, and to the origin.
pub fn minimality_screen<S: ImpulsiveSystem + ?Sized>(
    ts: &S,
    w: [f64; 2],
    n: usize,
    cfg: &IntegratorConfig,
    search: &SubharmonicSearch,
) -> Result<MinimalityScreen> {
    let mut distances = Vec::with_capacity(n);
    for k in 1..=n {
        let map = PoincareMap::new(ts, k, *cfg);
        let mut d = norm(w);
        if let Ok(o) = newton(&map, w, &search.newton) {
            if o.converged {
                d = d.min(norm([o.z[0] - w[0], o.z[1] - w[1]]));
            }
        }
        distances.push(d);
    }
    Ok(MinimalityScreen {
        threshold: search.min_separation,
        pass: distances.iter().all(|&d| d >= search.min_separation),
        distances,
    })
}
