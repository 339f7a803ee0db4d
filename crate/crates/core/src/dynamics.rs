//! Problem instances for x'' + g(x) = p(t, x, x') with linear impulses
//! Δx = a·x(t_j−), Δx' = a·x'(t_j−) on a 2π-periodic schedule.
//!
//! The first-order form is x' = y, y' = −g(x) + p(t, x, y). Between impulses
//! the vector field is smooth; at every t_j both coordinates are multiplied by
//! (1 + a), which leaves the polar angle untouched.

use std::f64::consts::TAU;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::quadrature::{self, GaussLegendre};

/// Period of the forcing and of the impulse schedule.
pub const PERIOD: f64 = TAU;

type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
type ForcingFn = Arc<dyn Fn(f64, f64, f64) -> f64 + Send + Sync>;

/// User-supplied restoring force: value, derivative and antiderivative
/// G(x) = ∫₀ˣ g.
#[derive(Clone)]
pub struct CustomForce {
    pub name: String,
    pub value: ScalarFn,
    pub derivative: ScalarFn,
    pub antiderivative: ScalarFn,
}

#[derive(Clone)]
pub enum RestoringForce {
    /// g(x) = asinh(x).
    Asinh,
    /// g(x) = sign(x)·ln(1 + |x|).
    SignedLog,
    /// g(x) = ω²·x. Resonant reference family; violates (g₀).
    Linear { omega_sq: f64 },
    Custom(CustomForce),
}

impl RestoringForce {
    pub fn value(&self, x: f64) -> f64 {
        match self {
            RestoringForce::Asinh => x.asinh(),
            RestoringForce::SignedLog => x.signum() * x.abs().ln_1p(),
            RestoringForce::Linear { omega_sq } => omega_sq * x,
            RestoringForce::Custom(c) => (c.value)(x),
        }
    }

    pub fn derivative(&self, x: f64) -> f64 {
        match self {
            RestoringForce::Asinh => 1.0 / x.hypot(1.0),
            RestoringForce::SignedLog => 1.0 / (1.0 + x.abs()),
            RestoringForce::Linear { omega_sq } => *omega_sq,
            RestoringForce::Custom(c) => (c.derivative)(x),
        }
    }

    /// Potential G(x) = ∫₀ˣ g(s) ds.
    pub fn potential(&self, x: f64) -> f64 {
        match self {
            RestoringForce::Asinh => {
                // x·asinh(x) − (√(1+x²) − 1), with the bracket written to
                // avoid cancellation near zero.
                let s = x.hypot(1.0);
                x * x.asinh() - x * x / (s + 1.0)
            }
            RestoringForce::SignedLog => {
                let m = x.abs();
                (1.0 + m) * m.ln_1p() - m
            }
            RestoringForce::Linear { omega_sq } => 0.5 * omega_sq * x * x,
            RestoringForce::Custom(c) => (c.antiderivative)(x),
        }
    }

    pub fn name(&self) -> String {
        match self {
            RestoringForce::Asinh => "asinh".into(),
            RestoringForce::SignedLog => "signed_log".into(),
            RestoringForce::Linear { omega_sq } => format!("linear({omega_sq})"),
            RestoringForce::Custom(c) => c.name.clone(),
        }
    }
}

impl fmt::Debug for RestoringForce {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "RestoringForce({})", self.name())
    }
}

#[derive(Clone)]
pub enum Forcing {
    Zero,
    /// A·cos(t + phase).
    Cosine { amplitude: f64, phase: f64 },
    /// A·cos t + B·y/(1 + y²): bounded and velocity dependent.
    CosWithVelocity { amplitude: f64, damping: f64 },
    Custom {
        name: String,
        f: ForcingFn,
        state_dependent: bool,
    },
}

impl Forcing {
    pub fn value(&self, t: f64, x: f64, y: f64) -> f64 {
        match self {
            Forcing::Zero => 0.0,
            Forcing::Cosine { amplitude, phase } => amplitude * (t + phase).cos(),
            Forcing::CosWithVelocity { amplitude, damping } => {
                amplitude * t.cos() + damping * y / (1.0 + y * y)
            }
            Forcing::Custom { f, .. } => f(t, x, y),
        }
    }

    /// Whether p reads x or y (and not just t).
    pub fn depends_on_state(&self) -> bool {
        match self {
            Forcing::Zero | Forcing::Cosine { .. } => false,
            Forcing::CosWithVelocity { damping, .. } => *damping != 0.0,
            Forcing::Custom {
                state_dependent, ..
            } => *state_dependent,
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Forcing::Zero => true,
            Forcing::Cosine { amplitude, .. } => *amplitude == 0.0,
            Forcing::CosWithVelocity { amplitude, damping } => {
                *amplitude == 0.0 && *damping == 0.0
            }
            Forcing::Custom { .. } => false,
        }
    }

    pub fn name(&self) -> String {
        match self {
            Forcing::Zero => "zero".into(),
            Forcing::Cosine { amplitude, phase } => format!("cosine({amplitude}, {phase})"),
            Forcing::CosWithVelocity { amplitude, damping } => {
                format!("cos_with_velocity({amplitude}, {damping})")
            }
            Forcing::Custom { name, .. } => name.clone(),
        }
    }
}

impl fmt::Debug for Forcing {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Forcing({})", self.name())
    }
}

/// Impulse instants t_1 < … < t_k in [0, 2π), repeated with period 2π.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImpulseSchedule {
    times: Vec<f64>,
}

impl ImpulseSchedule {
    pub fn new(times: Vec<f64>) -> Result<Self> {
        for (i, &t) in times.iter().enumerate() {
            if !t.is_finite() || !(0.0..PERIOD).contains(&t) {
                return Err(Error::InvalidSpec(format!(
                    "impulse time {t} is outside [0, 2π)"
                )));
            }
            if i > 0 && times[i - 1] >= t {
                return Err(Error::InvalidSpec(
                    "impulse times must be strictly increasing".into(),
                ));
            }
        }
        Ok(Self { times })
    }

    pub fn empty() -> Self {
        Self { times: Vec::new() }
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Instant of impulse j in period m, computed from the integer pair so
    /// that long runs do not accumulate drift.
    pub fn instant(&self, j: usize, m: i64) -> f64 {
        self.times[j] + PERIOD * m as f64
    }

    /// All impulse instants in the half-open window (t0, t1], ascending.
    pub fn instants_in(&self, t0: f64, t1: f64) -> Vec<f64> {
        let mut out = Vec::new();
        if self.times.is_empty() || t1 <= t0 {
            return out;
        }
        let m_lo = (t0 / PERIOD).floor() as i64 - 1;
        let m_hi = (t1 / PERIOD).ceil() as i64 + 1;
        for m in m_lo..=m_hi {
            for j in 0..self.times.len() {
                let s = self.instant(j, m);
                if s > t0 && s <= t1 {
                    out.push(s);
                }
            }
        }
        out
    }

    /// True when t coincides with some t_j + 2πm up to a few ulps of the
    /// period count.
    pub fn is_instant(&self, t: f64) -> bool {
        let tol = 1e-12 * t.abs().max(1.0);
        let m = (t / PERIOD).floor() as i64;
        (m - 1..=m + 1).any(|m| {
            (0..self.times.len()).any(|j| (self.instant(j, m) - t).abs() <= tol)
        })
    }
}

/// Which side of an impulse instant a stored state represents.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Regular,
    PreImpulse,
    PostImpulse,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CartesianState {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub side: Side,
}

impl CartesianState {
    pub fn new(t: f64, x: f64, y: f64) -> Self {
        Self {
            t,
            x,
            y,
            side: Side::Regular,
        }
    }

    pub fn with_side(mut self, side: Side) -> Self {
        self.side = side;
        self
    }

    pub fn point(&self) -> [f64; 2] {
        [self.x, self.y]
    }

    pub fn radius(&self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn is_finite(&self) -> bool {
        self.t.is_finite() && self.x.is_finite() && self.y.is_finite()
    }
}

/// Smooth interval between consecutive impulse instants that the
/// integrator is currently traversing. Fields that depend on which side of
/// an impulse they are evaluated on (e.g. a translated system built around a
/// discontinuous reference orbit) use it to pick the branch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Window {
    pub start: f64,
    pub end: f64,
}

impl Window {
    pub fn midpoint(&self) -> f64 {
        0.5 * (self.start + self.end)
    }
}

/// A planar system with linear impulses that the integrator can propagate.
pub trait ImpulsiveSystem: Sync {
    fn field(&self, t: f64, window: Window, z: [f64; 2]) -> Result<[f64; 2]>;
    fn impulse_gain(&self) -> f64;
    fn schedule(&self) -> &ImpulseSchedule;
}

/// The full problem instance.
#[derive(Clone, Debug)]
pub struct SystemSpec {
    g: RestoringForce,
    p: Forcing,
    a: f64,
    schedule: ImpulseSchedule,
}

impl SystemSpec {
    pub fn new(g: RestoringForce, p: Forcing, a: f64, impulse_times: Vec<f64>) -> Result<Self> {
        if !a.is_finite() || 1.0 + a <= 0.0 {
            return Err(Error::InvalidSpec(format!(
                "impulse gain a={a} must satisfy 1 + a > 0"
            )));
        }
        if let RestoringForce::Linear { omega_sq } = g {
            if !(omega_sq.is_finite() && omega_sq > 0.0) {
                return Err(Error::InvalidSpec(format!(
                    "linear family needs ω² > 0, got {omega_sq}"
                )));
            }
        }
        if let RestoringForce::Custom(c) = &g {
            check_custom_potential(c)?;
        }
        let schedule = ImpulseSchedule::new(impulse_times)?;
        Ok(Self { g, p, a, schedule })
    }

    pub fn g(&self) -> &RestoringForce {
        &self.g
    }

    pub fn p(&self) -> &Forcing {
        &self.p
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn impulse_times(&self) -> &[f64] {
        self.schedule.times()
    }

    /// Same spec with a different forcing.
    pub fn with_forcing(&self, p: Forcing) -> Self {
        Self {
            p,
            ..self.clone()
        }
    }

    /// Serializable description, `None` when g or p are user callables.
    pub fn document(&self) -> Option<SpecDocument> {
        let g = match &self.g {
            RestoringForce::Asinh => ForceFamily::Asinh,
            RestoringForce::SignedLog => ForceFamily::SignedLog,
            RestoringForce::Linear { omega_sq } => ForceFamily::Linear {
                omega_sq: *omega_sq,
            },
            RestoringForce::Custom(_) => return None,
        };
        let p = match &self.p {
            Forcing::Zero => ForcingFamily::Zero,
            Forcing::Cosine { amplitude, phase } => ForcingFamily::Cosine {
                amplitude: *amplitude,
                phase: *phase,
            },
            Forcing::CosWithVelocity { amplitude, damping } => ForcingFamily::CosWithVelocity {
                amplitude: *amplitude,
                damping: *damping,
            },
            Forcing::Custom { .. } => return None,
        };
        Some(SpecDocument {
            g,
            p,
            a: self.a,
            impulse_times: self.schedule.times().to_vec(),
        })
    }

    /// SHA-256 of the canonical JSON document; a name-based digest for
    /// specs built from callables.
    pub fn hash(&self) -> String {
        let text = match self.document() {
            Some(doc) => serde_json::to_string(&doc).expect("spec document serializes"),
            None => format!(
                "custom:{}:{}:{:?}:{:?}",
                self.g.name(),
                self.p.name(),
                self.a.to_bits(),
                self.schedule.times().iter().map(|t| t.to_bits()).collect::<Vec<_>>()
            ),
        };
        hex::encode(Sha256::digest(text.as_bytes()))
    }
}

impl ImpulsiveSystem for SystemSpec {
    fn field(&self, t: f64, _window: Window, z: [f64; 2]) -> Result<[f64; 2]> {
        eval_field(self, &CartesianState::new(t, z[0], z[1]))
    }

    fn impulse_gain(&self) -> f64 {
        self.a
    }

    fn schedule(&self) -> &ImpulseSchedule {
        &self.schedule
    }
}

fn check_custom_potential(c: &CustomForce) -> Result<()> {
    let g0 = (c.antiderivative)(0.0);
    if g0.abs() > 1e-12 {
        return Err(Error::InvalidSpec(format!(
            "custom force `{}`: G(0) = {g0}, expected 0",
            c.name
        )));
    }
    for &x in &[-3.0, -0.7, 0.3, 1.1, 4.0] {
        let h = 1e-4;
        let dg = ((c.antiderivative)(x + h) - (c.antiderivative)(x - h)) / (2.0 * h);
        let gx = (c.value)(x);
        if (dg - gx).abs() > 1e-6 * (1.0 + gx.abs()) {
            return Err(Error::InvalidSpec(format!(
                "custom force `{}`: G'({x}) = {dg} but g({x}) = {gx}",
                c.name
            )));
        }
    }
    Ok(())
}

/// (x', y') = (y, −g(x) + p(t, x, y)).
pub fn eval_field(spec: &SystemSpec, s: &CartesianState) -> Result<[f64; 2]> {
    let g = spec.g.value(s.x);
    if !g.is_finite() {
        return Err(non_finite("g", s));
    }
    let p = spec.p.value(s.t, s.x, s.y);
    if !p.is_finite() {
        return Err(non_finite("p", s));
    }
    Ok([s.y, -g + p])
}

fn non_finite(function: &'static str, s: &CartesianState) -> Error {
    Error::NonFinite {
        function,
        t: s.t,
        x: s.x,
        y: s.y,
    }
}

/// Jump at an impulse instant: (x, y) ↦ ((1+a)x, (1+a)y).
pub fn impulse_map(spec: &SystemSpec, s: &CartesianState) -> Result<CartesianState> {
    if s.side != Side::PreImpulse || !spec.schedule.is_instant(s.t) {
        return Err(Error::NotImpulseTime { t: s.t });
    }
    let k = 1.0 + spec.a;
    Ok(CartesianState {
        t: s.t,
        x: k * s.x,
        y: k * s.y,
        side: Side::PostImpulse,
    })
}

/// Inverse jump: post-impulse state back to its left limit.
pub fn inverse_impulse_map(spec: &SystemSpec, s: &CartesianState) -> Result<CartesianState> {
    if s.side != Side::PostImpulse || !spec.schedule.is_instant(s.t) {
        return Err(Error::NotImpulseTime { t: s.t });
    }
    let k = 1.0 + spec.a;
    Ok(CartesianState {
        t: s.t,
        x: s.x / k,
        y: s.y / k,
        side: Side::PreImpulse,
    })
}

// ---------------------------------------------------------------------------
// JSON documents

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", content = "params", rename_all = "snake_case")]
pub enum ForceFamily {
    Asinh,
    SignedLog,
    Linear { omega_sq: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", content = "params", rename_all = "snake_case")]
pub enum ForcingFamily {
    Zero,
    Cosine {
        amplitude: f64,
        #[serde(default)]
        phase: f64,
    },
    CosWithVelocity {
        amplitude: f64,
        damping: f64,
    },
}

/// `{"g": {"family": ..., "params": ...}, "p": {...}, "a": number, "impulse_times": [...]}`
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpecDocument {
    pub g: ForceFamily,
    pub p: ForcingFamily,
    pub a: f64,
    pub impulse_times: Vec<f64>,
}

impl SpecDocument {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::InvalidSpec(e.to_string()))
    }

    pub fn build(&self) -> Result<SystemSpec> {
        let g = match self.g {
            ForceFamily::Asinh => RestoringForce::Asinh,
            ForceFamily::SignedLog => RestoringForce::SignedLog,
            ForceFamily::Linear { omega_sq } => RestoringForce::Linear { omega_sq },
        };
        let p = match self.p {
            ForcingFamily::Zero => Forcing::Zero,
            ForcingFamily::Cosine { amplitude, phase } => Forcing::Cosine { amplitude, phase },
            ForcingFamily::CosWithVelocity { amplitude, damping } => {
                Forcing::CosWithVelocity { amplitude, damping }
            }
        };
        SystemSpec::new(g, p, self.a, self.impulse_times.clone())
    }
}

// ---------------------------------------------------------------------------
// Sampled hypothesis diagnostics

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Condition {
    /// g(x)/x → 0 as |x| → ∞.
    #[serde(rename = "g0")]
    Sublinear,
    /// g(x)·sign(x) → +∞ and the time-map integral diverges.
    #[serde(rename = "g1")]
    Coercive,
    /// g'(x) > 0.
    #[serde(rename = "g2")]
    Monotone,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
}

impl Verdict {
    pub fn from_bool(ok: bool) -> Self {
        if ok {
            Verdict::Pass
        } else {
            Verdict::Fail
        }
    }

    pub fn passed(self) -> bool {
        self == Verdict::Pass
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleGrid {
    pub lo: f64,
    pub hi: f64,
    pub n_samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub condition: Condition,
    pub grid: SampleGrid,
    /// Worst sampled value of the quantity the condition constrains.
    pub witness: f64,
    /// Abscissa at which the witness was taken.
    pub witness_x: f64,
    pub verdict: Verdict,
    pub diagnostic: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConditionThresholds {
    /// (g₀): |g(x)/x| must be below this at both range edges.
    pub sublinear_ratio: f64,
    /// (g₁): g(x)·sign(x) must exceed this at both range edges.
    pub coercive_value: f64,
}

impl Default for ConditionThresholds {
    fn default() -> Self {
        Self {
            sublinear_ratio: 0.05,
            coercive_value: 10.0,
        }
    }
}

/// Sampled checks of (g₀), (g₁), (g₂) on `x_range`. These are diagnostics:
/// a limit cannot be verified on a finite grid.
pub fn check_conditions(
    spec: &SystemSpec,
    x_range: (f64, f64),
    n_samples: usize,
    thresholds: &ConditionThresholds,
) -> Result<Vec<ConditionReport>> {
    let (lo, hi) = x_range;
    if n_samples < 2 {
        return Err(Error::InvalidArgument("n_samples must be at least 2".into()));
    }
    if !(lo < 0.0 && hi > 0.0) {
        return Err(Error::InvalidArgument(
            "x_range must straddle 0 so both tails can be sampled".into(),
        ));
    }
    let grid = SampleGrid { lo, hi, n_samples };
    let g = spec.g();
    Ok(vec![
        check_sublinear(g, grid, thresholds),
        check_coercive(g, grid, thresholds),
        check_monotone(g, grid),
    ])
}

/// Geometric grid from min(1, edge) to edge (edge > 0).
fn tail_grid(edge: f64, n: usize) -> Vec<f64> {
    let start = edge.min(1.0);
    let ratio = (edge / start).powf(1.0 / (n - 1) as f64);
    let mut v: Vec<f64> = (0..n).map(|i| start * ratio.powi(i as i32)).collect();
    v[n - 1] = edge;
    v
}

fn check_sublinear(g: &RestoringForce, grid: SampleGrid, th: &ConditionThresholds) -> ConditionReport {
    let mut ok = true;
    let mut witness = f64::NEG_INFINITY;
    let mut witness_x = grid.hi;
    let mut diagnostic = None;
    for (sign, edge) in [(1.0, grid.hi), (-1.0, -grid.lo)] {
        let ratios: Vec<(f64, f64)> = tail_grid(edge, grid.n_samples)
            .into_iter()
            .map(|m| {
                let x = sign * m;
                (x, (g.value(x) / x).abs())
            })
            .collect();
        let (x_edge, r_edge) = *ratios.last().unwrap();
        if r_edge > witness {
            witness = r_edge;
            witness_x = x_edge;
        }
        if !r_edge.is_finite() || r_edge >= th.sublinear_ratio {
            ok = false;
        }
        let increasing = ratios
            .windows(2)
            .find(|w| w[1].1 > w[0].1 * (1.0 + 1e-12));
        if let Some(w) = increasing {
            ok = false;
            diagnostic = Some(format!(
                "|g(x)/x| increases from {} at x={} to {} at x={}",
                w[0].1, w[0].0, w[1].1, w[1].0
            ));
        }
    }
    ConditionReport {
        condition: Condition::Sublinear,
        grid,
        witness,
        witness_x,
        verdict: Verdict::from_bool(ok),
        diagnostic,
    }
}

/// Time-map integral ∫_{x⁻}^{x⁺} ds / √(G(x⁺) − G(s)) with G(x⁻) = G(x⁺),
/// x⁻ < 0 < x⁺. Both endpoints carry an inverse-square-root singularity,
/// removed by s = x⁺ − w² on [0, x⁺] and s = x⁻ + w² on [x⁻, 0].
pub fn time_map_integral(g: &RestoringForce, x_plus: f64) -> std::result::Result<f64, String> {
    if x_plus <= 0.0 {
        return Err("x⁺ must be positive".into());
    }
    let level = g.potential(x_plus);
    if !(level.is_finite() && level > 0.0) {
        return Err(format!("G({x_plus}) = {level} is not a positive level"));
    }
    let x_minus = level_crossing_negative(g, level)?;
    let rule = GaussLegendre::new(16);
    let upper = |w: f64| {
        let s = x_plus - w * w;
        let gap = level - g.potential(s);
        if w == 0.0 {
            2.0 / g.value(x_plus).sqrt()
        } else {
            2.0 * w / gap.sqrt()
        }
    };
    let lower = |w: f64| {
        let s = x_minus + w * w;
        let gap = level - g.potential(s);
        if w == 0.0 {
            2.0 / (-g.value(x_minus)).sqrt()
        } else {
            2.0 * w / gap.sqrt()
        }
    };
    let right = quadrature::adaptive(&rule, 0.0, x_plus.sqrt(), 1e-10, 30, upper);
    let left = quadrature::adaptive(&rule, 0.0, (-x_minus).sqrt(), 1e-10, 30, lower);
    let total = right + left;
    if total.is_finite() && total > 0.0 {
        Ok(total)
    } else {
        Err(format!("quadrature returned {total} at x⁺ = {x_plus}"))
    }
}

fn level_crossing_negative(g: &RestoringForce, level: f64) -> std::result::Result<f64, String> {
    let mut lo = -1.0;
    let mut steps = 0;
    while g.potential(lo) < level {
        lo *= 2.0;
        steps += 1;
        if steps > 1100 || !lo.is_finite() {
            return Err(format!("G never reaches level {level} on the negative axis"));
        }
    }
    let mut hi = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        if g.potential(mid) < level {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

fn check_coercive(g: &RestoringForce, grid: SampleGrid, th: &ConditionThresholds) -> ConditionReport {
    let mut ok = true;
    let mut diagnostic = None;
    let right = g.value(grid.hi);
    let left = -g.value(grid.lo);
    let (witness, witness_x) = if right <= left {
        (right, grid.hi)
    } else {
        (left, grid.lo)
    };
    if !(witness.is_finite() && witness > th.coercive_value) {
        ok = false;
        diagnostic = Some(format!(
            "g(x)·sign(x) = {witness} at x = {witness_x} does not exceed {}",
            th.coercive_value
        ));
    }
    let n_levels = grid.n_samples.clamp(2, 8);
    let levels = tail_grid(grid.hi, n_levels);
    let start = levels.iter().position(|&x| x >= 1.0).unwrap_or(0);
    let mut prev: Option<(f64, f64)> = None;
    for &x_plus in &levels[start..] {
        match time_map_integral(g, x_plus) {
            Ok(value) => {
                if let Some((px, pv)) = prev {
                    if value <= pv * (1.0 + 1e-6) {
                        ok = false;
                        diagnostic.get_or_insert(format!(
                            "time-map integral does not grow: {pv} at x⁺={px}, {value} at x⁺={x_plus}"
                        ));
                    }
                }
                prev = Some((x_plus, value));
            }
            Err(msg) => {
                ok = false;
                diagnostic.get_or_insert(format!("quadrature failure: {msg}"));
                break;
            }
        }
    }
    ConditionReport {
        condition: Condition::Coercive,
        grid,
        witness,
        witness_x,
        verdict: Verdict::from_bool(ok),
        diagnostic,
    }
}

fn check_monotone(g: &RestoringForce, grid: SampleGrid) -> ConditionReport {
    let n = grid.n_samples;
    let mut xs: Vec<f64> = (0..n)
        .map(|i| grid.lo + (grid.hi - grid.lo) * i as f64 / (n - 1) as f64)
        .collect();
    xs.extend(tail_grid(grid.hi, n));
    xs.extend(tail_grid(-grid.lo, n).into_iter().map(|m| -m));
    xs.push(0.0);
    let (witness_x, witness) = xs
        .iter()
        .map(|&x| (x, g.derivative(x)))
        .fold((0.0, f64::INFINITY), |acc, (x, d)| {
            if d < acc.1 || d.is_nan() {
                (x, d)
            } else {
                acc
            }
        });
    let ok = witness.is_finite() && witness > 0.0;
    ConditionReport {
        condition: Condition::Monotone,
        grid,
        witness,
        witness_x,
        verdict: Verdict::from_bool(ok),
        diagnostic: (!ok).then(|| format!("g'({witness_x}) = {witness}")),
    }
}
