use std::collections::BTreeMap;
use std::f64::consts::TAU;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::sync::mpsc;

use anyhow::Context;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use impulsive_core::dynamics::ForcingFamily;
use impulsive_core::fixed_point::{residual, NewtonConfig, PoincareMap};
use impulsive_core::harmonic::{
    find_harmonic, select_disk_radius, verify_periodic_orbit, ClosureReport, DiskScan,
    DiskSelection, HarmonicReport, HarmonicSearch, HarmonicSolution,
};
use impulsive_core::integrator::flow;
use impulsive_core::report::{to_json_string, Envelope};
use impulsive_core::rotation::{
    angular_speed_sign_scan, track_angle, winding_report, SpeedScanReport, TwistVerdict,
    WindingReport, ORIGIN_GUARD,
};
use impulsive_core::subharmonic::{
    build_translated_system, find_subharmonic, HarmonicOrbit, SubharmonicSearch, TwistCertificate,
    DEFAULT_QUAD_ORDER,
};
use impulsive_core::{CartesianState, Error, IntegratorConfig, SystemSpec};

use crate::config::{RunConfig, SweepMode};
use crate::VerdictFailed;

fn write_report<T: Serialize>(out: &Path, name: &str, env: &Envelope<T>) -> anyhow::Result<()> {
    let path = out.join(name);
    std::fs::write(&path, to_json_string(env))
        .with_context(|| format!("writing {}", path.display()))
}

/// Report body for a run that stopped on an error.
#[derive(Debug, Serialize)]
struct ErrorBody<T: Serialize> {
    error: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    partial: Option<T>,
}

fn status_of(e: &Error) -> &'static str {
    match e {
        Error::SearchExhausted { .. } | Error::NoIterateFound { .. } => "exhausted",
        Error::Precondition(_) => "fail",
        _ => "error",
    }
}

// ---------------------------------------------------------------------------
// simulate

#[derive(Debug, Serialize)]
struct SimulateSummary {
    t_end: f64,
    /// [t, x, y] at the end of the run.
    final_state: [f64; 3],
    winding: Option<f64>,
    min_radius: f64,
    max_radius: f64,
    jumps: usize,
    steps: usize,
    /// Worst |ΔE| with E = y²/2 + G(x); only when p ≡ 0 and a = 0.
    energy_drift_if_conservative: Option<f64>,
}

pub fn cmd_simulate(cfg: &RunConfig, out: &Path) -> anyhow::Result<()> {
    let spec = cfg.spec()?;
    let icfg = cfg.integrator_config();
    let s = &cfg.simulate;
    let t_end = match (s.periods, s.t_end) {
        (Some(n), _) => TAU * n as f64,
        (None, Some(t)) => t,
        (None, None) => TAU,
    };
    if !(t_end > 0.0 && t_end.is_finite()) {
        return Err(crate::ConfigError(format!("simulate end time {t_end} must be positive")).into());
    }
    let hash = spec.hash();
    let csv_path = out.join("trajectory.csv");
    let z0 = CartesianState::new(0.0, s.x0, s.y0);
    let traj = match flow(&spec, z0, t_end, &icfg) {
        Ok(t) => t,
        Err(e) => {
            if let Some(partial) = e.partial_trajectory() {
                let rec = track_angle(partial, ORIGIN_GUARD).ok();
                partial
                    .write_csv(rec.as_ref(), &hash, BufWriter::new(File::create(&csv_path)?))
                    .context("writing partial trajectory")?;
            }
            let body: ErrorBody<()> = ErrorBody {
                error: e.to_string(),
                partial: None,
            };
            write_report(out, "simulate.json", &Envelope::new("simulate", hash, &icfg, cfg.seed, status_of(&e), body))?;
            return Err(e.into());
        }
    };
    let rec = match track_angle(&traj, ORIGIN_GUARD) {
        Ok(r) => Some(r),
        Err(Error::NearOrigin { .. }) => None,
        Err(e) => return Err(e.into()),
    };
    let mut w = BufWriter::new(File::create(&csv_path)?);
    traj.write_csv(rec.as_ref(), &hash, &mut w)?;
    w.flush()?;

    let conservative = spec.p().is_zero() && spec.a() == 0.0;
    let energy_drift_if_conservative = conservative.then(|| {
        let g = spec.g();
        let energy = |x: f64, y: f64| 0.5 * y * y + g.potential(x);
        let e0 = energy(s.x0, s.y0);
        traj.samples
            .iter()
            .map(|p| (energy(p.x, p.y) - e0).abs())
            .fold(0.0, f64::max)
    });
    let end = traj.end();
    let summary = SimulateSummary {
        t_end,
        final_state: [end.t, end.x, end.y],
        winding: rec.as_ref().map(|r| r.delta_theta),
        min_radius: traj.min_radius(),
        max_radius: traj.max_radius(),
        jumps: traj.jumps.len(),
        steps: traj.stats.steps,
        energy_drift_if_conservative,
    };
    println!("simulate  t_end = {t_end:.6}");
    println!("  final state    ({:+.12e}, {:+.12e})", end.x, end.y);
    match summary.winding {
        Some(w) => println!("  winding        {w:+.12e}"),
        None => println!("  winding        undefined (passes near the origin)"),
    }
    println!("  radius range   [{:.6e}, {:.6e}]", summary.min_radius, summary.max_radius);
    println!("  jumps / steps  {} / {}", summary.jumps, summary.steps);
    if let Some(d) = energy_drift_if_conservative {
        println!("  energy drift   {d:.3e}");
    }
    println!("  wrote {}", csv_path.display());
    write_report(out, "simulate.json", &Envelope::new("simulate", hash, &icfg, cfg.seed, "ok", summary))
}

// ---------------------------------------------------------------------------
// rotation

#[derive(Debug, Serialize)]
struct RotationBody {
    winding: WindingReport,
    speed_scan: SpeedScanReport,
}

pub fn cmd_rotation(cfg: &RunConfig, out: &Path) -> anyhow::Result<()> {
    let spec = cfg.spec()?;
    let icfg = cfg.integrator_config();
    let r = &cfg.rotation;
    let winding = winding_report(&spec, r.r0, r.samples, &icfg)?;
    let speed_scan = angular_speed_sign_scan(&spec, r.r0, r.samples, &icfg)?;
    println!("rotation  r0 = {}  samples = {}", r.r0, r.samples);
    println!("  {:>4}  {:>14}  {:>22}  {:>14}", "i", "theta0", "delta_theta", "max rate");
    for (i, th) in winding.theta0_grid.iter().enumerate() {
        println!(
            "  {i:>4}  {th:>14.10}  {:>+22.15e}  {:>+14.6e}",
            winding.delta_theta[i], speed_scan.max_rate[i]
        );
    }
    let ok = winding.verdict.passed();
    println!("  winding in (-2pi, 0): {}", if ok { "PASS" } else { "FAIL" });
    println!("  speed scan: {:?}", speed_scan.verdict);
    let body = RotationBody { winding, speed_scan };
    let status = if ok { "ok" } else { "fail" };
    write_report(out, "rotation.json", &Envelope::new("rotation", spec.hash(), &icfg, cfg.seed, status, body))?;
    if ok {
        Ok(())
    } else {
        Err(VerdictFailed(format!("one-period rotation left (-2π, 0) on the circle of radius {}", r.r0)).into())
    }
}

// ---------------------------------------------------------------------------
// harmonic

/// Everything the harmonic pipeline produces before the report is written.
pub struct HarmonicRun {
    pub d: f64,
    pub selection: Option<DiskSelection>,
    pub solution: HarmonicSolution,
    pub closure: ClosureReport,
}

#[derive(Debug, Serialize)]
struct HarmonicBody {
    #[serde(flatten)]
    report: HarmonicReport,
    residual_target: f64,
    selection: Option<DiskSelection>,
    angle_offset: f64,
    pass: bool,
}

/// Grid rotation drawn from the seed, in [0, 2π/angular).
fn angle_offset(seed: Option<u64>, angular: usize) -> f64 {
    match seed {
        Some(s) => ChaCha8Rng::seed_from_u64(s).gen_range(0.0..TAU / angular as f64),
        None => 0.0,
    }
}

fn harmonic_search(cfg: &RunConfig) -> HarmonicSearch {
    let h = &cfg.harmonic;
    let base = HarmonicSearch::default();
    HarmonicSearch {
        newton: NewtonConfig {
            residual_target: h.residual_target,
            ..base.newton
        },
        enforce_certificate: h.enforce_certificate,
        boundary_samples: h.boundary_samples,
        margin: h.margin,
        angle_offset: angle_offset(cfg.seed, base.angular),
        ..base
    }
}

/// Disk selection (unless d is fixed), fixed-point search and closure.
/// Stops with `Error::Precondition` when no certified disk exists.
pub fn run_harmonic(
    spec: &SystemSpec,
    cfg: &RunConfig,
    icfg: &IntegratorConfig,
) -> Result<HarmonicRun, (Error, Option<DiskSelection>)> {
    let h = &cfg.harmonic;
    let search = harmonic_search(cfg);
    let (d, selection) = match h.d {
        Some(d) => (d, None),
        None => {
            let scan = DiskScan {
                b0: h.b0,
                boundary_samples: h.boundary_samples,
                speed_samples: h.boundary_samples,
                margin: h.margin,
                max_doublings: h.max_doublings,
                ..DiskScan::default()
            };
            let sel = select_disk_radius(spec, icfg, &scan).map_err(|e| (e, None))?;
            if !sel.passed && h.enforce_certificate {
                let e = Error::Precondition(format!(
                    "no disk radius up to {} passes both the speed scan and the boundary certificate",
                    sel.d
                ));
                return Err((e, Some(sel)));
            }
            (sel.d, Some(sel))
        }
    };
    let solution = match find_harmonic(spec, d, icfg, &search) {
        Ok(s) => s,
        Err(e) => return Err((e, selection)),
    };
    let closure = match verify_periodic_orbit(spec, solution.fixed_point.z, 1, icfg, h.closure_tol) {
        Ok(c) => c,
        Err(e) => return Err((e, selection)),
    };
    Ok(HarmonicRun {
        d,
        selection,
        solution,
        closure,
    })
}

fn harmonic_passes(run: &HarmonicRun, cfg: &RunConfig) -> bool {
    run.solution.fixed_point.residual <= cfg.harmonic.residual_target && run.closure.pass
}

pub fn cmd_harmonic(cfg: &RunConfig, out: &Path) -> anyhow::Result<()> {
    let spec = cfg.spec()?;
    let icfg = cfg.integrator_config();
    let hash = spec.hash();
    let run = match run_harmonic(&spec, cfg, &icfg) {
        Ok(r) => r,
        Err((e, selection)) => {
            println!("harmonic  {}", status_of(&e).to_uppercase());
            if let Some(sel) = &selection {
                print_attempts(sel);
            }
            println!("  {e}");
            let body = ErrorBody {
                error: e.to_string(),
                partial: selection,
            };
            write_report(out, "harmonic.json", &Envelope::new("harmonic", hash, &icfg, cfg.seed, status_of(&e), body))?;
            return Err(e.into());
        }
    };
    let pass = harmonic_passes(&run, cfg);
    print_harmonic(&run);
    let body = HarmonicBody {
        report: HarmonicReport::new(run.d, &run.solution, run.closure.clone()),
        residual_target: cfg.harmonic.residual_target,
        selection: run.selection,
        angle_offset: harmonic_search(cfg).angle_offset,
        pass,
    };
    let status = if pass { "ok" } else { "fail" };
    write_report(out, "harmonic.json", &Envelope::new("harmonic", hash, &icfg, cfg.seed, status, body))?;
    if pass {
        Ok(())
    } else {
        Err(VerdictFailed(format!(
            "harmonic residual {:e} (target {:e}) or closure {:e} (tolerance {:e}) out of bounds",
            run.solution.fixed_point.residual,
            cfg.harmonic.residual_target,
            run.closure.closure,
            run.closure.tolerance
        ))
        .into())
    }
}

fn print_attempts(sel: &DiskSelection) {
    println!("  {:>16}  {:>16}  {:>12}", "d", "speed scan", "certificate");
    for a in &sel.attempts {
        let speed = match a.speed {
            TwistVerdict::TwistNegative => "twist-negative",
            TwistVerdict::NotNegative => "not negative",
        };
        println!("  {:>16.8e}  {speed:>16}  {:>12?}", a.d, a.certificate);
    }
}

fn print_harmonic(run: &HarmonicRun) {
    println!("harmonic  d = {:.10e}", run.d);
    if let Some(sel) = &run.selection {
        print_attempts(sel);
    }
    if let Some(c) = &run.solution.certificate {
        let lo = c.delta_theta.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = c.delta_theta.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        println!("  certificate    {:?}  delta_theta in [{lo:.6}, {hi:.6}]", c.verdict);
    }
    let fp = &run.solution.fixed_point;
    println!("  fixed point    ({:+.16e}, {:+.16e})", fp.z[0], fp.z[1]);
    println!("  residual       {:.3e}", fp.residual);
    println!("  closure        {:.3e}  ({})", run.closure.closure, if run.closure.pass { "PASS" } else { "FAIL" });
}

// ---------------------------------------------------------------------------
// subharmonic

#[derive(Debug, Serialize)]
struct SoundnessCheck {
    /// Residual of the fixed point under P₀^{n*} with both tolerances halved.
    residual_half_tol: f64,
    /// Closure of the original-coordinates orbit over n* periods.
    closure: ClosureReport,
}

#[derive(Debug, Serialize)]
struct SubharmonicBody {
    harmonic: HarmonicReport,
    certificate: TwistCertificate,
    soundness: Option<SoundnessCheck>,
    pass: bool,
}

#[derive(Debug, Serialize)]
struct SubharmonicFailure {
    harmonic: Option<HarmonicReport>,
    error: String,
}

fn subharmonic_search(cfg: &RunConfig) -> SubharmonicSearch {
    let s = &cfg.subharmonic;
    let base = SubharmonicSearch::default();
    SubharmonicSearch {
        horizon_cap: s.horizon_cap,
        circle_samples: s.circle_samples,
        probes: s.probes,
        probe_samples: s.probe_samples,
        newton: NewtonConfig {
            residual_target: s.residual_target,
            ..base.newton
        },
        min_separation: s.min_separation,
        ..base
    }
}

/// Result of the subharmonic pipeline on one spec.
pub struct SubharmonicRun {
    pub harmonic: HarmonicRun,
    pub certificate: TwistCertificate,
    soundness: Option<SoundnessCheck>,
    pub pass: bool,
}

pub fn run_subharmonic(
    spec: &SystemSpec,
    cfg: &RunConfig,
    icfg: &IntegratorConfig,
) -> Result<SubharmonicRun, (Error, Option<HarmonicRun>)> {
    let harmonic = run_harmonic(spec, cfg, icfg).map_err(|(e, _)| (e, None))?;
    let fp = &harmonic.solution.fixed_point;
    let s = &cfg.subharmonic;
    let stage = || -> Result<(TwistCertificate, Option<SoundnessCheck>), Error> {
        let orbit = HarmonicOrbit::from_fixed_point(spec, fp.z, fp.residual, icfg, cfg.harmonic.closure_tol)?;
        let ts = build_translated_system(spec, orbit, DEFAULT_QUAD_ORDER)?;
        let cert = find_subharmonic(&ts, s.n, icfg, &subharmonic_search(cfg))?;
        let soundness = match &cert.fixed_point {
            Some(w) => {
                let map = PoincareMap::new(&ts, cert.n_star, icfg.scaled(0.5));
                let residual_half_tol = residual(&map, [w.x, w.y])?;
                let closure = verify_periodic_orbit(spec, w.original, cert.n_star, icfg, s.closure_tol)?;
                Some(SoundnessCheck {
                    residual_half_tol,
                    closure,
                })
            }
            None => None,
        };
        Ok((cert, soundness))
    };
    match stage() {
        Ok((certificate, soundness)) => {
            let pass = match (&certificate.fixed_point, &soundness) {
                (Some(w), Some(snd)) => {
                    certificate.inner_condition_holds()
                        && certificate.outer_condition_holds()
                        && w.residual <= s.residual_target
                        && w.minimality.pass
                        && snd.closure.pass
                }
                _ => false,
            };
            Ok(SubharmonicRun {
                harmonic,
                certificate,
                soundness,
                pass,
            })
        }
        Err(e) => Err((e, Some(harmonic))),
    }
}

pub fn cmd_subharmonic(cfg: &RunConfig, out: &Path) -> anyhow::Result<()> {
    let spec = cfg.spec()?;
    let icfg = cfg.integrator_config();
    let hash = spec.hash();
    let run = match run_subharmonic(&spec, cfg, &icfg) {
        Ok(r) => r,
        Err((e, harmonic)) => {
            if let Some(h) = &harmonic {
                print_harmonic(h);
            }
            println!("subharmonic  {}", status_of(&e).to_uppercase());
            println!("  {e}");
            let body = SubharmonicFailure {
                harmonic: harmonic.map(|h| HarmonicReport::new(h.d, &h.solution, h.closure)),
                error: e.to_string(),
            };
            write_report(out, "subharmonic.json", &Envelope::new("subharmonic", hash, &icfg, cfg.seed, status_of(&e), body))?;
            return Err(e.into());
        }
    };
    print_harmonic(&run.harmonic);
    let c = &run.certificate;
    println!("subharmonic  n = {}  n* = {}", c.n, c.n_star);
    println!("  sector         b = {}  delta^2 = {:.6e}  bound = {:.6}", c.b, c.delta_sq, c.sector_bound);
    println!("  annulus        c_n = {:.6e}  e_n = {:.6e}", c.c_n, c.e_n);
    println!("  inner / outer  {} / {}", c.inner_condition_holds(), c.outer_condition_holds());
    println!("  probes meet E / J  {} / {}", c.every_probe_meets_e, c.every_probe_meets_j);
    match (&c.fixed_point, &run.soundness) {
        (Some(w), Some(snd)) => {
            println!("  fixed point    u = ({:+.16e}, {:+.16e})", w.x, w.y);
            println!("  original       ({:+.16e}, {:+.16e})", w.original[0], w.original[1]);
            println!("  residual       {:.3e}  (halved tolerances {:.3e})", w.residual, snd.residual_half_tol);
            println!("  closure        {:.3e} over {} periods", snd.closure.closure, snd.closure.periods);
            println!("  minimality     {}", if w.minimality.pass { "PASS" } else { "FAIL" });
        }
        _ => println!("  no fixed point: {}", c.failure.as_deref().unwrap_or("unknown")),
    }
    println!("  verdict        {}", if run.pass { "PASS" } else { "FAIL" });
    let pass = run.pass;
    let no_fixed_point = c.fixed_point.is_none();
    let failure = c.failure.clone();
    let body = SubharmonicBody {
        harmonic: HarmonicReport::new(run.harmonic.d, &run.harmonic.solution, run.harmonic.closure),
        certificate: run.certificate,
        soundness: run.soundness,
        pass,
    };
    let status = match (pass, no_fixed_point) {
        (true, _) => "ok",
        (false, true) => "exhausted",
        (false, false) => "fail",
    };
    write_report(out, "subharmonic.json", &Envelope::new("subharmonic", hash, &icfg, cfg.seed, status, body))?;
    match (pass, no_fixed_point) {
        (true, _) => Ok(()),
        (false, true) => Err(Error::SearchExhausted {
            reason: failure.unwrap_or_else(|| "no fixed point".into()),
            best: None,
            best_residual: f64::INFINITY,
        }
        .into()),
        (false, false) => Err(VerdictFailed("subharmonic certificate or fixed point checks failed".into()).into()),
    }
}

// ---------------------------------------------------------------------------
// sweep

#[derive(Debug, Clone, Serialize)]
struct SweepRow {
    index: usize,
    a: f64,
    amplitude: f64,
    found: bool,
    residual: Option<f64>,
    n_star: Option<usize>,
    d: Option<f64>,
    reason: String,
}

fn sweep_point(cfg: &RunConfig, icfg: &IntegratorConfig, index: usize, a: f64, amplitude: f64) -> SweepRow {
    let mut row = SweepRow {
        index,
        a,
        amplitude,
        found: false,
        residual: None,
        n_star: None,
        d: None,
        reason: String::new(),
    };
    let mut doc = cfg.system.clone();
    doc.a = a;
    let phase = match doc.p {
        ForcingFamily::Cosine { phase, .. } => phase,
        _ => 0.0,
    };
    doc.p = ForcingFamily::Cosine { amplitude, phase };
    let spec = match doc.build() {
        Ok(s) => s,
        Err(e) => {
            row.reason = e.to_string();
            return row;
        }
    };
    match cfg.sweep.mode {
        SweepMode::Harmonic => match run_harmonic(&spec, cfg, icfg) {
            Ok(run) => {
                row.d = Some(run.d);
                row.residual = Some(run.solution.fixed_point.residual);
                row.found = harmonic_passes(&run, cfg);
                if !row.found {
                    row.reason = format!("closure {:e} above {:e}", run.closure.closure, run.closure.tolerance);
                }
            }
            Err((e, _)) => row.reason = e.to_string(),
        },
        SweepMode::Subharmonic => match run_subharmonic(&spec, cfg, icfg) {
            Ok(run) => {
                row.d = Some(run.harmonic.d);
                row.n_star = Some(run.certificate.n_star);
                row.residual = run.certificate.fixed_point.as_ref().map(|w| w.residual);
                row.found = run.pass;
                if !row.found {
                    row.reason = run
                        .certificate
                        .failure
                        .clone()
                        .unwrap_or_else(|| "certificate or closure checks failed".into());
                }
            }
            Err((e, h)) => {
                row.d = h.map(|h| h.d);
                row.reason = e.to_string();
            }
        },
    }
    row
}

fn csv_row(row: &SweepRow) -> [String; 8] {
    let opt = |v: Option<f64>| v.map(|x| format!("{x:.16e}")).unwrap_or_default();
    [
        row.index.to_string(),
        format!("{:.16e}", row.a),
        format!("{:.16e}", row.amplitude),
        row.found.to_string(),
        opt(row.residual),
        row.n_star.map(|n| n.to_string()).unwrap_or_default(),
        opt(row.d),
        row.reason.clone(),
    ]
}

pub fn cmd_sweep(cfg: &RunConfig, out: &Path) -> anyhow::Result<()> {
    let icfg = cfg.integrator_config();
    let base = cfg.spec()?;
    let grid: Vec<(f64, f64)> = cfg
        .sweep
        .a
        .iter()
        .flat_map(|&a| cfg.sweep.amplitude.iter().map(move |&amp| (a, amp)))
        .collect();
    if grid.is_empty() {
        return Err(crate::ConfigError("sweep grid is empty".into()).into());
    }
    let csv_path = out.join("sweep.csv");
    let mut writer = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(&csv_path)
        .with_context(|| format!("creating {}", csv_path.display()))?;
    writer.write_record(["index", "a", "amplitude", "found", "residual", "n_star", "d", "reason"])?;
    writer.flush()?;

    // Workers send rows as they finish; rows are written in grid order as
    // soon as every earlier row is available.
    let (tx, rx) = mpsc::channel::<SweepRow>();
    let mut rows: Vec<SweepRow> = Vec::with_capacity(grid.len());
    let mut write_err = None;
    std::thread::scope(|scope| {
        let icfg = &icfg;
        let grid = &grid;
        scope.spawn(move || {
            grid.par_iter().with_max_len(1).enumerate().for_each_with(tx, |tx, (i, &(a, amp))| {
                let _ = tx.send(sweep_point(cfg, icfg, i, a, amp));
            });
        });
        let mut pending = BTreeMap::new();
        for row in rx.iter() {
            pending.insert(row.index, row);
            while let Some(row) = pending.remove(&rows.len()) {
                if write_err.is_none() {
                    let res = writer.write_record(csv_row(&row)).and_then(|_| Ok(writer.flush()?));
                    write_err = res.err();
                }
                rows.push(row);
            }
        }
    });
    if let Some(e) = write_err {
        return Err(e).context("writing sweep.csv");
    }

    println!("sweep  mode = {:?}  points = {}", cfg.sweep.mode, rows.len());
    println!("  {:>5}  {:>8}  {:>9}  {:>6}  {:>10}  {:>6}  reason", "index", "a", "amplitude", "found", "residual", "n*");
    for r in &rows {
        println!(
            "  {:>5}  {:>8.4}  {:>9.4}  {:>6}  {:>10}  {:>6}  {}",
            r.index,
            r.a,
            r.amplitude,
            r.found,
            r.residual.map(|x| format!("{x:.2e}")).unwrap_or_else(|| "-".into()),
            r.n_star.map(|n| n.to_string()).unwrap_or_else(|| "-".into()),
            r.reason
        );
    }
    println!("  wrote {}", csv_path.display());
    let all = rows.iter().all(|r| r.found);
    let status = if all { "ok" } else { "fail" };
    write_report(out, "sweep.json", &Envelope::new("sweep", base.hash(), &icfg, cfg.seed, status, &rows))?;
    if all {
        Ok(())
    } else {
        let failed = rows.iter().filter(|r| !r.found).count();
        Err(VerdictFailed(format!("{failed} of {} grid points found no solution", rows.len())).into())
    }
}
