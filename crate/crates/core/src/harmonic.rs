//! 2π-periodic solutions.
//!
//! A disk of radius d whose boundary points all rotate by strictly less than
//! a full clockwise turn (and strictly clockwise) over one period is mapped
//! by the period map without any boundary point being fixed or sent to a
//! positive multiple of itself, so the period map has a fixed point in the
//! disk. [`certify_boundary_rotation`] checks the rotation condition on a
//! sampled circle and [`find_fixed_point_in_disk`] then locates the fixed
//! point by a polar grid scan refined with Newton.

use std::f64::consts::TAU;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{CartesianState, ImpulsiveSystem, Verdict};
use crate::error::{Error, Result};
use crate::fixed_point::{
    candidate_order, exhausted, multi_start, norm, residual_field, NewtonConfig, NewtonIterate,
    PlanarMap, PoincareMap,
};
use crate::integrator::{elastic_radius, flow, IntegratorConfig, RadiusScan};
use crate::rotation::{
    angular_speed_sign_scan, track_angle, winding, SpeedScanReport, TwistVerdict, ORIGIN_GUARD,
};

/// Default gap kept from both ends of the open interval (−2π, 0).
pub const DEFAULT_MARGIN: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RotationWitness {
    pub sample: usize,
    pub theta0: f64,
    pub delta_theta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryRotationCertificate {
    pub d: f64,
    pub n_samples: usize,
    pub margin: f64,
    pub theta0_grid: Vec<f64>,
    pub delta_theta: Vec<f64>,
    pub verdict: Verdict,
    /// Sample farthest outside the admissible interval, on failure.
    pub witness: Option<RotationWitness>,
}

/// How far `delta` lies outside (−2π + margin, −margin); positive means
/// outside.
fn interval_violation(delta: f64, margin: f64) -> f64 {
    (delta + margin).max(-TAU + margin - delta)
}

/// One-period rotation from `n_samples` equispaced points on the circle of
/// radius `d`.
pub fn certify_boundary_rotation<S: ImpulsiveSystem + ?Sized>(
    sys: &S,
    d: f64,
    n_samples: usize,
    margin: f64,
    cfg: &IntegratorConfig,
) -> Result<BoundaryRotationCertificate> {
    if !(d > 0.0 && d.is_finite()) {
        return Err(Error::InvalidArgument(format!("disk radius d = {d} must be positive")));
    }
    if n_samples < 8 {
        return Err(Error::InvalidArgument(format!(
            "boundary certificate needs at least 8 samples, got {n_samples}"
        )));
    }
    if !(margin >= 0.0) {
        return Err(Error::InvalidArgument(format!("margin = {margin} must be ≥ 0")));
    }
    let theta0_grid: Vec<f64> = (0..n_samples)
        .map(|i| TAU * i as f64 / n_samples as f64)
        .collect();
    let results: Vec<Result<f64>> = theta0_grid
        .par_iter()
        .map(|&ang| {
            winding(sys, [d * ang.cos(), d * ang.sin()], 1, cfg, ORIGIN_GUARD)
                .map(|r| r.delta_theta)
        })
        .collect();
    let mut delta_theta = Vec::with_capacity(n_samples);
    for (i, r) in results.into_iter().enumerate() {
        delta_theta.push(r.map_err(|e| Error::at_sample(i, e))?);
    }
    let (worst, worst_violation) = delta_theta
        .iter()
        .enumerate()
        .map(|(i, &dt)| (i, interval_violation(dt, margin)))
        .fold((0, f64::NEG_INFINITY), |acc, cur| if cur.1 > acc.1 { cur } else { acc });
    let passed = worst_violation < 0.0;
    Ok(BoundaryRotationCertificate {
        d,
        n_samples,
        margin,
        witness: (!passed).then(|| RotationWitness {
            sample: worst,
            theta0: theta0_grid[worst],
            delta_theta: delta_theta[worst],
        }),
        theta0_grid,
        delta_theta,
        verdict: Verdict::from_bool(passed),
    })
}

/// Parameters of the disk-radius doubling scan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiskScan {
    /// Target of the elastic-radius estimate that seeds the scan.
    pub b0: f64,
    pub elastic: RadiusScan,
    pub boundary_samples: usize,
    pub speed_samples: usize,
    pub margin: f64,
    /// The scan stops at 2^max_doublings · d₀.
    pub max_doublings: u32,
}

impl Default for DiskScan {
    fn default() -> Self {
        Self {
            b0: 1.0,
            elastic: RadiusScan::default(),
            boundary_samples: 32,
            speed_samples: 32,
            margin: DEFAULT_MARGIN,
            max_doublings: 15,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiskAttempt {
    pub d: f64,
    pub speed: TwistVerdict,
    pub certificate: Verdict,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiskSelection {
    pub b0: f64,
    pub d0: f64,
    pub d: f64,
    pub speed_scan: SpeedScanReport,
    pub certificate: BoundaryRotationCertificate,
    pub attempts: Vec<DiskAttempt>,
    /// False when the cap was reached; `d`, `speed_scan` and `certificate`
    /// then describe the last radius tried.
    pub passed: bool,
}

/// Doubles d from d₀ = r_{b₀} until the boundary circle is both
/// twist-negative and passes the rotation certificate.
pub fn select_disk_radius<S: ImpulsiveSystem + ?Sized>(
    sys: &S,
    cfg: &IntegratorConfig,
    scan: &DiskScan,
) -> Result<DiskSelection> {
    let d0 = elastic_radius(sys, scan.b0, cfg, &scan.elastic)?
        .radius()
        .ok_or_else(|| Error::SearchExhausted {
            reason: format!(
                "no elastic radius for b = {} below {}",
                scan.b0, scan.elastic.ceiling
            ),
            best: None,
            best_residual: f64::INFINITY,
        })?;
    let mut attempts = Vec::new();
    let mut i = 0;
    loop {
        let d = d0 * 2f64.powi(i as i32);
        let speed_scan = angular_speed_sign_scan(sys, d, scan.speed_samples, cfg)?;
        let certificate = certify_boundary_rotation(sys, d, scan.boundary_samples, scan.margin, cfg)?;
        attempts.push(DiskAttempt {
            d,
            speed: speed_scan.verdict,
            certificate: certificate.verdict,
        });
        let passed =
            speed_scan.verdict == TwistVerdict::TwistNegative && certificate.verdict.passed();
        if passed || i == scan.max_doublings {
            return Ok(DiskSelection {
                b0: scan.b0,
                d0,
                d,
                speed_scan,
                certificate,
                attempts,
                passed,
            });
        }
        i += 1;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HarmonicSearch {
    pub radial: usize,
    pub angular: usize,
    /// Number of best grid points refined by Newton.
    pub refine: usize,
    pub newton: NewtonConfig,
    /// Refuse to search unless the boundary certificate passes at d.
    pub enforce_certificate: bool,
    pub boundary_samples: usize,
    pub margin: f64,
    /// Rotates every ring of the grid by this angle (radians).
    pub angle_offset: f64,
}

impl Default for HarmonicSearch {
    fn default() -> Self {
        Self {
            radial: 16,
            angular: 32,
            refine: 12,
            newton: NewtonConfig::default(),
            enforce_certificate: true,
            boundary_samples: 32,
            margin: DEFAULT_MARGIN,
            angle_offset: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixedPointResult {
    pub z: [f64; 2],
    pub residual: f64,
    pub trace: Vec<NewtonIterate>,
    /// Grid point the winning Newton run started from.
    pub seed: [f64; 2],
    /// Converged candidates inside the disk, the winner included.
    pub candidates: usize,
}

/// Polar grid of the closed disk: the center plus `radial` rings of
/// `angular` points each, the outermost on the boundary.
pub fn polar_grid(d: f64, radial: usize, angular: usize, offset: f64) -> Vec<[f64; 2]> {
    let mut pts = vec![[0.0, 0.0]];
    for i in 1..=radial {
        let r = d * i as f64 / radial as f64;
        for j in 0..angular {
            let ang = offset + TAU * j as f64 / angular as f64;
            pts.push([r * ang.cos(), r * ang.sin()]);
        }
    }
    pts
}

/// Fixed point of `map` in the closed disk |z| ≤ d.
pub fn find_fixed_point_in_disk<M: PlanarMap + ?Sized>(
    map: &M,
    d: f64,
    search: &HarmonicSearch,
) -> Result<FixedPointResult> {
    if !(d > 0.0) || search.radial == 0 || search.angular == 0 || search.refine == 0 {
        return Err(Error::InvalidArgument(
            "disk search needs d > 0 and a nonempty grid".into(),
        ));
    }
    let grid = polar_grid(d, search.radial, search.angular, search.angle_offset);
    let residuals = residual_field(map, &grid);
    let mut ranked: Vec<(f64, usize)> = residuals
        .into_iter()
        .enumerate()
        .filter_map(|(i, r)| r.ok().filter(|r| r.is_finite()).map(|r| (r, i)))
        .collect();
    ranked.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let seeds: Vec<[f64; 2]> = ranked
        .iter()
        .take(search.refine)
        .map(|&(_, i)| grid[i])
        .collect();
    let outcomes = multi_start(map, &seeds, &search.newton);
    let inside = |z: [f64; 2]| norm(z) <= d * (1.0 + 1e-12);
    let mut found: Vec<_> = outcomes
        .iter()
        .filter(|o| o.converged && inside(o.z))
        .cloned()
        .collect();
    found.sort_by(candidate_order);
    match found.first() {
        Some(best) => Ok(FixedPointResult {
            z: best.z,
            residual: best.residual,
            trace: best.trace.clone(),
            seed: best.seed,
            candidates: found.len(),
        }),
        None => Err(exhausted(
            format!(
                "no Newton run from the {} best of {} grid points reached residual {:e} inside |z| ≤ {d}",
                seeds.len(),
                grid.len(),
                search.newton.residual_target
            ),
            outcomes.iter().filter(|o| inside(o.z)).min_by(|a, b| candidate_order(a, b)),
        )),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HarmonicSolution {
    pub certificate: Option<BoundaryRotationCertificate>,
    pub fixed_point: FixedPointResult,
}

/// Fixed point of the period map in the disk of radius `d`, gated by the
/// boundary certificate unless `search.enforce_certificate` is off.
pub fn find_harmonic<S: ImpulsiveSystem + ?Sized>(
    sys: &S,
    d: f64,
    cfg: &IntegratorConfig,
    search: &HarmonicSearch,
) -> Result<HarmonicSolution> {
    let certificate = if search.enforce_certificate {
        let cert = certify_boundary_rotation(sys, d, search.boundary_samples, search.margin, cfg)?;
        if let Some(w) = cert.witness.filter(|_| !cert.verdict.passed()) {
            return Err(Error::Precondition(format!(
                "boundary rotation certificate failed at d = {d}: sample {} (θ₀ = {}) rotates by {}",
                w.sample, w.theta0, w.delta_theta
            )));
        }
        Some(cert)
    } else {
        None
    };
    let map = PoincareMap::new(sys, 1, *cfg);
    match find_fixed_point_in_disk(&map, d, search) {
        Ok(fixed_point) => Ok(HarmonicSolution {
            certificate,
            fixed_point,
        }),
        Err(Error::SearchExhausted {
            reason,
            best,
            best_residual,
        }) if certificate.is_some() => Err(Error::SearchExhausted {
            reason: format!(
                "SOLVER DEFECT: the boundary certificate passed at d = {d}, so a fixed point \
                 exists in the disk, but the search failed ({reason})"
            ),
            best,
            best_residual,
        }),
        Err(e) => Err(e),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClosureReport {
    pub periods: usize,
    pub tolerance: f64,
    pub endpoint: [f64; 2],
    pub closure: f64,
    pub max_radius: f64,
    pub min_radius: f64,
    /// None when the orbit passes through the origin guard.
    pub winding: Option<f64>,
    pub pass: bool,
}

/// Integrates `periods` periods from `z` and measures how well the orbit
/// closes.
pub fn verify_periodic_orbit<S: ImpulsiveSystem + ?Sized>(
    sys: &S,
    z: [f64; 2],
    periods: usize,
    cfg: &IntegratorConfig,
    tolerance: f64,
) -> Result<ClosureReport> {
    if periods == 0 {
        return Err(Error::InvalidArgument("closure check needs at least one period".into()));
    }
    let traj = flow(sys, CartesianState::new(0.0, z[0], z[1]), TAU * periods as f64, cfg)?;
    let endpoint = traj.final_point();
    let closure = norm([endpoint[0] - z[0], endpoint[1] - z[1]]);
    let winding = match track_angle(&traj, ORIGIN_GUARD) {
        Ok(rec) => Some(rec.delta_theta),
        Err(Error::NearOrigin { .. }) => None,
        Err(e) => return Err(e),
    };
    Ok(ClosureReport {
        periods,
        tolerance,
        endpoint,
        closure,
        max_radius: traj.max_radius(),
        min_radius: traj.min_radius(),
        winding,
        pass: closure <= tolerance,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FixedPointSummary {
    pub x: f64,
    pub y: f64,
    pub residual: f64,
}

/// The `harmonic` command's report body.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HarmonicReport {
    pub d: f64,
    pub certificate: Option<BoundaryRotationCertificate>,
    pub fixed_point: FixedPointSummary,
    pub closure: ClosureReport,
}

impl HarmonicReport {
    pub fn new(d: f64, solution: &HarmonicSolution, closure: ClosureReport) -> Self {
        let fp = &solution.fixed_point;
        Self {
            d,
            certificate: solution.certificate.clone(),
            fixed_point: FixedPointSummary {
                x: fp.z[0],
                y: fp.z[1],
                residual: fp.residual,
            },
            closure,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{Forcing, RestoringForce, SystemSpec};
    use crate::fixed_point::FnMap;
    use std::f64::consts::PI;

    fn asinh(amplitude: f64, a: f64, times: Vec<f64>) -> SystemSpec {
        let p = if amplitude == 0.0 {
            Forcing::Zero
        } else {
            Forcing::Cosine {
                amplitude,
                phase: 0.0,
            }
        };
        SystemSpec::new(RestoringForce::Asinh, p, a, times).unwrap()
    }

    #[test]
    fn resonant_linear_circle_fails_the_certificate() {
        let s = SystemSpec::new(RestoringForce::Linear { omega_sq: 1.0 }, Forcing::Zero, 0.0, vec![])
            .unwrap();
        for d in [0.5, 3.0, 40.0] {
            let cert = certify_boundary_rotation(&s, d, 8, DEFAULT_MARGIN, &Default::default()).unwrap();
            assert_eq!(cert.verdict, Verdict::Fail);
            assert!(cert.delta_theta.iter().all(|&dt| (dt + TAU).abs() < 1e-8));
            assert!(cert.witness.is_some());
        }
    }

    #[test]
    fn certificate_needs_eight_samples() {
        let s = asinh(0.0, 0.0, vec![]);
        assert!(matches!(
            certify_boundary_rotation(&s, 1.0, 7, DEFAULT_MARGIN, &Default::default()),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn tiny_disk_under_strong_forcing_fails_with_witness() {
        let s = asinh(2.0, 0.2, vec![PI]);
        let cert = certify_boundary_rotation(&s, 1e-3, 16, DEFAULT_MARGIN, &Default::default()).unwrap();
        assert_eq!(cert.verdict, Verdict::Fail);
        let w = cert.witness.unwrap();
        assert!(w.delta_theta >= -DEFAULT_MARGIN || w.delta_theta <= -TAU + DEFAULT_MARGIN);
    }

    #[test]
    fn unforced_asinh_reports_the_origin() {
        let s = asinh(0.0, 0.0, vec![]);
        let sol = find_harmonic(&s, 5.0, &Default::default(), &HarmonicSearch::default()).unwrap();
        assert!(sol.certificate.unwrap().verdict.passed());
        assert_eq!(sol.fixed_point.z, [0.0, 0.0]);
        assert_eq!(sol.fixed_point.residual, 0.0);
    }

    #[test]
    fn synthetic_contraction() {
        let map = FnMap(|z: [f64; 2]| Ok([0.5 * z[0], 0.5 * z[1]]));
        let fp = find_fixed_point_in_disk(&map, 3.0, &HarmonicSearch::default()).unwrap();
        assert!(norm(fp.z) < 1e-12);
    }

    #[test]
    fn exhausted_search_carries_the_best_candidate() {
        // Translation has no fixed point.
        let map = FnMap(|z: [f64; 2]| Ok([z[0] + 1.0, z[1]]));
        match find_fixed_point_in_disk(&map, 2.0, &HarmonicSearch::default()) {
            Err(Error::SearchExhausted { best_residual, .. }) => {
                assert!((best_residual - 1.0).abs() < 1e-12)
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn closure_of_equilibrium_and_of_a_generic_point() {
        let s = asinh(0.0, 0.3, vec![1.0]);
        let rep = verify_periodic_orbit(&s, [0.0, 0.0], 2, &Default::default(), 1e-6).unwrap();
        assert_eq!(rep.closure, 0.0);
        assert!(rep.pass);
        assert_eq!(rep.winding, None);

        let rep = verify_periodic_orbit(&s, [1.3, -0.4], 1, &Default::default(), 1e-6).unwrap();
        assert!(!rep.pass);
        assert!(rep.closure > 1e-2);
        assert!(rep.winding.unwrap() < 0.0);
    }

    #[test]
    fn polar_grid_shape() {
        let g = polar_grid(2.0, 16, 32, 0.0);
        assert_eq!(g.len(), 1 + 16 * 32);
        assert!(g.iter().all(|z| norm(*z) <= 2.0 + 1e-15));
        assert!((norm(g[g.len() - 1]) - 2.0).abs() < 1e-15);
    }
}
