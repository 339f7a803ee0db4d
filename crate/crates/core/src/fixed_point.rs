//! Fixed points of planar maps: damped Newton on F(z) − z with a
//! central-difference Jacobian, and multi-start drivers.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::ImpulsiveSystem;
use crate::error::{Error, Result};
use crate::integrator::{poincare, IntegratorConfig};

/// A continuous map of the plane.
pub trait PlanarMap: Sync {
    fn apply(&self, z: [f64; 2]) -> Result<[f64; 2]>;
}

/// Closure-backed map, mostly for synthetic maps in tests.
pub struct FnMap<F>(pub F);

impl<F> PlanarMap for FnMap<F>
where
    F: Fn([f64; 2]) -> Result<[f64; 2]> + Sync,
{
    fn apply(&self, z: [f64; 2]) -> Result<[f64; 2]> {
        (self.0)(z)
    }
}

/// `iterate`-th power of the period map of an impulsive system.
pub struct PoincareMap<'a, S: ImpulsiveSystem + ?Sized> {
    pub system: &'a S,
    pub iterate: usize,
    pub cfg: IntegratorConfig,
}

impl<'a, S: ImpulsiveSystem + ?Sized> PoincareMap<'a, S> {
    pub fn new(system: &'a S, iterate: usize, cfg: IntegratorConfig) -> Self {
        Self {
            system,
            iterate,
            cfg,
        }
    }
}

impl<S: ImpulsiveSystem + ?Sized> PlanarMap for PoincareMap<'_, S> {
    fn apply(&self, z: [f64; 2]) -> Result<[f64; 2]> {
        poincare(self.system, z, self.iterate, &self.cfg)
    }
}

pub fn norm(z: [f64; 2]) -> f64 {
    z[0].hypot(z[1])
}

/// |F(z) − z|.
pub fn residual<M: PlanarMap + ?Sized>(map: &M, z: [f64; 2]) -> Result<f64> {
    let f = map.apply(z)?;
    Ok(norm([f[0] - z[0], f[1] - z[1]]))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NewtonConfig {
    pub residual_target: f64,
    pub max_iter: usize,
    /// Difference step per component: max(fd_abs, fd_rel·|z_i|).
    pub fd_abs: f64,
    pub fd_rel: f64,
    /// Longest allowed Newton step, relative to max(1, |z|).
    pub max_step_ratio: f64,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        Self {
            residual_target: 1e-8,
            max_iter: 40,
            fd_abs: 1e-6,
            fd_rel: 1e-6,
            max_step_ratio: 0.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NewtonIterate {
    pub z: [f64; 2],
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NewtonOutcome {
    pub seed: [f64; 2],
    pub z: [f64; 2],
    pub residual: f64,
    pub converged: bool,
    pub trace: Vec<NewtonIterate>,
}

fn defect<M: PlanarMap + ?Sized>(map: &M, z: [f64; 2]) -> Result<[f64; 2]> {
    let f = map.apply(z)?;
    Ok([f[0] - z[0], f[1] - z[1]])
}

/// Jacobian of F(z) − z by central differences.
pub fn defect_jacobian<M: PlanarMap + ?Sized>(
    map: &M,
    z: [f64; 2],
    cfg: &NewtonConfig,
) -> Result<[[f64; 2]; 2]> {
    let mut jac = [[0.0; 2]; 2];
    for j in 0..2 {
        let h = cfg.fd_abs.max(cfg.fd_rel * z[j].abs());
        let mut zp = z;
        let mut zm = z;
        zp[j] += h;
        zm[j] -= h;
        let fp = defect(map, zp)?;
        let fm = defect(map, zm)?;
        for i in 0..2 {
            jac[i][j] = (fp[i] - fm[i]) / (2.0 * h);
        }
    }
    Ok(jac)
}

/// Damped Newton iteration from `seed`. Integration failures at trial
/// points shrink the step; a failure at the current iterate aborts.
pub fn newton<M: PlanarMap + ?Sized>(
    map: &M,
    seed: [f64; 2],
    cfg: &NewtonConfig,
) -> Result<NewtonOutcome> {
    let mut z = seed;
    let mut f = defect(map, z)?;
    let mut res = norm(f);
    let mut trace = vec![NewtonIterate { z, residual: res }];
    for _ in 0..cfg.max_iter {
        if res <= cfg.residual_target {
            break;
        }
        let jac = defect_jacobian(map, z, cfg)?;
        let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
        if det == 0.0 || !det.is_finite() {
            break;
        }
        let mut step = [
            -(jac[1][1] * f[0] - jac[0][1] * f[1]) / det,
            -(-jac[1][0] * f[0] + jac[0][0] * f[1]) / det,
        ];
        let cap = cfg.max_step_ratio * norm(z).max(1.0);
        let len = norm(step);
        if len > cap {
            step = [step[0] * cap / len, step[1] * cap / len];
        }
        let mut lambda = 1.0;
        let mut improved = false;
        for _ in 0..12 {
            let trial = [z[0] + lambda * step[0], z[1] + lambda * step[1]];
            if let Ok(ft) = defect(map, trial) {
                let rt = norm(ft);
                if rt < res {
                    z = trial;
                    f = ft;
                    res = rt;
                    improved = true;
                    break;
                }
            }
            lambda *= 0.5;
        }
        trace.push(NewtonIterate { z, residual: res });
        if !improved {
            break;
        }
    }
    Ok(NewtonOutcome {
        seed,
        z,
        residual: res,
        converged: res <= cfg.residual_target,
        trace,
    })
}

/// Orders candidates by residual, then by |z|, then lexicographically, so
/// reductions over seeds do not depend on evaluation order.
pub fn candidate_order(a: &NewtonOutcome, b: &NewtonOutcome) -> std::cmp::Ordering {
    a.residual
        .total_cmp(&b.residual)
        .then(norm(a.z).total_cmp(&norm(b.z)))
        .then(a.z[0].total_cmp(&b.z[0]))
        .then(a.z[1].total_cmp(&b.z[1]))
}

/// Runs Newton from every seed in parallel; failed runs are dropped.
pub fn multi_start<M: PlanarMap + ?Sized>(
    map: &M,
    seeds: &[[f64; 2]],
    cfg: &NewtonConfig,
) -> Vec<NewtonOutcome> {
    let mut out: Vec<NewtonOutcome> = seeds
        .par_iter()
        .filter_map(|&s| newton(map, s, cfg).ok())
        .collect();
    out.sort_by(candidate_order);
    out
}

/// Residuals |F(z) − z| of every point, in parallel.
pub fn residual_field<M: PlanarMap + ?Sized>(map: &M, points: &[[f64; 2]]) -> Vec<Result<f64>> {
    points.par_iter().map(|&z| residual(map, z)).collect()
}

pub(crate) fn exhausted(reason: impl Into<String>, best: Option<&NewtonOutcome>) -> Error {
    Error::SearchExhausted {
        reason: reason.into(),
        best: best.map(|b| b.z),
        best_residual: best.map_or(f64::INFINITY, |b| b.residual),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn contraction_converges_to_origin() {
        let map = FnMap(|z: [f64; 2]| Ok([0.5 * z[0], 0.5 * z[1]]));
        let out = newton(&map, [3.0, -2.0], &NewtonConfig::default()).unwrap();
        assert!(out.converged);
        assert!(norm(out.z) < 1e-8);
    }

    #[test]
    fn nonlinear_map_with_known_fixed_point() {
        // F(z) = (cos y + 1, x/2 + 0.1 sin x); fixed point solved below.
        let map = FnMap(|z: [f64; 2]| Ok([z[1].cos() + 1.0, 0.5 * z[0] + 0.1 * z[0].sin()]));
        let out = newton(&map, [1.0, 1.0], &NewtonConfig {
            residual_target: 1e-13,
            ..Default::default()
        })
        .unwrap();
        assert!(out.converged, "{out:?}");
        let f = map.apply(out.z).unwrap();
        assert!((f[0] - out.z[0]).abs() < 1e-12 && (f[1] - out.z[1]).abs() < 1e-12);
    }

    #[test]
    fn ordering_prefers_residual_then_norm() {
        let mk = |z: [f64; 2], r: f64| NewtonOutcome {
            seed: z,
            z,
            residual: r,
            converged: true,
            trace: vec![],
        };
        let mut v = vec![mk([2.0, 0.0], 1e-10), mk([1.0, 0.0], 1e-10), mk([5.0, 0.0], 1e-12)];
        v.sort_by(candidate_order);
        assert_eq!(v[0].z, [5.0, 0.0]);
        assert_eq!(v[1].z, [1.0, 0.0]);
    }
}
