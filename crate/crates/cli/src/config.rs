use std::path::Path;

use anyhow::Context;
use serde::Deserialize;

use impulsive_core::dynamics::SpecDocument;
use impulsive_core::IntegratorConfig;

use crate::ConfigError;

/// One JSON file: the system plus optional per-command sections.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub system: SpecDocument,
    #[serde(default)]
    pub integrator: IntegratorSection,
    #[serde(default)]
    pub simulate: SimulateSection,
    #[serde(default)]
    pub rotation: RotationSection,
    #[serde(default)]
    pub harmonic: HarmonicSection,
    #[serde(default)]
    pub subharmonic: SubharmonicSection,
    #[serde(default)]
    pub sweep: SweepSection,
    #[serde(default)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorSection {
    pub rel_tol: Option<f64>,
    pub abs_tol: Option<f64>,
    pub max_step: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulateSection {
    pub x0: f64,
    pub y0: f64,
    /// End time; `periods` wins when both are given.
    pub t_end: Option<f64>,
    pub periods: Option<usize>,
}

impl Default for SimulateSection {
    fn default() -> Self {
        Self {
            x0: 1.0,
            y0: 0.0,
            t_end: None,
            periods: None,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RotationSection {
    pub r0: f64,
    pub samples: usize,
}

impl Default for RotationSection {
    fn default() -> Self {
        Self {
            r0: 10.0,
            samples: 32,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HarmonicSection {
    /// Fixed disk radius; chosen by the doubling scan when absent.
    pub d: Option<f64>,
    pub b0: f64,
    pub boundary_samples: usize,
    pub margin: f64,
    pub max_doublings: u32,
    pub enforce_certificate: bool,
    pub residual_target: f64,
    pub closure_tol: f64,
}

impl Default for HarmonicSection {
    fn default() -> Self {
        Self {
            d: None,
            b0: 1.0,
            boundary_samples: 32,
            margin: 1e-3,
            max_doublings: 15,
            enforce_certificate: true,
            residual_target: 1e-8,
            closure_tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SubharmonicSection {
    pub n: usize,
    pub horizon_cap: usize,
    pub circle_samples: usize,
    pub probes: usize,
    pub probe_samples: usize,
    pub residual_target: f64,
    pub closure_tol: f64,
    pub min_separation: f64,
}

impl Default for SubharmonicSection {
    fn default() -> Self {
        Self {
            n: 1,
            horizon_cap: 64,
            circle_samples: 16,
            probes: 8,
            probe_samples: 33,
            residual_target: 1e-7,
            closure_tol: 1e-5,
            min_separation: 1e-4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepMode {
    Harmonic,
    Subharmonic,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSection {
    pub a: Vec<f64>,
    pub amplitude: Vec<f64>,
    pub mode: SweepMode,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            a: vec![0.1, 0.2, 0.5],
            amplitude: vec![0.1, 0.5, 1.0],
            mode: SweepMode::Harmonic,
        }
    }
}

/// Command-line values that override the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub tol_rel: Option<f64>,
    pub tol_abs: Option<f64>,
    pub samples: Option<usize>,
    pub horizon: Option<usize>,
    pub seed: Option<u64>,
}

impl RunConfig {
    pub fn load(path: &Path, o: &Overrides) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg: RunConfig = serde_json::from_str(&text)
            .map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
        cfg.apply(o);
        cfg.integrator_config()
            .validate()
            .map_err(|e| ConfigError(e.to_string()))?;
        Ok(cfg)
    }

    fn apply(&mut self, o: &Overrides) {
        if let Some(v) = o.tol_rel {
            self.integrator.rel_tol = Some(v);
        }
        if let Some(v) = o.tol_abs {
            self.integrator.abs_tol = Some(v);
        }
        if let Some(n) = o.samples {
            self.rotation.samples = n;
            self.harmonic.boundary_samples = n;
            self.subharmonic.circle_samples = n;
        }
        if let Some(h) = o.horizon {
            self.simulate.periods = Some(h);
            self.subharmonic.horizon_cap = h;
        }
        if o.seed.is_some() {
            self.seed = o.seed;
        }
    }

    pub fn integrator_config(&self) -> IntegratorConfig {
        let d = IntegratorConfig::default();
        IntegratorConfig {
            rel_tol: self.integrator.rel_tol.unwrap_or(d.rel_tol),
            abs_tol: self.integrator.abs_tol.unwrap_or(d.abs_tol),
            max_step: self.integrator.max_step.unwrap_or(d.max_step),
            dense: true,
        }
    }

    pub fn spec(&self) -> anyhow::Result<impulsive_core::SystemSpec> {
        self.system
            .build()
            .map_err(|e| ConfigError(e.to_string()))
            .context("invalid `system` section")
    }
}
