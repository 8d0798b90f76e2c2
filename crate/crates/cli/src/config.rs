//! Run configuration: JSON file plus command-line overrides.

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use burster_core::integrate::Tol;
use burster_core::params::ParameterSet;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TolConfig {
    pub abs: f64,
    pub rel: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SectionConfig {
    pub eta: f64,
    pub rho: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassifierConfig {
    pub y_surge: Option<f64>,
    pub a_pulse: Option<f64>,
    pub a_small: Option<f64>,
    pub x_fold_band: Option<f64>,
    pub x_prominence: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub param1: String,
    pub values1: Vec<f64>,
    pub param2: String,
    pub values2: Vec<f64>,
    /// Simulated horizon per cell, in the slowest time unit.
    pub horizon: Option<f64>,
    pub workers: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub params: Option<ParameterSet>,
    pub tolerances: Option<TolConfig>,
    pub sections: Option<SectionConfig>,
    pub classifier: Option<ClassifierConfig>,
    pub output_dir: Option<String>,
    pub sweep: Option<SweepConfig>,
}

impl RunConfig {
    pub fn load(path: Option<&str>) -> Result<Self> {
        let mut cfg = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .with_context(|| format!("reading config {p}"))?;
                let cfg: RunConfig =
                    serde_json::from_str(&text).with_context(|| format!("parsing config {p}"))?;
                cfg
            }
            None => RunConfig::default(),
        };
        if cfg.params.is_none() {
            cfg.params = Some(ParameterSet::reference());
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(p) = &self.params {
            p.validate()?;
        }
        if let Some(t) = &self.tolerances {
            if !(t.abs > 0.0 && t.rel > 0.0) {
                bail!("tolerances must be positive");
            }
        }
        if let Some(s) = &self.sections {
            if !(s.eta > 0.0 && s.rho > 0.0) {
                bail!("section offsets must be positive");
            }
        }
        Ok(())
    }

    pub fn params(&self) -> ParameterSet {
        self.params.unwrap_or_else(ParameterSet::reference)
    }

    pub fn tol(&self) -> Tol {
        self.tolerances
            .as_ref()
            .map(|t| Tol::new(t.abs, t.rel))
            .unwrap_or_default()
    }

    pub fn eta(&self) -> f64 {
        self.sections
            .as_ref()
            .map(|s| s.eta)
            .unwrap_or(burster_core::sections::DEFAULT_ETA)
    }

    /// Applies `--param key=value` overrides.  Bare entries (no `=`) are
    /// left for the `continue` subcommand, which uses `--param <name>` to
    /// pick its continuation parameter.
    pub fn apply_overrides(&mut self, overrides: &[String]) -> Result<()> {
        let mut p = self.params();
        for ov in overrides {
            let Some((k, v)) = ov.split_once('=') else {
                continue;
            };
            let value: f64 = v.parse().with_context(|| format!("override `{ov}`"))?;
            p.set_by_name(k.trim(), value)?;
        }
        p.validate()?;
        self.params = Some(p);
        Ok(())
    }
}
