//! Run configuration file.
//!
//! Every field is optional; command-line flags override file values, and
//! built-in defaults fill the rest.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::densities::DEFAULT_COMPONENTS;
use crate::detector::CountUnit;
use crate::error::{Error, Result};
use crate::lfd::DEFAULT_DELTA;
use crate::synth::SceneSpec;
use crate::training::{DbConvention, SeedPoint, DEFAULT_BAND_DB};
use crate::uncertainty::BandSpec;

pub const DEFAULT_GRID_POINTS: usize = 4096;
pub const DEFAULT_ALPHA: f64 = 0.05;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub grid_points: Option<usize>,
    pub alpha: Option<f64>,
    pub delta: Option<f64>,
    pub count_unit: Option<CountUnit>,
    pub band: Option<BandSpec>,
    pub components: Option<usize>,
    pub band_db: Option<f64>,
    pub db_convention: Option<DbConvention>,
    #[serde(default)]
    pub seeds: Vec<SeedPoint>,
    pub scene: Option<SceneSpec>,
    #[serde(default)]
    pub paths: Paths,
}

/// Input and output locations; relative paths resolve against the config file.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Paths {
    pub model: Option<PathBuf>,
    pub targets: Option<PathBuf>,
    pub clutter: Option<PathBuf>,
    pub raster: Option<PathBuf>,
    #[serde(default)]
    pub views: Vec<PathBuf>,
    pub truth: Option<PathBuf>,
    pub out: Option<PathBuf>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Input(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg: RunConfig = serde_json::from_str(&text)
            .map_err(|e| Error::Input(format!("config {}: {e}", path.display())))?;
        if let Some(dir) = path.parent() {
            cfg.paths.resolve(dir);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(a) = self.alpha {
            if !(a > 0.0 && a <= 1.0) {
                return Err(Error::Input(format!("alpha must lie in (0, 1], got {a}")));
            }
        }
        if let Some(n) = self.grid_points {
            if n < 2 {
                return Err(Error::Input(format!(
                    "grid_points must be at least 2, got {n}"
                )));
            }
        }
        if let Some(d) = self.delta {
            if !(d > 0.0) {
                return Err(Error::Input(format!("delta must be positive, got {d}")));
            }
        }
        if let Some(b) = &self.band {
            b.validate()?;
        }
        if let Some(s) = &self.scene {
            s.validate()?;
        }
        Ok(())
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    pub fn grid_points(&self) -> usize {
        self.grid_points.unwrap_or(DEFAULT_GRID_POINTS)
    }

    pub fn alpha(&self) -> f64 {
        self.alpha.unwrap_or(DEFAULT_ALPHA)
    }

    pub fn delta(&self) -> f64 {
        self.delta.unwrap_or(DEFAULT_DELTA)
    }

    pub fn count_unit(&self) -> CountUnit {
        self.count_unit.unwrap_or_default()
    }

    pub fn band(&self) -> BandSpec {
        self.band.unwrap_or_default()
    }

    pub fn components(&self) -> usize {
        self.components.unwrap_or(DEFAULT_COMPONENTS)
    }

    pub fn band_db(&self) -> f64 {
        self.band_db.unwrap_or(DEFAULT_BAND_DB)
    }

    pub fn db_convention(&self) -> DbConvention {
        self.db_convention.unwrap_or_default()
    }
}

impl Paths {
    fn resolve(&mut self, dir: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = dir.join(&*p);
            }
        };
        for p in [
            &mut self.model,
            &mut self.targets,
            &mut self.clutter,
            &mut self.raster,
            &mut self.truth,
            &mut self.out,
        ]
        .into_iter()
        .flatten()
        {
            fix(p);
        }
        self.views.iter_mut().for_each(fix);
    }
}
