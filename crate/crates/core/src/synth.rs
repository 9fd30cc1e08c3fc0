//! Synthetic multiview scenes: Rayleigh clutter with disc-shaped Gaussian
//! mixture targets, under several clutter-roughness layouts.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::densities::{GaussianMixtureParams, NominalModel, RayleighParams};
use crate::error::{Error, Result};
use crate::raster::{BinaryMask, Raster};

pub const DEFAULT_HIGH_FACTOR: f64 = 1.8;
pub const DEFAULT_VIEWS: usize = 11;

/// Spatial arrangement of clutter roughness.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Roughness {
    Low,
    High,
    /// Four downrange strips alternating low, high, low, high.
    Mixed,
}

impl Roughness {
    pub const ALL: [Roughness; 3] = [Roughness::Low, Roughness::Mixed, Roughness::High];

    pub fn as_str(self) -> &'static str {
        match self {
            Roughness::Low => "low",
            Roughness::High => "high",
            Roughness::Mixed => "mixed",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetSpec {
    pub i: usize,
    pub j: usize,
    pub radius: f64,
    /// Intensity model; the scene's target mixture when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mixture: Option<GaussianMixtureParams>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClutterSpec {
    pub low: RayleighParams,
    /// Multiplier applied to the low-roughness scale in high-roughness areas.
    #[serde(default = "default_high_factor")]
    pub high_factor: f64,
    pub layout: Roughness,
}

fn default_high_factor() -> f64 {
    DEFAULT_HIGH_FACTOR
}

impl ClutterSpec {
    pub fn high(&self) -> Result<RayleighParams> {
        RayleighParams::new(self.low.sigma0() * self.high_factor)
    }

    /// Whether column `i` of a `width`-wide scene is in a high-roughness area.
    pub fn is_high(&self, i: usize, width: usize) -> bool {
        match self.layout {
            Roughness::Low => false,
            Roughness::High => true,
            Roughness::Mixed => (4 * i / width) % 2 == 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub width: usize,
    pub height: usize,
    pub targets: Vec<TargetSpec>,
    pub target_mixture: GaussianMixtureParams,
    pub clutter: ClutterSpec,
    pub views: usize,
    pub seed: u64,
}

impl SceneSpec {
    /// 320×200 scene with nine radius-10 targets on a 3×3 lattice, the
    /// reference model for intensities and eleven views.
    pub fn reference(layout: Roughness, seed: u64) -> Self {
        let model = NominalModel::reference();
        let (width, height) = (320, 200);
        let targets = (0..9)
            .map(|t| TargetSpec {
                i: width * (2 * (t % 3) + 1) / 6,
                j: height * (2 * (t / 3) + 1) / 6,
                radius: 10.0,
                mixture: None,
            })
            .collect();
        Self {
            width,
            height,
            targets,
            target_mixture: model.h1,
            clutter: ClutterSpec {
                low: model.h0,
                high_factor: DEFAULT_HIGH_FACTOR,
                layout,
            },
            views: DEFAULT_VIEWS,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::Input("scene dimensions must be positive".into()));
        }
        if self.views == 0 {
            return Err(Error::Input("a scene needs at least one view".into()));
        }
        if !(self.clutter.high_factor > 0.0 && self.clutter.high_factor.is_finite()) {
            return Err(Error::Input(format!(
                "high-roughness factor must be positive, got {}",
                self.clutter.high_factor
            )));
        }
        for (n, t) in self.targets.iter().enumerate() {
            let r = t.radius;
            if !(r >= 0.0 && r.is_finite()) {
                return Err(Error::Input(format!("target {n}: radius {r} is invalid")));
            }
            let fits = t.i as f64 - r >= 0.0
                && t.j as f64 - r >= 0.0
                && t.i as f64 + r <= (self.width - 1) as f64
                && t.j as f64 + r <= (self.height - 1) as f64;
            if !fits {
                return Err(Error::Input(format!(
                    "target {n} at ({}, {}) with radius {r} leaves the scene",
                    t.i, t.j
                )));
            }
            for (m, u) in self.targets.iter().enumerate().take(n) {
                let d2 = (t.i as f64 - u.i as f64).powi(2) + (t.j as f64 - u.j as f64).powi(2);
                if d2.sqrt() <= r + u.radius {
                    return Err(Error::Input(format!("targets {m} and {n} overlap")));
                }
            }
        }
        Ok(())
    }

    /// Index of the target covering pixel `(i, j)`, if any.
    fn target_at(&self, i: usize, j: usize) -> Option<usize> {
        self.targets.iter().position(|t| {
            let (di, dj) = (i as f64 - t.i as f64, j as f64 - t.j as f64);
            di * di + dj * dj <= t.radius * t.radius
        })
    }

    pub fn truth(&self) -> Result<BinaryMask> {
        self.validate()?;
        let bits = (0..self.width * self.height)
            .map(|k| self.target_at(k % self.width, k / self.width).is_some())
            .collect();
        BinaryMask::new(self.width, self.height, bits)
    }
}

/// Draws all views of a scene. View `v` uses its own ChaCha stream `v` under
/// the scene seed, so views can be generated independently.
pub fn generate(spec: &SceneSpec) -> Result<(Vec<Raster>, BinaryMask)> {
    let truth = spec.truth()?;
    let views = (0..spec.views)
        .map(|v| generate_view(spec, v))
        .collect::<Result<_>>()?;
    Ok((views, truth))
}

pub fn generate_view(spec: &SceneSpec, view: usize) -> Result<Raster> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(view as u64);
    let low = spec.clutter.low;
    let high = spec.clutter.high()?;
    let (w, h) = (spec.width, spec.height);
    let mut pixels = Vec::with_capacity(w * h);
    for j in 0..h {
        for i in 0..w {
            let x = match spec.target_at(i, j) {
                Some(t) => spec.targets[t]
                    .mixture
                    .as_ref()
                    .unwrap_or(&spec.target_mixture)
                    .sample(&mut rng),
                None if spec.clutter.is_high(i, w) => high.sample(&mut rng),
                None => low.sample(&mut rng),
            };
            pixels.push(x.clamp(0.0, 1.0));
        }
    }
    Raster::new(w, h, pixels)
}
