//! Training-pixel extraction by seeded region growing.

use std::collections::VecDeque;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::{neighbors8, BinaryMask, Raster};

pub const DEFAULT_BAND_DB: f64 = 3.0;

/// How an intensity ratio is turned into decibels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DbConvention {
    /// `20·log10`, for amplitude-like intensities.
    #[default]
    Amplitude,
    /// `10·log10`, for power-like intensities.
    Power,
}

impl DbConvention {
    pub fn ratio_db(self, y: f64, phi: f64) -> f64 {
        let scale = match self {
            DbConvention::Amplitude => 20.0,
            DbConvention::Power => 10.0,
        };
        scale * (y / phi).log10()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeedPoint {
    pub i: usize,
    pub j: usize,
    /// Intensity of the seed pixel, filled in by [`SeedPoint::on`].
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phi: Option<f64>,
}

impl SeedPoint {
    pub fn new(i: usize, j: usize) -> Self {
        Self { i, j, phi: None }
    }

    /// Reads the seed intensity from the raster.
    pub fn on(self, raster: &Raster) -> Result<Self> {
        if self.i >= raster.width() || self.j >= raster.height() {
            return Err(Error::Seed(format!(
                "seed ({}, {}) outside the {}x{} raster",
                self.i,
                self.j,
                raster.width(),
                raster.height()
            )));
        }
        Ok(Self {
            phi: Some(raster.get(self.i, self.j)),
            ..self
        })
    }
}

/// Union of the regions grown from every seed.
///
/// A pixel joins a seed's region when it is 8-connected to it through pixels
/// whose intensity lies within `band_db` of the seed intensity.
pub fn region_grow(raster: &Raster, seeds: &[SeedPoint], band_db: f64) -> Result<BinaryMask> {
    region_grow_with(raster, seeds, band_db, DbConvention::Amplitude)
}

pub fn region_grow_with(
    raster: &Raster,
    seeds: &[SeedPoint],
    band_db: f64,
    db: DbConvention,
) -> Result<BinaryMask> {
    if !(band_db > 0.0 && band_db.is_finite()) {
        return Err(Error::Input(format!(
            "region-growing tolerance must be positive, got {band_db} dB"
        )));
    }
    let (w, h) = (raster.width(), raster.height());
    let mut mask = BinaryMask::zeros(w, h);
    let mut visited = vec![false; w * h];
    let mut queue = VecDeque::new();
    for seed in seeds {
        let seed = seed.on(raster)?;
        let phi = seed.phi.unwrap_or_default();
        if phi <= 0.0 {
            return Err(Error::Seed(format!(
                "seed ({}, {}) has zero intensity",
                seed.i, seed.j
            )));
        }
        visited.iter_mut().for_each(|v| *v = false);
        let start = seed.j * w + seed.i;
        visited[start] = true;
        queue.push_back(start);
        while let Some(idx) = queue.pop_front() {
            mask.set(idx % w, idx / w, true);
            for n in neighbors8(idx, w, h) {
                if visited[n] {
                    continue;
                }
                let y = raster.pixels()[n];
                if y > 0.0 && db.ratio_db(y, phi).abs() <= band_db {
                    visited[n] = true;
                    queue.push_back(n);
                }
            }
        }
    }
    Ok(mask)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingSets {
    pub targets: Vec<f64>,
    pub clutter: Vec<f64>,
}

impl TrainingSets {
    pub fn n_t(&self) -> usize {
        self.targets.len()
    }

    pub fn n_c(&self) -> usize {
        self.clutter.len()
    }

    pub fn write_csv<W: Write>(values: &[f64], mut out: W) -> Result<()> {
        writeln!(out, "intensity")?;
        for v in values {
            writeln!(out, "{v}")?;
        }
        Ok(())
    }
}

/// Splits the positive pixels by mask value; zero pixels are dropped.
pub fn split_training(raster: &Raster, mask: &BinaryMask) -> Result<TrainingSets> {
    raster.same_shape(mask)?;
    let mut sets = TrainingSets {
        targets: Vec::new(),
        clutter: Vec::new(),
    };
    for (&x, &b) in raster.pixels().iter().zip(mask.bits()) {
        if x > 0.0 {
            if b {
                sets.targets.push(x);
            } else {
                sets.clutter.push(x);
            }
        }
    }
    if sets.targets.is_empty() {
        return Err(Error::Training("no target pixels under the mask".into()));
    }
    if sets.clutter.is_empty() {
        return Err(Error::Training("no clutter pixels outside the mask".into()));
    }
    Ok(sets)
}

/// Parses a one-column intensity CSV; an optional non-numeric header is skipped.
pub fn read_samples_csv(text: &str) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let field = line.split(',').next().unwrap_or("").trim();
        if field.is_empty() || field.starts_with('#') {
            continue;
        }
        match field.parse::<f64>() {
            Ok(v) => out.push(v),
            Err(_) if n == 0 => continue,
            Err(e) => return Err(Error::Input(format!("line {}: {e}", n + 1))),
        }
    }
    Ok(out)
}
