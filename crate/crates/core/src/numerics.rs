//! Uniform intensity grids, gridded densities, trapezoidal quadrature and
//! bisection for monotone scalar equations.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default number of grid points over the unit intensity interval.
pub const DEFAULT_GRID_POINTS: usize = 4096;

/// Iteration cap for [`bisect_root`].
pub const MAX_BISECTION_ITERATIONS: usize = 200;

/// Uniformly spaced sample points over `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntensityGrid {
    n_points: usize,
    lo: f64,
    hi: f64,
}

impl IntensityGrid {
    pub fn new(n_points: usize, lo: f64, hi: f64) -> Result<Self> {
        if n_points < 2 {
            return Err(Error::Input(format!(
                "grid needs at least 2 points, got {n_points}"
            )));
        }
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::Input(format!("invalid grid range [{lo}, {hi}]")));
        }
        Ok(Self { n_points, lo, hi })
    }

    /// Grid over the normalized intensity range `[0, 1]`.
    pub fn unit(n_points: usize) -> Result<Self> {
        Self::new(n_points, 0.0, 1.0)
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn spacing(&self) -> f64 {
        (self.hi - self.lo) / (self.n_points - 1) as f64
    }

    /// Abscissa of sample `k`.
    #[inline]
    pub fn x(&self, k: usize) -> f64 {
        if k + 1 == self.n_points {
            self.hi
        } else {
            self.lo + k as f64 * self.spacing()
        }
    }

    pub fn points(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n_points).map(move |k| self.x(k))
    }

    /// Composite trapezoid weights; `quadrature(v) == Σ w_k v_k`.
    pub fn trapezoid_weights(&self) -> Vec<f64> {
        let h = self.spacing();
        let mut w = vec![h; self.n_points];
        w[0] = 0.5 * h;
        w[self.n_points - 1] = 0.5 * h;
        w
    }

    /// Cell index `k` and fractional offset `t ∈ [0,1]` such that
    /// `x = x_k + t·h`. Values outside the range are clamped.
    pub fn locate(&self, x: f64) -> (usize, f64) {
        let h = self.spacing();
        let pos = ((x - self.lo) / h).clamp(0.0, (self.n_points - 1) as f64);
        let k = (pos.floor() as usize).min(self.n_points - 2);
        (k, pos - k as f64)
    }

    /// Index of the sample nearest to `x`.
    pub fn nearest(&self, x: f64) -> usize {
        let (k, t) = self.locate(x);
        if t > 0.5 {
            k + 1
        } else {
            k
        }
    }
}

/// A non-negative function sampled on an [`IntensityGrid`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityGrid {
    grid: IntensityGrid,
    values: Vec<f64>,
}

impl DensityGrid {
    pub fn new(grid: IntensityGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n_points() {
            return Err(Error::GridMismatch(format!(
                "{} values for a {}-point grid",
                values.len(),
                grid.n_points()
            )));
        }
        if let Some((k, v)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !v.is_finite() || **v < 0.0)
        {
            return Err(Error::NumericInput(format!(
                "density value {v} at index {k}"
            )));
        }
        Ok(Self { grid, values })
    }

    /// Samples `f` at every grid point.
    pub fn from_fn(grid: IntensityGrid, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(grid, grid.points().map(f).collect())
    }

    pub fn constant(grid: IntensityGrid, c: f64) -> Result<Self> {
        Self::new(grid, vec![c; grid.n_points()])
    }

    pub fn grid(&self) -> &IntensityGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn scaled(&self, c: f64) -> Result<Self> {
        Self::new(self.grid, self.values.iter().map(|v| v * c).collect())
    }

    /// Rescales so that the trapezoidal integral is one.
    pub fn normalized(&self) -> Result<Self> {
        let mass = quadrature(self)?;
        if mass <= 0.0 {
            return Err(Error::NumericInput(
                "cannot normalize a density with zero mass".into(),
            ));
        }
        self.scaled(1.0 / mass)
    }

    pub fn is_normalized(&self) -> bool {
        quadrature(self)
            .map(|m| (m - 1.0).abs() <= 1e-6)
            .unwrap_or(false)
    }

    /// Linear interpolation between grid samples.
    pub fn interpolate(&self, x: f64) -> f64 {
        let (k, t) = self.grid.locate(x);
        self.values[k] * (1.0 - t) + self.values[k + 1] * t
    }

    pub fn same_grid(&self, other: &DensityGrid) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch(format!(
                "{:?} vs {:?}",
                self.grid, other.grid
            )));
        }
        Ok(())
    }

    /// Discrete L1 distance weighted by the trapezoid rule.
    pub fn l1_distance(&self, other: &DensityGrid) -> Result<f64> {
        self.same_grid(other)?;
        Ok(weighted_sum(
            &self.grid,
            self.values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| (a - b).abs()),
        ))
    }
}

fn weighted_sum(grid: &IntensityGrid, values: impl Iterator<Item = f64>) -> f64 {
    let h = grid.spacing();
    let last = grid.n_points() - 1;
    let mut acc = 0.0;
    for (k, v) in values.enumerate() {
        let w = if k == 0 || k == last { 0.5 } else { 1.0 };
        acc += w * v;
    }
    acc * h
}

/// Composite trapezoidal integral of a gridded function.
pub fn quadrature(d: &DensityGrid) -> Result<f64> {
    quadrature_values(&d.grid, &d.values)
}

/// Trapezoidal integral of raw samples on `grid`; the samples may be signed.
pub fn quadrature_values(grid: &IntensityGrid, values: &[f64]) -> Result<f64> {
    if values.len() != grid.n_points() {
        return Err(Error::GridMismatch(format!(
            "{} values for a {}-point grid",
            values.len(),
            grid.n_points()
        )));
    }
    if let Some(v) = values.iter().find(|v| !v.is_finite()) {
        return Err(Error::NumericInput(format!("non-finite sample {v}")));
    }
    Ok(weighted_sum(grid, values.iter().copied()))
}

/// Finds a root of a non-decreasing `f` on `[lo, hi]` by bisection.
///
/// When `f` vanishes on a whole segment the smallest bracketed root is
/// returned (to within `tol`).
pub fn bisect_root(mut f: impl FnMut(f64) -> f64, lo: f64, hi: f64, tol: f64) -> Result<f64> {
    if !(tol > 0.0) || !(lo <= hi) {
        return Err(Error::Input(format!(
            "bisect_root: bad arguments lo={lo} hi={hi} tol={tol}"
        )));
    }
    let (f_lo, f_hi) = (f(lo), f(hi));
    if f_lo.is_nan() || f_hi.is_nan() || f_lo > 0.0 || f_hi < 0.0 {
        return Err(Error::Bracket { lo, hi, f_lo, f_hi });
    }
    if f_lo == 0.0 {
        return Ok(lo);
    }
    // Invariant: f(a) < 0 <= f(b).
    let (mut a, mut b) = (lo, hi);
    for _ in 0..MAX_BISECTION_ITERATIONS {
        if b - a <= tol {
            return Ok(b);
        }
        let mid = 0.5 * (a + b);
        if mid <= a || mid >= b {
            return Ok(b);
        }
        let fm = f(mid);
        if fm.is_nan() {
            return Err(Error::NumericInput(format!("objective is NaN at {mid}")));
        }
        if fm < 0.0 {
            a = mid;
        } else {
            b = mid;
        }
    }
    if b - a <= tol {
        Ok(b)
    } else {
        Err(Error::Convergence(format!(
            "bisection did not reach width {tol} in {MAX_BISECTION_ITERATIONS} steps (bracket [{a}, {b}])"
        )))
    }
}

/// Exact inverse-CDF sampler for a piecewise-linear gridded density.
#[derive(Debug, Clone)]
pub struct GridSampler {
    grid: IntensityGrid,
    values: Vec<f64>,
    /// Cumulative cell masses; `cdf[k]` is the mass left of cell `k`.
    cdf: Vec<f64>,
}

impl GridSampler {
    pub fn new(density: &DensityGrid) -> Result<Self> {
        let h = density.grid.spacing();
        let mut cdf = Vec::with_capacity(density.len());
        let mut acc = 0.0;
        cdf.push(0.0);
        for w in density.values.windows(2) {
            acc += 0.5 * h * (w[0] + w[1]);
            cdf.push(acc);
        }
        if !(acc > 0.0) {
            return Err(Error::NumericInput(
                "cannot sample from a density with zero mass".into(),
            ));
        }
        Ok(Self {
            grid: density.grid,
            values: density.values.clone(),
            cdf,
        })
    }

    /// Maps a uniform variate `u` in `[0, 1)` to an intensity.
    pub fn quantile(&self, u: f64) -> f64 {
        let total = *self.cdf.last().expect("non-empty");
        let target = u.clamp(0.0, 1.0) * total;
        let k = match self.cdf.partition_point(|c| *c <= target) {
            0 => 0,
            p => (p - 1).min(self.cdf.len() - 2),
        };
        let h = self.grid.spacing();
        let (da, db) = (self.values[k], self.values[k + 1]);
        let r = ((target - self.cdf[k]) / h).max(0.0);
        // root of (db - da)/2 t² + da t = r in its cancellation-free form
        let disc = (da * da + 2.0 * (db - da) * r).max(0.0);
        let denom = da + disc.sqrt();
        let t = if denom > 0.0 {
            (2.0 * r / denom).clamp(0.0, 1.0)
        } else {
            0.0
        };
        self.grid.x(k) + t * h
    }

    pub fn sample<R: rand::Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.quantile(rng.gen::<f64>())
    }
}
