//! Least favorable densities for a pair of density bands and the robust
//! log-likelihood ratio they induce.
//!
//! The LFDs solve the coupled fixed point
//!
//! ```text
//! g0 = min{p0″, max{a0·g1, p0′}}
//! g1 = min{p1″, max{a1·g0, p1′}}
//! ```
//!
//! with `a0`, `a1` chosen so that both integrate to one. [`solve_lfds`]
//! alternates between the two equations, finding each multiplier as the root
//! of the non-decreasing [`density_criterion`].

use std::fmt;
use std::io::Write;

use log::{debug, info};
use serde::{Deserialize, Serialize};

use crate::densities::{to_grid, NominalModel};
use crate::error::{Error, Result};
use crate::numerics::{bisect_root, quadrature_values, DensityGrid, IntensityGrid};
use crate::uncertainty::{build_band, BandSpec, DensityBand, Hypothesis, MASS_SLACK};

pub const DEFAULT_DELTA: f64 = 1e-3;
pub const MAX_SWEEPS: usize = 10_000;
/// Largest bracket exponent tried when searching for a multiplier.
const MAX_BRACKET_DOUBLINGS: u32 = 60;
/// Relative tolerance for deciding that a density sits on an envelope.
const ENVELOPE_TOL: f64 = 1e-9;
const MASS_ROUNDING: f64 = 1e-12;

/// `∫ min{p″, max{a·g, p′}} dx − 1`.
pub fn density_criterion(a: f64, g: &DensityGrid, band: &DensityBand) -> Result<f64> {
    band.lower().same_grid(g)?;
    let clamped = clamp_scaled(a, g, band);
    Ok(quadrature_values(g.grid(), &clamped)? - 1.0)
}

fn clamp_scaled(a: f64, g: &DensityGrid, band: &DensityBand) -> Vec<f64> {
    g.values()
        .iter()
        .enumerate()
        .map(|(k, v)| band.clamp_at(k, a * v))
        .collect()
}

/// Multiplier `a ≥ 0` with `density_criterion(a) = 0`.
fn solve_multiplier(g: &DensityGrid, band: &DensityBand) -> Result<f64> {
    let grid = *g.grid();
    // A band accepted as feasible may hold up to MASS_SLACK less (or more) than
    // unit mass; aim for the nearest reachable mass so it still has a root.
    let reach = |a: f64| quadrature_values(&grid, &clamp_scaled(a, g, band)).unwrap_or(f64::NAN);
    let floor = reach(0.0);
    let ceiling = if band.upper().is_bounded() {
        let top: Vec<f64> = g
            .values()
            .iter()
            .enumerate()
            .map(|(k, &v)| {
                if v > 0.0 {
                    band.upper().at(k)
                } else {
                    band.lower().values()[k]
                }
            })
            .collect();
        quadrature_values(&grid, &top)?
    } else {
        f64::INFINITY
    };
    let target = if (1.0 - MASS_SLACK..1.0).contains(&ceiling) {
        ceiling
    } else if floor > 1.0 && floor <= 1.0 + MASS_SLACK {
        floor
    } else {
        1.0
    };
    // mass errors at rounding level count as normalized, otherwise a degenerate
    // band whose envelopes hold 1 - 1e-16 would have no root at all
    let f = |a: f64| match reach(a) {
        m if (m - target).abs() <= MASS_ROUNDING => 0.0,
        m => m - target,
    };
    let mut hi = 4.0;
    let mut doublings = 0;
    while f(hi) < 0.0 {
        doublings += 1;
        if doublings > MAX_BRACKET_DOUBLINGS {
            return Err(Error::Solver(format!(
                "{:?}: no multiplier up to 2^{} normalizes the clamped density",
                band.hypothesis(),
                MAX_BRACKET_DOUBLINGS + 2
            )));
        }
        hi *= 2.0;
    }
    bisect_root(f, 0.0, hi, 1e-13 * hi)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LfdOptions {
    /// Stopping tolerance on the L1 change of each density per sweep.
    pub delta: f64,
    pub max_sweeps: usize,
}

impl Default for LfdOptions {
    fn default() -> Self {
        Self {
            delta: DEFAULT_DELTA,
            max_sweeps: MAX_SWEEPS,
        }
    }
}

impl LfdOptions {
    pub fn with_delta(delta: f64) -> Self {
        Self {
            delta,
            ..Self::default()
        }
    }
}

/// Converged least favorable densities and their multipliers.
#[derive(Debug, Clone, PartialEq)]
pub struct LfdPair {
    pub g0: DensityGrid,
    pub g1: DensityGrid,
    pub a0: f64,
    pub a1: f64,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Serialize, Deserialize)]
struct LfdPairJson {
    a0: f64,
    a1: f64,
    iterations: usize,
    grid: IntensityGrid,
    g0_values: Vec<f64>,
    g1_values: Vec<f64>,
}

impl LfdPair {
    pub fn grid(&self) -> &IntensityGrid {
        self.g0.grid()
    }

    pub fn to_json(&self) -> Result<String> {
        let doc = LfdPairJson {
            a0: self.a0,
            a1: self.a1,
            iterations: self.iterations,
            grid: *self.g0.grid(),
            g0_values: self.g0.values().to_vec(),
            g1_values: self.g1.values().to_vec(),
        };
        Ok(serde_json::to_string(&doc)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: LfdPairJson = serde_json::from_str(text)?;
        let grid = IntensityGrid::new(doc.grid.n_points(), doc.grid.lo(), doc.grid.hi())?;
        Ok(Self {
            g0: DensityGrid::new(grid, doc.g0_values)?,
            g1: DensityGrid::new(grid, doc.g1_values)?,
            a0: doc.a0,
            a1: doc.a1,
            iterations: doc.iterations,
            converged: true,
        })
    }
}

/// One alternating update: `a0` from `g1`, then `g0`, then `a1` from the new `g0`, then `g1`.
pub fn sweep(
    band0: &DensityBand,
    band1: &DensityBand,
    g1: &DensityGrid,
) -> Result<(DensityGrid, DensityGrid, f64, f64)> {
    let a0 = solve_multiplier(g1, band0)?;
    let g0_next = DensityGrid::new(*g1.grid(), clamp_scaled(a0, g1, band0))?;
    let a1 = solve_multiplier(&g0_next, band1)?;
    let g1_next = DensityGrid::new(*g1.grid(), clamp_scaled(a1, &g0_next, band1))?;
    Ok((g0_next, g1_next, a0, a1))
}

/// Alternating fixed-point iteration for the least favorable densities.
pub fn solve_lfds(
    band0: &DensityBand,
    band1: &DensityBand,
    init0: &DensityGrid,
    init1: &DensityGrid,
    options: LfdOptions,
) -> Result<LfdPair> {
    if !(options.delta > 0.0) {
        return Err(Error::Input(format!(
            "tolerance must be positive, got {}",
            options.delta
        )));
    }
    band0.lower().same_grid(band1.lower())?;
    band0.lower().same_grid(init0)?;
    band0.lower().same_grid(init1)?;

    let mut g0 = init0.clone();
    let mut g1 = init1.clone();
    let (mut change0, mut change1) = (f64::INFINITY, f64::INFINITY);
    for n in 1..=options.max_sweeps {
        let (g0_next, g1_next, a0, a1) = sweep(band0, band1, &g1)?;
        change0 = g0.l1_distance(&g0_next)?;
        change1 = g1.l1_distance(&g1_next)?;
        debug!(
            "sweep {n}: ln a0 = {:.6}, ln a1 = {:.6}, changes {change0:.3e} {change1:.3e}",
            a0.ln(),
            a1.ln()
        );
        g0 = g0_next;
        g1 = g1_next;
        if change0 < options.delta && change1 < options.delta {
            info!(
                "LFDs converged after {n} sweeps: ln a0 = {:.6}, ln a1 = {:.6}",
                a0.ln(),
                a1.ln()
            );
            return Ok(LfdPair {
                g0,
                g1,
                a0,
                a1,
                iterations: n,
                converged: true,
            });
        }
    }
    Err(Error::NonConvergence {
        iterations: options.max_sweeps,
        last_change0: change0,
        last_change1: change1,
    })
}

/// Largest pointwise violation of the two fixed-point equations.
pub fn fixed_point_residual(pair: &LfdPair, band0: &DensityBand, band1: &DensityBand) -> f64 {
    let mut worst: f64 = 0.0;
    for k in 0..pair.g0.len() {
        let g0 = pair.g0.values()[k];
        let g1 = pair.g1.values()[k];
        worst = worst.max((g0 - band0.clamp_at(k, pair.a0 * g1)).abs());
        worst = worst.max((g1 - band1.clamp_at(k, pair.a1 * g0)).abs());
    }
    worst
}

/// Which of the six possible likelihood-ratio forms holds at a grid point.
///
/// `Ratio{XY}` means `g1` sits on envelope `X` and `g0` on envelope `Y`
/// (`L` lower, `U` upper).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum LrCase {
    RatioLl,
    RatioLu,
    RatioUl,
    RatioUu,
    ClipA1,
    ClipInvA0,
}

impl LrCase {
    pub const ALL: [LrCase; 6] = [
        LrCase::RatioLl,
        LrCase::RatioLu,
        LrCase::RatioUl,
        LrCase::RatioUu,
        LrCase::ClipA1,
        LrCase::ClipInvA0,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            LrCase::RatioLl => "RATIO_LL",
            LrCase::RatioLu => "RATIO_LU",
            LrCase::RatioUl => "RATIO_UL",
            LrCase::RatioUu => "RATIO_UU",
            LrCase::ClipA1 => "CLIP_A1",
            LrCase::ClipInvA0 => "CLIP_INV_A0",
        }
    }

    pub fn is_clip(&self) -> bool {
        matches!(self, LrCase::ClipA1 | LrCase::ClipInvA0)
    }
}

impl fmt::Display for LrCase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A log-likelihood-ratio function sampled on a grid. Samples may be `±∞`;
/// `NaN` marks points where the ratio is undefined.
#[derive(Debug, Clone, PartialEq)]
pub struct LogLrCurve {
    grid: IntensityGrid,
    values: Vec<f64>,
}

impl LogLrCurve {
    pub fn new(grid: IntensityGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n_points() {
            return Err(Error::GridMismatch(format!(
                "{} values for a {}-point grid",
                values.len(),
                grid.n_points()
            )));
        }
        Ok(Self { grid, values })
    }

    /// `ln(p1/p0)` pointwise.
    pub fn ratio(p0: &DensityGrid, p1: &DensityGrid) -> Result<Self> {
        p0.same_grid(p1)?;
        let values = p0
            .values()
            .iter()
            .zip(p1.values())
            .map(|(a, b)| log_ratio(*b, *a))
            .collect();
        Self::new(*p0.grid(), values)
    }

    pub fn grid(&self) -> &IntensityGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Linear interpolation; in a cell with a non-finite endpoint the value
    /// of the nearer endpoint is used.
    pub fn eval(&self, x: f64) -> f64 {
        let (k, t) = self.grid.locate(x);
        let (a, b) = (self.values[k], self.values[k + 1]);
        if a.is_finite() && b.is_finite() {
            a + t * (b - a)
        } else if t <= 0.5 {
            a
        } else {
            b
        }
    }
}

#[inline]
fn log_ratio(num: f64, den: f64) -> f64 {
    match (num > 0.0, den > 0.0) {
        (true, true) => (num / den).ln(),
        (true, false) => f64::INFINITY,
        (false, true) => f64::NEG_INFINITY,
        (false, false) => f64::NAN,
    }
}

/// Robust log-likelihood ratio with its per-point case label (`None` where undefined).
#[derive(Debug, Clone)]
pub struct RobustLogLr {
    pub curve: LogLrCurve,
    pub cases: Vec<Option<LrCase>>,
}

#[derive(Clone, Copy, PartialEq)]
enum Position {
    Lower,
    Upper,
    Interior,
}

fn position(v: f64, band: &DensityBand, k: usize) -> Position {
    let l = band.lower().values()[k];
    let u = band.upper().at(k);
    if v <= l * (1.0 + ENVELOPE_TOL) {
        Position::Lower
    } else if u.is_finite() && v >= u * (1.0 - ENVELOPE_TOL) {
        Position::Upper
    } else {
        Position::Interior
    }
}

/// `ln(g1/g0)` with case labels; clip points carry `ln a1` or `−ln a0` exactly.
pub fn robust_log_lr(
    pair: &LfdPair,
    band0: &DensityBand,
    band1: &DensityBand,
) -> Result<RobustLogLr> {
    if !pair.converged {
        return Err(Error::Input(
            "robust log-LR requires a converged LFD pair".into(),
        ));
    }
    pair.g0.same_grid(band0.lower())?;
    pair.g1.same_grid(band1.lower())?;
    let n = pair.g0.len();
    let mut values = Vec::with_capacity(n);
    let mut cases = Vec::with_capacity(n);
    for k in 0..n {
        let g0 = pair.g0.values()[k];
        let g1 = pair.g1.values()[k];
        if g0 == 0.0 && g1 == 0.0 {
            values.push(f64::NAN);
            cases.push(None);
            continue;
        }
        let s1 = position(g1, band1, k);
        let s0 = position(g0, band0, k);
        let (value, case) = match (s1, s0) {
            (Position::Interior, _) => (pair.a1.ln(), LrCase::ClipA1),
            (_, Position::Interior) => (-pair.a0.ln(), LrCase::ClipInvA0),
            (Position::Lower, Position::Lower) => (log_ratio(g1, g0), LrCase::RatioLl),
            (Position::Lower, Position::Upper) => (log_ratio(g1, g0), LrCase::RatioLu),
            (Position::Upper, Position::Lower) => (log_ratio(g1, g0), LrCase::RatioUl),
            (Position::Upper, Position::Upper) => (log_ratio(g1, g0), LrCase::RatioUu),
        };
        values.push(value);
        cases.push(Some(case));
    }
    Ok(RobustLogLr {
        curve: LogLrCurve::new(*pair.g0.grid(), values)?,
        cases,
    })
}

impl RobustLogLr {
    /// Writes `x,log_lr,case` rows.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "x,log_lr,case")?;
        for (k, (v, c)) in self.curve.values().iter().zip(&self.cases).enumerate() {
            let label = c.map(|c| c.as_str()).unwrap_or("UNDEFINED");
            writeln!(out, "{},{},{}", self.curve.grid().x(k), v, label)?;
        }
        Ok(())
    }

    /// Closed intervals (in intensity units) on which `case` holds, as maximal runs of grid points.
    pub fn case_intervals(&self, case: LrCase) -> Vec<(f64, f64)> {
        let grid = self.curve.grid();
        let mut out = Vec::new();
        let mut start: Option<usize> = None;
        for k in 0..=self.cases.len() {
            let hit = k < self.cases.len() && self.cases[k] == Some(case);
            match (hit, start) {
                (true, None) => start = Some(k),
                (false, Some(s)) => {
                    out.push((grid.x(s), grid.x(k - 1)));
                    start = None;
                }
                _ => {}
            }
        }
        out
    }
}

/// Everything derived from a nominal model and a band specification.
#[derive(Debug, Clone)]
pub struct LfdSolution {
    pub p0: DensityGrid,
    pub p1: DensityGrid,
    pub band0: DensityBand,
    pub band1: DensityBand,
    pub pair: LfdPair,
}

impl LfdSolution {
    /// Grids the nominal model, builds the same band around both
    /// hypotheses and solves from the renormalized nominals.
    pub fn from_model(
        model: &NominalModel,
        grid: IntensityGrid,
        spec: &BandSpec,
        options: LfdOptions,
    ) -> Result<Self> {
        let p0 = to_grid(&model.h0, grid)?.density;
        let p1 = to_grid(&model.h1, grid)?.density;
        let band0 = build_band(&p0, spec, Hypothesis::H0)?;
        let band1 = build_band(&p1, spec, Hypothesis::H1)?;
        let pair = solve_lfds(
            &band0,
            &band1,
            &p0.normalized()?,
            &p1.normalized()?,
            options,
        )?;
        Ok(Self {
            p0,
            p1,
            band0,
            band1,
            pair,
        })
    }

    pub fn robust_log_lr(&self) -> Result<RobustLogLr> {
        robust_log_lr(&self.pair, &self.band0, &self.band1)
    }

    pub fn nominal_log_lr(&self) -> Result<LogLrCurve> {
        LogLrCurve::ratio(&self.p0, &self.p1)
    }

    /// The two plateau levels of the robust log-LR, `(lower, upper)`.
    pub fn clip_levels(&self) -> (f64, f64) {
        let (c1, c0) = (self.pair.a1.ln(), -self.pair.a0.ln());
        (c1.min(c0), c1.max(c0))
    }
}
