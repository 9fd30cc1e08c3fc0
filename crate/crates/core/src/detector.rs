//! Pixel-wise likelihood-ratio detection, false-alarm calibration, multiview
//! hard fusion and region-level scoring.
//!
//! Calibration pushes the clutter density forward through the log-LR map.
//! Both the density and the log-LR are taken to be piecewise linear between
//! grid points (the same interpolation [`detect`] uses), so the computed
//! false-alarm rate is exactly the probability that a clutter draw from the
//! calibration density is flagged.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lfd::LogLrCurve;
use crate::numerics::DensityGrid;
pub use crate::raster::{label_components, BinaryMask, Raster};

/// A calibrated pixel-wise test `log_lr(x) > ln γ`.
#[derive(Debug, Clone)]
pub struct DetectorSpec {
    pub log_lr: LogLrCurve,
    pub ln_gamma: f64,
    pub alpha: f64,
}

impl DetectorSpec {
    pub fn calibrated(log_lr: LogLrCurve, h0_density: &DensityGrid, alpha: f64) -> Result<Self> {
        let ln_gamma = calibrate_threshold(&log_lr, h0_density, alpha)?;
        Ok(Self {
            log_lr,
            ln_gamma,
            alpha,
        })
    }

    #[inline]
    pub fn decide(&self, x: f64) -> bool {
        self.log_lr.eval(x) > self.ln_gamma
    }
}

/// Exact `P(log_lr(X) > t)` for `X` with the piecewise-linear density `h0`.
pub fn false_alarm_rate(log_lr: &LogLrCurve, h0: &DensityGrid, t: f64) -> Result<f64> {
    if log_lr.grid() != h0.grid() {
        return Err(Error::GridMismatch(
            "log-LR and density grids differ".into(),
        ));
    }
    let grid = h0.grid();
    let width = grid.spacing();
    let l = log_lr.values();
    let d = h0.values();
    let mut total = 0.0;
    for k in 0..grid.n_points() - 1 {
        let (da, db) = (d[k], d[k + 1]);
        if da == 0.0 && db == 0.0 {
            continue;
        }
        let (la, lb) = (l[k], l[k + 1]);
        // sub-interval [s1, s2] of the unit cell where the test fires
        let span = if la.is_finite() && lb.is_finite() {
            let (above_a, above_b) = (la > t, lb > t);
            match (above_a, above_b) {
                (true, true) => Some((0.0, 1.0)),
                (false, false) => None,
                _ => {
                    let s = ((t - la) / (lb - la)).clamp(0.0, 1.0);
                    if above_b {
                        Some((s, 1.0))
                    } else {
                        Some((0.0, s))
                    }
                }
            }
        } else {
            match (la > t, lb > t) {
                (true, true) => Some((0.0, 1.0)),
                (true, false) => Some((0.0, 0.5)),
                (false, true) => Some((0.5, 1.0)),
                (false, false) => None,
            }
        };
        if let Some((s1, s2)) = span {
            total += width * (da * (s2 - s1) + 0.5 * (db - da) * (s2 * s2 - s1 * s1));
        }
    }
    Ok(total)
}

/// Smallest `ln γ` whose false-alarm rate under `h0_density` is at most `alpha`.
///
/// Flat plateaus of the log-LR are included or excluded as a whole, always on
/// the side that keeps the rate at or below `alpha`.
pub fn calibrate_threshold(
    log_lr: &LogLrCurve,
    h0_density: &DensityGrid,
    alpha: f64,
) -> Result<f64> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::Input(format!(
            "false-alarm level must lie in (0, 1], got {alpha}"
        )));
    }
    let mut levels: Vec<f64> = log_lr
        .values()
        .iter()
        .copied()
        .filter(|v| !v.is_nan())
        .collect();
    if levels.is_empty() {
        return Err(Error::Calibration("log-LR is undefined everywhere".into()));
    }
    levels.sort_by(|a, b| a.total_cmp(b));
    levels.dedup();
    if alpha == 1.0 {
        return Ok(levels[0]);
    }

    // levels that carry clutter mass
    let d = h0_density.values();
    let mut charged: Vec<f64> = log_lr
        .values()
        .iter()
        .enumerate()
        .filter(|(k, v)| {
            !v.is_nan()
                && (d[*k] > 0.0
                    || (*k > 0 && d[k - 1] > 0.0)
                    || d.get(k + 1).is_some_and(|x| *x > 0.0))
        })
        .map(|(_, v)| *v)
        .collect();
    charged.sort_by(|a, b| a.total_cmp(b));
    charged.dedup();
    if charged.len() == 1 {
        return Err(Error::Calibration(format!(
            "log-LR is constant at {} wherever the clutter density has mass; no threshold reaches alpha = {alpha}",
            charged[0]
        )));
    }

    let fa = |t: f64| false_alarm_rate(log_lr, h0_density, t);
    // smallest level index whose rate is within alpha; the largest level always is
    let (mut lo, mut hi) = (0usize, levels.len() - 1);
    if fa(levels[0])? <= alpha {
        return Ok(levels[0]);
    }
    while hi - lo > 1 {
        let mid = (lo + hi) / 2;
        if fa(levels[mid])? <= alpha {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    // rate(levels[lo]) > alpha >= rate(levels[hi]); refine inside the open gap
    let (mut a, mut b) = (levels[lo], levels[hi]);
    if !b.is_finite() {
        return Ok(b);
    }
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        if mid <= a || mid >= b || b - a <= 1e-13 * b.abs().max(1.0) {
            break;
        }
        if fa(mid)? <= alpha {
            b = mid;
        } else {
            a = mid;
        }
    }
    Ok(b)
}

/// Applies the calibrated test to every pixel.
pub fn detect(raster: &Raster, spec: &DetectorSpec) -> Result<BinaryMask> {
    if let Some(v) = raster.pixels().iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(Error::Input(format!("pixel intensity {v} outside [0, 1]")));
    }
    let bits = raster.pixels().iter().map(|&x| spec.decide(x)).collect();
    BinaryMask::new(raster.width(), raster.height(), bits)
}

/// Pixel-wise AND of all views.
pub fn hard_fuse(masks: &[BinaryMask]) -> Result<BinaryMask> {
    let first = masks
        .first()
        .ok_or_else(|| Error::Input("hard fusion needs at least one mask".into()))?;
    let mut fused = first.bits().to_vec();
    for m in &masks[1..] {
        first.same_shape(m)?;
        for (f, b) in fused.iter_mut().zip(m.bits()) {
            *f &= *b;
        }
    }
    BinaryMask::new(first.width(), first.height(), fused)
}

/// Spatial unit for false-alarm and miss counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum CountUnit {
    #[default]
    Region,
    Pixel,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TargetHit {
    pub id: usize,
    pub detected: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub false_alarms: usize,
    pub missed: usize,
    pub per_target: Vec<TargetHit>,
}

/// Region-level scoring with 8-connected components.
pub fn evaluate(fused: &BinaryMask, truth: &BinaryMask) -> Result<EvaluationReport> {
    evaluate_with(fused, truth, CountUnit::Region)
}

pub fn evaluate_with(
    fused: &BinaryMask,
    truth: &BinaryMask,
    unit: CountUnit,
) -> Result<EvaluationReport> {
    fused.same_shape(truth)?;
    let (truth_labels, n_truth) = label_components(truth);
    let mut hit = vec![false; n_truth];
    for (k, &b) in fused.bits().iter().enumerate() {
        if b && truth_labels[k] > 0 {
            hit[truth_labels[k] as usize - 1] = true;
        }
    }
    let per_target: Vec<TargetHit> = hit
        .iter()
        .enumerate()
        .map(|(i, d)| TargetHit {
            id: i + 1,
            detected: *d,
        })
        .collect();

    let (false_alarms, missed) = match unit {
        CountUnit::Region => {
            let (labels, n) = label_components(fused);
            let mut touches = vec![false; n];
            for (k, &l) in labels.iter().enumerate() {
                if l > 0 && truth.bits()[k] {
                    touches[l as usize - 1] = true;
                }
            }
            (
                touches.iter().filter(|t| !**t).count(),
                hit.iter().filter(|h| !**h).count(),
            )
        }
        CountUnit::Pixel => {
            let fa = fused
                .bits()
                .iter()
                .zip(truth.bits())
                .filter(|(f, t)| **f && !**t)
                .count();
            let md = fused
                .bits()
                .iter()
                .zip(truth.bits())
                .filter(|(f, t)| !**f && **t)
                .count();
            (fa, md)
        }
    };
    Ok(EvaluationReport {
        false_alarms,
        missed,
        per_target,
    })
}
