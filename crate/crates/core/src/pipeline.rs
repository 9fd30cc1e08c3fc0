//! Model-to-detector assembly shared by the CLI and the C interface.

use serde::{Deserialize, Serialize};

use crate::densities::{to_grid, NominalModel};
use crate::detector::{
    detect, evaluate_with, hard_fuse, CountUnit, DetectorSpec, EvaluationReport,
};
use crate::error::Result;
use crate::lfd::{LfdOptions, LfdSolution, LogLrCurve};
use crate::numerics::IntensityGrid;
use crate::raster::{BinaryMask, Raster};
use crate::uncertainty::BandSpec;

/// Which likelihood ratio drives the detector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum DetectorKind {
    /// Ratio of the nominal densities, calibrated on the nominal clutter density.
    Nominal,
    /// Ratio of the least favorable pair, calibrated on the least favorable clutter density.
    Robust,
}

/// Calibrates a detector for `model` at false-alarm level `alpha`.
pub fn build_detector(
    model: &NominalModel,
    grid: IntensityGrid,
    kind: DetectorKind,
    band: &BandSpec,
    alpha: f64,
    options: LfdOptions,
) -> Result<DetectorSpec> {
    match kind {
        DetectorKind::Nominal => {
            let p0 = to_grid(&model.h0, grid)?.density;
            let p1 = to_grid(&model.h1, grid)?.density;
            DetectorSpec::calibrated(LogLrCurve::ratio(&p0, &p1)?, &p0.normalized()?, alpha)
        }
        DetectorKind::Robust => {
            let solution = LfdSolution::from_model(model, grid, band, options)?;
            let lr = solution.robust_log_lr()?;
            DetectorSpec::calibrated(lr.curve, &solution.pair.g0.normalized()?, alpha)
        }
    }
}

#[derive(Debug, Clone)]
pub struct MultiviewResult {
    pub masks: Vec<BinaryMask>,
    pub fused: BinaryMask,
    pub report: Option<EvaluationReport>,
}

/// Detects on every view, fuses, and scores against `truth` when given.
pub fn run_multiview(
    views: &[Raster],
    spec: &DetectorSpec,
    truth: Option<&BinaryMask>,
    unit: CountUnit,
) -> Result<MultiviewResult> {
    let masks = views
        .iter()
        .map(|v| detect(v, spec))
        .collect::<Result<Vec<_>>>()?;
    let fused = hard_fuse(&masks)?;
    let report = truth.map(|t| evaluate_with(&fused, t, unit)).transpose()?;
    Ok(MultiviewResult {
        masks,
        fused,
        report,
    })
}

/// Run report as written by the `detect` and `evaluate` commands.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub alpha: Option<f64>,
    pub ln_gamma: Option<f64>,
    pub count_unit: CountUnit,
    pub fa_count: Option<usize>,
    pub md_count: Option<usize>,
    pub per_target: Vec<crate::detector::TargetHit>,
}

impl RunReport {
    pub fn new(
        spec: Option<&DetectorSpec>,
        report: Option<&EvaluationReport>,
        unit: CountUnit,
    ) -> Self {
        Self {
            alpha: spec.map(|s| s.alpha),
            ln_gamma: spec.map(|s| s.ln_gamma),
            count_unit: unit,
            fa_count: report.map(|r| r.false_alarms),
            md_count: report.map(|r| r.missed),
            per_target: report.map(|r| r.per_target.clone()).unwrap_or_default(),
        }
    }
}
