//! Minimax robust likelihood-ratio detection.
//!
//! Nominal clutter (Rayleigh) and target (Gaussian mixture) intensity models
//! are widened into density-band or outlier uncertainty sets. The least
//! favorable pair inside those sets yields a clipped likelihood ratio that is
//! then used for pixel-wise detection with multiview hard fusion.

pub mod cli;
pub mod config;
pub mod densities;
pub mod detector;
pub mod error;
pub mod lfd;
pub mod numerics;
pub mod pipeline;
pub mod raster;
pub mod synth;
pub mod training;
pub mod uncertainty;

pub use densities::{fit_gmm, fit_rayleigh, GaussianMixtureParams, NominalModel, RayleighParams};
pub use detector::{
    calibrate_threshold, detect, evaluate, hard_fuse, CountUnit, DetectorSpec, EvaluationReport,
};
pub use error::{Error, Result};
pub use lfd::{robust_log_lr, solve_lfds, LfdOptions, LfdPair, LfdSolution, LogLrCurve, LrCase};
pub use numerics::{DensityGrid, IntensityGrid};
pub use pipeline::{build_detector, DetectorKind};
pub use raster::{BinaryMask, Raster};
pub use synth::{generate, Roughness, SceneSpec};
pub use training::{region_grow, split_training, SeedPoint, TrainingSets};
pub use uncertainty::{build_band, BandSpec, DensityBand, Hypothesis};
