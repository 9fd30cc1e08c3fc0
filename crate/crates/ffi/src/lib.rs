//! C interface to the robust-lrt detection library.
//!
//! Models, LFD solutions and calibrated detectors are opaque handles. Each is
//! created by a function that writes the new handle through an out-pointer and
//! released with the matching `*_free`. Fallible functions return an
//! [`RlrtStatus`]; after a failure, [`rlrt_last_error`] describes it.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use robust_lrt::lfd::RobustLogLr;
use robust_lrt::uncertainty::BandSpec;
use robust_lrt::{
    build_detector, detect, fit_gmm, fit_rayleigh, hard_fuse, BinaryMask, DetectorKind,
    DetectorSpec, Error, IntensityGrid, LfdOptions, LfdSolution, NominalModel, Raster,
};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RlrtStatus {
    Ok = 0,
    NullPointer = 1,
    Input = 2,
    Domain = 3,
    Numeric = 4,
    Fit = 5,
    InfeasibleBand = 6,
    Solver = 7,
    Calibration = 8,
    Training = 9,
    Io = 10,
    Panic = 11,
}

impl From<&Error> for RlrtStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::Input(_) | Error::GridMismatch(_) | Error::Json(_) => RlrtStatus::Input,
            Error::Domain(_) => RlrtStatus::Domain,
            Error::NumericInput(_)
            | Error::Bracket { .. }
            | Error::Convergence(_)
            | Error::NonConvergence { .. } => RlrtStatus::Numeric,
            Error::Fit(_) => RlrtStatus::Fit,
            Error::InfeasibleBand(_) => RlrtStatus::InfeasibleBand,
            Error::Solver(_) => RlrtStatus::Solver,
            Error::Calibration(_) => RlrtStatus::Calibration,
            Error::Seed(_) | Error::Training(_) => RlrtStatus::Training,
            Error::Io(_) => RlrtStatus::Io,
        }
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RlrtBandKind {
    /// Envelopes `lower_factor·p` and `upper_factor·p`.
    Band = 0,
    /// `(1 − epsilon)·p` below, unbounded above.
    Outlier = 1,
}

/// Uncertainty model around each nominal density. Band models read the two
/// factors, outlier models read `epsilon`.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct RlrtBand {
    pub kind: RlrtBandKind,
    pub lower_factor: f64,
    pub upper_factor: f64,
    pub epsilon: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RlrtDetectorKind {
    Nominal = 0,
    Robust = 1,
}

/// Clutter and target intensity models.
pub struct RlrtModel(NominalModel);

/// Least favorable densities with their robust log-likelihood ratio.
pub struct RlrtLfd {
    solution: LfdSolution,
    log_lr: RobustLogLr,
}

/// Calibrated pixel-wise detector.
pub struct RlrtDetector(DetectorSpec);

struct Failure(RlrtStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(RlrtStatus::from(&e), e.to_string())
    }
}

type Outcome = Result<(), Failure>;

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn remember(message: String) {
    let text = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(text));
}

fn guard(f: impl FnOnce() -> Outcome) -> RlrtStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => RlrtStatus::Ok,
        Ok(Err(Failure(status, message))) => {
            remember(message);
            status
        }
        Err(payload) => {
            let detail = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_default();
            remember(format!("panic: {detail}"));
            RlrtStatus::Panic
        }
    }
}

fn non_null<T>(p: *const T, name: &str) -> Result<(), Failure> {
    if p.is_null() {
        Err(Failure(RlrtStatus::NullPointer, format!("{name} is null")))
    } else {
        Ok(())
    }
}

/// Borrows `len` values from `data`; an empty slice may come with a null pointer.
unsafe fn slice<'a, T>(data: *const T, len: usize, name: &str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    non_null(data, name)?;
    Ok(std::slice::from_raw_parts(data, len))
}

fn band_spec(band: RlrtBand) -> Result<BandSpec, Failure> {
    Ok(match band.kind {
        RlrtBandKind::Band => BandSpec::band(band.lower_factor, band.upper_factor)?,
        RlrtBandKind::Outlier => BandSpec::outlier(band.epsilon)?,
    })
}

fn options(delta: f64) -> LfdOptions {
    LfdOptions::with_delta(delta)
}

fn boxed<T>(value: T, out: *mut *mut T) {
    // SAFETY: callers check `out` for null before building the value.
    unsafe { *out = Box::into_raw(Box::new(value)) };
}

/// Message of the most recent failure on this thread, or null. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn rlrt_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn rlrt_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Releases a string returned by this library.
///
/// # Safety
/// `s` must be null or a string from [`rlrt_model_to_json`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn rlrt_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Built-in reference model.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for a handle.
#[no_mangle]
pub unsafe extern "C" fn rlrt_model_reference(out: *mut *mut RlrtModel) -> RlrtStatus {
    guard(|| {
        non_null(out, "out")?;
        boxed(RlrtModel(NominalModel::reference()), out);
        Ok(())
    })
}

/// Parses a model from its JSON form.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a valid handle pointer.
#[no_mangle]
pub unsafe extern "C" fn rlrt_model_from_json(
    json: *const c_char,
    out: *mut *mut RlrtModel,
) -> RlrtStatus {
    guard(|| {
        non_null(json, "json")?;
        non_null(out, "out")?;
        let text = CStr::from_ptr(json)
            .to_str()
            .map_err(|e| Failure(RlrtStatus::Input, format!("model JSON is not UTF-8: {e}")))?;
        boxed(RlrtModel(NominalModel::from_json(text)?), out);
        Ok(())
    })
}

/// Serializes a model; free the result with [`rlrt_string_free`].
///
/// # Safety
/// `model` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn rlrt_model_to_json(
    model: *const RlrtModel,
    out: *mut *mut c_char,
) -> RlrtStatus {
    guard(|| {
        non_null(model, "model")?;
        non_null(out, "out")?;
        let json = (*model).0.to_json()?;
        let text = CString::new(json).map_err(|e| Failure(RlrtStatus::Input, e.to_string()))?;
        *out = text.into_raw();
        Ok(())
    })
}

/// Fits a Rayleigh clutter model and a `components`-term Gaussian mixture
/// target model to training intensities.
///
/// # Safety
/// `targets` and `clutter` must point to `n_targets` and `n_clutter`
/// readable doubles; `out` must be a valid handle pointer.
#[no_mangle]
pub unsafe extern "C" fn rlrt_model_fit(
    targets: *const f64,
    n_targets: usize,
    clutter: *const f64,
    n_clutter: usize,
    components: usize,
    seed: u64,
    out: *mut *mut RlrtModel,
) -> RlrtStatus {
    guard(|| {
        non_null(out, "out")?;
        let targets = slice(targets, n_targets, "targets")?;
        let clutter = slice(clutter, n_clutter, "clutter")?;
        if targets.is_empty() || clutter.is_empty() {
            return Err(Error::Training("both training sets need samples".into()).into());
        }
        let model = NominalModel {
            h0: fit_rayleigh(clutter)?,
            h1: fit_gmm(targets, components, seed)?,
        };
        boxed(RlrtModel(model), out);
        Ok(())
    })
}

/// # Safety
/// `model` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn rlrt_model_free(model: *mut RlrtModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Solves for the least favorable densities on a `grid_points` grid over
/// [0, 1], stopping when each density moves less than `delta` in L1.
///
/// # Safety
/// `model` must be a live handle and `out` a valid handle pointer.
#[no_mangle]
pub unsafe extern "C" fn rlrt_lfd_solve(
    model: *const RlrtModel,
    band: RlrtBand,
    grid_points: usize,
    delta: f64,
    out: *mut *mut RlrtLfd,
) -> RlrtStatus {
    guard(|| {
        non_null(model, "model")?;
        non_null(out, "out")?;
        let grid = IntensityGrid::unit(grid_points)?;
        let solution =
            LfdSolution::from_model(&(*model).0, grid, &band_spec(band)?, options(delta))?;
        let log_lr = solution.robust_log_lr()?;
        boxed(RlrtLfd { solution, log_lr }, out);
        Ok(())
    })
}

/// Clipping multipliers and the number of sweeps taken.
///
/// # Safety
/// `lfd` must be a live handle; each out-pointer must be null or writable.
#[no_mangle]
pub unsafe extern "C" fn rlrt_lfd_multipliers(
    lfd: *const RlrtLfd,
    a0: *mut f64,
    a1: *mut f64,
    iterations: *mut usize,
) -> RlrtStatus {
    guard(|| {
        non_null(lfd, "lfd")?;
        let pair = &(*lfd).solution.pair;
        if !a0.is_null() {
            *a0 = pair.a0;
        }
        if !a1.is_null() {
            *a1 = pair.a1;
        }
        if !iterations.is_null() {
            *iterations = pair.iterations;
        }
        Ok(())
    })
}

/// Robust log-likelihood ratio at intensity `x`, interpolated between grid points.
///
/// # Safety
/// `lfd` must be a live handle and `value` writable.
#[no_mangle]
pub unsafe extern "C" fn rlrt_lfd_log_lr(
    lfd: *const RlrtLfd,
    x: f64,
    value: *mut f64,
) -> RlrtStatus {
    guard(|| {
        non_null(lfd, "lfd")?;
        non_null(value, "value")?;
        if !(0.0..=1.0).contains(&x) {
            return Err(Error::Input(format!("intensity {x} outside [0, 1]")).into());
        }
        *value = (*lfd).log_lr.curve.eval(x);
        Ok(())
    })
}

/// # Safety
/// `lfd` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn rlrt_lfd_free(lfd: *mut RlrtLfd) {
    if !lfd.is_null() {
        drop(Box::from_raw(lfd));
    }
}

/// Builds a detector calibrated to false-alarm probability `alpha`. The band
/// is ignored by nominal detectors.
///
/// # Safety
/// `model` must be a live handle and `out` a valid handle pointer.
#[no_mangle]
pub unsafe extern "C" fn rlrt_detector_build(
    model: *const RlrtModel,
    kind: RlrtDetectorKind,
    band: RlrtBand,
    grid_points: usize,
    delta: f64,
    alpha: f64,
    out: *mut *mut RlrtDetector,
) -> RlrtStatus {
    guard(|| {
        non_null(model, "model")?;
        non_null(out, "out")?;
        let grid = IntensityGrid::unit(grid_points)?;
        let kind = match kind {
            RlrtDetectorKind::Nominal => DetectorKind::Nominal,
            RlrtDetectorKind::Robust => DetectorKind::Robust,
        };
        let spec = build_detector(
            &(*model).0,
            grid,
            kind,
            &band_spec(band)?,
            alpha,
            options(delta),
        )?;
        boxed(RlrtDetector(spec), out);
        Ok(())
    })
}

/// Calibrated log threshold.
///
/// # Safety
/// `detector` must be a live handle and `ln_gamma` writable.
#[no_mangle]
pub unsafe extern "C" fn rlrt_detector_threshold(
    detector: *const RlrtDetector,
    ln_gamma: *mut f64,
) -> RlrtStatus {
    guard(|| {
        non_null(detector, "detector")?;
        non_null(ln_gamma, "ln_gamma")?;
        *ln_gamma = (*detector).0.ln_gamma;
        Ok(())
    })
}

/// Detects on a row-major `width`×`height` raster, writing 1 for target and
/// 0 for clutter into `mask`.
///
/// # Safety
/// `pixels` must hold `width·height` readable doubles and `mask` as many
/// writable bytes.
#[no_mangle]
pub unsafe extern "C" fn rlrt_detector_detect(
    detector: *const RlrtDetector,
    pixels: *const f64,
    width: usize,
    height: usize,
    mask: *mut u8,
) -> RlrtStatus {
    guard(|| {
        non_null(detector, "detector")?;
        let n = width
            .checked_mul(height)
            .ok_or_else(|| Failure(RlrtStatus::Input, "raster size overflows".into()))?;
        let raster = Raster::new(width, height, slice(pixels, n, "pixels")?.to_vec())?;
        let bits = detect(&raster, &(*detector).0)?;
        non_null(mask, "mask")?;
        let out = std::slice::from_raw_parts_mut(mask, n);
        for (o, &b) in out.iter_mut().zip(bits.bits()) {
            *o = u8::from(b);
        }
        Ok(())
    })
}

/// # Safety
/// `detector` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn rlrt_detector_free(detector: *mut RlrtDetector) {
    if !detector.is_null() {
        drop(Box::from_raw(detector));
    }
}

/// Pixel-wise AND of `count` masks of `width`×`height` bytes (non-zero is set).
///
/// # Safety
/// `masks` must hold `count` pointers, each to `width·height` readable
/// bytes, and `out` must have as many writable bytes.
#[no_mangle]
pub unsafe extern "C" fn rlrt_hard_fuse(
    masks: *const *const u8,
    count: usize,
    width: usize,
    height: usize,
    out: *mut u8,
) -> RlrtStatus {
    guard(|| {
        let n = width
            .checked_mul(height)
            .ok_or_else(|| Failure(RlrtStatus::Input, "mask size overflows".into()))?;
        let views = slice(masks, count, "masks")?
            .iter()
            .map(|&m| {
                let bits = slice(m, n, "mask")?.iter().map(|&b| b != 0).collect();
                Ok(BinaryMask::new(width, height, bits)?)
            })
            .collect::<Result<Vec<_>, Failure>>()?;
        let fused = hard_fuse(&views)?;
        non_null(out, "out")?;
        let dst = std::slice::from_raw_parts_mut(out, n);
        for (o, &b) in dst.iter_mut().zip(fused.bits()) {
            *o = u8::from(b);
        }
        Ok(())
    })
}
