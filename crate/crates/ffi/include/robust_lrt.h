#ifndef ROBUST_LRT_H
#define ROBUST_LRT_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum RlrtBandKind {
  // Envelopes `lower_factor·p` and `upper_factor·p`.
  RLRT_BAND_KIND_BAND = 0,
  // `(1 − epsilon)·p` below, unbounded above.
  RLRT_BAND_KIND_OUTLIER = 1,
} RlrtBandKind;

typedef enum RlrtDetectorKind {
  RLRT_DETECTOR_KIND_NOMINAL = 0,
  RLRT_DETECTOR_KIND_ROBUST = 1,
} RlrtDetectorKind;

typedef enum RlrtStatus {
  RLRT_STATUS_OK = 0,
  RLRT_STATUS_NULL_POINTER = 1,
  RLRT_STATUS_INPUT = 2,
  RLRT_STATUS_DOMAIN = 3,
  RLRT_STATUS_NUMERIC = 4,
  RLRT_STATUS_FIT = 5,
  RLRT_STATUS_INFEASIBLE_BAND = 6,
  RLRT_STATUS_SOLVER = 7,
  RLRT_STATUS_CALIBRATION = 8,
  RLRT_STATUS_TRAINING = 9,
  RLRT_STATUS_IO = 10,
  RLRT_STATUS_PANIC = 11,
} RlrtStatus;

// Calibrated pixel-wise detector.
typedef struct RlrtDetector RlrtDetector;

// Least favorable densities with their robust log-likelihood ratio.
typedef struct RlrtLfd RlrtLfd;

// Clutter and target intensity models.
typedef struct RlrtModel RlrtModel;

// Uncertainty model around each nominal density. Band models read the two
// factors, outlier models read `epsilon`.
typedef struct RlrtBand {
  enum RlrtBandKind kind;
  double lower_factor;
  double upper_factor;
  double epsilon;
} RlrtBand;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the most recent failure on this thread, or null. The pointer
// stays valid until the next failing call on the same thread.
const char *rlrt_last_error(void);

// Library version as a static NUL-terminated string.
const char *rlrt_version(void);

// Releases a string returned by this library.
//
// # Safety
// `s` must be null or a string from [`rlrt_model_to_json`] not yet freed.
void rlrt_string_free(char *s);

// Built-in reference model.
//
// # Safety
// `out` must be a valid pointer to writable storage for a handle.
enum RlrtStatus rlrt_model_reference(struct RlrtModel **out);

// Parses a model from its JSON form.
//
// # Safety
// `json` must be a NUL-terminated string and `out` a valid handle pointer.
enum RlrtStatus rlrt_model_from_json(const char *json, struct RlrtModel **out);

// Serializes a model; free the result with [`rlrt_string_free`].
//
// # Safety
// `model` must be a live handle and `out` a valid pointer.
enum RlrtStatus rlrt_model_to_json(const struct RlrtModel *model, char **out);

// Fits a Rayleigh clutter model and a `components`-term Gaussian mixture
// target model to training intensities.
//
// # Safety
// `targets` and `clutter` must point to `n_targets` and `n_clutter`
// readable doubles; `out` must be a valid handle pointer.
enum RlrtStatus rlrt_model_fit(const double *targets,
                               size_t n_targets,
                               const double *clutter,
                               size_t n_clutter,
                               size_t components,
                               uint64_t seed,
                               struct RlrtModel **out);

// # Safety
// `model` must be null or a handle not yet freed.
void rlrt_model_free(struct RlrtModel *model);

// Solves for the least favorable densities on a `grid_points` grid over
// [0, 1], stopping when each density moves less than `delta` in L1.
//
// # Safety
// `model` must be a live handle and `out` a valid handle pointer.
enum RlrtStatus rlrt_lfd_solve(const struct RlrtModel *model,
                               struct RlrtBand band,
                               size_t grid_points,
                               double delta,
                               struct RlrtLfd **out);

// Clipping multipliers and the number of sweeps taken.
//
// # Safety
// `lfd` must be a live handle; each out-pointer must be null or writable.
enum RlrtStatus rlrt_lfd_multipliers(const struct RlrtLfd *lfd,
                                     double *a0,
                                     double *a1,
                                     size_t *iterations);

// Robust log-likelihood ratio at intensity `x`, interpolated between grid points.
//
// # Safety
// `lfd` must be a live handle and `value` writable.
enum RlrtStatus rlrt_lfd_log_lr(const struct RlrtLfd *lfd, double x, double *value);

// # Safety
// `lfd` must be null or a handle not yet freed.
void rlrt_lfd_free(struct RlrtLfd *lfd);

// Builds a detector calibrated to false-alarm probability `alpha`. The band
// is ignored by nominal detectors.
//
// # Safety
// `model` must be a live handle and `out` a valid handle pointer.
enum RlrtStatus rlrt_detector_build(const struct RlrtModel *model,
                                    enum RlrtDetectorKind kind,
                                    struct RlrtBand band,
                                    size_t grid_points,
                                    double delta,
                                    double alpha,
                                    struct RlrtDetector **out);

// Calibrated log threshold.
//
// # Safety
// `detector` must be a live handle and `ln_gamma` writable.
enum RlrtStatus rlrt_detector_threshold(const struct RlrtDetector *detector, double *ln_gamma);

// Detects on a row-major `width`×`height` raster, writing 1 for target and
// 0 for clutter into `mask`.
//
// # Safety
// `pixels` must hold `width·height` readable doubles and `mask` as many
// writable bytes.
enum RlrtStatus rlrt_detector_detect(const struct RlrtDetector *detector,
                                     const double *pixels,
                                     size_t width,
                                     size_t height,
                                     uint8_t *mask);

// # Safety
// `detector` must be null or a handle not yet freed.
void rlrt_detector_free(struct RlrtDetector *detector);

// Pixel-wise AND of `count` masks of `width`×`height` bytes (non-zero is set).
//
// # Safety
// `masks` must hold `count` pointers, each to `width·height` readable
// bytes, and `out` must have as many writable bytes.
enum RlrtStatus rlrt_hard_fuse(const uint8_t *const *masks,
                               size_t count,
                               size_t width,
                               size_t height,
                               uint8_t *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ROBUST_LRT_H */
