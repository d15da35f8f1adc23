#ifndef GAZE_CONCEPTS_H
#define GAZE_CONCEPTS_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result of every fallible call. Codes 1 to 3 match the CLI exit codes.
typedef enum GciStatus {
  GCI_STATUS_OK = 0,
  GCI_STATUS_CONFIG = 1,
  GCI_STATUS_DATA = 2,
  GCI_STATUS_IO = 3,
  GCI_STATUS_NULL_POINTER = 4,
  // The concept covers no sample of the window.
  GCI_STATUS_EMPTY_CONCEPT = 5,
  // The buffer passed in is too small; the call reports the needed size.
  GCI_STATUS_BUFFER_TOO_SMALL = 6,
  GCI_STATUS_PANIC = 7,
} GciStatus;

// Events detected in one window.
typedef struct GciEvents GciEvents;

// Results of a full pipeline run.
typedef struct GciRun GciRun;

// Detection thresholds; see [`gci_detection_params_default`].
typedef struct GciDetectionParams {
  double fix_max_velocity;
  double fix_min_duration_ms;
  double fix_max_dispersion_deg;
  double sacc_lambda;
  double sacc_min_duration_ms;
  double sacc_max_duration_ms;
  double sacc_min_peak_velocity;
  double sacc_max_peak_velocity;
  double eta_floor;
} GciDetectionParams;

// One detected event. Unavailable properties are NaN.
typedef struct GciEvent {
  // 0 fixation, 1 saccade.
  uint32_t kind;
  size_t onset;
  size_t offset;
  double duration_ms;
  double peak_velocity;
  double amplitude_deg;
  double dispersion_deg;
  double velocity_std;
  // 0 when retained; otherwise the first failed bound (1 min duration,
  // 2 max duration, 3 min peak velocity, 4 max peak velocity, 5 max
  // dispersion).
  uint32_t exclusion;
} GciEvent;

// Pooled influence of one concept over the run.
typedef struct GciConceptResult {
  double c;
  // Mean of the per-window values.
  double c_mean;
  uint64_t intersection;
  uint64_t l_total;
  uint64_t s_total;
  uint64_t k_total;
  size_t windows;
  // Windows where the concept was absent.
  size_t skipped;
} GciConceptResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static NUL-terminated string.
const char *gci_version(void);

// Copies the calling thread's last error message into `buf` and returns
// the size needed (0 when there is no error). Call with a null `buf` to
// query the size.
//
// # Safety
// `buf` must be null or point to `len` writable bytes.
size_t gci_last_error_message(char *buf, size_t len);

// Savitzky-Golay first derivative (units per second) of `n` positions.
//
// # Safety
// `positions` and `out` must each hold `n` doubles.
enum GciStatus gci_savgol_derivative(const double *positions,
                                     size_t n,
                                     size_t window_length,
                                     size_t poly_order,
                                     double dt_s,
                                     double *out);

struct GciDetectionParams gci_detection_params_default(void);

// Adaptive saccade thresholds `lambda * sigma` per component.
//
// # Safety
// `vx` and `vy` must hold `n` doubles; the outputs must be writable.
enum GciStatus gci_ek_threshold(const double *vx,
                                const double *vy,
                                size_t n,
                                double lambda,
                                double eta_floor,
                                double *eta_x,
                                double *eta_y);

// Fixations (I-VT) and saccades (Engbert-Kliegl) of one window of
// velocities (deg/s) and positions (deg). `params` may be null for the
// defaults. On success `*out` owns a handle for [`gci_events_free`].
//
// # Safety
// The four arrays must hold `n` doubles and `out` must be writable.
enum GciStatus gci_detect_events(const double *vx,
                                 const double *vy,
                                 const double *px,
                                 const double *py,
                                 size_t n,
                                 double sampling_rate_hz,
                                 const struct GciDetectionParams *params,
                                 struct GciEvents **out);

// # Safety
// `events` must be null or a live handle from [`gci_detect_events`].
size_t gci_events_count(const struct GciEvents *events);

// Copies event `index` into `out`.
//
// # Safety
// `events` must be a live handle and `out` writable.
enum GciStatus gci_events_get(const struct GciEvents *events, size_t index, struct GciEvent *out);

// # Safety
// `events` must be null or a handle not yet freed.
void gci_events_free(struct GciEvents *events);

// Marks the `k` largest finite values in `mask_out` (1 marked, 0 not).
//
// # Safety
// `values` and `mask_out` must hold `n` elements.
enum GciStatus gci_topk_mask(const double *values, size_t n, size_t k, uint8_t *mask_out);

// Influence `L * |S n T| / (|S| * k)` of a concept mask against a top-k
// mask of the same length. Nonzero bytes count as marked.
//
// # Safety
// Both masks must hold `n` bytes; the outputs must be writable.
enum GciStatus gci_concept_influence(const uint8_t *concept_mask,
                                     const uint8_t *topk_mask,
                                     size_t n,
                                     size_t k,
                                     double *c_out,
                                     uint64_t *intersection_out);

// Runs every stage for a manifest. `config_path` may be null, in which
// case the manifest's config (or the defaults) applies; `jobs == 0` uses
// all cores. On success `*out` owns a handle for [`gci_run_free`].
//
// # Safety
// Paths must be null or NUL-terminated; `out` must be writable.
enum GciStatus gci_run_open(const char *manifest_path,
                            const char *config_path,
                            size_t jobs,
                            struct GciRun **out);

// Number of concepts with a pooled result.
//
// # Safety
// `run` must be null or a live handle.
size_t gci_run_concept_count(const struct GciRun *run);

// Name of concept `index`; valid until the handle is freed. Null when out
// of range.
//
// # Safety
// `run` must be null or a live handle.
const char *gci_run_concept_name(const struct GciRun *run, size_t index);

// # Safety
// `run` must be a live handle and `out` writable.
enum GciStatus gci_run_concept(const struct GciRun *run,
                               size_t index,
                               struct GciConceptResult *out);

// Writes the summary JSON into `buf` and stores the size needed
// (including the NUL) in `needed`. Returns `BufferTooSmall` when `buf`
// is null or shorter than that.
//
// # Safety
// `run` must be a live handle, `buf` null or `len` writable bytes and
// `needed` writable.
enum GciStatus gci_run_report_json(const struct GciRun *run, char *buf, size_t len, size_t *needed);

// Writes report, tables, events and charts under `dir`.
//
// # Safety
// `run` must be a live handle and `dir` NUL-terminated.
enum GciStatus gci_run_write_outputs(const struct GciRun *run, const char *dir);

// # Safety
// `run` must be null or a handle not yet freed.
void gci_run_free(struct GciRun *run);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* GAZE_CONCEPTS_H */
