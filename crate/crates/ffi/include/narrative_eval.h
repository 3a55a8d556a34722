#ifndef NARRATIVE_EVAL_H
#define NARRATIVE_EVAL_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stddef.h>
#include <stdint.h>

// Result of every fallible call.
typedef enum NeStatus {
  NE_STATUS_OK = 0,
  // A required pointer argument was null.
  NE_STATUS_NULL_POINTER = 1,
  // An argument is outside its domain (negative distance, bad index, ...).
  NE_STATUS_INVALID_ARGUMENT = 2,
  // Shapes or dimensions of two inputs disagree.
  NE_STATUS_DIMENSION_MISMATCH = 3,
  // A required input is empty (no samples, empty contour, ...).
  NE_STATUS_EMPTY_INPUT = 4,
  // Image or file contents could not be decoded.
  NE_STATUS_DECODE = 5,
  // A file could not be read or written.
  NE_STATUS_IO = 6,
  // A numerical precondition failed (indefinite or asymmetric matrix).
  NE_STATUS_NUMERICAL = 7,
  // The requested value is not present (e.g. no overall score).
  NE_STATUS_NOT_AVAILABLE = 8,
  // A panic was caught; this indicates a bug.
  NE_STATUS_INTERNAL = 9,
} NeStatus;

// Embedding set handle (`n` samples of dimension `d`).
typedef struct NeEmbeddings NeEmbeddings;

// Binary mask handle.
typedef struct NeMask NeMask;

// Evaluation report handle; owns its JSON rendering.
typedef struct NeReport NeReport;

typedef struct NeOverlap {
  size_t intersection;
  size_t union_count;
  size_t size_a;
  size_t size_b;
  double dice;
  double iou;
} NeOverlap;

typedef struct NeSurfaceDistances {
  double hausdorff;
  double modified_hausdorff;
  double average_surface_distance;
} NeSurfaceDistances;

typedef struct NeFrechet {
  double fid;
  double mean_term;
  double trace_term;
  // Non-zero when `epsilon * I` was added to both covariances.
  uint8_t regularization_applied;
} NeFrechet;

// Dataset-level raw metrics, in the order CN, SR, LA, BDP, MC, ADS.
typedef struct NeRawMetrics {
  double cn;
  double sr;
  double la;
  double bdp;
  double mc;
  double ads;
} NeRawMetrics;

// One character for the attention loss: its word indices and a target
// region of `pixels` bytes (non-zero = inside).
typedef struct NeCharacter {
  const size_t *words;
  size_t word_count;
  const uint8_t *target;
} NeCharacter;

// Options for [`ne_evaluate_manifest`]. Start from
// [`ne_options_default`].
typedef struct NeOptions {
  uint8_t skip_empty;
  uint8_t normalize_distances;
  double epsilon;
  // Worker threads for per-pair metrics; 0 uses the global pool.
  size_t threads;
} NeOptions;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the most recent failure on this thread, or null if none.
// The pointer stays valid until the next failing call on the same thread.
const char *ne_last_error_message(void);

// Library version as a static NUL-terminated string.
const char *ne_version(void);

// Creates a mask from `width * height` bytes in row-major order; non-zero
// bytes are foreground.
//
// # Safety
// `data` must point to `width * height` readable bytes; `out` must be a
// valid pointer.
enum NeStatus ne_mask_new(size_t width, size_t height, const uint8_t *data, struct NeMask **out);

// Decodes a PNG; pixels with luminance above 127 are foreground.
//
// # Safety
// `bytes` must point to `len` readable bytes; `out` must be a valid pointer.
enum NeStatus ne_mask_from_png(const uint8_t *bytes, size_t len, struct NeMask **out);

// # Safety
// `mask` must be null or a handle from this library not yet freed.
void ne_mask_free(struct NeMask *mask);

// Width, height and foreground pixel count of a mask.
//
// # Safety
// `mask` must be a live handle; out pointers may be null to skip a value.
enum NeStatus ne_mask_info(const struct NeMask *mask,
                           size_t *width,
                           size_t *height,
                           size_t *foreground);

// Dice and IoU of two masks of the same shape. Two empty masks score 1.
//
// # Safety
// `a` and `b` must be live handles; `out` must be a valid pointer.
enum NeStatus ne_overlap(const struct NeMask *a, const struct NeMask *b, struct NeOverlap *out);

// Hausdorff, Modified Hausdorff and Average Surface Distance between the
// contours of two masks. Fails with `EmptyInput` if either contour is empty.
//
// # Safety
// `a` and `b` must be live handles; `out` must be a valid pointer.
enum NeStatus ne_surface_distances(const struct NeMask *a,
                                   const struct NeMask *b,
                                   struct NeSurfaceDistances *out);

// Creates an embedding set from `n * d` doubles in row-major order.
//
// # Safety
// `data` must point to `n * d` readable doubles; `out` must be a valid
// pointer.
enum NeStatus ne_embeddings_new(size_t n, size_t d, const double *data, struct NeEmbeddings **out);

// Reads an embedding file (CSV or the `EMB1` binary format).
//
// # Safety
// `path` must be a NUL-terminated UTF-8 string; `out` must be a valid
// pointer.
enum NeStatus ne_embeddings_load(const char *path, struct NeEmbeddings **out);

// Number of samples and dimension of an embedding set.
//
// # Safety
// `set` must be a live handle; out pointers may be null to skip a value.
enum NeStatus ne_embeddings_shape(const struct NeEmbeddings *set, size_t *n, size_t *d);

// # Safety
// `set` must be null or a handle from this library not yet freed.
void ne_embeddings_free(struct NeEmbeddings *set);

// Fréchet distance between Gaussians fitted to the two sets. `epsilon` is
// the diagonal load applied when a covariance is near-singular.
//
// # Safety
// `generated` and `reference` must be live handles; `out` must be a valid
// pointer.
enum NeStatus ne_frechet_distance(const struct NeEmbeddings *generated,
                                  const struct NeEmbeddings *reference,
                                  double epsilon,
                                  struct NeFrechet *out);

// `exp(-x / 200)` for `x >= 0`.
//
// # Safety
// `out` must be a valid pointer.
enum NeStatus ne_f1(double x, double *out);

// Overall score from the six dataset metrics.
//
// # Safety
// `raw` and `out` must be valid pointers.
enum NeStatus ne_aggregate_overall(const struct NeRawMetrics *raw, double *out);

// Mask cross-attention loss over a `pixels x words` map stored row-major
// (pixel-major).
//
// # Safety
// `values` must point to `pixels * words` doubles; `characters` to
// `character_count` entries whose `words` and `target` arrays have
// `word_count` and `pixels` elements; `out` must be a valid pointer.
enum NeStatus ne_mask_attention_loss(const double *values,
                                     size_t pixels,
                                     size_t words,
                                     const struct NeCharacter *characters,
                                     size_t character_count,
                                     double lambda,
                                     double *out);

// Default evaluation options.
struct NeOptions ne_options_default(void);

// Evaluates the manifest at `path`. `options` may be null for defaults.
//
// # Safety
// `path` must be a NUL-terminated UTF-8 string; `options` null or valid;
// `out` must be a valid pointer.
enum NeStatus ne_evaluate_manifest(const char *path,
                                   const struct NeOptions *options,
                                   struct NeReport **out);

// Builds a report directly from dataset metrics.
//
// # Safety
// `model_name` must be a NUL-terminated UTF-8 string; `raw` and `out` must
// be valid pointers.
enum NeStatus ne_report_from_raw(const char *model_name,
                                 const struct NeRawMetrics *raw,
                                 struct NeReport **out);

// The report as pretty JSON. The string is owned by the report and lives
// until [`ne_report_free`]. Returns null for a null handle.
//
// # Safety
// `report` must be null or a live handle.
const char *ne_report_json(const struct NeReport *report);

// Overall score of a report; `NotAvailable` when CN was not computed.
//
// # Safety
// `report` must be a live handle; `out` must be a valid pointer.
enum NeStatus ne_report_overall(const struct NeReport *report, double *out);

// # Safety
// `report` must be null or a handle from this library not yet freed.
void ne_report_free(struct NeReport *report);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* NARRATIVE_EVAL_H */
