#ifndef SPTRACK_H
#define SPTRACK_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Opaque RGB frame.
 */
typedef struct SptImage SptImage;

/**
 * Opaque tracker bound to one sequence.
 */
typedef struct SptTracker SptTracker;

/**
 * Status code returned by fallible calls.
 */
typedef int32_t SptStatus;

/**
 * Tracker parameters. Obtain defaults from [`spt_config_default`] and
 * change fields as needed.
 */
typedef struct {
  uint32_t template_width;
  uint32_t template_height;
  uint32_t superpixels;
  double compactness;
  uint32_t bins;
  uint32_t dictionary_size;
  double lambda;
  uint32_t particles;
  uint32_t negatives;
  uint32_t update_rate;
  double gamma;
  double threshold;
  /**
   * Random-walk standard deviations for x, y, rotation, scale, aspect, skew.
   */
  double sigmas[6];
  uint32_t rank_1;
  uint32_t rank_2;
  uint32_t rank_3;
  double forgetting;
  double annulus_inner;
  double annulus_outer;
  uint64_t rng_seed;
} SptConfig;

/**
 * Axis-aligned box covering pixels `x .. x + w - 1`, `y .. y + h - 1`.
 */
typedef struct {
  double x;
  double y;
  double w;
  double h;
} SptBox;

/**
 * Per-frame report filled by [`spt_tracker_step`].
 */
typedef struct {
  uint64_t frame_index;
  /**
   * Affine state x, y, rotation, scale, aspect, skew.
   */
  double state[6];
  double best_loglik;
  double re_pos;
  /**
   * NaN while no negative model exists.
   */
  double re_neg;
  bool bootstrap;
  bool accepted;
  bool negative_rebuilt;
  bool positive_updated;
  uint32_t pending_len;
  uint32_t failed_candidates;
} SptDiagnostics;

#define SPT_OK 0

/**
 * A required pointer argument was null.
 */
#define SPT_ERR_NULL_POINTER -1

/**
 * An argument was out of range or inconsistent (sizes, boxes, UTF-8).
 */
#define SPT_ERR_INVALID_ARGUMENT -2

/**
 * A file could not be read or decoded.
 */
#define SPT_ERR_IO -3

#define SPT_ERR_CONFIG -4

/**
 * The tracker could not be initialized on the first frame.
 */
#define SPT_ERR_INIT -5

/**
 * No candidate could be scored on a frame; the tracker is unchanged.
 */
#define SPT_ERR_TRACKING -6

#define SPT_ERR_PANIC -99

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null if none. The
 * string stays valid until the next failing call on the same thread.
 */
const char *spt_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *spt_version(void);

SptStatus spt_config_default(SptConfig *out);

/**
 * Reads a flat `key = value` config file; unspecified keys keep defaults.
 */
SptStatus spt_config_load(const char *path, SptConfig *out);

SptStatus spt_config_validate(const SptConfig *config);

/**
 * Copies an interleaved 8-bit RGB buffer of `width * height * 3` bytes.
 */
SptStatus spt_image_from_rgb8(uint32_t width,
                              uint32_t height,
                              const uint8_t *data,
                              size_t len,
                              SptImage **out);

/**
 * Loads a PNG or JPEG file.
 */
SptStatus spt_image_load(const char *path, SptImage **out);

/**
 * Width in pixels, or 0 for a null handle.
 */
uint32_t spt_image_width(const SptImage *image);

/**
 * Height in pixels, or 0 for a null handle.
 */
uint32_t spt_image_height(const SptImage *image);

/**
 * Frees an image; null is ignored.
 */
void spt_image_free(SptImage *image);

/**
 * Initializes a tracker on the first frame. `config` may be null for the
 * defaults.
 */
SptStatus spt_tracker_new(const SptConfig *config,
                          const SptImage *first_frame,
                          const SptBox *init_box,
                          SptTracker **out);

/**
 * Tracks the target into `frame`. On success the tracker advances and the
 * estimated box is written to `out_box`; `out_diag` may be null. On
 * failure the tracker is left unchanged.
 */
SptStatus spt_tracker_step(SptTracker *tracker,
                           const SptImage *frame,
                           SptBox *out_box,
                           SptDiagnostics *out_diag);

/**
 * Number of frames processed so far, counting the initialization frame as 0.
 */
uint64_t spt_tracker_frame_index(const SptTracker *tracker);

/**
 * Frees a tracker; null is ignored.
 */
void spt_tracker_free(SptTracker *tracker);

/**
 * Intersection over union of two boxes; 0 if either pointer is null.
 */
double spt_iou(const SptBox *a, const SptBox *b);

/**
 * Distance between box centers; NaN if either pointer is null.
 */
double spt_center_error(const SptBox *a, const SptBox *b);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SPTRACK_H */
