/*
 * Copyright 2026 The DAV Authors
 * SPDX-License-Identifier: Apache-2.0
 */

#ifndef DAV_FFI_H
#define DAV_FFI_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of every fallible call.
 */
typedef enum DavStatus {
  DAV_STATUS_OK = 0,
  DAV_STATUS_NULL_POINTER = 1,
  /**
   * Missing or unreadable file.
   */
  DAV_STATUS_READ = 2,
  DAV_STATUS_DEGENERATE = 3,
  DAV_STATUS_CONFIG = 4,
  DAV_STATUS_DIVERGENCE = 5,
  /**
   * Malformed file content.
   */
  DAV_STATUS_FORMAT = 6,
  DAV_STATUS_WRITE = 7,
  DAV_STATUS_BOUNDS = 8,
  DAV_STATUS_GENERATION = 9,
  /**
   * A string argument was not valid UTF-8.
   */
  DAV_STATUS_INVALID_STRING = 10,
  DAV_STATUS_PANIC = 11,
} DavStatus;

/**
 * DAV score variant.
 */
typedef enum DavVariant {
  DAV_VARIANT_LITERAL = 0,
  DAV_VARIANT_RESCALED = 1,
} DavVariant;

/**
 * Depth map handle.
 */
typedef struct DavDepthMap DavDepthMap;

/**
 * Depth-attention volume handle.
 */
typedef struct DavVolume DavVolume;

/**
 * Settings for [`dav_volume_from_depth`]; see [`dav_dav_options_default`].
 */
typedef struct DavOptions {
  size_t factor;
  enum DavVariant variant;
  size_t max_planes;
  double inlier_threshold;
  double min_coverage;
  size_t max_iterations;
  uint64_t seed;
} DavOptions;

/**
 * Core accuracy metrics plus directed errors.
 */
typedef struct DavMetrics {
  double rel;
  double rmse;
  double log10;
  double sqrel;
  double si;
  double imae;
  double irmse;
  double delta1;
  double delta2;
  double delta3;
  double eps_0;
  double eps_minus;
  double eps_plus;
  size_t pixels;
} DavMetrics;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the calling thread's last error message, NUL-terminated and
 * truncated to `capacity`, into `buffer`. Returns the full message length
 * without the terminator, so a call with a null buffer sizes it.
 *
 * # Safety
 * `buffer` must be null or valid for `capacity` bytes.
 */
size_t dav_last_error_message(char *buffer, size_t capacity);

/**
 * Library version as a static NUL-terminated string.
 */
const char *dav_version(void);

/**
 * Builds a depth map from `height · width` row-major values; finite
 * positive values are valid pixels.
 *
 * # Safety
 * `values` must point to `height · width` doubles; `out` must be writable.
 */
enum DavStatus dav_depth_map_new(size_t height,
                                 size_t width,
                                 const double *values,
                                 struct DavDepthMap **out);

/**
 * Reads a PFM depth map.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum DavStatus dav_depth_map_read_pfm(const char *path, struct DavDepthMap **out);

/**
 * Writes a little-endian PFM; invalid pixels are stored as 0.
 *
 * # Safety
 * `map` must be a live handle and `path` a NUL-terminated string.
 */
enum DavStatus dav_depth_map_write_pfm(const struct DavDepthMap *map, const char *path);

/**
 * Writes height and width.
 *
 * # Safety
 * `map` must be a live handle; the outputs must be writable.
 */
enum DavStatus dav_depth_map_size(const struct DavDepthMap *map, size_t *height, size_t *width);

/**
 * Copies the depth values (0 for invalid pixels) into `out`, which must
 * hold `height · width` doubles.
 *
 * # Safety
 * `map` must be a live handle; `out` valid for `len` doubles.
 */
enum DavStatus dav_depth_map_values(const struct DavDepthMap *map, double *out, size_t len);

/**
 * Releases a depth map; null is ignored.
 *
 * # Safety
 * `map` must come from this library and not be used afterwards.
 */
void dav_depth_map_free(struct DavDepthMap *map);

/**
 * Renders a noiseless synthetic room of `n_planes` planes seen by a
 * centered camera with focal length `focal` pixels.
 *
 * # Safety
 * `out` must be writable.
 */
enum DavStatus dav_synth_room(uint64_t seed,
                              size_t n_planes,
                              size_t height,
                              size_t width,
                              double focal,
                              struct DavDepthMap **out);

/**
 * Defaults: factor 8, literal scores, 5 planes, 0.01 threshold, 7%
 * coverage, 100 iterations, seed 0.
 */
struct DavOptions dav_dav_options_default(void);

/**
 * Ground-truth DAV of a depth map.
 *
 * # Safety
 * `map` must be a live handle, `options` readable and `out` writable.
 */
enum DavStatus dav_volume_from_depth(const struct DavDepthMap *map,
                                     const struct DavOptions *options,
                                     struct DavVolume **out);

/**
 * Reads a DAV binary.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum DavStatus dav_volume_read(const char *path, struct DavVolume **out);

/**
 * Writes the DAV binary.
 *
 * # Safety
 * `volume` must be a live handle and `path` a NUL-terminated string.
 */
enum DavStatus dav_volume_write(const struct DavVolume *volume, const char *path);

/**
 * Writes the subsampled grid size; the volume holds `(h·w)²` scores.
 *
 * # Safety
 * `volume` must be a live handle; the outputs must be writable.
 */
enum DavStatus dav_volume_grid(const struct DavVolume *volume, size_t *h, size_t *w);

/**
 * Score between flat cells `p` and `q`.
 *
 * # Safety
 * `volume` must be a live handle; `out` must be writable.
 */
enum DavStatus dav_volume_get(const struct DavVolume *volume, size_t p, size_t q, double *out);

/**
 * Releases a volume; null is ignored.
 *
 * # Safety
 * `volume` must come from this library and not be used afterwards.
 */
void dav_volume_free(struct DavVolume *volume);

/**
 * Accuracy and directed metrics over ground truth in `(0, 10]` m, with
 * the reference plane at 3 m.
 *
 * # Safety
 * Both maps must be live handles; `out` must be writable.
 */
enum DavStatus dav_evaluate(const struct DavDepthMap *pred,
                            const struct DavDepthMap *gt,
                            struct DavMetrics *out);

/**
 * Finite-difference check of the attention block on the default toy
 * shape (4×4 positions, 8 input channels). `passed` receives 1 or 0 and
 * `worst` the largest relative error over all tensors.
 *
 * # Safety
 * The outputs must be writable.
 */
enum DavStatus dav_grad_check(uint64_t seed, int32_t *passed, double *worst);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DAV_FFI_H */
