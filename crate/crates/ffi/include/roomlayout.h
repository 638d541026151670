#ifndef ROOMLAYOUT_H
#define ROOMLAYOUT_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call.
 */
typedef enum {
  RL_STATUS_OK = 0,
  RL_STATUS_NULL_POINTER = 1,
  RL_STATUS_INVALID_ARGUMENT = 2,
  RL_STATUS_IO = 3,
  RL_STATUS_PARSE = 4,
  RL_STATUS_INVALID_LAYOUT = 5,
  RL_STATUS_DIMENSION_MISMATCH = 6,
  RL_STATUS_BAD_FORMAT = 7,
  RL_STATUS_NON_FINITE = 8,
  RL_STATUS_BUFFER_TOO_SMALL = 9,
  RL_STATUS_PANIC = 10,
} RlStatus;

typedef enum {
  RL_METHOD_NO = 0,
  RL_METHOD_PIO = 1,
} RlMethod;

/**
 * Topology catalog.
 */
typedef struct RlCatalog RlCatalog;

/**
 * Four-channel feature field.
 */
typedef struct RlField RlField;

/**
 * Layout: topology plus conjunction coordinates.
 */
typedef struct RlLayout RlLayout;

/**
 * Field synthesis settings; see [`rl_synth_params_default`].
 */
typedef struct {
  size_t thickness;
  double blur_sigma;
  double noise_sigma;
  size_t occlusion_count;
  double occlusion_max_frac;
  uint64_t seed;
} RlSynthParams;

/**
 * Optimizer settings; see [`rl_optim_config_default`]. A `gain` of zero
 * means "calibrate from the first sweep".
 */
typedef struct {
  double window;
  double alpha_min;
  double alpha_max;
  double stop_eps;
  size_t max_iters;
  size_t thickness;
  double gain;
} RlOptimConfig;

typedef struct {
  uint32_t topology_id;
  double final_energy;
  size_t iters;
  double elapsed_secs;
  bool no_progress;
} RlInferSummary;

typedef struct {
  double e_corner;
  double e_pixel;
} RlEval;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the last error of this thread, zero-terminated, into `buf`.
 *
 * Returns the message length excluding the terminator; if that is not
 * smaller than `len` the message was truncated. `buf` may be null when
 * `len` is zero.
 *
 * # Safety
 * `buf` must be valid for `len` bytes.
 */
size_t rl_last_error_message(char *buf, size_t len);

RlSynthParams rl_synth_params_default(void);

RlOptimConfig rl_optim_config_default(void);

/**
 * The built-in catalog of 11 topologies. Never fails.
 */
RlCatalog *rl_catalog_default(void);

/**
 * # Safety
 * `path` must be a valid C string and `out` a valid pointer.
 */
RlStatus rl_catalog_load(const char *path, RlCatalog **out);

/**
 * Number of topologies; 0 for a null handle.
 *
 * # Safety
 * `catalog` must be null or a live handle.
 */
size_t rl_catalog_len(const RlCatalog *catalog);

/**
 * # Safety
 * `catalog` must be null or a handle not yet freed.
 */
void rl_catalog_free(RlCatalog *catalog);

/**
 * Creates a field from `4 * w * h` floats, channel-major
 * (bg, wall-floor, wall-wall, wall-ceiling), each plane row-major.
 *
 * # Safety
 * `data` must point to `len` floats; `out` must be valid.
 */
RlStatus rl_field_from_data(size_t w, size_t h, const float *data, size_t len, RlField **out);

/**
 * # Safety
 * `path` must be a valid C string and `out` a valid pointer.
 */
RlStatus rl_field_load(const char *path, RlField **out);

/**
 * # Safety
 * `field` must be a live handle and `path` a valid C string.
 */
RlStatus rl_field_save(const RlField *field, const char *path);

/**
 * # Safety
 * `field` must be null or a live handle.
 */
size_t rl_field_width(const RlField *field);

/**
 * # Safety
 * `field` must be null or a live handle.
 */
size_t rl_field_height(const RlField *field);

/**
 * # Safety
 * `field` must be null or a handle not yet freed.
 */
void rl_field_free(RlField *field);

/**
 * Renders a synthetic field for `layout` on a `w` x `h` grid.
 *
 * # Safety
 * Handles and pointers must be valid.
 */
RlStatus rl_synth(const RlLayout *layout,
                  size_t w,
                  size_t h,
                  const RlSynthParams *params,
                  RlField **out);

/**
 * Builds a layout from `n` interleaved `x, y` pairs.
 *
 * # Safety
 * `xy` must point to `2 * n` doubles; handles and `out` must be valid.
 */
RlStatus rl_layout_new(const RlCatalog *catalog,
                       uint32_t topology_id,
                       const double *xy,
                       size_t n,
                       size_t w,
                       size_t h,
                       RlLayout **out);

/**
 * The average state of a topology on a `w` x `h` grid.
 *
 * # Safety
 * Handles and `out` must be valid.
 */
RlStatus rl_layout_average(const RlCatalog *catalog,
                           uint32_t topology_id,
                           size_t w,
                           size_t h,
                           RlLayout **out);

/**
 * # Safety
 * `path` must be a valid C string; handles and `out` must be valid.
 */
RlStatus rl_layout_load(const RlCatalog *catalog,
                        const char *path,
                        size_t w,
                        size_t h,
                        RlLayout **out);

/**
 * # Safety
 * `layout` must be a live handle and `path` a valid C string.
 */
RlStatus rl_layout_save(const RlLayout *layout, const char *path);

/**
 * # Safety
 * `layout` must be null or a live handle.
 */
uint32_t rl_layout_topology_id(const RlLayout *layout);

/**
 * # Safety
 * `layout` must be null or a live handle.
 */
size_t rl_layout_num_points(const RlLayout *layout);

/**
 * Writes the conjunctions as interleaved `x, y` into `xy`, which holds
 * `cap` doubles.
 *
 * # Safety
 * `xy` must be valid for `cap` doubles.
 */
RlStatus rl_layout_points(const RlLayout *layout, double *xy, size_t cap);

/**
 * # Safety
 * `layout` must be null or a handle not yet freed.
 */
void rl_layout_free(RlLayout *layout);

/**
 * Energy `-CO` of `layout` on `field`.
 *
 * # Safety
 * Handles and `out` must be valid.
 */
RlStatus rl_energy(const RlField *field, const RlLayout *layout, double *out);

/**
 * Fits a layout to `field`. `method` is an [`RlMethod`] value. With
 * `topology_id == 0` every catalog topology is tried and the lowest energy
 * wins. `config` may be null for defaults; `summary` may be null.
 *
 * # Safety
 * Handles and pointers must be valid or null where allowed.
 */
RlStatus rl_infer(const RlField *field,
                  const RlCatalog *catalog,
                  uint32_t method,
                  uint32_t topology_id,
                  const RlOptimConfig *config,
                  RlLayout **out,
                  RlInferSummary *summary);

/**
 * Corner and pixel error of `pred` against `gt` on a `w` x `h` grid.
 *
 * # Safety
 * Handles and `out` must be valid.
 */
RlStatus rl_evaluate(const RlLayout *pred, const RlLayout *gt, size_t w, size_t h, RlEval *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ROOMLAYOUT_H */
