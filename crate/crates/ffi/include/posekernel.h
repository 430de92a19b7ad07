#ifndef POSEKERNEL_H
#define POSEKERNEL_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/*
 Result code of every fallible call.
 */
typedef enum PkStatus {
  PK_STATUS_OK = 0,
  PK_STATUS_NULL_POINTER = 1,
  PK_STATUS_INVALID_ARGUMENT = 2,
  PK_STATUS_MISMATCH = 3,
  PK_STATUS_IO = 4,
  PK_STATUS_CORRUPT = 5,
  PK_STATUS_NUMERICAL = 6,
  PK_STATUS_CONFIG = 7,
  PK_STATUS_PANIC = 8,
} PkStatus;

/*
 Element-wise fusion rule for [`pk_fuse`].
 */
typedef enum PkFusion {
  PK_FUSION_MAX = 0,
  PK_FUSION_PRODUCT = 1,
} PkFusion;

/*
 Multi-channel voxel field.
 */
typedef struct PkField PkField;

/*
 Acoustic scene plus its point reflectors.
 */
typedef struct PkScene PkScene;

/*
 Sampled real signal with its sample rate (recordings, sources, kernels).
 */
typedef struct PkSignal PkSignal;

/*
 Regular voxel lattice: `dims[0] * dims[1] * dims[2]` cells of `cell_m`
 meters whose first corner sits at `origin`.
 */
typedef struct PkGrid {
  double origin[3];
  double cell_m;
  size_t dims[3];
} PkGrid;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Message of the last failed call on this thread, or NULL. The pointer
 stays valid until the next failing call on the same thread.
 */
const char *pk_last_error(void);

/*
 Library version as a static NUL-terminated string.
 */
const char *pk_version(void);

/*
 Copies `len` samples into a new signal.

 # Safety
 `samples` must point to `len` readable doubles; `out` must be writable.
 */
enum PkStatus pk_signal_new(const double *samples,
                            size_t len,
                            double sample_rate_hz,
                            struct PkSignal **out);

/*
 # Safety
 `signal` must be NULL or a live handle.
 */
size_t pk_signal_len(const struct PkSignal *signal);

/*
 # Safety
 `signal` must be NULL or a live handle.
 */
double pk_signal_sample_rate(const struct PkSignal *signal);

/*
 Copies up to `capacity` samples into `buffer`; `written` receives the count.

 # Safety
 `buffer` must hold `capacity` doubles; `written` may be NULL.
 */
enum PkStatus pk_signal_copy(const struct PkSignal *signal,
                             double *buffer,
                             size_t capacity,
                             size_t *written);

/*
 # Safety
 `signal` must be NULL or a handle not yet freed.
 */
void pk_signal_free(struct PkSignal *signal);

/*
 Linear chirp from `f_start_hz` to `f_end_hz`.

 # Safety
 `out` must be writable.
 */
enum PkStatus pk_chirp(double f_start_hz,
                       double f_end_hz,
                       double duration_s,
                       double amplitude,
                       double sample_rate_hz,
                       struct PkSignal **out);

/*
 Full linear convolution.

 # Safety
 Handles must be live; `out` must be writable.
 */
enum PkStatus pk_convolve(const struct PkSignal *a,
                          const struct PkSignal *b,
                          struct PkSignal **out);

/*
 Band-limited deconvolution of `received` by `source`, keeping `output_taps` taps.

 # Safety
 Handles must be live; `out` must be writable.
 */
enum PkStatus pk_deconvolve(const struct PkSignal *received,
                            const struct PkSignal *source,
                            double band_lo_hz,
                            double band_hi_hz,
                            size_t output_taps,
                            struct PkSignal **out);

/*
 Pose kernel: deconvolved occupied recording minus deconvolved empty-room recording.

 # Safety
 Handles must be live; `out` must be writable.
 */
enum PkStatus pk_recover_pose_kernel(const struct PkSignal *full,
                                     const struct PkSignal *empty,
                                     const struct PkSignal *source,
                                     double band_lo_hz,
                                     double band_hi_hz,
                                     size_t output_taps,
                                     struct PkSignal **out);

/*
 Magnitude of the analytic signal.

 # Safety
 `kernel` must be live; `out` must be writable.
 */
enum PkStatus pk_envelope(const struct PkSignal *kernel, struct PkSignal **out);

/*
 # Safety
 `path` must be a NUL-terminated string; `out` must be writable.
 */
enum PkStatus pk_wav_read(const char *path, struct PkSignal **out);

/*
 Writes a mono 32-bit float WAV.

 # Safety
 `path` must be a NUL-terminated string; `signal` must be live.
 */
enum PkStatus pk_wav_write(const char *path, const struct PkSignal *signal);

/*
 Parses a scene JSON document (room, speakers, microphones, reflectors).

 # Safety
 `json` must be a NUL-terminated string; `out` must be writable.
 */
enum PkStatus pk_scene_from_json(const char *json, struct PkScene **out);

/*
 # Safety
 `scene` must be NULL or a handle not yet freed.
 */
void pk_scene_free(struct PkScene *scene);

/*
 Recording at `microphone` of `source` played by `speaker`, with the
 scene's reflectors when `with_body` is true and the empty room otherwise.

 # Safety
 Handles must be live; `out` must be writable.
 */
enum PkStatus pk_scene_simulate(const struct PkScene *scene,
                                size_t speaker,
                                size_t microphone,
                                const struct PkSignal *source,
                                bool with_body,
                                struct PkSignal **out);

/*
 Speaker → `x` → microphone time of flight in seconds; NaN on NULL input.

 # Safety
 Each pointer must be NULL or point to three doubles.
 */
double pk_arrival_time(const double *x,
                       const double *speaker,
                       const double *microphone,
                       double speed_mps);

/*
 Spreads `kernel` (or its envelope) over `grid` along the pair's
 time-of-flight ellipsoids.

 # Safety
 `kernel` and `grid` must be live; `speaker`/`microphone` point to three doubles.
 */
enum PkStatus pk_encode_kernel(const struct PkSignal *kernel,
                               const double *speaker,
                               const double *microphone,
                               double speed_mps,
                               const struct PkGrid *grid,
                               bool use_envelope,
                               struct PkField **out);

/*
 Field from `channels * cells` values, channel-major then x fastest.

 # Safety
 `values` must point to `len` doubles; `grid` must be live.
 */
enum PkStatus pk_field_new(const struct PkGrid *grid,
                           size_t channels,
                           const double *values,
                           size_t len,
                           struct PkField **out);

/*
 # Safety
 `field` must be NULL or a live handle.
 */
size_t pk_field_channels(const struct PkField *field);

/*
 Total number of values (channels × cells).

 # Safety
 `field` must be NULL or a live handle.
 */
size_t pk_field_len(const struct PkField *field);

/*
 # Safety
 `field` must be live; `grid` must be writable.
 */
enum PkStatus pk_field_grid(const struct PkField *field, struct PkGrid *grid);

/*
 Copies up to `capacity` values into `buffer`; `written` receives the count.

 # Safety
 `buffer` must hold `capacity` doubles; `written` may be NULL.
 */
enum PkStatus pk_field_copy(const struct PkField *field,
                            double *buffer,
                            size_t capacity,
                            size_t *written);

/*
 # Safety
 `field` must be NULL or a handle not yet freed.
 */
void pk_field_free(struct PkField *field);

/*
 Element-wise fusion of `count` single-channel fields on one grid.

 # Safety
 `fields` must point to `count` live handles; `out` must be writable.
 */
enum PkStatus pk_fuse(const struct PkField *const *fields,
                      size_t count,
                      enum PkFusion mode,
                      struct PkField **out);

/*
 Grid index and voxel center of the maximum of `channel`; ties resolve
 to the lowest linear index.

 # Safety
 `field` must be live; `index` and `position` must be NULL or point to three writable elements.
 */
enum PkStatus pk_argmax(const struct PkField *field,
                        size_t channel,
                        size_t *index,
                        double *position);

/*
 # Safety
 `path` must be a NUL-terminated string; `out` must be writable.
 */
enum PkStatus pk_pkvx_read(const char *path, struct PkField **out);

/*
 # Safety
 `path` must be a NUL-terminated string; `field` must be live.
 */
enum PkStatus pk_pkvx_write(const char *path, const struct PkField *field);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* POSEKERNEL_H */
