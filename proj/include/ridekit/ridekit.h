#ifndef RIDEKIT_RIDEKIT_H
#define RIDEKIT_RIDEKIT_H

/* C interface to the ridekit core. Every call returns an rk_status; on
 * failure rk_last_error() describes the problem for the calling thread.
 * Strings returned through char** are owned by the caller and released
 * with rk_string_free. Handles are released with their *_free function;
 * passing NULL to a free function is a no-op. */

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#if defined(RIDEKIT_BUILDING)
#define RK_API __declspec(dllexport)
#else
#define RK_API __declspec(dllimport)
#endif
#else
#define RK_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum rk_status {
  RK_OK = 0,
  RK_ERR_ARGUMENT = 1,     /* NULL pointer or unknown enum string */
  RK_ERR_CONFIG = 2,       /* malformed JSON or unknown config key */
  RK_ERR_CONTRACT = 3,     /* input violates a documented precondition */
  RK_ERR_PARAMETER = 4,    /* parameter outside its legal range */
  RK_ERR_SHAPE = 5,
  RK_ERR_IO = 6,
  RK_ERR_EMPTY_REGION = 7,
  RK_ERR_SPEC = 8,         /* synthetic spec not realizable without clamping */
  RK_ERR_FLAT_INPUT = 9,   /* threshold requested on a constant map */
  RK_ERR_SOLVER = 10,      /* non-finite objective during decomposition */
  RK_ERR_INTERNAL = 11
} rk_status;

typedef struct rk_image rk_image;
typedef struct rk_mask rk_mask;
typedef struct rk_gap rk_gap;

RK_API const char* rk_version(void);
RK_API const char* rk_status_name(rk_status status);
/* Message of the last failed call on this thread; "" when none. */
RK_API const char* rk_last_error(void);
RK_API void rk_string_free(char* s);

/* Fully resolved default configuration of a command as JSON. Sections:
 * "decompose", "synth", "gap", "segment", "sweep", "theorem". */
RK_API rk_status rk_default_config(const char* section, char** out_json);

/* ---- rasters ---- */

/* domain: "composite", "illumination", "reflectance", "log" or "feature".
 * `data` holds height*width*channels values, row-major, interleaved. */
RK_API rk_status rk_image_new(int height, int width, int channels, const char* domain, const double* data,
                              rk_image** out);
RK_API rk_status rk_image_load(const char* path, rk_image** out);
/* Format follows the extension: .raw (lossless), .png, .pgm. */
RK_API rk_status rk_image_save(const rk_image* img, const char* path);
/* Min-max normalized 8-bit preview. */
RK_API rk_status rk_image_save_preview(const rk_image* img, const char* path);
RK_API rk_status rk_image_shape(const rk_image* img, int* height, int* width, int* channels);
RK_API const char* rk_image_domain(const rk_image* img);
/* Borrowed pointer, valid until the image is freed. */
RK_API rk_status rk_image_data(const rk_image* img, const double** data, size_t* count);
RK_API void rk_image_free(rk_image* img);

RK_API rk_status rk_mask_new(int height, int width, const uint8_t* values, rk_mask** out);
RK_API rk_status rk_mask_load(const char* path, rk_mask** out);
RK_API rk_status rk_mask_save(const rk_mask* mask, const char* path);
RK_API rk_status rk_mask_shape(const rk_mask* mask, int* height, int* width);
RK_API rk_status rk_mask_data(const rk_mask* mask, const uint8_t** values, size_t* count);
RK_API void rk_mask_free(rk_mask* mask);

/* ---- synthetic scenes ---- */

/* spec_json may be NULL or "{}" for defaults; an optional "rho" key rotates
 * delta_R to that cosine. Report: resolved spec and achieved statistics. */
RK_API rk_status rk_synth(const char* spec_json, rk_image** composite, rk_image** illumination,
                          rk_image** reflectance, rk_mask** mask, char** report_json);

/* ---- decomposition ---- */

/* config keys: "weights", "solver". Report: final and initial loss
 * breakdowns, reconstruction error, iterations, stop reason, trace. */
RK_API rk_status rk_decompose(const rk_image* composite, const char* config_json, rk_image** illumination,
                              rk_image** reflectance, char** report_json);

/* ---- theorem ---- */

/* JSON array of `count` population-mode reports. */
RK_API rk_status rk_theorem_sweep(size_t count, uint64_t seed, double eps_R, int jobs, char** out_json);
/* Report for log-domain components over a mask partition. Grids in the
 * composite, illumination or reflectance domain are rejected. */
RK_API rk_status rk_verify_theorem(const rk_image* log_illumination, const rk_image* log_reflectance,
                                   const rk_mask* mask, double eps_R, char** out_json);

/* ---- gap maps ---- */

/* Decomposes `composite` unless both components are given. config keys:
 * "weights", "solver", "window", "alpha", "eps_log". */
RK_API rk_status rk_gap_compute(const rk_image* composite, const rk_image* illumination,
                                const rk_image* reflectance, const char* config_json, rk_gap** out);
/* name: "d_I", "d_L", "d_R", "delta_L", "delta_R", "alpha_L", "alpha_R",
 * "illumination", "reflectance". Returns a copy. */
RK_API rk_status rk_gap_map(const rk_gap* gap, const char* name, rk_image** out);
RK_API rk_status rk_gap_report(const rk_gap* gap, char** out_json);
RK_API void rk_gap_free(rk_gap* gap);

/* ---- segmentation ---- */

/* mode: "composite-threshold" or "gap-threshold". gt may be NULL. */
RK_API rk_status rk_segment(const rk_image* composite, const char* mode, const char* config_json, const rk_mask* gt,
                            rk_mask** predicted, char** result_json);
/* config keys: "base" (synth spec), "targets", "per_target", plus the
 * segmentation keys. */
RK_API rk_status rk_sweep(const char* config_json, int jobs, char** result_json);

/* ---- losses ---- */

/* Retinex loss breakdown of a decomposition; weights_json may be NULL. */
RK_API rk_status rk_loss_retinex(const rk_image* composite, const rk_image* illumination, const rk_image* reflectance,
                                 const char* weights_json, char** out_json);
RK_API rk_status rk_loss_bce(const rk_image* pred, const rk_image* target, double* out);
RK_API rk_status rk_loss_iou(const rk_image* pred, const rk_image* target, double* out);
/* Four single-channel predictions at halving resolutions; gt at level 1.
 * Result: per-level bce and iou plus the weighted total. */
RK_API rk_status rk_loss_deep_seg(const rk_image* const preds[4], const rk_mask* gt, char** out_json);
RK_API rk_status rk_loss_boundary(const rk_image* boundary, const rk_image* refl_boundary, const rk_image* gt,
                                  double* out);
/* Writes `channels` values into `out`; *empty_mask is set to 1 when the
 * mask sums to zero. */
RK_API rk_status rk_masked_pool(const rk_image* features, const rk_image* mask, double* out, size_t capacity,
                                int* empty_mask);
/* negatives: J vectors of length dim, stored contiguously. */
RK_API rk_status rk_infonce(const double* pos_a, const double* pos_b, const double* negatives, size_t count,
                            size_t dim, double tau, double* out);
RK_API rk_status rk_infonce_similarities(double sim_pos, const double* sim_neg, size_t count, double tau,
                                         double* out);
RK_API rk_status rk_total_loss(double seg, double ret, double bnd, double con, double* out);

#ifdef __cplusplus
}
#endif

#endif
