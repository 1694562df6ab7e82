/* C interface to the odmd library: object depth from camera motion and
 * bounding boxes.
 *
 * Objects are opaque handles created by odmd_*_create/load/generate and
 * released with the matching odmd_*_free (which accept NULL). Every call
 * that can fail returns an odmd_status; on failure odmd_last_error() gives a
 * message for the calling thread that stays valid until its next call. */
#ifndef ODMD_ODMD_H
#define ODMD_ODMD_H

#include <stddef.h>
#include <stdint.h>

#if defined(ODMD_BUILDING_LIBRARY)
#define ODMD_API __attribute__((visibility("default")))
#else
#define ODMD_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum odmd_status {
  ODMD_OK = 0,
  ODMD_ERR_DOMAIN = 1,     /* argument outside the mathematical domain */
  ODMD_ERR_DEGENERATE = 2, /* observations do not constrain depth */
  ODMD_ERR_CONFIG = 3,
  ODMD_ERR_PARSE = 4,
  ODMD_ERR_VERSION = 5,    /* unsupported or corrupted versioned file */
  ODMD_ERR_INPUT = 6,
  ODMD_ERR_CONTRACT = 7,   /* API misuse: NULL pointers, sizes, shapes */
  ODMD_ERR_NUMERIC = 8,    /* non-finite values during training */
  ODMD_ERR_IO = 9,
  ODMD_ERR_COMPAT = 10,    /* model and data cannot be used together */
  ODMD_ERR_INTERNAL = 11
} odmd_status;

ODMD_API const char* odmd_last_error(void);
ODMD_API const char* odmd_status_name(odmd_status status);
ODMD_API const char* odmd_version(void);

typedef struct odmd_intrinsics {
  double fx, fy, cx, cy, width, height;
} odmd_intrinsics;

/* One observation: box center and size in pixels, camera position in
 * meters. */
typedef struct odmd_observation {
  double x, y, w, h;
  double cam_x, cam_y, cam_z;
} odmd_observation;

/* ---- Analytic solvers ------------------------------------------------- */

typedef enum odmd_scale_source { ODMD_SCALE_WIDTH = 0, ODMD_SCALE_HEIGHT = 1 } odmd_scale_source;
typedef enum odmd_axis { ODMD_AXIS_X = 0, ODMD_AXIS_Y = 1 } odmd_axis;
typedef enum odmd_cue { ODMD_CUE_EXPANSION = 0, ODMD_CUE_PARALLAX = 1 } odmd_cue;

/* Least-squares depth at obs[query] (query = n - 1 for the final one).
 * condition receives the condition number; may be NULL. */
ODMD_API odmd_status odmd_solve_box_ls(const odmd_observation* obs, size_t n,
                                       size_t query, double* depth,
                                       double* condition);

/* Depth at obs_i from the box scale change between obs_i and obs_j. */
ODMD_API odmd_status odmd_solve_expansion(const odmd_observation* obs_i,
                                          const odmd_observation* obs_j,
                                          odmd_scale_source source,
                                          double* depth);

ODMD_API odmd_status odmd_solve_parallax(const odmd_observation* obs_i,
                                         const odmd_observation* obs_j,
                                         const odmd_intrinsics* k,
                                         odmd_axis axis,
                                         odmd_scale_source source,
                                         double* depth);

/* Final-against-first estimate averaging both variants of a cue. k is only
 * required for ODMD_CUE_PARALLAX. */
ODMD_API odmd_status odmd_solve_endpoint(const odmd_observation* obs, size_t n,
                                         odmd_cue cue, const odmd_intrinsics* k,
                                         double* depth);

/* ---- Masks ---------------------------------------------------------------- */

/* Box (x, y, w, h) around the 8-connected component with the smallest
 * centroid offset per pixel. pixels is row-major, nonzero = foreground.
 * anchor is (x, y) or NULL for the image center. */
ODMD_API odmd_status odmd_mask_to_box(const uint8_t* pixels, size_t width,
                                      size_t height, const double* anchor,
                                      double box_out[4]);

/* Same for a netpbm (PBM/PGM) file. */
ODMD_API odmd_status odmd_mask_file_to_box(const char* path,
                                           double box_out[4]);

/* ---- Datasets --------------------------------------------------------- */

typedef struct odmd_gen_config odmd_gen_config;
typedef struct odmd_dataset odmd_dataset;

/* Names: normal, perturb-camera, perturb-detect, perturb-all and the same
 * with a "-z" suffix. */
ODMD_API odmd_status odmd_gen_config_preset(const char* name,
                                            odmd_gen_config** out);
/* JSON config file; an optional "base" field names a preset to start
 * from. */
ODMD_API odmd_status odmd_gen_config_load(const char* path,
                                          odmd_gen_config** out);
ODMD_API size_t odmd_gen_config_n(const odmd_gen_config* cfg);
ODMD_API void odmd_gen_config_free(odmd_gen_config* cfg);

/* Example i uses random stream (seed, i); threads <= 0 uses every core.
 * The result never depends on threads. */
ODMD_API odmd_status odmd_dataset_generate(const odmd_gen_config* cfg,
                                           size_t count, uint64_t seed,
                                           int threads, odmd_dataset** out);

/* A named benchmark set at its fixed seed. split is "validation" or
 * "test". */
ODMD_API odmd_status odmd_dataset_benchmark(const char* name, const char* split,
                                            int threads, odmd_dataset** out);

/* ".odmd.bin" paths use the binary format, anything else JSON lines. */
ODMD_API odmd_status odmd_dataset_load(const char* path, odmd_dataset** out);
ODMD_API odmd_status odmd_dataset_save(const odmd_dataset* ds,
                                       const char* path);
ODMD_API size_t odmd_dataset_size(const odmd_dataset* ds);

/* Copies example i. n_out receives the observation count; obs may be NULL
 * to query it, otherwise it must hold capacity >= n entries. */
ODMD_API odmd_status odmd_dataset_example(const odmd_dataset* ds, size_t i,
                                          odmd_intrinsics* k,
                                          odmd_observation* obs,
                                          size_t capacity, size_t* n_out,
                                          double* label_depth);
ODMD_API void odmd_dataset_free(odmd_dataset* ds);

/* ---- Models ----------------------------------------------------------- */

typedef struct odmd_model odmd_model;

typedef enum odmd_loss_mode { ODMD_LOSS_REL = 0, ODMD_LOSS_ABS = 1 } odmd_loss_mode;

ODMD_API odmd_status odmd_model_load(const char* path, odmd_model** out);
ODMD_API odmd_status odmd_model_save(const odmd_model* model, const char* path);
ODMD_API odmd_status odmd_model_info(const odmd_model* model, size_t* n,
                                     odmd_loss_mode* mode);
ODMD_API odmd_status odmd_model_predict(const odmd_model* model,
                                        const odmd_observation* obs, size_t n,
                                        const odmd_intrinsics* k,
                                        double* depth);
ODMD_API void odmd_model_free(odmd_model* model);

/* ---- Training --------------------------------------------------------- */

typedef struct odmd_train_config odmd_train_config;

typedef struct odmd_train_record {
  size_t iteration;
  double loss;
  double val_error;
} odmd_train_record;

typedef void (*odmd_train_callback)(const odmd_train_record* record,
                                    void* user);

/* dbox-p, dbox-ns, dbox-abs, dbox-p-1m, dbox-p-100k, dbox-p-z, dbox-ns-z,
 * dbox-abs-z and each with a "-desk" suffix. */
ODMD_API odmd_status odmd_train_config_preset(const char* name,
                                              odmd_train_config** out);
ODMD_API odmd_status odmd_train_config_load(const char* path,
                                            odmd_train_config** out);
ODMD_API odmd_status odmd_train_config_set_seed(odmd_train_config* cfg,
                                                uint64_t seed);
ODMD_API odmd_status odmd_train_config_set_iterations(odmd_train_config* cfg,
                                                      size_t iterations);
ODMD_API size_t odmd_train_config_iterations(const odmd_train_config* cfg);
ODMD_API size_t odmd_train_config_batch_size(const odmd_train_config* cfg);
ODMD_API const char* odmd_train_config_name(const odmd_train_config* cfg);
ODMD_API void odmd_train_config_free(odmd_train_config* cfg);

/* Trains and returns the checkpoint with the best validation error. When
 * log_path is non-NULL every validation check is appended to it as a JSON
 * line {"iteration", "loss", "val_error"}. callback, best_val_error and
 * best_iteration may be NULL. */
ODMD_API odmd_status odmd_train(const odmd_train_config* cfg, int threads,
                                const char* log_path,
                                odmd_train_callback callback, void* user,
                                odmd_model** best, double* best_val_error,
                                size_t* best_iteration);

/* ---- Evaluation ------------------------------------------------------- */

typedef struct odmd_report odmd_report;

typedef struct odmd_error_stats {
  size_t count;
  double mean, median, min, max, std;
} odmd_error_stats;

typedef struct odmd_set_summary {
  const char* name; /* owned by the report */
  size_t examples;
  size_t failures;
  odmd_error_stats percent;
  odmd_error_stats absolute;
} odmd_set_summary;

/* method: "box-ls", "expansion-2obs" or "parallax-2obs". names label the
 * sets in the report. */
ODMD_API odmd_status odmd_evaluate_solver(const char* method,
                                          const odmd_dataset* const* sets,
                                          const char* const* names,
                                          size_t count, int threads,
                                          odmd_report** out);

/* Fails with ODMD_ERR_COMPAT when a set's observation count differs from
 * the model's. */
ODMD_API odmd_status odmd_evaluate_model(const odmd_model* model,
                                         const odmd_dataset* const* sets,
                                         const char* const* names,
                                         size_t count, int threads,
                                         odmd_report** out);

ODMD_API size_t odmd_report_set_count(const odmd_report* report);
ODMD_API odmd_status odmd_report_set(const odmd_report* report, size_t i,
                                     odmd_set_summary* out);
/* Unweighted mean of the per-set mean percent errors. */
ODMD_API double odmd_report_all_sets_mean(const odmd_report* report);
ODMD_API odmd_status odmd_report_write_json(const odmd_report* report,
                                            const char* path);
ODMD_API odmd_status odmd_report_write_csv(const odmd_report* report,
                                           const char* path);
ODMD_API void odmd_report_free(odmd_report* report);

/* Median over `trials` order-preserving subsequences of one example (the
 * first trial is the full sequence). method as in odmd_evaluate_solver. */
ODMD_API odmd_status odmd_ensemble_solver(const char* method,
                                          const odmd_observation* obs, size_t n,
                                          const odmd_intrinsics* k,
                                          size_t trials, uint64_t seed,
                                          double* depth);

#ifdef __cplusplus
}
#endif

#endif /* ODMD_ODMD_H */
