#ifndef DIFFSURV_H
#define DIFFSURV_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum DsStatus {
  DS_STATUS_OK = 0,
  DS_STATUS_NULL_POINTER = 1,
  DS_STATUS_INVALID_ARGUMENT = 2,
  DS_STATUS_SHAPE = 3,
  DS_STATUS_NON_FINITE = 4,
  DS_STATUS_IO = 5,
  DS_STATUS_PARAM_FORMAT = 6,
  DS_STATUS_INTERNAL = 7,
} DsStatus;

typedef enum DsNetwork {
  DS_NETWORK_ODD_EVEN = 0,
  DS_NETWORK_BITONIC = 1,
} DsNetwork;

typedef enum DsRelaxation {
  DS_RELAXATION_LOGISTIC = 0,
  DS_RELAXATION_CAUCHY = 1,
} DsRelaxation;

// Opaque trained risk model.
typedef struct DsModel DsModel;

// Opaque comparator schedule.
typedef struct DsSchedule DsSchedule;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or null. Valid until the
// next call into the library from the same thread.
const char *ds_last_error(void);

// Library version as a static nul-terminated string.
const char *ds_version(void);

// # Safety
// `out` must be a valid pointer to a writable handle slot.
enum DsStatus ds_schedule_new(enum DsNetwork network, size_t n, struct DsSchedule **out);

// # Safety
// `schedule` must be null or a handle from `ds_schedule_new` not yet freed.
void ds_schedule_free(struct DsSchedule *schedule);

// Number of wires, or 0 for a null handle.
//
// # Safety
// `schedule` must be null or a live handle.
size_t ds_schedule_n(const struct DsSchedule *schedule);

// Number of layers, or 0 for a null handle.
//
// # Safety
// `schedule` must be null or a live handle.
size_t ds_schedule_depth(const struct DsSchedule *schedule);

// # Safety
// `schedule` must be null or a live handle.
size_t ds_schedule_comparators(const struct DsSchedule *schedule);

// Relaxed ascending sort of `z` (length n). Writes the `n × n` permutation
// to `out_perm` and, if non-null, the relaxed sorted values to `out_sorted`.
//
// # Safety
// `z` must hold n values, `out_perm` n·n, and `out_sorted` n when non-null.
enum DsStatus ds_relaxed_sort(const struct DsSchedule *schedule,
                              enum DsRelaxation relax,
                              double beta,
                              const double *z,
                              double *out_perm,
                              double *out_sorted);

// Possible-permutation matrix of n labelled samples as `n × n` 0/1 bytes.
//
// # Safety
// `times` and `events` must hold n values and `out` n·n bytes.
enum DsStatus ds_build_qp(const double *times, const uint8_t *events, size_t n, uint8_t *out);

// Diffsurv loss of one risk set given risk scores (higher = earlier event).
// `out_grad`, when non-null, receives d loss / d score.
//
// # Safety
// `scores`, `times`, `events` must hold `schedule`'s n values; `out_loss`
// must be writable; `out_grad` must be null or hold n values.
enum DsStatus ds_diffsurv_loss(const struct DsSchedule *schedule,
                               enum DsRelaxation relax,
                               double beta,
                               const double *scores,
                               const double *times,
                               const uint8_t *events,
                               double *out_loss,
                               double *out_grad);

// Harrell's C-index. `out_comparable` may be null.
//
// # Safety
// `scores`, `times`, `events` must hold n values; `out_c` must be writable.
enum DsStatus ds_c_index(const double *scores,
                         const double *times,
                         const uint8_t *events,
                         size_t n,
                         double *out_c,
                         uint64_t *out_comparable);

// Loads a parameter file written by `diffsurv train`.
//
// # Safety
// `path` must be a nul-terminated string and `out` a writable handle slot.
enum DsStatus ds_model_load(const char *path, struct DsModel **out);

// # Safety
// `model` must be null or a handle from `ds_model_load` not yet freed.
void ds_model_free(struct DsModel *model);

// Covariate count the model expects, or 0 for a null handle.
//
// # Safety
// `model` must be null or a live handle.
size_t ds_model_input_dim(const struct DsModel *model);

// Risk scores for `rows` row-major covariate vectors.
//
// # Safety
// `x` must hold rows·input_dim values and `out` rows values.
enum DsStatus ds_model_predict(const struct DsModel *model,
                               const double *x,
                               size_t rows,
                               double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DIFFSURV_H */
