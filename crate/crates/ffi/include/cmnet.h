/* Generated by cbindgen; do not edit. */

#ifndef CMNET_H
#define CMNET_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum CmnStatus {
  CMN_STATUS_OK = 0,
  CMN_STATUS_NULL_POINTER = 1,
  CMN_STATUS_INVALID_ARGUMENT = 2,
  CMN_STATUS_PARSE = 3,
  CMN_STATUS_CAPACITY = 4,
  CMN_STATUS_STRUCTURE = 5,
  CMN_STATUS_SHAPE_MISMATCH = 6,
  CMN_STATUS_NON_CONVERGENCE = 7,
  CMN_STATUS_IO = 8,
  CMN_STATUS_UNFITTED = 9,
  CMN_STATUS_PANIC = 99,
} CmnStatus;

/*
 Opaque dataset handle.
 */
typedef struct CmnDataset CmnDataset;

/*
 Opaque handle to a learned, fitted model.
 */
typedef struct CmnModel CmnModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Message for the last failed call on this thread, or null. Valid until the
 next failing call on the same thread.
 */
const char *cmn_last_error(void);

/*
 Load a CSV file; non-integer columns are encoded as labels.

 # Safety
 `path` must be a NUL-terminated string; `out` must be writable.
 */
enum CmnStatus cmn_dataset_from_csv(const char *path, bool has_header, struct CmnDataset **out);

/*
 Build a dataset from `n * d` row-major codes. `cardinalities` may be null,
 in which case each is one more than the largest code in its column.

 # Safety
 `codes` must point to `n * d` values and `cardinalities`, if non-null, to
 `d` values; `out` must be writable.
 */
enum CmnStatus cmn_dataset_from_codes(const uint32_t *codes,
                                      size_t n,
                                      size_t d,
                                      const size_t *cardinalities,
                                      struct CmnDataset **out);

/*
 Number of rows, or 0 for a null handle.

 # Safety
 `ds` must be null or a live dataset handle.
 */
size_t cmn_dataset_n(const struct CmnDataset *ds);

/*
 Number of variables, or 0 for a null handle.

 # Safety
 `ds` must be null or a live dataset handle.
 */
size_t cmn_dataset_d(const struct CmnDataset *ds);

/*
 # Safety
 `ds` must be null or a handle not yet freed.
 */
void cmn_dataset_free(struct CmnDataset *ds);

/*
 Learn and fit a model over a kappa grid.

 `grid` is a comma-separated list such as `"eps,n^-1,0.01"`; null selects
 the default grid. The returned model is the one with the highest BIC.

 # Safety
 `ds` must be a live dataset handle, `grid` null or NUL-terminated, `out`
 writable.
 */
enum CmnStatus cmn_learn(const struct CmnDataset *ds,
                         const char *grid,
                         double alpha,
                         struct CmnModel **out);

/*
 # Safety
 `m` must be null or a handle not yet freed.
 */
void cmn_model_free(struct CmnModel *m);

/*
 Number of edges, or 0 for a null handle.

 # Safety
 `m` must be null or a live model handle.
 */
size_t cmn_model_edge_count(const struct CmnModel *m);

/*
 Total number of context elements, or 0 for a null handle.

 # Safety
 `m` must be null or a live model handle.
 */
size_t cmn_model_context_count(const struct CmnModel *m);

/*
 BIC divided by the sample size.

 # Safety
 `m` must be a live model handle and `out` writable.
 */
enum CmnStatus cmn_model_sbic(const struct CmnModel *m, double *out);

/*
 Log-probability of one configuration of `len` codes.

 # Safety
 `m` must be a live model handle, `config` must point to `len` values,
 `out` writable.
 */
enum CmnStatus cmn_model_log_prob(const struct CmnModel *m,
                                  const uint32_t *config,
                                  size_t len,
                                  double *out);

/*
 Serialize the model in the CLI's model-file format. Release the string
 with [`cmn_string_free`].

 # Safety
 `m` must be a live model handle and `out` writable.
 */
enum CmnStatus cmn_model_to_json(const struct CmnModel *m, char **out);

/*
 # Safety
 `s` must be null or a string returned by this library and not yet freed.
 */
void cmn_string_free(char *s);

/*
 Log marginal pseudo-likelihood of a structure given as JSON. `kappa`
 uses the CLI syntax (`eps` or a number in `(0, 1]`); the context prior is
 not included.

 # Safety
 `ds` must be a live dataset handle, the strings NUL-terminated, `out`
 writable.
 */
enum CmnStatus cmn_log_mpl(const struct CmnDataset *ds,
                           const char *structure_json,
                           double alpha,
                           const char *kappa,
                           double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CMNET_H */
