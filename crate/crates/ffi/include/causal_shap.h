#ifndef CAUSAL_SHAP_H
#define CAUSAL_SHAP_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/*
 Bit set in `cs_explain`'s flag output when normalization was skipped.
 */
#define CS_FLAG_DEGENERATE 1

/*
 Bit set when no feature has a directed path to the target.
 */
#define CS_FLAG_NO_CAUSAL_SIGNAL 2

typedef enum CsStatus {
  CS_STATUS_OK = 0,
  CS_STATUS_NULL_POINTER = 1,
  CS_STATUS_INVALID_ARGUMENT = 2,
  CS_STATUS_IO = 3,
  CS_STATUS_DATA = 4,
  CS_STATUS_SINGULAR = 5,
  CS_STATUS_MODEL = 6,
  CS_STATUS_DISCOVERY = 7,
  CS_STATUS_EFFECTS = 8,
  CS_STATUS_ATTRIBUTION = 9,
  CS_STATUS_INTERNAL = 10,
} CsStatus;

/*
 A discovered graph with effect weights and fitted node regressions.
 */
typedef struct CsExplainer CsExplainer;

/*
 A trained predictor.
 */
typedef struct CsModel CsModel;

/*
 A data table with a designated target column.
 */
typedef struct CsTable CsTable;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Message of the last failed call on this thread, or NULL. Valid until the next call.
 */
const char *cs_last_error_message(void);

/*
 Library version as a static NUL-terminated string.
 */
const char *cs_version(void);

/*
 Loads a CSV file with a header row.

 # Safety
 `path` and `target` must be NUL-terminated strings; `out` must be writable.
 */
enum CsStatus cs_table_load_csv(const char *path, const char *target, struct CsTable **out);

/*
 Builds a table from a row-major `n_rows × n_cols` matrix and `n_cols` column names.

 # Safety
 `data` must hold `n_rows * n_cols` doubles, `names` `n_cols` strings; `out` must be writable.
 */
enum CsStatus cs_table_from_rows(const double *data,
                                 size_t n_rows,
                                 size_t n_cols,
                                 const char *const *names,
                                 size_t target_index,
                                 struct CsTable **out);

/*
 Samples `n` rows of a built-in structural equation model.

 # Safety
 `spec` must be a NUL-terminated string; `out` must be writable.
 */
enum CsStatus cs_table_generate(const char *spec, size_t n, uint64_t seed, struct CsTable **out);

/*
 Row count, or 0 for NULL.

 # Safety
 `table` must be NULL or a live handle.
 */
size_t cs_table_rows(const struct CsTable *table);

/*
 Feature count (target excluded), or 0 for NULL.

 # Safety
 `table` must be NULL or a live handle.
 */
size_t cs_table_features(const struct CsTable *table);

/*
 Copies row `row`'s features into `out` (length `len` = feature count).

 # Safety
 `table` must be a live handle and `out` must hold `len` doubles.
 */
enum CsStatus cs_table_feature_row(const struct CsTable *table,
                                   size_t row,
                                   double *out,
                                   size_t len);

/*
 # Safety
 `table` must be NULL or a handle not yet freed.
 */
void cs_table_free(struct CsTable *table);

/*
 Ordinary (ridge ≥ 0) least squares on the table's features.

 # Safety
 `table` must be a live handle; `out` must be writable.
 */
enum CsStatus cs_model_train_linear(const struct CsTable *table,
                                    double ridge,
                                    struct CsModel **out);

/*
 Bagged CART forest; `probability` nonzero reads outputs as class-1 probabilities.

 # Safety
 `table` must be a live handle; `out` must be writable.
 */
enum CsStatus cs_model_train_forest(const struct CsTable *table,
                                    size_t n_trees,
                                    size_t max_depth,
                                    size_t min_leaf,
                                    uint64_t seed,
                                    int32_t probability,
                                    struct CsModel **out);

/*
 Predicts `n_rows` rows of width `n_features` into `out`.

 # Safety
 `rows` must hold `n_rows * n_features` doubles and `out` `n_rows` doubles.
 */
enum CsStatus cs_model_predict(const struct CsModel *model,
                               const double *rows,
                               size_t n_rows,
                               size_t n_features,
                               double *out);

/*
 # Safety
 `model` must be NULL or a handle not yet freed.
 */
void cs_model_free(struct CsModel *model);

/*
 Discovers a CPDAG on `train` (PC at level `alpha`), estimates causal weight
 factors and fits the node regressions used for sampling.

 # Safety
 `train` must be a live handle; `out` must be writable.
 */
enum CsStatus cs_explainer_new(const struct CsTable *train, double alpha, struct CsExplainer **out);

/*
 Copies the causal weight factors (one per feature) into `out`.

 # Safety
 `explainer` must be a live handle and `out` must hold `len` doubles.
 */
enum CsStatus cs_explainer_gamma(const struct CsExplainer *explainer, double *out, size_t len);

/*
 Causal SHAP values of `model` at `x`; `phi_out` receives the normalized values
 and `flags_out` (optional) a bit set of `CS_FLAG_*`.

 # Safety
 Handles must be live; `x` and `phi_out` must hold `n_features` doubles.
 */
enum CsStatus cs_explain(const struct CsExplainer *explainer,
                         const struct CsModel *model,
                         const double *x,
                         size_t n_features,
                         size_t mc_samples,
                         size_t mc_iterations,
                         uint64_t seed,
                         double *phi_out,
                         uint32_t *flags_out);

/*
 # Safety
 `explainer` must be NULL or a handle not yet freed.
 */
void cs_explainer_free(struct CsExplainer *explainer);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CAUSAL_SHAP_H */
