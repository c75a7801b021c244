#ifndef STABFLOW_H
#define STABFLOW_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stddef.h>
#include <stdint.h>

typedef enum SfStatus {
  SF_STATUS_OK = 0,
  SF_STATUS_NULL_POINTER = 1,
  SF_STATUS_INVALID_ARGUMENT = 2,
  SF_STATUS_CONFIG = 3,
  SF_STATUS_DATA = 4,
  SF_STATUS_NUMERIC = 5,
  SF_STATUS_IO = 6,
  SF_STATUS_PANIC = 7,
} SfStatus;

/**
 * Co-clustering matrix over a fixed set of rows.
 */
typedef struct SfConsensus SfConsensus;

/**
 * A loaded catalog.
 */
typedef struct SfDataset SfDataset;

/**
 * Result of a stability search.
 */
typedef struct SfStability SfStability;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *sf_version(void);

/**
 * Message of the last failed call on this thread, or NULL. Valid until
 * the next call into the library on the same thread.
 */
const char *sf_last_error(void);

/**
 * Adjusted Rand index of two labelings of length `n`.
 *
 * # Safety
 * `a` and `b` must point to `n` readable values; `out` must be writable.
 */
enum SfStatus sf_ari(const size_t *a, const size_t *b, size_t n, double *out);

/**
 * Read a catalog CSV. `schema_json` may be NULL for the default column
 * names; otherwise it is a JSON object with the schema fields.
 *
 * # Safety
 * Strings must be NUL-terminated; `out` must be writable.
 */
enum SfStatus sf_dataset_load(const char *path, const char *schema_json, struct SfDataset **out);

/**
 * Build a dataset from a row-major `rows x cols` matrix. NaN entries are
 * treated as missing. Rows get ids `r0, r1, ..` and features
 * `x1..x<cols>`; there is no QC metadata.
 *
 * # Safety
 * `values` must point to `rows * cols` readable doubles; `out` must be
 * writable.
 */
enum SfStatus sf_dataset_from_matrix(const double *values,
                                     size_t rows,
                                     size_t cols,
                                     struct SfDataset **out);

/**
 * Number of rows, or 0 for NULL.
 *
 * # Safety
 * `ds` must be NULL or a live handle.
 */
size_t sf_dataset_rows(const struct SfDataset *ds);

/**
 * Number of feature columns, or 0 for NULL.
 *
 * # Safety
 * `ds` must be NULL or a live handle.
 */
size_t sf_dataset_cols(const struct SfDataset *ds);

/**
 * # Safety
 * `ds` must be NULL or a handle not yet freed.
 */
void sf_dataset_free(struct SfDataset *ds);

/**
 * Stability search on one pipeline (all features, standardized and
 * mean-imputed). `methods` is a comma-separated list such as
 * `"kmeans,hc-ward,spectral-30"`.
 *
 * # Safety
 * `ds` must be a live handle, `methods` NUL-terminated, `ks` readable for
 * `n_ks` values and `out` writable.
 */
enum SfStatus sf_stability_search(const struct SfDataset *ds,
                                  const char *methods,
                                  const size_t *ks,
                                  size_t n_ks,
                                  size_t b,
                                  double pi,
                                  uint64_t seed,
                                  struct SfStability **out);

/**
 * Number of (method, k) cells.
 *
 * # Safety
 * `t` must be NULL or a live handle.
 */
size_t sf_stability_len(const struct SfStability *t);

/**
 * Index of the most stable cell.
 *
 * # Safety
 * `t` must be NULL or a live handle.
 */
size_t sf_stability_best(const struct SfStability *t);

/**
 * Read cell `i`: method name (owned by the handle), k, mean and sd of the
 * stability score. Any output pointer may be NULL.
 *
 * # Safety
 * `t` must be a live handle; non-NULL outputs must be writable.
 */
enum SfStatus sf_stability_cell(const struct SfStability *t,
                                size_t i,
                                const char **method,
                                size_t *k,
                                double *mean,
                                double *sd);

/**
 * # Safety
 * `t` must be NULL or a handle not yet freed.
 */
void sf_stability_free(struct SfStability *t);

/**
 * Consensus matrix from `n_runs` full labelings of `n_rows` rows, stored
 * run-major (`labels[r * n_rows + i]`).
 *
 * # Safety
 * `labels` must hold `n_runs * n_rows` values; `out` must be writable.
 */
enum SfStatus sf_consensus_from_labels(const size_t *labels,
                                       size_t n_rows,
                                       size_t n_runs,
                                       struct SfConsensus **out);

/**
 * Side length, or 0 for NULL.
 *
 * # Safety
 * `c` must be NULL or a live handle.
 */
size_t sf_consensus_len(const struct SfConsensus *c);

/**
 * Entry `(i, j)`; NaN when out of range or NULL.
 *
 * # Safety
 * `c` must be NULL or a live handle.
 */
double sf_consensus_get(const struct SfConsensus *c, size_t i, size_t j);

/**
 * Average-linkage clusters of `1 - C` cut at `k`, written to
 * `labels_out` (length `sf_consensus_len`).
 *
 * # Safety
 * `c` must be a live handle; `labels_out` must hold `sf_consensus_len`
 * values.
 */
enum SfStatus sf_consensus_cluster(const struct SfConsensus *c, size_t k, size_t *labels_out);

/**
 * Per-row local stability for `labels` (length `sf_consensus_len`).
 *
 * # Safety
 * `c` must be a live handle; `labels` and `scores_out` must hold
 * `sf_consensus_len` values.
 */
enum SfStatus sf_local_stability(const struct SfConsensus *c,
                                 const size_t *labels,
                                 double *scores_out);

/**
 * # Safety
 * `c` must be NULL or a handle not yet freed.
 */
void sf_consensus_free(struct SfConsensus *c);

/**
 * Run one workflow stage (`prepare`, `explore`, `search`, `validate`,
 * `report` or `run`) from a configuration file, as the CLI would.
 *
 * # Safety
 * Strings must be NUL-terminated.
 */
enum SfStatus sf_run_stage(const char *config_path, const char *stage, int reproducible);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* STABFLOW_H */
