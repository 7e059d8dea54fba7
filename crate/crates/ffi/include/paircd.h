#ifndef PAIRCD_H
#define PAIRCD_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum PaircdStatus {
  PAIRCD_STATUS_OK = 0,
  PAIRCD_STATUS_NULL_ARG = 1,
  PAIRCD_STATUS_INVALID_ARG = 2,
  PAIRCD_STATUS_IO = 3,
  PAIRCD_STATUS_PARSE = 4,
  PAIRCD_STATUS_DATA = 5,
  PAIRCD_STATUS_COMPUTE = 6,
  PAIRCD_STATUS_PANIC = 7,
} PaircdStatus;

/**
 * Edge mark between two nodes.
 */
typedef enum PaircdEdge {
  PAIRCD_EDGE_NONE = 0,
  /**
   * `i -> j`
   */
  PAIRCD_EDGE_FORWARD = 1,
  /**
   * `j -> i`
   */
  PAIRCD_EDGE_BACKWARD = 2,
  PAIRCD_EDGE_UNDIRECTED = 3,
} PaircdEdge;

/**
 * Multiply imputed copies of a dataset.
 */
typedef struct PaircdCache PaircdCache;

/**
 * Incomplete data table.
 */
typedef struct PaircdDataset PaircdDataset;

/**
 * Mixed graph with node names.
 */
typedef struct PaircdGraph PaircdGraph;

typedef struct PaircdCiConfig {
  /**
   * 0 = general (random forest), 1 = fast (extra-trees).
   */
  uint32_t variant;
  uint32_t k_folds;
  double alpha;
  /**
   * 0 = Bayle, 1 = Nadeau-Bengio.
   */
  uint32_t variance_estimator;
  bool early_stop;
  uint32_t n_trees;
  uint32_t min_samples_leaf;
  uint64_t seed;
} PaircdCiConfig;

typedef struct PaircdCiResult {
  double mu_hat;
  double t_total;
  double statistic;
  double df;
  double p_value;
  bool reject;
  bool early_stopped;
  bool degenerate;
  uint32_t m_used;
  uint32_t n_used;
} PaircdCiResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or NULL. The pointer
 * stays valid until the next call into the library on this thread.
 */
const char *paircd_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *paircd_version(void);

/**
 * # Safety
 * `s` must come from this library and not have been freed.
 */
void paircd_string_free(char *s);

/**
 * Loads a CSV with a header row. Empty cells, `NA` and `nan` are missing.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum PaircdStatus paircd_dataset_load_csv(const char *path, struct PaircdDataset **out);

/**
 * Builds a dataset from `n_rows * n_cols` row-major values; NaN marks a
 * missing cell. Columns are named `X0, X1, ...`.
 *
 * # Safety
 * `values` must point to `n_rows * n_cols` readable doubles; `out` must be
 * writable.
 */
enum PaircdStatus paircd_dataset_from_values(const double *values,
                                             size_t n_rows,
                                             size_t n_cols,
                                             struct PaircdDataset **out);

/**
 * # Safety
 * `ds` must be a live dataset handle or NULL.
 */
size_t paircd_dataset_n_rows(const struct PaircdDataset *ds);

/**
 * # Safety
 * `ds` must be a live dataset handle or NULL.
 */
size_t paircd_dataset_n_cols(const struct PaircdDataset *ds);

/**
 * # Safety
 * `ds` must be a live dataset handle or NULL.
 */
size_t paircd_dataset_missing_count(const struct PaircdDataset *ds);

/**
 * # Safety
 * `ds` must come from this library and not have been freed.
 */
void paircd_dataset_free(struct PaircdDataset *ds);

/**
 * MICE with `m` imputations over all columns, for reuse across tests.
 *
 * # Safety
 * `ds` must be a live dataset handle; `out` must be writable.
 */
enum PaircdStatus paircd_cache_build(const struct PaircdDataset *ds,
                                     uint32_t m,
                                     uint64_t seed,
                                     struct PaircdCache **out);

/**
 * # Safety
 * `cache` must be a live cache handle or NULL.
 */
size_t paircd_cache_m(const struct PaircdCache *cache);

/**
 * # Safety
 * `cache` must come from this library and not have been freed.
 */
void paircd_cache_free(struct PaircdCache *cache);

/**
 * Defaults for `variant` (0 general, 1 fast).
 */
struct PaircdCiConfig paircd_ci_config_default(uint32_t variant);

/**
 * Tests `z _||_ y | cond` on a cache.
 *
 * # Safety
 * `cache` and `config` must be live; `cond` must point to `n_cond` indices
 * (or be NULL when `n_cond` is 0); `out` must be writable.
 */
enum PaircdStatus paircd_ci_test(const struct PaircdCache *cache,
                                 size_t z,
                                 size_t y,
                                 const size_t *cond,
                                 size_t n_cond,
                                 const struct PaircdCiConfig *config,
                                 struct PaircdCiResult *out);

/**
 * Runs PC with `method` (`pairci`, `complete_case`, `testwise`,
 * `fz_single`, `fz_rubin`, `fz_vote`). `config` may be NULL for the
 * general-variant defaults; its seed also drives imputation.
 *
 * # Safety
 * `ds` must be live, `method` NUL-terminated, `out` writable.
 */
enum PaircdStatus paircd_discover(const struct PaircdDataset *ds,
                                  const char *method,
                                  double alpha,
                                  uint32_t m,
                                  const struct PaircdCiConfig *config,
                                  struct PaircdGraph **out);

/**
 * # Safety
 * `g` must be a live graph handle or NULL.
 */
size_t paircd_graph_n_nodes(const struct PaircdGraph *g);

/**
 * # Safety
 * `g` must be a live graph handle or NULL.
 */
size_t paircd_graph_n_edges(const struct PaircdGraph *g);

/**
 * Mark between `i` and `j`; out-of-range nodes read as no edge.
 *
 * # Safety
 * `g` must be a live graph handle or NULL.
 */
enum PaircdEdge paircd_graph_edge(const struct PaircdGraph *g, size_t i, size_t j);

/**
 * Graph as JSON (`p`, `names`, `directed`, `undirected`). Free the string
 * with [`paircd_string_free`].
 *
 * # Safety
 * `g` must be live; `out` must be writable.
 */
enum PaircdStatus paircd_graph_to_json(const struct PaircdGraph *g, char **out);

/**
 * # Safety
 * `g` must come from this library and not have been freed.
 */
void paircd_graph_free(struct PaircdGraph *g);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PAIRCD_H */
