#ifndef LDP_GNN_H
#define LDP_GNN_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of every fallible call.
 */
typedef enum LdpStatus {
  LDP_STATUS_OK = 0,
  LDP_STATUS_NULL_POINTER = 1,
  LDP_STATUS_INVALID_ARGUMENT = 2,
  LDP_STATUS_PARSE = 3,
  LDP_STATUS_STRUCTURE = 4,
  LDP_STATUS_DOMAIN = 5,
  LDP_STATUS_SHAPE = 6,
  LDP_STATUS_NUMERIC = 7,
  LDP_STATUS_BUDGET = 8,
  LDP_STATUS_CONFIG = 9,
  LDP_STATUS_SCHEMA = 10,
  LDP_STATUS_CHECKPOINT = 11,
  LDP_STATUS_IO = 12,
  LDP_STATUS_PANIC = 13,
} LdpStatus;

typedef enum LdpBackbone {
  LDP_BACKBONE_GCN = 0,
  LDP_BACKBONE_SAGE = 1,
} LdpBackbone;

typedef enum LdpMechanism {
  LDP_MECHANISM_MULTI_BIT = 0,
  LDP_MECHANISM_ONE_BIT = 1,
  LDP_MECHANISM_LAPLACE = 2,
  LDP_MECHANISM_ANALYTIC_GAUSSIAN = 3,
} LdpMechanism;

typedef enum LdpFeatureKind {
  LDP_FEATURE_KIND_PRIVATE = 0,
  LDP_FEATURE_KIND_ONES = 1,
  LDP_FEATURE_KIND_DEGREE_ONE_HOT = 2,
  LDP_FEATURE_KIND_RANDOM = 3,
} LdpFeatureKind;

typedef enum LdpObjective {
  LDP_OBJECTIVE_CROSS_ENTROPY = 0,
  LDP_OBJECTIVE_FORWARD_CORRECTION = 1,
  LDP_OBJECTIVE_DROP = 2,
} LdpObjective;

/**
 * Opaque loaded or generated dataset.
 */
typedef struct LdpDataset LdpDataset;

/**
 * Opaque outcome of one run.
 */
typedef struct LdpRunResult LdpRunResult;

/**
 * Parameters of the planted-partition generator.
 */
typedef struct LdpSbmParams {
  size_t num_nodes;
  size_t num_classes;
  size_t dim;
  double p_in;
  double p_out;
  double feature_signal;
  uint64_t seed;
} LdpSbmParams;

/**
 * One training run. Fill with [`ldp_run_config_default`] and override.
 */
typedef struct LdpRunConfig {
  enum LdpBackbone backbone;
  enum LdpMechanism mechanism;
  enum LdpFeatureKind features;
  enum LdpObjective objective;
  double eps_x;
  double eps_y;
  size_t kx;
  size_t ky;
  size_t epochs;
  size_t hidden_dim;
  double learning_rate;
  double weight_decay;
  /**
   * Non-zero selects weight decay added to the gradient instead of
   * decoupled shrinkage.
   */
  uint8_t coupled_weight_decay;
  double dropout;
  uint64_t seed;
  uint64_t split_seed;
} LdpRunConfig;

/**
 * Per-epoch record.
 */
typedef struct LdpEpochRecord {
  double val_loss;
  double train_acc;
  double val_acc;
} LdpEpochRecord;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the last error message of this thread into `buf` (NUL-terminated,
 * truncated to `len` bytes) and returns the full message length in bytes,
 * excluding the terminator. Passing a null `buf` only queries the length.
 *
 * # Safety
 * `buf` must be null or valid for `len` writes.
 */
size_t ldp_last_error_message(char *buf, size_t len);

/**
 * Loads a dataset from an edge file and a node file.
 *
 * # Safety
 * Paths must be NUL-terminated strings; `out` must be valid for a write.
 */
enum LdpStatus ldp_dataset_load(const char *edges_path,
                                const char *nodes_path,
                                struct LdpDataset **out);

/**
 * Generates a planted-partition dataset.
 *
 * # Safety
 * `params` must be readable and `out` valid for a write.
 */
enum LdpStatus ldp_dataset_generate_sbm(const struct LdpSbmParams *params, struct LdpDataset **out);

/**
 * # Safety
 * `dataset` must be null or a live handle.
 */
size_t ldp_dataset_num_nodes(const struct LdpDataset *dataset);

/**
 * Undirected edges after deduplication.
 *
 * # Safety
 * `dataset` must be null or a live handle.
 */
size_t ldp_dataset_num_edges(const struct LdpDataset *dataset);

/**
 * # Safety
 * `dataset` must be null or a live handle.
 */
size_t ldp_dataset_num_features(const struct LdpDataset *dataset);

/**
 * # Safety
 * `dataset` must be null or a live handle.
 */
size_t ldp_dataset_num_classes(const struct LdpDataset *dataset);

/**
 * Releases a dataset. Null is ignored.
 *
 * # Safety
 * `dataset` must be null or a handle not yet freed.
 */
void ldp_dataset_free(struct LdpDataset *dataset);

/**
 * Per-coordinate sample count minimizing the worst-case variance.
 */
size_t ldp_optimal_m(double epsilon, size_t d);

/**
 * Encodes one feature vector with the multi-bit mechanism. Writes `d`
 * entries in {-1, 0, +1} to `out`. The draw is determined by `seed` and
 * `node`.
 *
 * # Safety
 * `x` must be readable and `out` writable for `d` elements.
 */
enum LdpStatus ldp_multibit_encode(const double *x,
                                   size_t d,
                                   double alpha,
                                   double beta,
                                   double epsilon,
                                   size_t m,
                                   uint64_t seed,
                                   uint64_t node,
                                   int8_t *out);

/**
 * Server-side unbiased estimate from one encoded vector.
 *
 * # Safety
 * `encoded` must be readable and `out` writable for `d` elements.
 */
enum LdpStatus ldp_multibit_rectify(const int8_t *encoded,
                                    size_t d,
                                    double alpha,
                                    double beta,
                                    double epsilon,
                                    size_t m,
                                    double *out);

/**
 * Randomized response over `num_classes` classes.
 *
 * # Safety
 * `out` must be valid for a write.
 */
enum LdpStatus ldp_randomized_response(size_t label,
                                       double epsilon,
                                       size_t num_classes,
                                       uint64_t seed,
                                       uint64_t node,
                                       size_t *out);

/**
 * Library defaults: sage backbone, multi-bit private features, drop
 * objective, infinite budgets, no propagation.
 *
 * # Safety
 * `out` must be valid for a write.
 */
enum LdpStatus ldp_run_config_default(struct LdpRunConfig *out);

/**
 * Collects features and labels under the configured budgets and trains.
 *
 * Enum fields of `config` must hold declared values.
 *
 * # Safety
 * `dataset` must be a live handle, `config` readable, `out` writable.
 */
enum LdpStatus ldp_run(const struct LdpDataset *dataset,
                       const struct LdpRunConfig *config,
                       struct LdpRunResult **out);

/**
 * Clean-label test accuracy at the selected epoch; NaN for a null handle.
 *
 * # Safety
 * `result` must be null or a live handle.
 */
double ldp_run_test_accuracy(const struct LdpRunResult *result);

/**
 * Index of the selected epoch.
 *
 * # Safety
 * `result` must be null or a live handle.
 */
size_t ldp_run_selected_epoch(const struct LdpRunResult *result);

/**
 * 1 when no epoch met the accuracy cap and selection fell back to
 * validation loss alone.
 *
 * # Safety
 * `result` must be null or a live handle.
 */
uint8_t ldp_run_guard_infeasible(const struct LdpRunResult *result);

/**
 * Number of recorded epochs.
 *
 * # Safety
 * `result` must be null or a live handle.
 */
size_t ldp_run_num_epochs(const struct LdpRunResult *result);

/**
 * # Safety
 * `result` must be a live handle and `out` writable.
 */
enum LdpStatus ldp_run_epoch(const struct LdpRunResult *result,
                             size_t epoch,
                             struct LdpEpochRecord *out);

/**
 * Total privacy budget spent by `node` (features plus label); infinite when
 * anything was released unrandomized.
 *
 * # Safety
 * `result` must be a live handle and `out` writable.
 */
enum LdpStatus ldp_run_node_budget(const struct LdpRunResult *result, size_t node, double *out);

/**
 * Releases a run result. Null is ignored.
 *
 * # Safety
 * `result` must be null or a handle not yet freed.
 */
void ldp_run_free(struct LdpRunResult *result);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* LDP_GNN_H */
