#ifndef TFC_H
#define TFC_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stddef.h>
#include <stdint.h>

typedef enum TfcStatus {
  TFC_STATUS_OK = 0,
  TFC_STATUS_NULL_POINTER = 1,
  TFC_STATUS_INVALID_ARGUMENT = 2,
  TFC_STATUS_PARSE = 3,
  TFC_STATUS_INFEASIBLE = 4,
  TFC_STATUS_ITERATION_LIMIT = 5,
  TFC_STATUS_SOLVER_FAILURE = 6,
  TFC_STATUS_IO = 7,
  TFC_STATUS_PANIC = 8,
  TFC_STATUS_TIME_LIMIT = 9,
} TfcStatus;

typedef enum TfcBalanceKind {
  TFC_BALANCE_KIND_LAMBDA = 0,
  TFC_BALANCE_KIND_ALPHA = 1,
} TfcBalanceKind;

typedef enum TfcAlgorithm {
  TFC_ALGORITHM_EXACT = 0,
  TFC_ALGORITHM_PIPAGE_L1 = 1,
  TFC_ALGORITHM_RPIPAGE_L2 = 2,
  TFC_ALGORITHM_GREEDY = 3,
  TFC_ALGORITHM_RANDOM = 4,
} TfcAlgorithm;

// Opaque problem instance.
typedef struct TfcInstance TfcInstance;

// Opaque solve result.
typedef struct TfcReport TfcReport;

typedef struct TfcObjective {
  double task_satisfaction;
  double social_satisfaction;
  double lambda;
  double total;
} TfcObjective;

// Zero in `sparsify`, `compact_target`, `max_lp_iterations`, `lp_time_limit` or
// `exact_budget` selects "off" or the library default. `lp_time_limit` is in
// seconds.
typedef struct TfcSolveOptions {
  enum TfcAlgorithm algorithm;
  uint64_t seed;
  size_t repetitions;
  double sparsify;
  size_t compact_target;
  size_t max_lp_iterations;
  double lp_time_limit;
  uint64_t exact_budget;
} TfcSolveOptions;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the last failed call on this thread, or null after a success. The
// pointer stays valid until the next call on this thread.
const char *tfc_last_error_message(void);

// Parses the canonical instance text format.
//
// # Safety
// `text` must be a nul-terminated string; `out` must be writable.
enum TfcStatus tfc_instance_parse(const char *text, struct TfcInstance **out);

// Loads an instance file in the canonical format.
//
// # Safety
// `path` must be a nul-terminated string; `out` must be writable.
enum TfcStatus tfc_instance_load(const char *path, struct TfcInstance **out);

// Builds an instance from index arrays. Nodes are named `v0, v1, ...` and
// tasks `t0, t1, ...`.
//
// # Safety
// Each pointer must reference the stated number of elements (or be null when
// the count is zero); `out` must be writable.
enum TfcStatus tfc_instance_from_arrays(size_t num_nodes,
                                        size_t num_tasks,
                                        const size_t *capacities,
                                        size_t num_edges,
                                        const size_t *edge_u,
                                        const size_t *edge_v,
                                        const double *edge_weight,
                                        size_t num_preferences,
                                        const size_t *pref_node,
                                        const size_t *pref_task,
                                        const double *pref_value,
                                        enum TfcBalanceKind balance_kind,
                                        double balance_value,
                                        struct TfcInstance **out);

// # Safety
// `inst` must come from a `tfc_instance_*` constructor and not be used afterwards.
void tfc_instance_free(struct TfcInstance *inst);

// Number of individuals, or 0 for a null handle.
//
// # Safety
// `inst` must be null or a live handle.
size_t tfc_instance_num_nodes(const struct TfcInstance *inst);

// Number of tasks, or 0 for a null handle.
//
// # Safety
// `inst` must be null or a live handle.
size_t tfc_instance_num_tasks(const struct TfcInstance *inst);

// Resolved λ, or NaN for a null handle.
//
// # Safety
// `inst` must be null or a live handle.
double tfc_instance_lambda(const struct TfcInstance *inst);

// Objective of the assignment `tasks[v]` (task index per node).
//
// # Safety
// `tasks` must hold `len` elements; `out` must be writable.
enum TfcStatus tfc_evaluate(const struct TfcInstance *inst,
                            const size_t *tasks,
                            size_t len,
                            struct TfcObjective *out);

// Defaults: randomized rounding on L2, seed 0, one repetition, no speedups.
struct TfcSolveOptions tfc_solve_options_default(void);

// Runs the full pipeline. A null `options` uses the defaults. If the LP stops
// at its iteration or time limit the report is still produced and the call
// returns `IterationLimit` or `TimeLimit`.
//
// # Safety
// `inst` must be a live handle, `options` null or valid, `out` writable.
enum TfcStatus tfc_solve(const struct TfcInstance *inst,
                         const struct TfcSolveOptions *options,
                         struct TfcReport **out);

// # Safety
// `report` must be a live handle; `out` must be writable.
enum TfcStatus tfc_report_objective(const struct TfcReport *report, struct TfcObjective *out);

// Number of entries [`tfc_report_assignment`] writes, or 0 for a null handle.
//
// # Safety
// `report` must be null or a live handle.
size_t tfc_report_len(const struct TfcReport *report);

// Copies the best assignment (task index per node) into `tasks`.
//
// # Safety
// `tasks` must have room for `len` elements.
enum TfcStatus tfc_report_assignment(const struct TfcReport *report, size_t *tasks, size_t len);

// Full report as JSON. Release the string with [`tfc_string_free`].
//
// # Safety
// `report` must be a live handle; `out` must be writable.
enum TfcStatus tfc_report_to_json(const struct TfcReport *report, char **out);

// # Safety
// `report` must come from [`tfc_solve`] and not be used afterwards.
void tfc_report_free(struct TfcReport *report);

// # Safety
// `s` must come from this library and not be used afterwards.
void tfc_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* TFC_H */
