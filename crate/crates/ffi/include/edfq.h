#ifndef EDFQ_H
#define EDFQ_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Outcome of every call.
 */
typedef enum EdfqStatus {
  EDFQ_STATUS_OK = 0,
  EDFQ_STATUS_NULL_POINTER = 1,
  EDFQ_STATUS_INVALID_ARGUMENT = 2,
  EDFQ_STATUS_DOMAIN = 3,
  EDFQ_STATUS_UNAVAILABLE = 4,
  EDFQ_STATUS_NUMERIC = 5,
  EDFQ_STATUS_PARSE = 6,
  EDFQ_STATUS_IO = 7,
  EDFQ_STATUS_PANIC = 8,
} EdfqStatus;

/**
 * A lead-time law `G`.
 */
typedef struct EdfqLaw EdfqLaw;

/**
 * The output of one simulation run.
 */
typedef struct EdfqSim EdfqSim;

/**
 * Parameters of the limit formulas. Build with
 * [`edfq_params_from_prelimit`] or fill in directly.
 */
typedef struct EdfqParams {
  double lambda;
  double mu;
  double alpha;
  double beta;
  double gamma;
  double lambda_n;
  double mu_n;
  double alpha_n;
  double beta_n;
} EdfqParams;

/**
 * Scalar state of one snapshot.
 */
typedef struct EdfqSnapshotSummary {
  double time;
  double workload;
  double late_work;
  double frontier;
  double current_lead;
  double idleness;
  double work_arrived;
  size_t queue_len;
  uint64_t arrivals;
} EdfqSnapshotSummary;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *edfq_version(void);

/**
 * Copy the calling thread's last error message into `buf` (always
 * NUL-terminated when `len > 0`) and return the full message length
 * without the terminator.
 *
 * # Safety
 * `buf` must be null or point to at least `len` writable bytes.
 */
size_t edfq_last_error_message(char *buf, size_t len);

/**
 * Constant law with every lead time equal to `y_star`.
 *
 * # Safety
 * `out` must be valid for writes.
 */
enum EdfqStatus edfq_law_constant(double y_star, struct EdfqLaw **out);

/**
 * Uniform law on `[low, high]`.
 *
 * # Safety
 * `out` must be valid for writes.
 */
enum EdfqStatus edfq_law_uniform(double low, double high, struct EdfqLaw **out);

/**
 * Atoms at `atom_at[i]` with mass `atom_mass[i]` plus constant densities
 * `piece_density[i]` on `[piece_from[i], piece_to[i])`.
 *
 * # Safety
 * Each array must hold its stated number of elements; `out` must be valid
 * for writes.
 */
enum EdfqStatus edfq_law_mixed(const double *atom_at,
                               const double *atom_mass,
                               size_t atom_count,
                               const double *piece_from,
                               const double *piece_to,
                               const double *piece_density,
                               size_t piece_count,
                               struct EdfqLaw **out);

/**
 * Law from its JSON description, e.g. `{"kind": "uniform", "low": 0, "high": 2}`.
 *
 * # Safety
 * `json` must be a NUL-terminated string; `out` must be valid for writes.
 */
enum EdfqStatus edfq_law_from_json(const char *json, struct EdfqLaw **out);

/**
 * Release a law. Null is ignored.
 *
 * # Safety
 * `law` must come from an `edfq_law_*` constructor and not be used again.
 */
void edfq_law_free(struct EdfqLaw *law);

/**
 * Right endpoint `y*` of the support.
 *
 * # Safety
 * `law` must be a live handle; `out` must be valid for writes.
 */
enum EdfqStatus edfq_law_y_star(const struct EdfqLaw *law, double *out);

/**
 * `G(y)`.
 *
 * # Safety
 * `law` must be a live handle; `out` must be valid for writes.
 */
enum EdfqStatus edfq_law_cdf(const struct EdfqLaw *law, double y, double *out);

/**
 * `H(y) = ∫_y^∞ (1 - G)`.
 *
 * # Safety
 * `law` must be a live handle; `out` must be valid for writes.
 */
enum EdfqStatus edfq_law_h(const struct EdfqLaw *law, double y, double *out);

/**
 * `H⁻¹(w)` for `w >= 0`.
 *
 * # Safety
 * `law` must be a live handle; `out` must be valid for writes.
 */
enum EdfqStatus edfq_law_h_inverse(const struct EdfqLaw *law, double w, double *out);

/**
 * Parameters of one prelimit system with index `n`.
 *
 * # Safety
 * `out` must be valid for writes.
 */
enum EdfqStatus edfq_params_from_prelimit(double lambda_n,
                                          double mu_n,
                                          double alpha_n,
                                          double beta_n,
                                          double n,
                                          struct EdfqParams *out);

/**
 * `E[J*(y1) J*(y2)]`.
 *
 * # Safety
 * Pointers must be valid; `law` a live handle.
 */
enum EdfqStatus edfq_cov_j(const struct EdfqParams *p,
                           const struct EdfqLaw *law,
                           double y1,
                           double y2,
                           double *out);

/**
 * Covariance of the service/lead-time field at `(s1, y1)`, `(s2, y2)`.
 *
 * # Safety
 * Pointers must be valid; `law` a live handle.
 */
enum EdfqStatus edfq_cov_y(const struct EdfqParams *p,
                           const struct EdfqLaw *law,
                           double s1,
                           double y1,
                           double s2,
                           double y2,
                           double *out);

/**
 * Covariance of the arrival-driven part at `y1`, `y2`.
 *
 * # Safety
 * Pointers must be valid; `law` a live handle.
 */
enum EdfqStatus edfq_cov_z(const struct EdfqParams *p,
                           const struct EdfqLaw *law,
                           double y1,
                           double y2,
                           double *out);

/**
 * Surrogate decay rate θ of the stationary workload.
 *
 * # Safety
 * Pointers must be valid.
 */
enum EdfqStatus edfq_theta(const struct EdfqParams *p, double *out);

/**
 * `P[W > w] = exp(-θ w)`.
 *
 * # Safety
 * Pointers must be valid.
 */
enum EdfqStatus edfq_stationary_workload_tail(const struct EdfqParams *p, double w, double *out);

/**
 * Scale of the frontier-prediction Laplace law.
 *
 * # Safety
 * Pointers must be valid.
 */
enum EdfqStatus edfq_laplace_scale(const struct EdfqParams *p, double *out);

/**
 * Density of the frontier-prediction Laplace law at `x`.
 *
 * # Safety
 * Pointers must be valid.
 */
enum EdfqStatus edfq_laplace_density(const struct EdfqParams *p, double x, double *out);

/**
 * Run replication `replication` of a simulation described in JSON (the
 * same layout the CLI prints under `config`).
 *
 * # Safety
 * `config_json` must be a NUL-terminated string; `out` must be valid for
 * writes.
 */
enum EdfqStatus edfq_sim_run_json(const char *config_json,
                                  uint64_t replication,
                                  struct EdfqSim **out);

/**
 * Release a simulation result. Null is ignored.
 *
 * # Safety
 * `sim` must come from [`edfq_sim_run_json`] and not be used again.
 */
void edfq_sim_free(struct EdfqSim *sim);

/**
 * Number of snapshots, in increasing time order.
 *
 * # Safety
 * `sim` must be a live handle; `out` must be valid for writes.
 */
enum EdfqStatus edfq_sim_snapshot_count(const struct EdfqSim *sim, size_t *out);

/**
 * Scalar state of snapshot `index`.
 *
 * # Safety
 * `sim` must be a live handle; `out` must be valid for writes.
 */
enum EdfqStatus edfq_sim_snapshot(const struct EdfqSim *sim,
                                  size_t index,
                                  struct EdfqSnapshotSummary *out);

/**
 * Work of present customers with lead time strictly above `y`.
 *
 * # Safety
 * `sim` must be a live handle; `out` must be valid for writes.
 */
enum EdfqStatus edfq_sim_workload_above(const struct EdfqSim *sim,
                                        size_t index,
                                        double y,
                                        double *out);

/**
 * Work of present customers with lead time in `[lo, hi]`.
 *
 * # Safety
 * `sim` must be a live handle; `out` must be valid for writes.
 */
enum EdfqStatus edfq_sim_work_in_leads(const struct EdfqSim *sim,
                                       size_t index,
                                       double lo,
                                       double hi,
                                       double *out);

/**
 * Work ever arrived with lead time strictly above `y` at the snapshot.
 * Needs `retain_arrival_log` in the run configuration.
 *
 * # Safety
 * `sim` must be a live handle; `out` must be valid for writes.
 */
enum EdfqStatus edfq_sim_arrival_work_above(const struct EdfqSim *sim,
                                            size_t index,
                                            double y,
                                            double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* EDFQ_H */
