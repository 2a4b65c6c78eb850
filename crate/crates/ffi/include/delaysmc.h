#ifndef DELAYSMC_H
#define DELAYSMC_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum DsmcStatus {
  DSMC_STATUS_OK = 0,
  // Null pointer, bad UTF-8 or out-of-range index.
  DSMC_STATUS_INVALID_ARGUMENT = 1,
  // Scenario failed to parse or validate.
  DSMC_STATUS_SCENARIO = 2,
  DSMC_STATUS_IO = 3,
  // Malformed trace file.
  DSMC_STATUS_FORMAT = 4,
  // Numerical failure: singular, not Hurwitz, dimension mismatch.
  DSMC_STATUS_NUMERIC = 5,
  // The run stopped early; the partial trace is still returned.
  DSMC_STATUS_ABORTED = 6,
  DSMC_STATUS_PANIC = 7,
} DsmcStatus;

// Parsed and validated scenario.
typedef struct DsmcScenario DsmcScenario;

// Simulation trace plus its column names as C strings.
typedef struct DsmcTrace DsmcTrace;

// Stability certificate. `delta_bar_max` is `INFINITY` when unbounded;
// the `P₂`-derived fields are `NAN` when `Ā₂₂` is not Hurwitz.
typedef struct DsmcCertificate {
  double lambda_max_p2;
  double mu;
  double beta1;
  double delta_bar_max;
  double delta_bar;
  double phi;
  double max_leakage_gain;
  double rho_required_norm_coeff;
  bool feasible;
} DsmcCertificate;

// Trace audit summary. Missing times are `NAN`.
typedef struct DsmcAudit {
  double sliding_reach_time;
  double sliding_band;
  double max_residual_ratio;
  double max_fault_error;
  double observer_settle_time;
  size_t lyapunov_checked;
  size_t lyapunov_violations;
  bool passed;
} DsmcAudit;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or null. The pointer
// stays valid until the next failing call on the same thread.
const char *dsmc_last_error(void);

// Parses a scenario from a NUL-terminated JSON document.
//
// # Safety
// `json` must be a valid C string and `out` a valid pointer.
enum DsmcStatus dsmc_scenario_from_json(const char *json, struct DsmcScenario **out);

// # Safety
// `path` must be a valid C string and `out` a valid pointer.
enum DsmcStatus dsmc_scenario_from_file(const char *path, struct DsmcScenario **out);

// # Safety
// `scenario` must come from a `dsmc_scenario_from_*` call or be null.
void dsmc_scenario_free(struct DsmcScenario *scenario);

// Simulates the scenario. On `Aborted` the partial trace is still stored
// in `out` and must be freed.
//
// # Safety
// `scenario` must be a live handle and `out` a valid pointer.
enum DsmcStatus dsmc_run(const struct DsmcScenario *scenario, struct DsmcTrace **out);

// # Safety
// `path` must be a valid C string and `out` a valid pointer.
enum DsmcStatus dsmc_trace_read_csv(const char *path, struct DsmcTrace **out);

// # Safety
// `trace` must be a live handle and `path` a valid C string.
enum DsmcStatus dsmc_trace_write_csv(const struct DsmcTrace *trace, const char *path);

// Number of samples; 0 for a null handle.
//
// # Safety
// `trace` must be a live handle or null.
size_t dsmc_trace_len(const struct DsmcTrace *trace);

// Number of columns per sample; 0 for a null handle.
//
// # Safety
// `trace` must be a live handle or null.
size_t dsmc_trace_columns(const struct DsmcTrace *trace);

// Column header, owned by the trace; null when out of range.
//
// # Safety
// `trace` must be a live handle or null.
const char *dsmc_trace_column_name(const struct DsmcTrace *trace, size_t column);

// Copies sample `row` into `values`, which holds `len` doubles and must
// have room for every column.
//
// # Safety
// `trace` must be a live handle and `values` valid for `len` writes.
enum DsmcStatus dsmc_trace_row(const struct DsmcTrace *trace,
                               size_t row,
                               double *values,
                               size_t len);

// # Safety
// `trace` must come from this library or be null.
void dsmc_trace_free(struct DsmcTrace *trace);

// # Safety
// `scenario` must be a live handle and `out` a valid pointer.
enum DsmcStatus dsmc_certify(const struct DsmcScenario *scenario,
                             double phi,
                             struct DsmcCertificate *out);

// Audits `trace` against `scenario` with default settings.
//
// # Safety
// Both handles must be live and `out` a valid pointer.
enum DsmcStatus dsmc_audit(const struct DsmcScenario *scenario,
                           const struct DsmcTrace *trace,
                           struct DsmcAudit *out);

// `e^{A t}` for a row-major `n × n` matrix.
//
// # Safety
// `a` and `out` must each hold `n * n` doubles.
enum DsmcStatus dsmc_mat_exp(size_t n, const double *a, double t, double *out);

// Solves `AᵀP + PA = −I` for Hurwitz `A` (row-major, `n × n`).
//
// # Safety
// `a` and `out` must each hold `n * n` doubles.
enum DsmcStatus dsmc_solve_lyapunov(size_t n, const double *a, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DELAYSMC_H */
