#ifndef MIXCURV_H
#define MIXCURV_H

/* Generated by cbindgen from the mixcurv-ffi crate; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result code returned by every fallible entry point.
typedef enum MixcurvStatus {
  // The call succeeded.
  MIXCURV_STATUS_OK = 0,
  // A required pointer argument was NULL.
  MIXCURV_STATUS_NULL_POINTER = 1,
  // A configuration value or string argument was rejected.
  MIXCURV_STATUS_INVALID_ARGUMENT = 2,
  // A requested scenario name is not in the catalog.
  MIXCURV_STATUS_UNKNOWN_SCENARIO = 3,
  // The engine failed while building or sweeping a scenario.
  MIXCURV_STATUS_ENGINE_ERROR = 4,
  // An internal panic was caught at the ABI boundary.
  MIXCURV_STATUS_PANIC = 5,
} MixcurvStatus;

// Sign convention for the squared horizontal mean-curvature term in the
// mixed scalar curvature identity.
typedef enum MixcurvSign {
  // Resolve the sign numerically from internal probe scenarios.
  MIXCURV_SIGN_AUTO = 0,
  // Force the `+|xi_H|^2` variant.
  MIXCURV_SIGN_PLUS = 1,
  // Force the `-|xi_H|^2` variant.
  MIXCURV_SIGN_MINUS = 2,
} MixcurvSign;

// Opaque handle to a completed verification run.
typedef struct MixcurvRun MixcurvRun;

// Verification run parameters; obtain defaults with
// [`mixcurv_config_default`].
typedef struct MixcurvConfig {
  // Grid nodes per chart axis for the identity sweep.
  size_t grid_n;
  // Seeded random interior points added to the sweep.
  size_t points;
  // Seed for the random point stream.
  uint64_t seed;
  // Max |residual| an evaluated identity may reach and still pass.
  double tol;
  // Hypothesis gate threshold for the specialized identities.
  double gate_tol;
  // Sign convention for the squared horizontal mean-curvature term.
  enum MixcurvSign xi_h_sign;
} MixcurvConfig;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static NUL-terminated string; never freed.
const char *mixcurv_version(void);

// Number of scenarios in the built-in catalog.
size_t mixcurv_builtin_count(void);

// Writes the name of built-in scenario `index` (in catalog order) to
// `out`; free the string with [`mixcurv_string_free`].
//
// # Safety
//
// `out` must be a valid pointer to writable memory for one `char *`.
enum MixcurvStatus mixcurv_builtin_name(size_t index, char **out);

// Fills `out` with the default run parameters (33 grid nodes per axis,
// 100 random points, seed 42, tolerances 1e-8, automatic sign).
//
// # Safety
//
// `out` must be a valid pointer to writable memory for one
// `MixcurvConfig`.
enum MixcurvStatus mixcurv_config_default(struct MixcurvConfig *out);

// Verifies scenarios and writes a run handle to `out` on success.
//
// `names`/`names_len` select scenarios by catalog name; pass
// `names_len == 0` (with `names` possibly NULL) to run the whole
// catalog. `config` may be NULL for the defaults. A completed run with
// failing residuals is still `MIXCURV_STATUS_OK`; inspect it with
// [`mixcurv_run_overall_pass`]. Release the handle with
// [`mixcurv_run_free`].
//
// # Safety
//
// `out` must be a valid pointer to writable memory for one
// `MixcurvRun *`. If non-NULL, `config` must point to a valid
// `MixcurvConfig` and `names` to `names_len` valid NUL-terminated
// strings.
enum MixcurvStatus mixcurv_run(const struct MixcurvConfig *config,
                               const char *const *names,
                               size_t names_len,
                               struct MixcurvRun **out);

// Writes whether every scenario in the run passed.
//
// # Safety
//
// `run` must be a handle from [`mixcurv_run`] that has not been freed;
// `out` must be a valid pointer to writable memory for one `bool`.
enum MixcurvStatus mixcurv_run_overall_pass(const struct MixcurvRun *run, bool *out);

// Writes the number of scenarios covered by the run.
//
// # Safety
//
// `run` must be a handle from [`mixcurv_run`] that has not been freed;
// `out` must be a valid pointer to writable memory for one `size_t`.
enum MixcurvStatus mixcurv_run_scenario_count(const struct MixcurvRun *run, size_t *out);

// Writes the name of scenario `index` within the run to `out`; free
// the string with [`mixcurv_string_free`].
//
// # Safety
//
// `run` must be a handle from [`mixcurv_run`] that has not been freed;
// `out` must be a valid pointer to writable memory for one `char *`.
enum MixcurvStatus mixcurv_run_scenario_name(const struct MixcurvRun *run,
                                             size_t index,
                                             char **out);

// Writes whether scenario `index` within the run passed.
//
// # Safety
//
// `run` must be a handle from [`mixcurv_run`] that has not been freed;
// `out` must be a valid pointer to writable memory for one `bool`.
enum MixcurvStatus mixcurv_run_scenario_pass(const struct MixcurvRun *run, size_t index, bool *out);

// Writes the full run report as pretty-printed JSON; free the string
// with [`mixcurv_string_free`].
//
// # Safety
//
// `run` must be a handle from [`mixcurv_run`] that has not been freed;
// `out` must be a valid pointer to writable memory for one `char *`.
enum MixcurvStatus mixcurv_run_report_json(const struct MixcurvRun *run, char **out);

// Writes the run report as the human-readable table; free the string
// with [`mixcurv_string_free`].
//
// # Safety
//
// `run` must be a handle from [`mixcurv_run`] that has not been freed;
// `out` must be a valid pointer to writable memory for one `char *`.
enum MixcurvStatus mixcurv_run_report_text(const struct MixcurvRun *run, char **out);

// Returns a heap copy of the most recent error message on this thread,
// or NULL if no call has failed; free it with [`mixcurv_string_free`].
char *mixcurv_last_error_message(void);

// Releases a string returned by this library; NULL is a no-op.
//
// # Safety
//
// `s` must be a string obtained from this library that has not already
// been freed.
void mixcurv_string_free(char *s);

// Releases a run handle; NULL is a no-op.
//
// # Safety
//
// `run` must be a handle obtained from [`mixcurv_run`] that has not
// already been freed.
void mixcurv_run_free(struct MixcurvRun *run);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MIXCURV_H */
