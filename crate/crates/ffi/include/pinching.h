#ifndef PINCHING_H
#define PINCHING_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum PinchingStatus {
  PINCHING_STATUS_OK = 0,
  PINCHING_STATUS_NULL_POINTER = 1,
  PINCHING_STATUS_INVALID_UTF8 = 2,
  PINCHING_STATUS_INVALID_CONFIG = 3,
  PINCHING_STATUS_NUMERICAL = 4,
  PINCHING_STATUS_BUFFER_TOO_SMALL = 5,
  PINCHING_STATUS_PANIC = 6,
} PinchingStatus;

/**
 * A validated scenario: constants, waveguide layout and users.
 */
typedef struct PinchingScenario PinchingScenario;

/**
 * Result of the proposed solver.
 */
typedef struct PinchingSolution PinchingSolution;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or an empty string. The
 * pointer stays valid until the next failing call on the same thread.
 */
const char *pinching_last_error(void);

/**
 * Builds a scenario from TOML text using the same keys as the CLI config.
 * An empty string gives the default scenario.
 */
enum PinchingStatus pinching_scenario_from_toml(const char *toml, struct PinchingScenario **out);

void pinching_scenario_free(struct PinchingScenario *scenario);

/**
 * Number of TPAs, or 0 for a null handle.
 */
size_t pinching_scenario_num_tpas(const struct PinchingScenario *scenario);

/**
 * Number of users, or 0 for a null handle.
 */
size_t pinching_scenario_num_users(const struct PinchingScenario *scenario);

/**
 * Minimum total power in watts with the TPAs at `x[0..len]`, `len` equal to
 * the number of TPAs.
 */
enum PinchingStatus pinching_objective(const struct PinchingScenario *scenario,
                                       const double *x,
                                       size_t len,
                                       double *out_power_w);

/**
 * Total power of the fixed-antenna benchmark (every TPA at the centre).
 */
enum PinchingStatus pinching_benchmark_power(const struct PinchingScenario *scenario,
                                             double *out_power_w);

/**
 * Runs the proposed solver with `restarts` extra random L-BFGS starts
 * (ignored for a single TPA) drawn from `restart_seed`.
 */
enum PinchingStatus pinching_solve(const struct PinchingScenario *scenario,
                                   size_t restarts,
                                   uint64_t restart_seed,
                                   struct PinchingSolution **out);

void pinching_solution_free(struct PinchingSolution *solution);

/**
 * Total transmit power in watts, or NaN for a null handle.
 */
double pinching_solution_total_power_w(const struct PinchingSolution *solution);

/**
 * Solver iterations, or 0 for a null handle.
 */
size_t pinching_solution_iterations(const struct PinchingSolution *solution);

/**
 * Whether the solver met its stopping tolerance.
 */
bool pinching_solution_converged(const struct PinchingSolution *solution);

/**
 * Copies the optimized TPA positions into `out[0..len]`; `len` must be at
 * least the number of TPAs.
 */
enum PinchingStatus pinching_solution_positions(const struct PinchingSolution *solution,
                                                double *out,
                                                size_t len);

/**
 * Copies user `user`'s beamformer into `out[0..len]` as interleaved
 * (re, im) pairs; `len` must be at least twice the number of TPAs.
 */
enum PinchingStatus pinching_solution_beamformer(const struct PinchingSolution *solution,
                                                 size_t user,
                                                 double *out,
                                                 size_t len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PINCHING_H */
