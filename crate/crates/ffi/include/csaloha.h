#ifndef CSALOHA_H
#define CSALOHA_H

/* Generated by cbindgen from crates/ffi/src. Do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes returned by every fallible function.
 */
typedef enum CsaStatus {
  CSA_STATUS_OK = 0,
  CSA_STATUS_NULL_POINTER = 1,
  CSA_STATUS_INVALID_CONFIG = 2,
  CSA_STATUS_PARSE = 3,
  CSA_STATUS_INVALID_ARGUMENT = 4,
  CSA_STATUS_INFEASIBLE = 5,
  CSA_STATUS_BUFFER_TOO_SMALL = 6,
  CSA_STATUS_IO = 7,
  CSA_STATUS_PANIC = 8,
} CsaStatus;

/**
 * Opaque system configuration.
 */
typedef struct CsaConfig CsaConfig;

/**
 * Opaque result of an epsilon sweep.
 */
typedef struct CsaSweep CsaSweep;

/**
 * Outcome of the and-or tree recursion.
 */
typedef struct CsaEvolveSummary {
  double resolution;
  double throughput;
  size_t iterations;
  bool converged;
  double residual;
} CsaEvolveSummary;

/**
 * Aggregate Monte Carlo statistics.
 */
typedef struct CsaTrialSummary {
  size_t trials;
  double mean_resolved_fraction;
  double stderr_resolved_fraction;
  double mean_throughput;
  double stderr_throughput;
} CsaTrialSummary;

/**
 * One optimized operating point. The access matrix is copied separately.
 */
typedef struct CsaOptimum {
  double epsilon;
  double m_over_n;
  double throughput;
  double resolution;
  bool converged;
} CsaOptimum;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failure on this thread, or null if none. The
 * pointer stays valid until the next failing call on the same thread.
 */
const char *csa_last_error(void);

/**
 * Builds a configuration from class arrays. `alpha` is row-major with
 * `num_users * num_slots` entries.
 *
 * # Safety
 * Array pointers must reference at least the stated number of doubles.
 */
enum CsaStatus csa_config_new(size_t num_users,
                              const double *user_fractions,
                              const double *loss_probs,
                              size_t num_slots,
                              const double *slot_fractions,
                              const double *alpha,
                              double epsilon,
                              struct CsaConfig **out);

/**
 * Parses configuration text in the CLI file format.
 *
 * # Safety
 * `text` must be a nul-terminated string.
 */
enum CsaStatus csa_config_parse(const char *text, struct CsaConfig **out);

/**
 * Loads a built-in scenario by name.
 *
 * # Safety
 * `name` must be a nul-terminated string.
 */
enum CsaStatus csa_config_preset(const char *name, struct CsaConfig **out);

/**
 * Releases a configuration. Null is ignored.
 *
 * # Safety
 * `config` must come from a `csa_config_*` constructor and not be freed twice.
 */
void csa_config_free(struct CsaConfig *config);

/**
 * Number of user classes, or 0 for a null handle.
 *
 * # Safety
 * `config` must be null or a live handle.
 */
size_t csa_config_num_user_classes(const struct CsaConfig *config);

/**
 * Number of slot classes, or 0 for a null handle.
 *
 * # Safety
 * `config` must be null or a live handle.
 */
size_t csa_config_num_slot_classes(const struct CsaConfig *config);

/**
 * Replaces epsilon in place.
 *
 * # Safety
 * `config` must be a live handle.
 */
enum CsaStatus csa_config_set_epsilon(struct CsaConfig *config, double epsilon);

/**
 * Replaces the row-major access matrix in place.
 *
 * # Safety
 * `config` must be a live handle; `alpha` must hold `len` doubles.
 */
enum CsaStatus csa_config_set_access(struct CsaConfig *config, const double *alpha, size_t len);

/**
 * Serializes the configuration in the file format. Release the string
 * with [`csa_string_free`].
 *
 * # Safety
 * `config` must be a live handle.
 */
enum CsaStatus csa_config_dump(const struct CsaConfig *config, char **out);

/**
 * Releases a string returned by this library. Null is ignored.
 *
 * # Safety
 * `s` must come from this library and not be freed twice.
 */
void csa_string_free(char *s);

/**
 * Runs the recursion. Per-class resolution probabilities go to
 * `per_class` (may be null) which must hold one value per user class.
 * `max_iter == 0` or `tol <= 0` selects the defaults.
 *
 * # Safety
 * `config` must be a live handle; `per_class` must hold `per_class_len` doubles.
 */
enum CsaStatus csa_evolve(const struct CsaConfig *config,
                          size_t max_iter,
                          double tol,
                          struct CsaEvolveSummary *out,
                          double *per_class,
                          size_t per_class_len);

/**
 * Monte Carlo SIC simulation with `num_users` users. Per-class mean
 * resolved fractions go to `per_class` (may be null).
 *
 * # Safety
 * `config` must be a live handle; `per_class` must hold `per_class_len` doubles.
 */
enum CsaStatus csa_simulate(const struct CsaConfig *config,
                            size_t num_users,
                            size_t trials,
                            uint64_t seed,
                            struct CsaTrialSummary *out,
                            double *per_class,
                            size_t per_class_len);

/**
 * Maximizes throughput over the access matrix at the given epsilon. A
 * `target_pr` that is NaN means unconstrained; otherwise only points with
 * resolution probability at least `target_pr` qualify. The optimal
 * row-major access matrix goes to `alpha_out` (may be null).
 *
 * # Safety
 * `config` must be a live handle; `alpha_out` must hold `alpha_len` doubles.
 */
enum CsaStatus csa_optimize(const struct CsaConfig *config,
                            double epsilon,
                            double alpha_max,
                            double alpha_step,
                            double target_pr,
                            struct CsaOptimum *out,
                            double *alpha_out,
                            size_t alpha_len);

/**
 * Optimizes the access matrix at `eps_steps` evenly spaced epsilons in
 * `[eps_min, eps_max]`. Release the result with [`csa_sweep_free`].
 *
 * # Safety
 * `config` must be a live handle.
 */
enum CsaStatus csa_sweep(const struct CsaConfig *config,
                         double eps_min,
                         double eps_max,
                         size_t eps_steps,
                         double alpha_max,
                         double alpha_step,
                         struct CsaSweep **out);

/**
 * Number of samples in a sweep, or 0 for a null handle.
 *
 * # Safety
 * `sweep` must be null or a live handle.
 */
size_t csa_sweep_len(const struct CsaSweep *sweep);

/**
 * Sample `index` of a sweep, in increasing epsilon order.
 *
 * # Safety
 * `sweep` must be a live handle; `alpha_out` must hold `alpha_len` doubles.
 */
enum CsaStatus csa_sweep_sample(const struct CsaSweep *sweep,
                                size_t index,
                                struct CsaOptimum *out,
                                double *alpha_out,
                                size_t alpha_len);

/**
 * Throughput-maximizing point of a sweep.
 *
 * # Safety
 * `sweep` must be a live handle; `alpha_out` must hold `alpha_len` doubles.
 */
enum CsaStatus csa_sweep_best(const struct CsaSweep *sweep,
                              struct CsaOptimum *out,
                              double *alpha_out,
                              size_t alpha_len);

/**
 * Releases a sweep. Null is ignored.
 *
 * # Safety
 * `sweep` must come from [`csa_sweep`] and not be freed twice.
 */
void csa_sweep_free(struct CsaSweep *sweep);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CSALOHA_H */
