#ifndef CONEREG_H
#define CONEREG_H

#include <stddef.h>
#include <stdint.h>

// Result code of every call.
typedef enum ConeregStatus {
  CONEREG_STATUS_OK = 0,
  CONEREG_STATUS_NULL_POINTER = 1,
  CONEREG_STATUS_INVALID_ARGUMENT = 2,
  CONEREG_STATUS_INVALID_SIGNAL = 3,
  CONEREG_STATUS_UNKNOWN_SOLVER = 4,
  // A factorisation or update hit a (near) singular matrix.
  CONEREG_STATUS_NUMERICAL = 5,
  // The solver diverged or stalled.
  CONEREG_STATUS_NOT_CONVERGED = 6,
  CONEREG_STATUS_BUFFER_TOO_SMALL = 7,
  CONEREG_STATUS_INTERNAL = 8,
} ConeregStatus;

// Why a solve stopped.
typedef enum ConeregTermination {
  CONEREG_TERMINATION_CONVERGED = 0,
  CONEREG_TERMINATION_REFERENCE_REACHED = 1,
  CONEREG_TERMINATION_ITERATION_LIMIT = 2,
  CONEREG_TERMINATION_TIME_BUDGET = 3,
  CONEREG_TERMINATION_INEXACT = 4,
} ConeregTermination;

// Opaque regression problem.
typedef struct ConeregProblem ConeregProblem;

// Opaque solve result.
typedef struct ConeregSolution ConeregSolution;

// Solve options. Start from [`conereg_options_default`].
typedef struct ConeregOptions {
  uint64_t max_iterations;
  // Threshold on the scaled KKT residuals; must be positive.
  double stop_tolerance;
  // Thread CPU seconds; zero or negative means unlimited.
  double cpu_budget;
} ConeregOptions;

// Scaled KKT residuals of a solution.
typedef struct ConeregCertificate {
  double primal;
  double dual;
  double complementarity;
  double stationarity;
} ConeregCertificate;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static NUL-terminated string.
const char *conereg_version(void);

// Copy the calling thread's last error message into `buf` (NUL
// terminated, truncated to `len`). Returns the full message length
// excluding the terminator.
//
// # Safety
// `buf` must be null or valid for `len` writes.
size_t conereg_last_error(char *buf, size_t len);

struct ConeregOptions conereg_options_default(void);

// Build a problem from `n` abscissae `z` (strictly increasing),
// observations `y` and weights `w` (null for unit weights).
//
// # Safety
// `z` and `y` must be valid for `n` reads, `w` null or valid for `n`
// reads, `out` valid for one write.
enum ConeregStatus conereg_problem_new(const double *z,
                                       const double *y,
                                       const double *w,
                                       size_t n,
                                       struct ConeregProblem **out);

// # Safety
// `problem` must be null or a handle from [`conereg_problem_new`] not yet
// freed.
void conereg_problem_free(struct ConeregProblem *problem);

// Number of points of a problem (0 for null).
//
// # Safety
// `problem` must be null or a live handle.
size_t conereg_problem_len(const struct ConeregProblem *problem);

// Solve with the named solver (for example `"mpdb-pav"` or `"admm"`).
// `options` may be null for defaults. A run that stops on its budget still
// returns `Ok`; inspect [`conereg_solution_termination`].
//
// # Safety
// `problem` must be a live handle, `solver` a NUL-terminated string,
// `options` null or valid, `out` valid for one write.
enum ConeregStatus conereg_solve(const struct ConeregProblem *problem,
                                 const char *solver,
                                 const struct ConeregOptions *options,
                                 struct ConeregSolution **out);

// # Safety
// `solution` must be null or a handle from [`conereg_solve`] not yet freed.
void conereg_solution_free(struct ConeregSolution *solution);

// Number of fitted values (0 for null).
//
// # Safety
// `solution` must be null or a live handle.
size_t conereg_solution_len(const struct ConeregSolution *solution);

// Number of multipliers, one per constraint (0 for null).
//
// # Safety
// `solution` must be null or a live handle.
size_t conereg_solution_constraints(const struct ConeregSolution *solution);

// Copy the fitted values into `buf`, which must hold
// [`conereg_solution_len`] doubles.
//
// # Safety
// `solution` must be a live handle and `buf` valid for `len` writes.
enum ConeregStatus conereg_solution_x(const struct ConeregSolution *solution,
                                      double *buf,
                                      size_t len);

// Copy the multipliers into `buf`, which must hold
// [`conereg_solution_constraints`] doubles.
//
// # Safety
// `solution` must be a live handle and `buf` valid for `len` writes.
enum ConeregStatus conereg_solution_lambda(const struct ConeregSolution *solution,
                                           double *buf,
                                           size_t len);

// # Safety
// `solution` must be a live handle and `out` valid for one write.
enum ConeregStatus conereg_solution_termination(const struct ConeregSolution *solution,
                                                enum ConeregTermination *out);

// # Safety
// `solution` must be a live handle and `out` valid for one write.
enum ConeregStatus conereg_solution_certificate(const struct ConeregSolution *solution,
                                                struct ConeregCertificate *out);

// Iterations (or active-set steps) performed; 0 for null.
//
// # Safety
// `solution` must be null or a live handle.
uint64_t conereg_solution_iterations(const struct ConeregSolution *solution);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CONEREG_H */
