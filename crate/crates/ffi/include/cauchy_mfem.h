/* C interface to the mixed finite element data-completion solver. */

#ifndef CAUCHY_MFEM_H
#define CAUCHY_MFEM_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Outcome of a call. Nonzero values partition the failures the same
// way the command-line driver's exit codes do, plus the two purely
// interfacial conditions.
typedef enum CauchyStatus {
  // The call succeeded.
  CAUCHY_STATUS_OK = 0,
  // Runtime failure: I/O, or a point outside the mesh.
  CAUCHY_STATUS_RUNTIME = 1,
  // The linear or outer solver failed.
  CAUCHY_STATUS_SOLVER = 2,
  // Invalid configuration or arguments.
  CAUCHY_STATUS_CONFIG = 3,
  // A required pointer was null.
  CAUCHY_STATUS_NULL_POINTER = 4,
  // An internal invariant failed; the handle is still valid.
  CAUCHY_STATUS_PANIC = 5,
} CauchyStatus;

// Benchmark selector accepted by [`cauchy_problem_new`].
typedef enum CauchyCase {
  // Harmonic mode with data on the bottom edge, Dirichlet values
  // also on the lateral edges.
  CAUCHY_CASE_HADAMARD1 = 0,
  // Harmonic mode with all data confined to the bottom edge.
  CAUCHY_CASE_HADAMARD2 = 1,
  // All-boundary Dirichlet validation problem.
  CAUCHY_CASE_WELLPOSED = 2,
} CauchyCase;

// Discretization selector accepted by [`cauchy_solve`].
typedef enum CauchyVariant {
  // Equal-order stabilized pair (first order only).
  CAUCHY_VARIANT_INF_SUP = 0,
  // Reduced-flux pair with the gradient-penalty dual stabilizer.
  CAUCHY_VARIANT_WELL_BALANCED = 1,
  // Least-squares reduction without a multiplier.
  CAUCHY_VARIANT_REDUCED = 2,
  // Defect-correction iteration toward the equal-order target.
  CAUCHY_VARIANT_DEFECT = 3,
} CauchyVariant;

// Opaque benchmark description: geometry, data layout, coefficients,
// and the noise model.
typedef struct CauchyProblem CauchyProblem;

// Opaque solved state: the discrete spaces and the reconstructed
// fields on one mesh.
typedef struct CauchySolution CauchySolution;

// Scalar summary of one solve, mirroring one row of the CSV schema.
typedef struct CauchyReport {
  // Largest element diameter of the mesh.
  double h;
  double rel_l2_global;
  // Relative L2 error on the half of the domain nearest the data.
  double rel_l2_local;
  double rel_h1s_global;
  double rel_h1s_local;
  // Stabilizer-plus-residual norm of the discrete error pair.
  double tnorm_residual;
  // Broken 1,h norm of the multiplier (zero without one).
  double multiplier_norm_1h;
  // Largest elementwise balance defect of the flux.
  double max_conservation_residual;
  // L2 mismatch of the flux trace against the prescribed datum.
  double boundary_flux_error;
  size_t dof_scalar;
  size_t dof_flux;
  size_t dof_multiplier;
  // Outer iterations (1 for the single linear solves).
  size_t outer_iterations;
} CauchyReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Version of the library as a static NUL-terminated string.
const char *cauchy_version(void);

// Copy the most recent failure message of this thread into `buf`
// (NUL-terminated, truncated to `cap` bytes including the NUL) and
// return the full message length in bytes. With a null `buf` or zero
// `cap`, only the length is reported.
size_t cauchy_last_error(char *buf, size_t cap);

// Create a benchmark problem. `n` is the mode number of the harmonic
// benchmarks (must be >= 1) and is ignored by the well-posed case.
// On success `*out` owns the handle; release it with
// [`cauchy_problem_free`].
enum CauchyStatus cauchy_problem_new(enum CauchyCase case_, size_t n, struct CauchyProblem **out);

// Attach multiplicative noise of relative amplitude `delta` to the
// flux datum, drawn reproducibly from `seed`. Amplitude zero restores
// the clean data.
enum CauchyStatus cauchy_problem_set_noise(struct CauchyProblem *problem,
                                           double delta,
                                           uint64_t seed);

// Release a problem handle. Null is ignored.
void cauchy_problem_free(struct CauchyProblem *problem);

// Solve the problem on an `nx` by `ny` crossed grid with primal order
// `k` (1 or 2) and gradient-penalty weight `gamma_t`, then attach the
// error report against the benchmark's exact solution. On success
// `*out` owns the handle; release it with [`cauchy_solution_free`].
enum CauchyStatus cauchy_solve(const struct CauchyProblem *problem,
                               size_t k,
                               enum CauchyVariant variant,
                               double gamma_t,
                               size_t nx,
                               size_t ny,
                               struct CauchySolution **out);

// Fill `*out` with the scalar summary of a solve.
enum CauchyStatus cauchy_solution_report(const struct CauchySolution *solution,
                                         struct CauchyReport *out);

// Evaluate the reconstructed fields at a point of the closed domain:
// the scalar into `*u`, the flux components into `*px` and `*py`.
// Each output pointer may be null to skip that value. A point outside
// the mesh is a runtime error and leaves the outputs untouched.
enum CauchyStatus cauchy_solution_eval(const struct CauchySolution *solution,
                                       double x,
                                       double y,
                                       double *u,
                                       double *px,
                                       double *py);

// Release a solution handle. Null is ignored.
void cauchy_solution_free(struct CauchySolution *solution);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CAUCHY_MFEM_H */
