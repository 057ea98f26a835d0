/* Minimal consumer of the C interface: solve the well-posed
 * validation problem on a coarse grid and probe the result.
 *
 * Build from the repository root:
 *   cargo build -p cauchy-mfem-ffi
 *   cc -std=c99 -I crates/ffi/include crates/ffi/examples/reconstruct.c \
 *      target/debug/libcauchy_mfem_ffi.a -lm -o reconstruct
 */

#include "cauchy_mfem.h"
#include <stdio.h>

int main(void) {
    CauchyProblem *problem = NULL;
    if (cauchy_problem_new(CAUCHY_CASE_WELLPOSED, 1, &problem) != CAUCHY_STATUS_OK) return 1;
    CauchySolution *solution = NULL;
    if (cauchy_solve(problem, 1, CAUCHY_VARIANT_WELL_BALANCED, 0.0, 6, 6, &solution) != CAUCHY_STATUS_OK) return 2;
    CauchyReport report;
    if (cauchy_solution_report(solution, &report) != CAUCHY_STATUS_OK) return 3;
    double u;
    if (cauchy_solution_eval(solution, 0.5, 0.5, &u, NULL, NULL) != CAUCHY_STATUS_OK) return 4;
    printf("version %s  h %.4f  rel_l2 %.3e  u(0.5,0.5) %.6f\n", cauchy_version(), report.h, report.rel_l2_global, u);
    cauchy_solution_free(solution);
    cauchy_problem_free(problem);
    return 0;
}
