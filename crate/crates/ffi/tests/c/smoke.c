#include <math.h>
#include <stdio.h>
#include <stdlib.h>
#include <string.h>

#include "convexflows.h"

#define CHECK(cond)                                                    \
  do {                                                                 \
    if (!(cond)) {                                                     \
      fprintf(stderr, "%s:%d: check failed: %s\n", __FILE__, __LINE__, \
              #cond);                                                  \
      return 1;                                                        \
    }                                                                  \
  } while (0)

int main(void) {
  CfProblem *problem = NULL;
  CHECK(cf_generate_preset(1, true, &problem) == CF_OK);
  CHECK(cf_problem_num_nodes(problem) == 3);

  CfSolverOptions opts = cf_solver_options_default();
  opts.tol_gap = 1e-9;
  CfResult *result = NULL;
  CHECK(cf_solve(problem, &opts, &result) == CF_OK);
  CHECK(cf_result_status(result) == CF_STATUS_OPTIMAL);
  CHECK(cf_result_relative_gap(result) <= 1e-9);

  size_t needed = 0;
  CHECK(cf_result_nu(result, NULL, 0, &needed) == CF_ERR_BUFFER);
  CHECK(needed == 3);
  double nu[3];
  CHECK(cf_result_nu(result, nu, 3, &needed) == CF_OK);
  for (int i = 0; i < 3; i++) CHECK(isfinite(nu[i]) && nu[i] >= 0.0);

  char *json = NULL;
  CHECK(cf_result_to_json(result, &json) == CF_OK);
  CHECK(strstr(json, "\"status\": \"optimal\"") != NULL);
  cf_string_free(json);

  CfProblem *bad = NULL;
  CHECK(cf_problem_from_json("{\"nodes\": 1}", &bad) == CF_ERR_INVALID);
  CHECK(bad == NULL);
  CHECK(cf_last_error_message() != NULL);

  cf_result_free(result);
  cf_problem_free(problem);
  puts("ok");
  return 0;
}
