#include <math.h>
#include <stdio.h>
#include "evarkit.h"

int main(void) {
    const double xs[] = {-2, -1, 0, 1, 2};
    EvkHypothesis *h = NULL;
    if (evk_hypothesis_builtin("{\"kind\": \"mean_var\", \"params\": {\"sigma\": 1}}", xs, 5, &h) != EVK_STATUS_OK) {
        fprintf(stderr, "%s\n", evk_last_error_message());
        return 1;
    }
    const double pi[] = {0, 0, 1};
    EvkEVariable *e = NULL;
    if (evk_evar_from_pi(h, pi, 3, 1e-9, &e) != EVK_STATUS_OK) return 2;
    double value = 0;
    EvkVerdict verdict;
    if (evk_worst_case(e, h, 1e-9, &value, &verdict) != EVK_STATUS_OK) return 3;
    if (verdict != EVK_VERDICT_E_VARIABLE || fabs(value - 1.0) > 1e-12) return 4;
    if (evk_hypothesis_from_json(NULL, &h) != EVK_STATUS_NULL_POINTER) return 5;
    evk_evar_free(e);
    evk_hypothesis_free(h);
    printf("ok %.3f\n", value);
    return 0;
}
