#include <math.h>
#include <stdio.h>
#include <string.h>

#include "latprog.h"

int main(int argc, char **argv) {
    if (argc != 2) {
        return 2;
    }
    double a[2] = {1.0, 0.0}, b[2] = {0.0, 1.0}, d = 0.0;
    if (lp_normalized_cosine_distance(a, b, 2, &d) != LP_STATUS_OK || fabs(d - sqrt(2.0)) > 1e-12) {
        return 3;
    }
    double u[5] = {0.2, 0.2, 0.2, 0.2, 0.2}, progress = 0.0, stable = 0.0;
    if (lp_progression_risk(u, u, &progress, &stable) != LP_STATUS_OK || fabs(progress - 0.24) > 1e-12) {
        return 4;
    }
    LpDictionary *dict = NULL;
    if (lp_dictionary_load(argv[1], &dict) != LP_STATUS_OK) {
        fprintf(stderr, "%s\n", lp_last_error());
        return 5;
    }
    double q[2] = {1.0, 0.1}, w[2];
    LpStatus s = lp_extrapolate(dict, q, 2, 1, 12, LP_SCALING_AS_WRITTEN, w, 2);
    lp_dictionary_free(dict);
    if (s != LP_STATUS_OK) {
        return 6;
    }
    printf("%.6f %.6f\n", w[0], w[1]);
    return lp_dictionary_load("/nonexistent/file", &dict) == LP_STATUS_IO && dict == NULL && strlen(lp_last_error()) > 0 ? 0 : 7;
}
