#include <stdio.h>

#include "predlab.h"

int main(void) {
    PredlabModel *m = NULL;
    if (predlab_model_from_scenario("polya_urn", &m) != PREDLAB_STATUS_OK) {
        fprintf(stderr, "%s\n", predlab_last_error());
        return 1;
    }
    const double prefix[] = {1, 1, 1, 1, 1, 0, 1, 1, 1};
    double v = 0.0;
    PredlabStatus s = predlab_enumerate_predictive(m, prefix, 3, "c2:ind{1}", &v);
    if (s != PREDLAB_STATUS_OK) {
        fprintf(stderr, "%s\n", predlab_last_error());
        predlab_model_free(m);
        return 1;
    }
    printf("%f\n", v);
    if (predlab_model_point_dim(NULL, NULL) != PREDLAB_STATUS_NULL_POINTER) {
        return 1;
    }
    predlab_model_free(m);
    return 0;
}
