#include "arnold_cert.h"
#include <stdio.h>

int main(void) {
    AcParams *p = NULL;
    if (ac_params_new(0.3, 1.4, 1.0, &p) != AC_STATUS_OK) {
        return 1;
    }
    AcMixing *c = NULL;
    if (ac_certify_mixing(p, 64, 10, &c) != AC_STATUS_OK) {
        return 2;
    }
    double lo, hi;
    ac_mixing_alpha(c, &lo, &hi);
    printf("%zu %.17g %.17g\n", ac_mixing_n(c), lo, hi);
    ac_mixing_free(c);
    ac_params_free(p);
    return 0;
}
