#include <math.h>
#include <stdio.h>
#include "ldp.h"

static int check(LdpStatus s, const char *what) {
    if (s != LDP_STATUS_OK) {
        const char *msg = ldp_last_error();
        fprintf(stderr, "%s failed (%d): %s\n", what, (int)s, msg ? msg : "?");
        return 1;
    }
    return 0;
}

int main(void) {
    LdpKernel *k = NULL;
    LdpHamiltonian *h = NULL;
    if (check(ldp_kernel_from_json("{\"family\": \"compact_uniform\", \"params\": {\"rho\": 1}}", &k), "kernel")) return 1;
    if (check(ldp_hamiltonian_new(k, false, &h), "hamiltonian")) return 1;
    ldp_kernel_free(k);

    double p = 1.0, hv = 0.0, q = 3.0, lv = 0.0, p0 = 0.0, kinv = 0.0;
    if (check(ldp_hamiltonian_value(h, &p, 1, &hv), "value")) return 1;
    if (check(ldp_lagrangian(h, &q, 1, &lv, &p0), "lagrangian")) return 1;
    printf("H(1) = %.12f\n", hv);
    printf("L(3) = %.12f at p0 = %.12f\n", lv, p0);

    LdpKernel *asym = NULL;
    if (check(ldp_kernel_from_json("{\"family\": \"asymmetric_1d_demo\"}", &asym), "demo")) return 1;
    LdpStatus s = ldp_k_inverse(asym, 7.0, &kinv);
    printf("kinv status %d: %s\n", (int)s, ldp_last_error());
    ldp_kernel_free(asym);
    ldp_hamiltonian_free(h);

    if (fabs(hv - (sinh(1.0) - 1.0)) > 1e-10) return 2;
    if (s != LDP_STATUS_ASYMMETRIC_KERNEL) return 3;
    return 0;
}
