/* Critical diffusion and order parameter through the C interface.
 *
 *   cargo build --release -p swarm-hydro-ffi
 *   cc -I crates/ffi/include crates/ffi/examples/phase.c \
 *      target/release/libswarm_hydro_ffi.a -lm -lpthread -ldl -o phase
 */
#include <stdio.h>

#include "swarm_hydro.h"

int main(void) {
    ShPotential *pot = NULL;
    if (sh_potential_parse("quartic:alpha=1,beta=1", &pot) != SH_STATUS_OK) {
        fprintf(stderr, "%s\n", sh_last_error_message());
        return 1;
    }
    double sigma0 = 0.0;
    if (sh_find_sigma0(pot, 2, &sigma0) != SH_STATUS_OK) {
        fprintf(stderr, "%s\n", sh_last_error_message());
        sh_potential_free(pot);
        return 1;
    }
    printf("swarm-hydro %s: sigma0 = %.12f\n", sh_version(), sigma0);
    for (int k = 1; k <= 6; ++k) {
        double sigma = 0.05 * k, l = 0.0;
        if (sh_find_l_star(pot, 2, sigma, &l) == SH_STATUS_OK) {
            printf("sigma = %.2f  l = %.6f\n", sigma, l);
        }
    }
    ShPotential *zero = NULL;
    sh_potential_zero(&zero);
    ShStatus st = sh_find_sigma0(zero, 2, &sigma0);
    printf("zero potential: status %d (%s)\n", (int)st, sh_last_error_message());
    sh_potential_free(zero);
    sh_potential_free(pot);
    return 0;
}
