#include <math.h>
#include <stdio.h>
#include <stdlib.h>

#include "mimqnd.h"

#define CHECK(cond)                                                     \
    do {                                                                \
        if (!(cond)) {                                                  \
            fprintf(stderr, "failed: %s (%s)\n", #cond,                 \
                    mimqnd_last_error_message());                       \
            return 1;                                                   \
        }                                                               \
    } while (0)

int main(void) {
    MimqndParams *p = NULL;
    CHECK(mimqnd_params_reference(2, &p) == MIMQND_STATUS_OK);

    MimqndBudget b;
    CHECK(mimqnd_jump_budget(p, &b) == MIMQND_STATUS_OK);
    CHECK(fabs(b.snr - 3.97) < 0.01);
    CHECK(b.flags.good_cavity == 1);

    CHECK(mimqnd_params_set(p, "r_c", 1.5) == MIMQND_STATUS_OK);
    CHECK(mimqnd_jump_budget(p, &b) != MIMQND_STATUS_OK);
    CHECK(mimqnd_last_error_message()[0] != '\0');
    CHECK(mimqnd_params_set(p, "r_c", 0.9999) == MIMQND_STATUS_OK);

    MimqndTrajectory *t = NULL;
    CHECK(mimqnd_trajectory_simulate(p, 1e-3, 42, true, 0, &t) == MIMQND_STATUS_OK);
    size_t n = mimqnd_trajectory_event_count(t);
    double *times = malloc(n * sizeof(double) + 1);
    uint64_t *levels = malloc(n * sizeof(uint64_t) + 1);
    CHECK(mimqnd_trajectory_events(t, times, levels, n) == MIMQND_STATUS_OK);
    for (size_t i = 1; i < n; i++) CHECK(times[i] > times[i - 1]);

    free(times);
    free(levels);
    mimqnd_trajectory_free(t);
    mimqnd_params_free(p);
    printf("ok %s %zu\n", mimqnd_version(), n);
    return 0;
}
