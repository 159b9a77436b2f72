#include <math.h>
#include <stdio.h>
#include "diffsurv.h"

int main(void) {
    DsSchedule *s = NULL;
    if (ds_schedule_new(DS_NETWORK_ODD_EVEN, 2, &s) != DS_STATUS_OK) return 1;

    double scores[2] = {0.3, -0.4}, times[2] = {1.0, 2.0}, grad[2], loss;
    uint8_t events[2] = {1, 1};
    if (ds_diffsurv_loss(s, DS_RELAXATION_LOGISTIC, 1.0, scores, times, events, &loss, grad) != DS_STATUS_OK) return 2;
    ds_schedule_free(s);
    if (fabs(loss - log1p(exp(-0.7))) > 1e-12) return 3;

    if (ds_schedule_new(DS_NETWORK_BITONIC, 6, &s) != DS_STATUS_INVALID_ARGUMENT) return 4;
    printf("%s\n", ds_last_error());
    return 0;
}
