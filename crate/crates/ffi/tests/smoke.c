#include <stdio.h>
#include <string.h>
#include "hplk.h"

#define CHECK(x) do { if (!(x)) { fprintf(stderr, "failed: %s (line %d)\n", #x, __LINE__); return 1; } } while (0)

int main(int argc, char **argv) {
    HplkComplex n = {1.5, 0.0}, lambda = {0.3, 0.0}, mu = {0.8, 0.0}, xi;
    HplkSeries *s = NULL;
    CHECK(hplk_series_entire(n, lambda, mu, 1e-12, 40, &s, &xi) == HPLK_STATUS_OK);
    int64_t first, last;
    CHECK(hplk_series_range(s, &first, &last) == HPLK_STATUS_OK);
    CHECK(first == 0 && last >= 40);
    HplkComplex a0;
    CHECK(hplk_series_coeff(s, 0, &a0) == HPLK_STATUS_OK);
    HplkComplex v, dv, zero = {0.0, 0.0};
    CHECK(hplk_series_eval(s, zero, &v, &dv) == HPLK_STATUS_OK);
    CHECK(v.re == a0.re && v.im == a0.im);
    hplk_series_free(s);

    HplkRotation r;
    CHECK(hplk_rotation_number(-1.0, 0.5, 0.5, 1e-6, &r) == HPLK_STATUS_INVALID_ARGUMENT);
    char msg[128];
    CHECK(hplk_last_error(msg, sizeof msg) > 0 && strlen(msg) > 0);
    CHECK(hplk_rotation_number(2.0, 0.0, 0.5, 1e-6, &r) == HPLK_STATUS_OK);
    CHECK(r.locked && r.rho == 0.0);

    HplkPortrait *p = NULL;
    CHECK(hplk_portrait_scan(2.0, -1.0, 1.0, 3, 0.5, 1.0, 2, 1e-6, &p) == HPLK_STATUS_OK);
    size_t nb, na;
    CHECK(hplk_portrait_dims(p, &nb, &na) == HPLK_STATUS_OK && nb == 3 && na == 2);
    HplkCell cell;
    CHECK(hplk_portrait_cell(p, 1, 1, &cell) == HPLK_STATUS_OK && cell.locked && cell.b == 0.0);
    CHECK(hplk_portrait_cell(p, 3, 0, &cell) == HPLK_STATUS_INVALID_ARGUMENT);
    if (argc > 1) CHECK(hplk_portrait_write(p, argv[1], HPLK_FORMAT_BINARY) == HPLK_STATUS_OK);
    hplk_portrait_free(p);
    printf("%s ok\n", hplk_version());
    return 0;
}
