/* Contiguous inner runs of the collision kernels. */
#ifndef KML_INNER_H
#define KML_INNER_H
#include <stddef.h>

static inline void kml_gain_run(const double *restrict pf, const double *restrict pg,
                                double *restrict po, ptrdiff_t run,
                                const ptrdiff_t *restrict so, const double *restrict a,
                                const double *restrict b, double w)
{
    const ptrdiff_t s1 = so[1], s2 = so[2], s3 = so[3], s4 = so[4], s5 = so[5], s6 = so[6], s7 = so[7];
    const double a0 = a[0], a1 = a[1], a2 = a[2], a3 = a[3], a4 = a[4], a5 = a[5], a6 = a[6], a7 = a[7];
    const double b0 = b[0], b1 = b[1], b2 = b[2], b3 = b[3], b4 = b[4], b5 = b[5], b6 = b[6], b7 = b[7];
    for (ptrdiff_t m = 0; m < run; ++m) {
        double fv = a0 * pf[m] + a1 * pf[m + s1] + a2 * pf[m + s2] + a3 * pf[m + s3]
                  + a4 * pf[m + s4] + a5 * pf[m + s5] + a6 * pf[m + s6] + a7 * pf[m + s7];
        double gv = b0 * pg[m] + b1 * pg[m + s1] + b2 * pg[m + s2] + b3 * pg[m + s3]
                  + b4 * pg[m + s4] + b5 * pg[m + s5] + b6 * pg[m + s6] + b7 * pg[m + s7];
        po[m] += w * fv * gv;
    }
}

static inline void kml_axpy_run(const double *restrict pg, double *restrict po, ptrdiff_t run, double k)
{
    for (ptrdiff_t m = 0; m < run; ++m)
        po[m] += k * pg[m];
}

/* One 1-D linear interpolation pass along an axis of an n^3 block.
   stride: element stride of the axis; out[i] = (1-fr) in[i+b] + fr in[i+b+1], zero outside. */
static inline void kml_lerp_pass(const double *restrict in, double *restrict out, ptrdiff_t n,
                                 ptrdiff_t stride, ptrdiff_t b, double fr)
{
    const ptrdiff_t s_outer = (stride == 1) ? n : 1;
    const ptrdiff_t s_mid = (stride == n * n) ? n : n * n;
    const double g = 1.0 - fr;
    for (ptrdiff_t p = 0; p < n; ++p)
        for (ptrdiff_t q = 0; q < n; ++q) {
            const ptrdiff_t off = p * s_mid + q * s_outer;
            for (ptrdiff_t i = 0; i < n; ++i) {
                const ptrdiff_t lo = i + b;
                double acc = 0.0;
                if (lo >= 0 && lo < n) acc = g * in[off + lo * stride];
                if (fr != 0.0 && lo + 1 >= 0 && lo + 1 < n) acc += fr * in[off + (lo + 1) * stride];
                out[off + i * stride] = acc;
            }
        }
}
#endif
