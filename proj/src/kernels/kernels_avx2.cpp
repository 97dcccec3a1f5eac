// AVX2 kernel variants. Compiled with -mavx2 -mno-fma; elementwise kernels
// keep the scalar mul/add order so lanes match the reference bit-for-bit.

#include "kernels_backend.hpp"

#if defined(__x86_64__) || defined(_M_X64)

#include <immintrin.h>

#include "kernels_scalar.hpp"

namespace gpr::kernels::avx2 {

namespace {

inline double hsum(__m256d v) {
    __m128d lo = _mm256_castpd256_pd128(v);
    __m128d hi = _mm256_extractf128_pd(v, 1);
    lo = _mm_add_pd(lo, hi);
    __m128d sh = _mm_unpackhi_pd(lo, lo);
    return _mm_cvtsd_f64(_mm_add_sd(lo, sh));
}

inline double hmax(__m256d v) {
    __m128d lo = _mm256_castpd256_pd128(v);
    __m128d hi = _mm256_extractf128_pd(v, 1);
    lo = _mm_max_pd(lo, hi);
    __m128d sh = _mm_unpackhi_pd(lo, lo);
    return _mm_cvtsd_f64(_mm_max_sd(lo, sh));
}

const __m256d kSignMask = _mm256_set1_pd(-0.0);

}  // namespace

void axpy(double* y, const double* x, double a, std::size_t n) {
    std::size_t i = 0;
    __m256d va = _mm256_set1_pd(a);
    for (; i + 4 <= n; i += 4) {
        __m256d vy = _mm256_loadu_pd(y + i);
        __m256d vx = _mm256_loadu_pd(x + i);
        vy = _mm256_add_pd(vy, _mm256_mul_pd(va, vx));
        _mm256_storeu_pd(y + i, vy);
    }
    scalar::axpy(y + i, x + i, a, n - i);
}

void scale(double* y, double a, std::size_t n) {
    std::size_t i = 0;
    __m256d va = _mm256_set1_pd(a);
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(y + i, _mm256_mul_pd(_mm256_loadu_pd(y + i), va));
    scalar::scale(y + i, a, n - i);
}

double dot(const double* x, const double* y, std::size_t n) {
    std::size_t i = 0;
    __m256d acc = _mm256_setzero_pd();
    for (; i + 4 <= n; i += 4)
        acc = _mm256_add_pd(acc, _mm256_mul_pd(_mm256_loadu_pd(x + i),
                                               _mm256_loadu_pd(y + i)));
    return hsum(acc) + scalar::dot(x + i, y + i, n - i);
}

double abs_max(const double* x, std::size_t n) {
    std::size_t i = 0;
    __m256d acc = _mm256_setzero_pd();
    for (; i + 4 <= n; i += 4)
        acc = _mm256_max_pd(acc, _mm256_andnot_pd(kSignMask, _mm256_loadu_pd(x + i)));
    double m = hmax(acc);
    double t = scalar::abs_max(x + i, n - i);
    return t > m ? t : m;
}

double abs_sum(const double* x, std::size_t n) {
    std::size_t i = 0;
    __m256d acc = _mm256_setzero_pd();
    for (; i + 4 <= n; i += 4)
        acc = _mm256_add_pd(acc, _mm256_andnot_pd(kSignMask, _mm256_loadu_pd(x + i)));
    return hsum(acc) + scalar::abs_sum(x + i, n - i);
}

void fdtd_update_hx(double* hx, const double* ez, const double* ez_up,
                    double c, std::size_t n) {
    std::size_t i = 0;
    __m256d vc = _mm256_set1_pd(c);
    for (; i + 4 <= n; i += 4) {
        __m256d d = _mm256_sub_pd(_mm256_loadu_pd(ez_up + i), _mm256_loadu_pd(ez + i));
        __m256d v = _mm256_sub_pd(_mm256_loadu_pd(hx + i), _mm256_mul_pd(vc, d));
        _mm256_storeu_pd(hx + i, v);
    }
    scalar::fdtd_update_hx(hx + i, ez + i, ez_up + i, c, n - i);
}

void fdtd_update_hy(double* hy, const double* ez, double c, std::size_t n) {
    std::size_t i = 0;
    __m256d vc = _mm256_set1_pd(c);
    for (; i + 4 <= n; i += 4) {
        __m256d d = _mm256_sub_pd(_mm256_loadu_pd(ez + i + 1), _mm256_loadu_pd(ez + i));
        __m256d v = _mm256_add_pd(_mm256_loadu_pd(hy + i), _mm256_mul_pd(vc, d));
        _mm256_storeu_pd(hy + i, v);
    }
    scalar::fdtd_update_hy(hy + i, ez + i, c, n - i);
}

void fdtd_update_ez(double* ez, const double* ca, const double* cb,
                    const double* hy, const double* hy_m1,
                    const double* hx, const double* hx_dn, std::size_t n) {
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d dy = _mm256_sub_pd(_mm256_loadu_pd(hy + i), _mm256_loadu_pd(hy_m1 + i));
        __m256d dx = _mm256_sub_pd(_mm256_loadu_pd(hx + i), _mm256_loadu_pd(hx_dn + i));
        __m256d curl = _mm256_sub_pd(dy, dx);
        __m256d v = _mm256_add_pd(_mm256_mul_pd(_mm256_loadu_pd(ca + i), _mm256_loadu_pd(ez + i)),
                                  _mm256_mul_pd(_mm256_loadu_pd(cb + i), curl));
        _mm256_storeu_pd(ez + i, v);
    }
    scalar::fdtd_update_ez(ez + i, ca + i, cb + i, hy + i, hy_m1 + i, hx + i, hx_dn + i, n - i);
}

const Backend table = {
    "avx2", axpy, scale, dot, abs_max, abs_sum,
    fdtd_update_hx, fdtd_update_hy, fdtd_update_ez,
};

}  // namespace gpr::kernels::avx2

#endif  // x86-64
