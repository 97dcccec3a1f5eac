// NEON kernel variants (aarch64). Same operation order as the scalar
// reference on elementwise kernels; vfma is deliberately avoided.

#include "kernels_backend.hpp"

#if defined(__aarch64__)

#include <arm_neon.h>

#include "kernels_scalar.hpp"

namespace gpr::kernels::neon {

void axpy(double* y, const double* x, double a, std::size_t n) {
    std::size_t i = 0;
    float64x2_t va = vdupq_n_f64(a);
    for (; i + 2 <= n; i += 2) {
        float64x2_t vy = vld1q_f64(y + i);
        vy = vaddq_f64(vy, vmulq_f64(va, vld1q_f64(x + i)));
        vst1q_f64(y + i, vy);
    }
    scalar::axpy(y + i, x + i, a, n - i);
}

void scale(double* y, double a, std::size_t n) {
    std::size_t i = 0;
    float64x2_t va = vdupq_n_f64(a);
    for (; i + 2 <= n; i += 2) vst1q_f64(y + i, vmulq_f64(vld1q_f64(y + i), va));
    scalar::scale(y + i, a, n - i);
}

double dot(const double* x, const double* y, std::size_t n) {
    std::size_t i = 0;
    float64x2_t acc = vdupq_n_f64(0.0);
    for (; i + 2 <= n; i += 2)
        acc = vaddq_f64(acc, vmulq_f64(vld1q_f64(x + i), vld1q_f64(y + i)));
    return vaddvq_f64(acc) + scalar::dot(x + i, y + i, n - i);
}

double abs_max(const double* x, std::size_t n) {
    std::size_t i = 0;
    float64x2_t acc = vdupq_n_f64(0.0);
    for (; i + 2 <= n; i += 2) acc = vmaxq_f64(acc, vabsq_f64(vld1q_f64(x + i)));
    double m = vmaxvq_f64(acc);
    double t = scalar::abs_max(x + i, n - i);
    return t > m ? t : m;
}

double abs_sum(const double* x, std::size_t n) {
    std::size_t i = 0;
    float64x2_t acc = vdupq_n_f64(0.0);
    for (; i + 2 <= n; i += 2) acc = vaddq_f64(acc, vabsq_f64(vld1q_f64(x + i)));
    return vaddvq_f64(acc) + scalar::abs_sum(x + i, n - i);
}

void fdtd_update_hx(double* hx, const double* ez, const double* ez_up,
                    double c, std::size_t n) {
    std::size_t i = 0;
    float64x2_t vc = vdupq_n_f64(c);
    for (; i + 2 <= n; i += 2) {
        float64x2_t d = vsubq_f64(vld1q_f64(ez_up + i), vld1q_f64(ez + i));
        vst1q_f64(hx + i, vsubq_f64(vld1q_f64(hx + i), vmulq_f64(vc, d)));
    }
    scalar::fdtd_update_hx(hx + i, ez + i, ez_up + i, c, n - i);
}

void fdtd_update_hy(double* hy, const double* ez, double c, std::size_t n) {
    std::size_t i = 0;
    float64x2_t vc = vdupq_n_f64(c);
    for (; i + 2 <= n; i += 2) {
        float64x2_t d = vsubq_f64(vld1q_f64(ez + i + 1), vld1q_f64(ez + i));
        vst1q_f64(hy + i, vaddq_f64(vld1q_f64(hy + i), vmulq_f64(vc, d)));
    }
    scalar::fdtd_update_hy(hy + i, ez + i, c, n - i);
}

void fdtd_update_ez(double* ez, const double* ca, const double* cb,
                    const double* hy, const double* hy_m1,
                    const double* hx, const double* hx_dn, std::size_t n) {
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) {
        float64x2_t dy = vsubq_f64(vld1q_f64(hy + i), vld1q_f64(hy_m1 + i));
        float64x2_t dx = vsubq_f64(vld1q_f64(hx + i), vld1q_f64(hx_dn + i));
        float64x2_t curl = vsubq_f64(dy, dx);
        float64x2_t v = vaddq_f64(vmulq_f64(vld1q_f64(ca + i), vld1q_f64(ez + i)),
                                  vmulq_f64(vld1q_f64(cb + i), curl));
        vst1q_f64(ez + i, v);
    }
    scalar::fdtd_update_ez(ez + i, ca + i, cb + i, hy + i, hy_m1 + i, hx + i, hx_dn + i, n - i);
}

const Backend table = {
    "neon", axpy, scale, dot, abs_max, abs_sum,
    fdtd_update_hx, fdtd_update_hy, fdtd_update_ez,
};

}  // namespace gpr::kernels::neon

#endif  // aarch64
