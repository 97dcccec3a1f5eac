// Scalar reference kernels. These define the semantics every SIMD variant
// is tested against.

#pragma once

#include <cmath>
#include <cstddef>

namespace gpr::kernels::scalar {

inline void axpy(double* y, const double* x, double a, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

inline void scale(double* y, double a, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] *= a;
}

inline double dot(const double* x, const double* y, std::size_t n) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += x[i] * y[i];
    return s;
}

inline double abs_max(const double* x, std::size_t n) {
    double m = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double v = std::fabs(x[i]);
        if (v > m) m = v;
    }
    return m;
}

inline double abs_sum(const double* x, std::size_t n) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += std::fabs(x[i]);
    return s;
}

inline void fdtd_update_hx(double* hx, const double* ez, const double* ez_up,
                           double c, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) hx[i] -= c * (ez_up[i] - ez[i]);
}

inline void fdtd_update_hy(double* hy, const double* ez, double c, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) hy[i] += c * (ez[i + 1] - ez[i]);
}

inline void fdtd_update_ez(double* ez, const double* ca, const double* cb,
                           const double* hy, const double* hy_m1,
                           const double* hx, const double* hx_dn, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
        double curl = (hy[i] - hy_m1[i]) - (hx[i] - hx_dn[i]);
        ez[i] = ca[i] * ez[i] + cb[i] * curl;
    }
}

}  // namespace gpr::kernels::scalar
