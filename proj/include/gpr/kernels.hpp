// Runtime-dispatched arithmetic kernels.
//
// Every kernel has a scalar reference implementation and, where the CPU
// supports it, an AVX2 (x86-64) or NEON (aarch64) variant. The variant is
// picked once at startup and can be overridden with the GPR_KERNELS
// environment variable ("scalar", "avx2", "neon") or force_backend().
//
// Contract: elementwise kernels (axpy, scale, fdtd_update_*) produce
// bit-identical results on every backend (same per-element operation order,
// no FMA). Reduction kernels (dot, abs_sum) may reassociate and agree with
// the scalar path only to rounding; abs_max is exact.

#pragma once

#include <cstddef>

namespace gpr::kernels {

// y[i] += a * x[i]
void axpy(double* y, const double* x, double a, std::size_t n);

// y[i] *= a
void scale(double* y, double a, std::size_t n);

// sum_i x[i] * y[i]
double dot(const double* x, const double* y, std::size_t n);

// max_i |x[i]|  (0 for n == 0)
double abs_max(const double* x, std::size_t n);

// sum_i |x[i]|
double abs_sum(const double* x, std::size_t n);

// hx[i] -= c * (ez_up[i] - ez[i])
void fdtd_update_hx(double* hx, const double* ez, const double* ez_up,
                    double c, std::size_t n);

// hy[i] += c * (ez[i+1] - ez[i]); reads ez[0..n]
void fdtd_update_hy(double* hy, const double* ez, double c, std::size_t n);

// ez[i] = ca[i]*ez[i] + cb[i]*((hy[i] - hy_m1[i]) - (hx[i] - hx_dn[i]))
// hy_m1 is typically hy - 1 (shifted alias); all pointers may be unaligned.
void fdtd_update_ez(double* ez, const double* ca, const double* cb,
                    const double* hy, const double* hy_m1,
                    const double* hx, const double* hx_dn, std::size_t n);

// Active backend name: "scalar", "avx2" or "neon".
const char* backend();

// Force a backend by name (tests); returns false if unavailable.
bool force_backend(const char* name);

}  // namespace gpr::kernels
