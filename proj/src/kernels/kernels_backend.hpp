#pragma once

#include <cstddef>

namespace gpr::kernels {

struct Backend {
    const char* name;
    void (*axpy)(double*, const double*, double, std::size_t);
    void (*scale)(double*, double, std::size_t);
    double (*dot)(const double*, const double*, std::size_t);
    double (*abs_max)(const double*, std::size_t);
    double (*abs_sum)(const double*, std::size_t);
    void (*fdtd_update_hx)(double*, const double*, const double*, double, std::size_t);
    void (*fdtd_update_hy)(double*, const double*, double, std::size_t);
    void (*fdtd_update_ez)(double*, const double*, const double*, const double*,
                           const double*, const double*, const double*, std::size_t);
};

#if defined(__x86_64__) || defined(_M_X64)
namespace avx2 { extern const Backend table; }
#endif
#if defined(__aarch64__)
namespace neon { extern const Backend table; }
#endif

}  // namespace gpr::kernels
