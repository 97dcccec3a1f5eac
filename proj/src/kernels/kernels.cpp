#include "gpr/kernels.hpp"

#include <atomic>
#include <cstdlib>
#include <cstring>

#include "kernels_backend.hpp"
#include "kernels_scalar.hpp"

namespace gpr::kernels {

namespace {

const Backend scalar_table = {
    "scalar", scalar::axpy, scalar::scale, scalar::dot, scalar::abs_max,
    scalar::abs_sum, scalar::fdtd_update_hx, scalar::fdtd_update_hy,
    scalar::fdtd_update_ez,
};

const Backend* find(const char* name) {
    if (std::strcmp(name, "scalar") == 0) return &scalar_table;
#if defined(__x86_64__) || defined(_M_X64)
    if (std::strcmp(name, "avx2") == 0 && __builtin_cpu_supports("avx2"))
        return &avx2::table;
#endif
#if defined(__aarch64__)
    if (std::strcmp(name, "neon") == 0) return &neon::table;
#endif
    return nullptr;
}

const Backend* detect() {
    if (const char* env = std::getenv("GPR_KERNELS")) {
        if (const Backend* b = find(env)) return b;
    }
#if defined(__x86_64__) || defined(_M_X64)
    if (__builtin_cpu_supports("avx2")) return &avx2::table;
#endif
#if defined(__aarch64__)
    return &neon::table;
#endif
    return &scalar_table;
}

std::atomic<const Backend*> active{nullptr};

inline const Backend& get() {
    const Backend* b = active.load(std::memory_order_acquire);
    if (!b) {
        b = detect();
        active.store(b, std::memory_order_release);
    }
    return *b;
}

}  // namespace

void axpy(double* y, const double* x, double a, std::size_t n) { get().axpy(y, x, a, n); }
void scale(double* y, double a, std::size_t n) { get().scale(y, a, n); }
double dot(const double* x, const double* y, std::size_t n) { return get().dot(x, y, n); }
double abs_max(const double* x, std::size_t n) { return get().abs_max(x, n); }
double abs_sum(const double* x, std::size_t n) { return get().abs_sum(x, n); }

void fdtd_update_hx(double* hx, const double* ez, const double* ez_up,
                    double c, std::size_t n) {
    get().fdtd_update_hx(hx, ez, ez_up, c, n);
}

void fdtd_update_hy(double* hy, const double* ez, double c, std::size_t n) {
    get().fdtd_update_hy(hy, ez, c, n);
}

void fdtd_update_ez(double* ez, const double* ca, const double* cb,
                    const double* hy, const double* hy_m1,
                    const double* hx, const double* hx_dn, std::size_t n) {
    get().fdtd_update_ez(ez, ca, cb, hy, hy_m1, hx, hx_dn, n);
}

const char* backend() { return get().name; }

bool force_backend(const char* name) {
    const Backend* b = find(name);
    if (!b) return false;
    active.store(b, std::memory_order_release);
    return true;
}

}  // namespace gpr::kernels
