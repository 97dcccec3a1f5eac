#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstring>
#include <vector>

#include "gpr/io.hpp"
#include "gpr/kernels.hpp"

namespace k = gpr::kernels;

namespace {

std::vector<double> random_vec(std::size_t n, std::uint64_t seed) {
    gpr::io::Rng rng(seed);
    std::vector<double> v(n);
    for (double& x : v) x = rng.next_normal();
    return v;
}

struct BackendGuard {
    std::string saved = k::backend();
    ~BackendGuard() { k::force_backend(saved.c_str()); }
};

}  // namespace

TEST_CASE("scalar backend can always be forced") {
    BackendGuard guard;
    CHECK(k::force_backend("scalar"));
    CHECK(std::strcmp(k::backend(), "scalar") == 0);
    CHECK_FALSE(k::force_backend("no-such-backend"));
}

TEST_CASE("simd variants match the scalar reference") {
    BackendGuard guard;
    const char* simd = nullptr;
#if defined(__x86_64__) || defined(_M_X64)
    if (k::force_backend("avx2")) simd = "avx2";
#elif defined(__aarch64__)
    if (k::force_backend("neon")) simd = "neon";
#endif
    if (!simd) return;  // no SIMD on this machine; dispatch already scalar

    // Sizes straddle the vector width, including remainders.
    for (std::size_t n : {std::size_t(1), std::size_t(3), std::size_t(4), std::size_t(7),
                          std::size_t(64), std::size_t(1023)}) {
        auto x = random_vec(n + 1, 11 * n + 1);  // +1 for the hy stencil lookahead
        auto y = random_vec(n + 1, 13 * n + 2);
        auto z = random_vec(n + 1, 17 * n + 3);
        auto ca = random_vec(n + 1, 19 * n + 4);
        auto cb = random_vec(n + 1, 23 * n + 5);

        // Elementwise kernels: bit-identical.
        auto run_elementwise = [&](auto&& fn) {
            auto a = y, b = y;
            k::force_backend("scalar");
            fn(a);
            k::force_backend(simd);
            fn(b);
            CHECK(std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0);
        };
        run_elementwise([&](std::vector<double>& v) { k::axpy(v.data(), x.data(), 1.7, n); });
        run_elementwise([&](std::vector<double>& v) { k::scale(v.data(), -0.3, n); });
        run_elementwise([&](std::vector<double>& v) {
            k::fdtd_update_hx(v.data(), x.data(), z.data(), 0.25, n);
        });
        run_elementwise([&](std::vector<double>& v) {
            k::fdtd_update_hy(v.data(), x.data(), 0.25, n);
        });
        run_elementwise([&](std::vector<double>& v) {
            k::fdtd_update_ez(v.data(), ca.data(), cb.data(), x.data(), x.data() + 1,
                              z.data(), z.data() + 1, n);
        });

        // Reductions: tight tolerance; abs_max exact.
        k::force_backend("scalar");
        const double dot_ref = k::dot(x.data(), y.data(), n);
        const double sum_ref = k::abs_sum(x.data(), n);
        const double max_ref = k::abs_max(x.data(), n);
        k::force_backend(simd);
        CHECK(k::dot(x.data(), y.data(), n) ==
              doctest::Approx(dot_ref).epsilon(1e-13).scale(std::fabs(dot_ref) + 1.0));
        CHECK(k::abs_sum(x.data(), n) == doctest::Approx(sum_ref).epsilon(1e-13));
        CHECK(k::abs_max(x.data(), n) == max_ref);
    }
}

TEST_CASE("axpy and dot agree with hand results") {
    BackendGuard guard;
    for (const char* b : {"scalar", "avx2", "neon"}) {
        if (!k::force_backend(b)) continue;
        std::vector<double> y{1, 2, 3, 4, 5};
        const std::vector<double> x{10, 20, 30, 40, 50};
        k::axpy(y.data(), x.data(), 0.5, y.size());
        CHECK(y[0] == 6.0);
        CHECK(y[4] == 30.0);
        CHECK(k::dot(x.data(), x.data(), x.size()) == doctest::Approx(5500.0));
        CHECK(k::abs_max(x.data(), x.size()) == 50.0);
    }
}
