#include "gpr/detect.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <stdexcept>
#include <thread>

#include <json.hpp>

#include "gpr/kernels.hpp"
#include "gpr/physics.hpp"

namespace gpr::detect {

std::vector<ReflectionPick> pick_reflections(const Trace& t, double min_prominence) {
    if (!(min_prominence > 0.0 && min_prominence <= 1.0))
        throw std::invalid_argument("pick_reflections: min_prominence must be in (0, 1]");
    validate(t);
    const auto& s = t.samples;
    const double thr = min_prominence * kernels::abs_max(s.data(), s.size());
    std::vector<ReflectionPick> picks;
    if (thr == 0.0) return picks;
    for (std::size_t i = 1; i + 1 < s.size(); ++i) {
        const bool is_max = s[i] >= s[i - 1] && s[i] > s[i + 1] && s[i] >= thr;
        const bool is_min = s[i] <= s[i - 1] && s[i] < s[i + 1] && -s[i] >= thr;
        if (is_max || is_min)
            picks.push_back({t.t0 + double(i) * t.dt, s[i], is_max ? +1 : -1});
    }
    return picks;
}

double layer_thickness(double delta_t, double eps_r) {
    if (!(delta_t > 0.0)) throw std::invalid_argument("layer_thickness: delta_t must be > 0");
    if (!(eps_r >= 1.0)) throw std::invalid_argument("layer_thickness: eps_r must be >= 1");
    return kC0 * delta_t / (2.0 * std::sqrt(eps_r));
}

double resolution_limit(double period, double eps_r) {
    if (!(period >= 0.0)) throw std::invalid_argument("resolution_limit: period must be >= 0");
    if (!(eps_r >= 1.0)) throw std::invalid_argument("resolution_limit: eps_r must be >= 1");
    return kC0 * period / (2.0 * std::sqrt(eps_r));
}

double eps_from_core(double delta_t, double delta_d) {
    if (!(delta_t > 0.0) || !(delta_d > 0.0))
        throw std::invalid_argument("eps_from_core: delta_t and delta_d must be > 0");
    const double v = kC0 * delta_t / (2.0 * delta_d);
    return v * v;
}

double eps_surface(double a0, double ap) {
    if (!(ap > 0.0)) throw std::invalid_argument("eps_surface: Ap must be > 0");
    if (!(std::fabs(a0) < ap))
        throw std::invalid_argument("eps_surface: |A0| must be < Ap");
    const double q = (ap + a0) / (ap - a0);
    return q * q;
}

double eps_layer_n(const std::vector<double>& amplitudes, double ap,
                   const std::vector<double>& eps_chain) {
    if (!(ap > 0.0)) throw std::invalid_argument("eps_layer_n: Ap must be > 0");
    if (amplitudes.empty()) throw std::invalid_argument("eps_layer_n: no amplitudes");
    if (eps_chain.size() + 1 != amplitudes.size())
        throw std::invalid_argument("eps_layer_n: eps_chain must cover layers 1..n-1");
    for (double a : amplitudes)
        if (!(std::fabs(a) < ap))
            throw std::invalid_argument("eps_layer_n: |A_i| must be < Ap");
    if (eps_chain.empty()) return eps_surface(amplitudes[0], ap);

    const double r0 = amplitudes[0] / ap;
    double num = 1.0 - r0 * r0;
    double den = num;
    // gamma_i between estimated layers i and i+1 (signed, Eq-2.44 form).
    for (std::size_t i = 1; i + 1 < amplitudes.size(); ++i) {
        const double g = (std::sqrt(eps_chain[i - 1]) - std::sqrt(eps_chain[i])) /
                         (std::sqrt(eps_chain[i - 1]) + std::sqrt(eps_chain[i]));
        const double term = g * amplitudes[i] / ap;
        num += term;
        den -= term;
    }
    const double rn = amplitudes.back() / ap;
    num += rn;
    den -= rn;
    if (!(den > 0.0))
        throw std::invalid_argument("eps_layer_n: amplitude set inconsistent (denominator <= 0)");
    const double q = num / den;
    return eps_chain.back() * q * q;
}

std::vector<double> eps_profile(const std::vector<double>& amplitudes, double ap) {
    std::vector<double> chain;
    for (std::size_t n = 1; n <= amplitudes.size(); ++n) {
        std::vector<double> amps(amplitudes.begin(), amplitudes.begin() + std::ptrdiff_t(n));
        chain.push_back(eps_layer_n(amps, ap, chain));
    }
    return chain;
}

CmpResult cmp_estimate(double x1, double t1, double x2, double t2) {
    if (!(x1 > 0.0 && x2 > 0.0 && t1 > 0.0 && t2 > 0.0))
        throw std::invalid_argument("cmp_estimate: offsets and times must be > 0");
    if (x1 == x2) throw std::invalid_argument("cmp_estimate: degenerate offsets (x1 == x2)");
    if (t1 == t2) throw std::invalid_argument("cmp_estimate: degenerate times (t1 == t2)");
    const double eps = kC0 * kC0 * (t1 * t1 - t2 * t2) / (x1 * x1 - x2 * x2);
    if (!(eps > 0.0)) throw std::invalid_argument("cmp_estimate: negative permittivity");
    const double rad = (x2 * x2 * t1 * t1 - x1 * x1 * t2 * t2) / (4.0 * (t2 * t2 - t1 * t1));
    if (!(rad >= 0.0)) throw std::invalid_argument("cmp_estimate: negative radicand");
    return {eps, std::sqrt(rad)};
}

// ---------------------------------------------------------------------------
// Template matching

TemplateLibrary build_template_library(const fdtd::Scene& base_scene, const Material& fill,
                                       const std::vector<double>& heights, int n_threads) {
    {
        // base_scene.void_box, when present, only donates the lateral
        // placement; validate the scene without it.
        fdtd::Scene check = base_scene;
        check.void_box.reset();
        fdtd::validate(check);
    }
    if (heights.empty()) throw std::invalid_argument("template library: no heights");
    for (std::size_t i = 1; i < heights.size(); ++i)
        if (!(heights[i] > heights[i - 1]))
            throw std::invalid_argument("template library: heights must be strictly increasing");

    fdtd::VoidSpec proto;
    if (base_scene.void_box) {
        proto = *base_scene.void_box;
    } else {
        const double pml_m = base_scene.grid.pml_cells * base_scene.grid.spacing;
        proto.x_center = base_scene.grid.width / 2.0;
        proto.width = base_scene.grid.width - 2.0 * pml_m - 4.0 * base_scene.grid.spacing;
    }
    proto.fill = fill;

    // Shot closest to the void center.
    const auto& sv = base_scene.survey;
    int shot = 0;
    double best = 1e300;
    for (int s = 0; s < sv.n_shots; ++s) {
        const double mid = sv.tx_x0 + s * sv.step + sv.gap / 2.0;
        if (std::fabs(mid - proto.x_center) < best) {
            best = std::fabs(mid - proto.x_center);
            shot = s;
        }
    }

    // Free-space reference for direct-wave removal: same geometry, all air.
    fdtd::Scene ref = base_scene;
    ref.void_box.reset();
    ref.plate.reset();
    double stack = 0.0;
    for (const auto& [m, th] : base_scene.layers) stack += th;
    ref.layers = {{fdtd::builtin_material("air"), stack}};
    const Trace direct = fdtd::simulate_ascan(ref, shot);

    TemplateLibrary lib;
    lib.base_scene = base_scene;
    lib.base_scene.void_box.reset();
    lib.fill = fill;
    lib.heights = heights;
    lib.templates.resize(heights.size());

    std::atomic<std::size_t> next{0};
    std::vector<std::string> errors(heights.size());
    auto worker = [&] {
        for (std::size_t k = next.fetch_add(1); k < heights.size(); k = next.fetch_add(1)) {
            try {
                fdtd::Scene s = base_scene;
                fdtd::VoidSpec v = proto;
                v.height = heights[k];
                s.void_box = v;
                Trace t = fdtd::simulate_ascan(s, shot);
                kernels::axpy(t.samples.data(), direct.samples.data(), -1.0,
                              t.samples.size());
                lib.templates[k] = std::move(t);
            } catch (const std::exception& e) {
                errors[k] = e.what();
            }
        }
    };
    n_threads = std::clamp(n_threads, 1, int(heights.size()));
    if (n_threads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int w = 0; w < n_threads; ++w) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    for (const auto& e : errors)
        if (!e.empty()) throw std::runtime_error("template library: " + e);
    return lib;
}

HeightMatch identify_height_lsq(const Trace& query, const TemplateLibrary& lib) {
    if (lib.templates.empty()) throw std::invalid_argument("identify_height_lsq: empty library");
    validate(query);
    const Trace& t0 = lib.templates.front();
    if (query.samples.size() != t0.samples.size() ||
        std::fabs(query.dt - t0.dt) > 1e-12 * t0.dt || query.t0 != t0.t0)
        throw std::invalid_argument("identify_height_lsq: query shape mismatch");

    HeightMatch m;
    m.sse_curve.resize(lib.templates.size());
    std::vector<double> diff(query.samples.size());
    std::size_t best = 0;
    for (std::size_t k = 0; k < lib.templates.size(); ++k) {
        const auto& tpl = lib.templates[k].samples;
        for (std::size_t i = 0; i < diff.size(); ++i) diff[i] = query.samples[i] - tpl[i];
        m.sse_curve[k] = kernels::dot(diff.data(), diff.data(), diff.size());
        if (m.sse_curve[k] < m.sse_curve[best]) best = k;
    }
    m.height = lib.heights[best];
    return m;
}

// ---------------------------------------------------------------------------
// Deconvolution

WaveletMatrix build_wavelet_matrix(std::vector<double> wavelet, std::size_t n) {
    if (wavelet.empty()) throw std::invalid_argument("wavelet matrix: empty wavelet");
    if (wavelet.size() > n)
        throw std::invalid_argument("wavelet matrix: wavelet longer than system size");
    return {std::move(wavelet), n};
}

double wavelet_matrix_entry(const WaveletMatrix& e, std::size_t i, std::size_t j) {
    if (i >= e.n || j >= e.n) throw std::out_of_range("wavelet matrix: index out of range");
    if (i < j || i - j >= e.wavelet.size()) return 0.0;
    return e.wavelet[i - j];
}

std::vector<double> apply(const WaveletMatrix& e, const std::vector<double>& h) {
    if (h.size() != e.n) throw std::invalid_argument("wavelet matrix: size mismatch");
    return phys::convolve_reflectivity(h, e.wavelet);
}

std::vector<double> apply_transpose(const WaveletMatrix& e, const std::vector<double>& y) {
    if (y.size() != e.n) throw std::invalid_argument("wavelet matrix: size mismatch");
    const std::size_t L = e.wavelet.size();
    std::vector<double> out(e.n);
    for (std::size_t i = 0; i < e.n; ++i) {
        const std::size_t m = std::min(L, e.n - i);
        out[i] = kernels::dot(e.wavelet.data(), y.data() + i, m);
    }
    return out;
}

std::pair<std::vector<double>, std::size_t> trim_wavelet_onset(const std::vector<double>& w,
                                                               double rel_threshold) {
    if (w.empty()) throw std::invalid_argument("trim_wavelet_onset: empty wavelet");
    const double thr = rel_threshold * kernels::abs_max(w.data(), w.size());
    std::size_t k = 0;
    while (k < w.size() && std::fabs(w[k]) < thr) ++k;
    if (k == w.size()) throw std::invalid_argument("trim_wavelet_onset: all-zero wavelet");
    return {std::vector<double>(w.begin() + std::ptrdiff_t(k), w.end()), k};
}

std::vector<double> deconvolve_naive(const std::vector<double>& y, const WaveletMatrix& e) {
    if (y.size() != e.n) throw std::invalid_argument("deconvolve_naive: size mismatch");
    const auto& w = e.wavelet;
    if (w[0] == 0.0) throw std::invalid_argument("deconvolve_naive: singular (wavelet[0] == 0)");
    std::vector<double> h(e.n);
    for (std::size_t k = 0; k < e.n; ++k) {
        double s = y[k];
        const std::size_t m = std::min(k, w.size() - 1);
        for (std::size_t j = 1; j <= m; ++j) s -= w[j] * h[k - j];
        h[k] = s / w[0];
    }
    return h;
}

namespace {

// Band of E^T E: band[b][i] = (E^T E)(i, i+b), b in [0, L).
std::vector<std::vector<double>> normal_band(const WaveletMatrix& e) {
    const auto& w = e.wavelet;
    const std::size_t L = w.size();
    const std::size_t n = e.n;
    std::vector<std::vector<double>> band(L, std::vector<double>(n, 0.0));
    std::vector<double> autoc(L, 0.0);
    for (std::size_t b = 0; b < L; ++b)
        for (std::size_t m = b; m < L; ++m) autoc[b] += w[m] * w[m - b];
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t cap = std::min(L - 1, n - 1 - i);
        if (cap == L - 1) {
            for (std::size_t b = 0; b < L && i + b < n; ++b) band[b][i] = autoc[b];
        } else {
            for (std::size_t b = 0; b <= cap; ++b) {
                double s = 0.0;
                for (std::size_t m = b; m <= cap; ++m) s += w[m] * w[m - b];
                band[b][i] = s;
            }
        }
    }
    return band;
}

// In-place banded Cholesky, band[b][j] = A(j+b, j) in, L(j+b, j) out.
void band_cholesky(std::vector<std::vector<double>>& band) {
    const std::size_t bw = band.size() - 1;
    const std::size_t n = band[0].size();
    for (std::size_t j = 0; j < n; ++j) {
        double d = band[0][j];
        for (std::size_t k = (j > bw ? j - bw : 0); k < j; ++k) {
            const double l = band[j - k][k];
            d -= l * l;
        }
        if (!(d > 0.0))
            throw std::runtime_error("deconvolve_tikhonov: not positive definite");
        const double dj = std::sqrt(d);
        band[0][j] = dj;
        const std::size_t imax = std::min(n - 1, j + bw);
        for (std::size_t i = j + 1; i <= imax; ++i) {
            double s = band[i - j][j];
            const std::size_t k0 = i > bw ? i - bw : 0;
            for (std::size_t k = k0; k < j; ++k) s -= band[i - k][k] * band[j - k][k];
            band[i - j][j] = s / dj;
        }
    }
}

std::vector<double> band_solve(const std::vector<std::vector<double>>& chol,
                               std::vector<double> rhs) {
    const std::size_t bw = chol.size() - 1;
    const std::size_t n = rhs.size();
    for (std::size_t i = 0; i < n; ++i) {
        double s = rhs[i];
        const std::size_t k0 = i > bw ? i - bw : 0;
        for (std::size_t k = k0; k < i; ++k) s -= chol[i - k][k] * rhs[k];
        rhs[i] = s / chol[0][i];
    }
    for (std::size_t ii = n; ii-- > 0;) {
        double s = rhs[ii];
        const std::size_t imax = std::min(n - 1, ii + bw);
        for (std::size_t k = ii + 1; k <= imax; ++k) s -= chol[k - ii][ii] * rhs[k];
        rhs[ii] = s / chol[0][ii];
    }
    return rhs;
}

// Sequential Givens QR for the damped least-squares system
//   min || [E; sqrt(alpha) I] h - [y; 0] ||^2.
// The working row travels in a window of `bandwidth` columns anchored at the
// current elimination column, so rotation fill-in is kept. Orthogonal
// eliminations preserve kappa(E) where the normal equations would square it;
// used for the near-zero-alpha regime.
class BandedDampedQr {
  public:
    BandedDampedQr(std::size_t n, std::size_t bandwidth)
        : n_(n), bw_(bandwidth), r_(n * bandwidth, 0.0), d_(n, 0.0) {}

    // Feed one equation whose coefficients occupy columns [c0, c0+bw).
    void add_row(std::size_t c0, std::vector<double>& vrow, double beta) {
        std::size_t col = c0;
        while (col < n_) {
            if (vrow[0] == 0.0) {
                bool any = false;
                for (std::size_t k = 1; k < bw_; ++k) {
                    any |= vrow[k] != 0.0;
                    vrow[k - 1] = vrow[k];
                }
                vrow[bw_ - 1] = 0.0;
                if (!any) return;
                ++col;
                continue;
            }
            double* rrow = r_.data() + col * bw_;
            if (rrow[0] == 0.0) {
                std::copy(vrow.begin(), vrow.end(), rrow);
                d_[col] = beta;
                return;
            }
            const double a = rrow[0], b = vrow[0];
            const double r = std::hypot(a, b);
            const double c = a / r, s = b / r;
            rrow[0] = r;
            bool any = false;
            for (std::size_t k = 1; k < bw_; ++k) {
                const double rk = rrow[k], vk = vrow[k];
                rrow[k] = c * rk + s * vk;
                const double nv = -s * rk + c * vk;
                any |= nv != 0.0;
                vrow[k - 1] = nv;  // shift the window as we go
            }
            vrow[bw_ - 1] = 0.0;
            const double dk = d_[col];
            d_[col] = c * dk + s * beta;
            beta = -s * dk + c * beta;
            if (!any) return;
            ++col;
        }
    }

    std::vector<double> solve() const {
        std::vector<double> h(n_, 0.0);
        for (std::size_t ii = n_; ii-- > 0;) {
            const double* rrow = r_.data() + ii * bw_;
            if (rrow[0] == 0.0)
                throw std::runtime_error("deconvolve_tikhonov: rank-deficient system");
            double s = d_[ii];
            const std::size_t kmax = std::min(bw_ - 1, n_ - 1 - ii);
            for (std::size_t k = 1; k <= kmax; ++k) s -= rrow[k] * h[ii + k];
            h[ii] = s / rrow[0];
        }
        return h;
    }

  private:
    std::size_t n_, bw_;
    std::vector<double> r_;  // row j holds R(j, j..j+bw-1)
    std::vector<double> d_;
};

}  // namespace

double normal_matrix_norm_bound(const WaveletMatrix& e) {
    const auto& w = e.wavelet;
    const std::size_t L = w.size();
    double bound = 0.0;
    for (std::size_t b = 0; b < L; ++b) {
        double s = 0.0;
        for (std::size_t m = b; m < L; ++m) s += w[m] * w[m - b];
        bound += (b == 0 ? 1.0 : 2.0) * std::fabs(s);
    }
    return bound;
}

std::vector<double> deconvolve_tikhonov(const std::vector<double>& y, const WaveletMatrix& e,
                                        double alpha) {
    if (y.size() != e.n) throw std::invalid_argument("deconvolve_tikhonov: size mismatch");
    if (!(alpha >= 0.0)) throw std::invalid_argument("deconvolve_tikhonov: alpha must be >= 0");
    const std::size_t L = e.wavelet.size();

    // Well-damped systems go through the banded normal equations;
    // kappa(E^T E + alpha I) <= bound/alpha stays benign there. Near-zero
    // alpha switches to the orthogonal route, which does not square the
    // condition number of a zero-DC wavelet.
    if (alpha >= 1e-7 * normal_matrix_norm_bound(e)) {
        auto band = normal_band(e);
        for (std::size_t i = 0; i < e.n; ++i) band[0][i] += alpha;
        band_cholesky(band);
        return band_solve(band, apply_transpose(e, y));
    }

    BandedDampedQr qr(e.n, L);
    std::vector<double> row(L);
    for (std::size_t k = 0; k < e.n; ++k) {
        // Row k of E: w[k-j] at column j, j in [k-L+1, k]; reversed wavelet.
        const std::size_t c0 = k >= L - 1 ? k - (L - 1) : 0;
        const std::size_t len = k - c0 + 1;
        for (std::size_t j = 0; j < L; ++j)
            row[j] = j < len ? e.wavelet[k - (c0 + j)] : 0.0;
        qr.add_row(c0, row, y[k]);
    }
    const double damp = std::sqrt(alpha);
    if (damp > 0.0) {
        for (std::size_t k = 0; k < e.n; ++k) {
            std::fill(row.begin(), row.end(), 0.0);
            row[0] = damp;
            qr.add_row(k, row, 0.0);
        }
    }
    return qr.solve();
}

double choose_alpha_discrepancy(const std::vector<double>& y, const WaveletMatrix& e,
                                double noise_rms) {
    if (!(noise_rms > 0.0))
        throw std::invalid_argument("choose_alpha_discrepancy: noise_rms must be > 0");
    const double target = noise_rms * std::sqrt(double(y.size()));
    const double scale = normal_matrix_norm_bound(e);

    auto residual = [&](double alpha) {
        const auto h = deconvolve_tikhonov(y, e, alpha);
        const auto yhat = apply(e, h);
        double s = 0.0;
        for (std::size_t i = 0; i < y.size(); ++i) {
            const double d = yhat[i] - y[i];
            s += d * d;
        }
        return std::sqrt(s);
    };

    double lo = 1e-10 * scale, hi = 1e2 * scale;
    if (residual(lo) >= target) return lo;
    if (residual(hi) <= target) return hi;
    for (int it = 0; it < 24; ++it) {
        const double mid = std::sqrt(lo * hi);
        (residual(mid) < target ? lo : hi) = mid;
    }
    return std::sqrt(lo * hi);
}

// ---------------------------------------------------------------------------
// Classification and extent

const char* to_string(FillClass f) {
    switch (f) {
        case FillClass::Air: return "air";
        case FillClass::Water: return "water";
        case FillClass::Grout: return "grout";
        default: return "unknown";
    }
}

FillClass classify_void_fill(double eps_estimate, const FillThresholds& thr) {
    if (!(eps_estimate > 0.0))
        throw std::invalid_argument("classify_void_fill: eps must be > 0");
    if (eps_estimate < thr.air_max) return FillClass::Air;
    if (eps_estimate > thr.grout_max) return FillClass::Water;
    if (eps_estimate >= thr.grout_min) return FillClass::Grout;
    return FillClass::Unknown;
}

FeatureExtent extract_feature_length(const Radargram& r,
                                     std::pair<double, double> layer_window) {
    validate(r);
    const Trace& first = r.traces.front();
    const std::size_t n = first.samples.size();
    const double t_end = first.t0 + double(n - 1) * first.dt;
    if (!(layer_window.first < layer_window.second) || layer_window.first < first.t0 ||
        layer_window.second > t_end)
        throw std::invalid_argument("extract_feature_length: layer_window outside trace span");
    const std::size_t i0 = std::size_t((layer_window.first - first.t0) / first.dt);
    const std::size_t i1 = std::min(n - 1, std::size_t((layer_window.second - first.t0) / first.dt));

    // The interface band's two lobes, located on the lateral median trace.
    // Each trace is read as the band CONTRAST (bright lobe minus dark lobe
    // at those fixed times) - the quantity an interpreter's eye tracks.
    // Per-trace extremum picking would latch onto the diffraction
    // hyperbolas crossing the window instead.
    const std::size_t nt = r.traces.size();
    std::vector<double> column(nt);
    std::vector<double> med_trace(i1 - i0 + 1);
    for (std::size_t k = i0; k <= i1; ++k) {
        for (std::size_t ti = 0; ti < nt; ++ti) column[ti] = r.traces[ti].samples[k];
        std::nth_element(column.begin(), column.begin() + nt / 2, column.end());
        med_trace[k - i0] = column[nt / 2];
    }
    std::size_t k_hi = i0, k_lo = i0;
    for (std::size_t k = i0; k <= i1; ++k) {
        if (med_trace[k - i0] > med_trace[k_hi - i0]) k_hi = k;
        if (med_trace[k - i0] < med_trace[k_lo - i0]) k_lo = k;
    }

    std::vector<double> contrast(nt);
    for (std::size_t ti = 0; ti < nt; ++ti)
        contrast[ti] = r.traces[ti].samples[k_hi] - r.traces[ti].samples[k_lo];
    std::vector<double> sorted = contrast;
    std::nth_element(sorted.begin(), sorted.begin() + nt / 2, sorted.end());
    const double med = sorted[nt / 2];
    if (med == 0.0) throw std::runtime_error("extract_feature_length: zero median contrast");

    std::vector<double> dev(nt);
    double dev_max = 0.0;
    for (std::size_t ti = 0; ti < nt; ++ti) {
        dev[ti] = std::fabs(contrast[ti] - med) / std::fabs(med);
        dev_max = std::max(dev_max, dev[ti]);
    }
    if (dev_max <= 0.5) throw std::runtime_error("extract_feature_length: no anomaly");

    // Runs of traces beyond the two-thirds-departure contour (the level at
    // which the band reads as terminated), bridged across dips that stay
    // above the 25% hysteresis. A thick void leaves one run (the inverted
    // core); a thin one leaves two break-bands over its edge diffractions
    // with a transparent middle, and the interruption spans between their
    // inner ends. Either way the edges delimit where the undisturbed
    // reflection stops.
    const double edge_level = 2.0 / 3.0;
    std::vector<std::pair<std::size_t, std::size_t>> runs;
    for (std::size_t ti = 0; ti < nt; ++ti) {
        if (dev[ti] < edge_level) continue;
        if (!runs.empty()) {
            bool bridged = true;
            for (std::size_t k = runs.back().second + 1; k < ti; ++k)
                bridged &= dev[k] > 0.25;
            if (bridged) {
                runs.back().second = ti;
                continue;
            }
        }
        runs.push_back({ti, ti});
    }
    if (runs.empty()) throw std::runtime_error("extract_feature_length: no anomaly");

    FeatureExtent fe;
    if (runs.size() == 1) {
        fe.i_left = runs.front().first;
        fe.i_right = runs.front().second;
    } else {
        fe.i_left = runs.front().second;
        fe.i_right = runs.back().first;
    }
    fe.x_left = r.x0 + double(fe.i_left) * r.dx;
    fe.x_right = r.x0 + double(fe.i_right) * r.dx;
    fe.d = fe.x_right - fe.x_left;
    return fe;
}

ExtentModel fit_extent_regression(const std::vector<std::pair<double, double>>& pairs) {
    if (pairs.size() < 3) throw std::invalid_argument("fit_extent_regression: need >= 3 pairs");
    double ml = 0.0, md = 0.0;
    for (const auto& [l, d] : pairs) {
        ml += l;
        md += d;
    }
    ml /= double(pairs.size());
    md /= double(pairs.size());
    double sll = 0.0, sld = 0.0, sdd = 0.0;
    double l_lo = pairs.front().first, l_hi = l_lo;
    for (const auto& [l, d] : pairs) {
        sll += (l - ml) * (l - ml);
        sld += (l - ml) * (d - md);
        sdd += (d - md) * (d - md);
        l_lo = std::min(l_lo, l);
        l_hi = std::max(l_hi, l);
    }
    if (l_hi - l_lo <= 1e-12 * std::max(1.0, std::fabs(ml)))
        throw std::invalid_argument("fit_extent_regression: all lengths equal (rank deficient)");
    ExtentModel m;
    m.slope = sld / sll;
    m.intercept = md - m.slope * ml;
    m.r = sdd > 0.0 ? sld / std::sqrt(sll * sdd) : 1.0;
    if (!(m.slope > 0.0))
        throw std::invalid_argument("fit_extent_regression: non-positive slope");
    return m;
}

double estimate_extent(double d, const ExtentModel& model) {
    if (!(model.slope > 0.0)) throw std::invalid_argument("estimate_extent: invalid model");
    if (!(d > model.intercept))
        throw std::invalid_argument("estimate_extent: below resolvable extent (d <= intercept)");
    return (d - model.intercept) / model.slope;
}

// ---------------------------------------------------------------------------
// Orchestration

double pick_amplitude(const Trace& t, std::pair<double, double> window) {
    const std::size_t n = t.samples.size();
    const double t_end = t.t0 + double(n - 1) * t.dt;
    const double a = std::max(window.first, t.t0);
    const double b = std::min(window.second, t_end);
    if (!(a < b)) throw std::invalid_argument("pick window outside trace span");
    const std::size_t i0 = std::size_t((a - t.t0) / t.dt);
    const std::size_t i1 = std::min(n - 1, std::size_t((b - t.t0) / t.dt));
    // Interior local extrema only (a neighbouring echo's tail decays
    // monotonically through the window and only peaks at an edge). Among
    // those, the earliest one within 60% of the strongest: the leading lobe
    // carries the interface polarity even when a thin layer's top and
    // bottom echoes have merged into a doublet.
    double strongest = 0.0;
    for (std::size_t k = std::max<std::size_t>(i0, 1); k + 1 <= i1 && k + 1 < n; ++k) {
        const bool mx = t.samples[k] >= t.samples[k - 1] && t.samples[k] > t.samples[k + 1];
        const bool mn = t.samples[k] <= t.samples[k - 1] && t.samples[k] < t.samples[k + 1];
        if (mx || mn) strongest = std::max(strongest, std::fabs(t.samples[k]));
    }
    if (strongest > 0.0) {
        for (std::size_t k = std::max<std::size_t>(i0, 1); k + 1 <= i1 && k + 1 < n; ++k) {
            const bool mx = t.samples[k] >= t.samples[k - 1] && t.samples[k] > t.samples[k + 1];
            const bool mn = t.samples[k] <= t.samples[k - 1] && t.samples[k] < t.samples[k + 1];
            if ((mx || mn) && std::fabs(t.samples[k]) >= 0.6 * strongest)
                return t.samples[k];
        }
    }
    std::size_t best = i0;
    for (std::size_t k = i0 + 1; k <= i1; ++k)
        if (std::fabs(t.samples[k]) > std::fabs(t.samples[best])) best = k;
    return t.samples[best];
}

DetectionReport detect_pipeline(const Radargram& r, const DetectConfig& cfg) {
    validate(r);
    DetectionReport rep;

    // 1. Anomaly search along the base-subgrade horizon.
    try {
        rep.feature = extract_feature_length(r, cfg.layer_window);
        rep.void_present = true;
        rep.method = "feature-length";
    } catch (const std::exception& e) {
        rep.notes.push_back(std::string("extent: ") + e.what());
        return rep;  // no anomaly: report absent
    }

    const std::size_t center =
        (rep.feature->i_left + rep.feature->i_right) / 2;
    const Trace& trace = r.traces[center];

    // 2. Fill classification from the reflection-amplitude permittivity chain.
    if (cfg.plate_amplitude > 0.0) {
        try {
            std::vector<double> amps;
            amps.push_back(pick_amplitude(trace, cfg.surface_window));
            for (const auto& w : cfg.interface_windows)
                amps.push_back(pick_amplitude(trace, w));
            amps.push_back(pick_amplitude(trace, cfg.layer_window));
            std::vector<double> chain;
            for (std::size_t k = 1; k <= amps.size(); ++k) {
                std::vector<double> sub(amps.begin(), amps.begin() + std::ptrdiff_t(k));
                chain.push_back(eps_layer_n(sub, cfg.plate_amplitude, std::vector<double>(
                                                chain.begin(), chain.end())));
            }
            rep.eps_chain = chain;
            rep.eps_anomaly = chain.back();
            rep.fill_class = classify_void_fill(chain.back(), cfg.thresholds);
            rep.method += "+dielectric";
        } catch (const std::exception& e) {
            rep.notes.push_back(std::string("dielectric: ") + e.what());
        }
    } else {
        rep.notes.push_back("dielectric: no plate amplitude supplied");
    }

    // 3. Height.
    if (rep.fill_class == FillClass::Water) {
        rep.notes.push_back("height: unresolvable for water fill (bottom reflection absorbed)");
    } else if (cfg.library) {
        try {
            HeightMatch m = identify_height_lsq(trace, *cfg.library);
            rep.height_m = m.height;
            rep.sse_heights = cfg.library->heights;
            rep.sse_curve = std::move(m.sse_curve);
            rep.method += "+lsq-template";
        } catch (const std::exception& e) {
            rep.notes.push_back(std::string("lsq height: ") + e.what());
        }
    } else if (!cfg.wavelet.empty()) {
        try {
            WaveletMatrix e = build_wavelet_matrix(cfg.wavelet, trace.samples.size());
            double noise = cfg.noise_rms;
            if (noise <= 0.0) {
                // Estimate from the samples ahead of the surface window.
                const std::size_t i_end = std::size_t(
                    std::max(0.0, (cfg.surface_window.first - trace.t0) / trace.dt));
                double s = 0.0;
                for (std::size_t i = 0; i < i_end; ++i) s += trace.samples[i] * trace.samples[i];
                noise = i_end ? std::sqrt(s / double(i_end)) : 0.0;
            }
            const double alpha = noise > 0.0
                                     ? choose_alpha_discrepancy(trace.samples, e, noise)
                                     : 1e-8 * normal_matrix_norm_bound(e);
            const auto h = deconvolve_tikhonov(trace.samples, e, alpha);

            // Opposite-polarity extrema inside the horizon window (padded by
            // a wavelet length each way).
            const double pad = double(cfg.wavelet.size()) * trace.dt;
            const std::size_t j0 = std::size_t(std::max(
                0.0, (cfg.layer_window.first - pad - trace.t0) / trace.dt));
            const std::size_t j1 = std::min(h.size() - 1, std::size_t((cfg.layer_window.second +
                                                                       pad - trace.t0) /
                                                                      trace.dt));
            std::size_t neg = j0;
            for (std::size_t k = j0; k <= j1; ++k)
                if (h[k] < h[neg]) neg = k;
            const std::size_t max_sep =
                std::size_t(2.0 * cfg.max_void_height / kC0 / trace.dt);
            std::size_t pos = neg;
            for (std::size_t k = neg; k <= std::min(j1, neg + max_sep); ++k)
                if (h[k] > h[pos]) pos = k;
            if (h[neg] < 0.0 && h[pos] > 0.0 && pos > neg) {
                const double sep = double(pos - neg) * trace.dt;
                rep.height_m = kC0 * sep / 2.0;
                rep.method += "+deconvolution";
                if (cfg.source_fc > 0.0) {
                    const double cycles = sep * cfg.source_fc;
                    rep.notes.push_back(cycles > 1.5   ? "overlap stage: separated"
                                        : cycles > 0.75 ? "overlap stage: valley"
                                                        : "overlap stage: single-peak");
                }
            } else {
                rep.notes.push_back("deconvolution: no opposite-polarity pair found");
            }
        } catch (const std::exception& e) {
            rep.notes.push_back(std::string("deconvolution: ") + e.what());
        }
    } else {
        rep.notes.push_back("height: no library or wavelet supplied");
    }

    // 4. Extent.
    try {
        rep.extent_m = estimate_extent(rep.feature->d, cfg.extent_model);
    } catch (const std::exception& e) {
        rep.notes.push_back(std::string("extent: ") + e.what());
    }
    return rep;
}

std::string to_json(const DetectionReport& rep) {
    nlohmann::json j;
    j["void_present"] = rep.void_present;
    j["fill_class"] = to_string(rep.fill_class);
    if (rep.height_m) j["height_m"] = *rep.height_m;
    if (rep.extent_m) j["extent_m"] = *rep.extent_m;
    j["method"] = rep.method;
    if (rep.feature) {
        j["feature"] = {{"d_m", rep.feature->d},
                        {"x_left_m", rep.feature->x_left},
                        {"x_right_m", rep.feature->x_right}};
    }
    if (!rep.eps_chain.empty()) j["eps_chain"] = rep.eps_chain;
    if (rep.eps_anomaly) j["eps_anomaly"] = *rep.eps_anomaly;
    if (!rep.sse_curve.empty()) {
        j["sse_heights_m"] = rep.sse_heights;
        j["sse_curve"] = rep.sse_curve;
    }
    if (!rep.notes.empty()) j["notes"] = rep.notes;
    return j.dump(2) + "\n";
}

std::string sse_curve_csv(const DetectionReport& rep) {
    std::string out = "height_m,sse\n";
    char line[64];
    for (std::size_t i = 0; i < rep.sse_curve.size(); ++i) {
        std::snprintf(line, sizeof line, "%.9g,%.9g\n",
                      i < rep.sse_heights.size() ? rep.sse_heights[i] : double(i),
                      rep.sse_curve[i]);
        out += line;
    }
    return out;
}

}  // namespace gpr::detect
