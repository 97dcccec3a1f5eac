#include "gpr/sigproc.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <stdexcept>
#include <tuple>

#include <json.hpp>

#include "gpr/io.hpp"
#include "gpr/kernels.hpp"

namespace gpr::sigproc {

namespace {

using nlohmann::json;

std::size_t checked_peak_window(const Trace& t, std::pair<double, double> w,
                                std::size_t& i0, std::size_t& i1) {
    const std::size_t n = t.samples.size();
    const double t_end = t.t0 + double(n - 1) * t.dt;
    if (!(w.first < w.second) || w.second < t.t0 || w.first > t_end)
        throw std::invalid_argument("search window empty or outside trace span");
    const double a = std::max(w.first, t.t0);
    const double b = std::min(w.second, t_end);
    i0 = std::size_t(std::ceil((a - t.t0) / t.dt - 1e-9));
    i1 = std::size_t(std::floor((b - t.t0) / t.dt + 1e-9));
    if (i1 >= n) i1 = n - 1;
    if (i0 > i1) throw std::invalid_argument("search window empty");
    return i1 - i0 + 1;
}

double median_of(std::vector<double> v) {
    const std::size_t n = v.size();
    std::nth_element(v.begin(), v.begin() + n / 2, v.end());
    double hi = v[n / 2];
    if (n % 2 == 1) return hi;
    std::nth_element(v.begin(), v.begin() + n / 2 - 1, v.end());
    return 0.5 * (v[n / 2 - 1] + hi);
}

// Natural cubic spline through strictly increasing abscissae.
class CubicSpline {
  public:
    CubicSpline(std::vector<double> x, std::vector<double> y)
        : x_(std::move(x)), y_(std::move(y)), m_(x_.size(), 0.0) {
        const std::size_t n = x_.size();
        if (n < 2) throw std::invalid_argument("spline: needs >= 2 points");
        if (n == 2) return;
        std::vector<double> a(n, 0.0), b(n, 0.0), c(n, 0.0), d(n, 0.0);
        for (std::size_t i = 1; i + 1 < n; ++i) {
            const double h0 = x_[i] - x_[i - 1];
            const double h1 = x_[i + 1] - x_[i];
            a[i] = h0;
            b[i] = 2.0 * (h0 + h1);
            c[i] = h1;
            d[i] = 6.0 * ((y_[i + 1] - y_[i]) / h1 - (y_[i] - y_[i - 1]) / h0);
        }
        // Thomas solve for the interior second derivatives (natural ends).
        for (std::size_t i = 2; i + 1 < n; ++i) {
            const double w = a[i] / b[i - 1];
            b[i] -= w * c[i - 1];
            d[i] -= w * d[i - 1];
        }
        for (std::size_t i = n - 2; i >= 1; --i) {
            m_[i] = (d[i] - c[i] * m_[i + 1]) / b[i];
            if (i == 1) break;
        }
    }

    double operator()(double x) const {
        std::size_t j = std::upper_bound(x_.begin(), x_.end(), x) - x_.begin();
        j = std::clamp<std::size_t>(j, 1, x_.size() - 1);
        const double h = x_[j] - x_[j - 1];
        const double u = (x - x_[j - 1]) / h;
        const double v = 1.0 - u;
        return v * y_[j - 1] + u * y_[j] +
               h * h / 6.0 * ((v * v * v - v) * m_[j - 1] + (u * u * u - u) * m_[j]);
    }

  private:
    std::vector<double> x_, y_, m_;
};

// Symmetric windowed-sinc band-pass kernel (Hamming), unit gain at the band
// center. f_lo may be 0 (pure low-pass).
std::vector<double> design_bandpass(double f_lo, double f_hi, double fs) {
    const double nyq = fs / 2.0;
    if (!(f_lo >= 0.0) || !(f_lo < f_hi) || !(f_hi < nyq))
        throw std::invalid_argument("bandpass: need 0 <= f_lo < f_hi < Nyquist");
    // Transition width for >= 40 dB at 1.2x each band edge; Hamming gives
    // ~53 dB with width ~3.3/N.
    double trans = 0.2 * f_hi;
    if (f_lo > 0.0) trans = std::min(trans, f_lo - f_lo / 1.2);
    std::size_t n = std::size_t(std::ceil(3.3 * fs / trans));
    if (n % 2 == 0) ++n;
    n = std::clamp<std::size_t>(n, 11, 65535);
    const std::size_t half = n / 2;

    auto lp = [&](double fc, std::size_t k) {
        const double m = double(k) - double(half);
        const double xx = 2.0 * std::numbers::pi * (fc / fs) * m;
        return m == 0.0 ? 2.0 * fc / fs : std::sin(xx) / (std::numbers::pi * m);
    };
    std::vector<double> h(n);
    for (std::size_t k = 0; k < n; ++k) {
        const double wnd =
            0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * double(k) / double(n - 1));
        const double v = f_lo > 0.0 ? lp(f_hi, k) - lp(f_lo, k) : lp(f_hi, k);
        h[k] = v * wnd;
    }
    // Normalize the response at the band center to exactly 1.
    const double f_mid = 0.5 * (f_lo + f_hi);
    double g = h[half];
    for (std::size_t k = 1; k <= half; ++k)
        g += 2.0 * h[half + k] * std::cos(2.0 * std::numbers::pi * f_mid / fs * double(k));
    if (g != 0.0)
        for (double& v : h) v /= g;
    return h;
}

// Zero-phase application with zero-padded edges.
std::vector<double> apply_zero_phase(const std::vector<double>& x,
                                     const std::vector<double>& h) {
    const std::size_t n = x.size();
    const std::ptrdiff_t half = std::ptrdiff_t(h.size() / 2);
    std::vector<double> y(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const std::ptrdiff_t lo = std::max<std::ptrdiff_t>(0, std::ptrdiff_t(i) - half);
        const std::ptrdiff_t hi =
            std::min<std::ptrdiff_t>(std::ptrdiff_t(n) - 1, std::ptrdiff_t(i) + half);
        const std::ptrdiff_t k0 = lo - (std::ptrdiff_t(i) - half);
        y[i] = kernels::dot(x.data() + lo, h.data() + k0, std::size_t(hi - lo + 1));
    }
    return y;
}

void require_odd(std::size_t w, const char* who) {
    if (w % 2 == 0) throw std::invalid_argument(std::string(who) + ": window must be odd");
    if (w < 1) throw std::invalid_argument(std::string(who) + ": window must be >= 1");
}

}  // namespace

Radargram repair_traces(const Radargram& r, const std::vector<std::size_t>& dead) {
    validate(r);
    const std::size_t n = r.traces.size();
    std::vector<bool> is_dead(n, false);
    for (std::size_t d : dead) {
        if (d >= n) throw std::invalid_argument("repair_traces: dead index out of range");
        is_dead[d] = true;
    }
    if (std::all_of(is_dead.begin(), is_dead.end(), [](bool b) { return b; }))
        throw std::invalid_argument("repair_traces: all traces dead");
    Radargram out = r;
    for (std::size_t i = 0; i < n; ++i) {
        if (!is_dead[i]) continue;
        std::ptrdiff_t left = std::ptrdiff_t(i) - 1;
        while (left >= 0 && is_dead[std::size_t(left)]) --left;
        std::size_t right = i + 1;
        while (right < n && is_dead[right]) ++right;
        const std::size_t ns = r.traces[i].samples.size();
        std::vector<double>& s = out.traces[i].samples;
        if (left < 0) {
            s = r.traces[right].samples;
        } else if (right >= n) {
            s = r.traces[std::size_t(left)].samples;
        } else {
            const double wl = double(right - i) / double(right - std::size_t(left));
            const double wr = 1.0 - wl;
            const auto& a = r.traces[std::size_t(left)].samples;
            const auto& b = r.traces[right].samples;
            for (std::size_t k = 0; k < ns; ++k) s[k] = wl * a[k] + wr * b[k];
        }
    }
    return out;
}

Radargram reverse_line(const Radargram& r) {
    validate(r);
    Radargram out = r;
    const std::size_t n = r.traces.size();
    for (std::size_t i = 0; i < n; ++i) {
        out.traces[i] = r.traces[n - 1 - i];
        out.traces[i].x = r.x0 + double(n - 1 - i) * r.dx;
    }
    return out;
}

Trace restore_clipped(const Trace& t, double clip_level) {
    if (!(clip_level > 0.0)) throw std::invalid_argument("restore_clipped: clip_level must be > 0");
    validate(t);
    const double thr = clip_level * (1.0 - 1e-6);
    const std::size_t n = t.samples.size();
    std::vector<bool> clipped(n, false);
    for (std::size_t i = 0; i < n; ++i) clipped[i] = std::fabs(t.samples[i]) >= thr;

    Trace out = t;
    constexpr std::size_t kFlank = 6;
    std::size_t i = 0;
    while (i < n) {
        if (!clipped[i]) {
            ++i;
            continue;
        }
        std::size_t a = i, b = i;
        while (b + 1 < n && clipped[b + 1]) ++b;
        if (a == 0 || b == n - 1)
            throw std::invalid_argument("restore_clipped: clipped run touches trace boundary");
        std::vector<double> xs, ys;
        // Flanking unclipped samples left then right, in index order.
        std::size_t got = 0;
        for (std::ptrdiff_t k = std::ptrdiff_t(a) - 1; k >= 0 && got < kFlank; --k) {
            if (!clipped[std::size_t(k)]) {
                xs.push_back(double(k));
                ys.push_back(t.samples[std::size_t(k)]);
                ++got;
            }
        }
        std::reverse(xs.begin(), xs.end());
        std::reverse(ys.begin(), ys.end());
        got = 0;
        for (std::size_t k = b + 1; k < n && got < kFlank; ++k) {
            if (!clipped[k]) {
                xs.push_back(double(k));
                ys.push_back(t.samples[k]);
                ++got;
            }
        }
        CubicSpline spline(xs, ys);
        for (std::size_t k = a; k <= b; ++k) out.samples[k] = spline(double(k));
        i = b + 1;
    }
    return out;
}

Radargram time_zero_align(const Radargram& r, std::pair<double, double> search_window) {
    validate(r);
    std::size_t i0 = 0, i1 = 0;
    checked_peak_window(r.traces.front(), search_window, i0, i1);

    std::vector<double> peaks;
    peaks.reserve(r.traces.size());
    std::vector<std::size_t> peak_idx(r.traces.size());
    for (std::size_t ti = 0; ti < r.traces.size(); ++ti) {
        const auto& s = r.traces[ti].samples;
        std::size_t best = i0;
        for (std::size_t k = i0 + 1; k <= i1; ++k)
            if (s[k] > s[best]) best = k;
        peak_idx[ti] = best;
        peaks.push_back(double(best));
    }
    const std::ptrdiff_t target = std::ptrdiff_t(std::llround(median_of(peaks)));

    Radargram out = r;
    for (std::size_t ti = 0; ti < r.traces.size(); ++ti) {
        const std::ptrdiff_t shift = target - std::ptrdiff_t(peak_idx[ti]);
        if (shift == 0) continue;
        const auto& src = r.traces[ti].samples;
        auto& dst = out.traces[ti].samples;
        std::fill(dst.begin(), dst.end(), 0.0);
        const std::ptrdiff_t n = std::ptrdiff_t(src.size());
        for (std::ptrdiff_t k = 0; k < n; ++k) {
            const std::ptrdiff_t j = k + shift;
            if (j >= 0 && j < n) dst[std::size_t(j)] = src[std::size_t(k)];
        }
    }
    return out;
}

Radargram equalize_traces(const Radargram& r) {
    validate(r);
    const std::size_t n = r.traces.size();
    std::vector<double> mean_abs(n);
    double grand = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const auto& s = r.traces[i].samples;
        mean_abs[i] = kernels::abs_sum(s.data(), s.size()) / double(s.size());
        if (mean_abs[i] == 0.0)
            throw std::invalid_argument("equalize_traces: trace " + std::to_string(i) +
                                        " has zero mean amplitude");
        grand += mean_abs[i];
    }
    grand /= double(n);
    Radargram out = r;
    for (std::size_t i = 0; i < n; ++i) {
        auto& s = out.traces[i].samples;
        kernels::scale(s.data(), grand / mean_abs[i], s.size());
    }
    return out;
}

Trace remove_dc(const Trace& t, std::size_t n_segments) {
    validate(t);
    const std::size_t n = t.samples.size();
    if (n_segments < 1 || n_segments > n)
        throw std::invalid_argument("remove_dc: n_segments out of [1, n]");
    Trace out = t;
    if (n_segments == 1) {
        double m = 0.0;
        for (double s : t.samples) m += s;
        m /= double(n);
        for (double& s : out.samples) s -= m;
        return out;
    }
    // Segment means, anchored at segment centers and linearly blended.
    std::vector<double> centers(n_segments), means(n_segments);
    for (std::size_t k = 0; k < n_segments; ++k) {
        const std::size_t a = k * n / n_segments;
        const std::size_t b = (k + 1) * n / n_segments;
        double m = 0.0;
        for (std::size_t i = a; i < b; ++i) m += t.samples[i];
        means[k] = m / double(b - a);
        centers[k] = 0.5 * double(a + b - 1);
    }
    for (std::size_t i = 0; i < n; ++i) {
        const double x = double(i);
        double m;
        if (x <= centers.front()) {
            m = means.front();
        } else if (x >= centers.back()) {
            m = means.back();
        } else {
            std::size_t k = 1;
            while (centers[k] < x) ++k;
            const double u = (x - centers[k - 1]) / (centers[k] - centers[k - 1]);
            m = (1.0 - u) * means[k - 1] + u * means[k];
        }
        out.samples[i] -= m;
    }
    return out;
}

Radargram remove_direct_wave(const Radargram& r, const Trace& reference) {
    validate(r);
    validate(reference);
    const Trace& first = r.traces.front();
    if (reference.dt != first.dt || reference.samples.size() != first.samples.size())
        throw std::invalid_argument("remove_direct_wave: reference shape mismatch");
    Radargram out = r;
    for (Trace& t : out.traces)
        kernels::axpy(t.samples.data(), reference.samples.data(), -1.0, t.samples.size());
    return out;
}

std::pair<double, double> default_band(double fc) {
    if (!(fc > 0.0)) throw std::invalid_argument("default_band: fc must be > 0");
    return {fc - 0.75 * fc, fc + 0.75 * fc};
}

Trace bandpass(const Trace& t, double f_lo, double f_hi) {
    validate(t);
    const double fs = 1.0 / t.dt;
    const auto h = design_bandpass(f_lo, f_hi, fs);
    Trace out = t;
    out.samples = apply_zero_phase(t.samples, h);
    return out;
}

Trace time_varying_bandpass(const Trace& t, const std::vector<BandKnot>& schedule) {
    validate(t);
    if (schedule.size() < 2)
        throw std::invalid_argument("time_varying_bandpass: need >= 2 knots");
    for (std::size_t i = 1; i < schedule.size(); ++i)
        if (!(schedule[i].time > schedule[i - 1].time))
            throw std::invalid_argument("time_varying_bandpass: schedule not sorted by time");

    auto band_at = [&](double time) -> std::pair<double, double> {
        if (time <= schedule.front().time)
            return {schedule.front().f_lo, schedule.front().f_hi};
        if (time >= schedule.back().time)
            return {schedule.back().f_lo, schedule.back().f_hi};
        std::size_t k = 1;
        while (schedule[k].time < time) ++k;
        const auto& a = schedule[k - 1];
        const auto& b = schedule[k];
        const double u = (time - a.time) / (b.time - a.time);
        return {(1.0 - u) * a.f_lo + u * b.f_lo, (1.0 - u) * a.f_hi + u * b.f_hi};
    };

    const std::size_t n = t.samples.size();
    const double fs = 1.0 / t.dt;
    // 50%-overlap Hann segments; segments extend past both trace ends so the
    // window sum is exactly 1 at every sample. Each filtered segment is
    // accumulated over its full convolution support, so a constant schedule
    // reduces to plain bandpass up to rounding.
    const std::size_t hop = std::max<std::size_t>(16, n / 16);
    const std::size_t seg = 2 * hop;
    std::vector<double> wnd(seg);
    for (std::size_t i = 0; i < seg; ++i)
        wnd[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * (double(i) + 0.5) / double(seg));

    std::vector<double> y(n, 0.0);
    for (std::ptrdiff_t o = -std::ptrdiff_t(hop); o < std::ptrdiff_t(n);
         o += std::ptrdiff_t(hop)) {
        const double t_center = t.t0 + (double(o) + double(seg) / 2.0) * t.dt;
        const auto [lo, hi] = band_at(t_center);
        const auto kern = design_bandpass(lo, hi, fs);
        const std::ptrdiff_t half = std::ptrdiff_t(kern.size() / 2);

        std::vector<double> xs(seg + 2 * std::size_t(half), 0.0);
        for (std::size_t i = 0; i < seg; ++i) {
            const std::ptrdiff_t j = o + std::ptrdiff_t(i);
            if (j >= 0 && j < std::ptrdiff_t(n))
                xs[std::size_t(half) + i] = t.samples[std::size_t(j)] * wnd[i];
        }
        const auto fy = apply_zero_phase(xs, kern);
        for (std::size_t i = 0; i < fy.size(); ++i) {
            const std::ptrdiff_t j = o - half + std::ptrdiff_t(i);
            if (j >= 0 && j < std::ptrdiff_t(n)) y[std::size_t(j)] += fy[i];
        }
    }
    Trace out = t;
    out.samples = std::move(y);
    return out;
}

Trace smooth(const Trace& t, std::size_t window, SmoothKind kind) {
    validate(t);
    require_odd(window, "smooth");
    const std::size_t n = t.samples.size();
    if (window > n) throw std::invalid_argument("smooth: window longer than trace");
    const std::size_t half = window / 2;
    Trace out = t;
    std::vector<double> buf;
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t a = i >= half ? i - half : 0;
        const std::size_t b = std::min(n - 1, i + half);
        if (kind == SmoothKind::Mean) {
            double m = 0.0;
            for (std::size_t k = a; k <= b; ++k) m += t.samples[k];
            out.samples[i] = m / double(b - a + 1);
        } else {
            buf.assign(t.samples.begin() + std::ptrdiff_t(a),
                       t.samples.begin() + std::ptrdiff_t(b + 1));
            out.samples[i] = median_of(std::move(buf));
        }
    }
    return out;
}

Radargram spatial_moving_average(const Radargram& r, std::size_t width) {
    validate(r);
    require_odd(width, "spatial_moving_average");
    const std::size_t n = r.traces.size();
    const std::size_t ns = r.traces.front().samples.size();
    const std::size_t half = width / 2;
    Radargram out = r;
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t a = i >= half ? i - half : 0;
        const std::size_t b = std::min(n - 1, i + half);
        auto& dst = out.traces[i].samples;
        std::fill(dst.begin(), dst.end(), 0.0);
        for (std::size_t k = a; k <= b; ++k)
            kernels::axpy(dst.data(), r.traces[k].samples.data(), 1.0, ns);
        kernels::scale(dst.data(), 1.0 / double(b - a + 1), ns);
    }
    return out;
}

Radargram background_removal(const Radargram& r) {
    validate(r);
    if (r.traces.size() < 2)
        throw std::invalid_argument("background_removal: need >= 2 traces");
    const std::size_t ns = r.traces.front().samples.size();
    std::vector<double> mean(ns, 0.0);
    for (const Trace& t : r.traces) kernels::axpy(mean.data(), t.samples.data(), 1.0, ns);
    kernels::scale(mean.data(), 1.0 / double(r.traces.size()), ns);
    Radargram out = r;
    for (Trace& t : out.traces) kernels::axpy(t.samples.data(), mean.data(), -1.0, ns);
    return out;
}

Radargram tx_filter(const Radargram& r, std::size_t t_window, std::size_t x_window,
                    SmoothKind kind) {
    validate(r);
    require_odd(t_window, "tx_filter (time window)");
    require_odd(x_window, "tx_filter (trace window)");
    const std::size_t nt = r.traces.size();
    const std::size_t ns = r.traces.front().samples.size();
    const std::size_t ht = t_window / 2;
    const std::size_t hx = x_window / 2;
    Radargram out = r;
    std::vector<double> buf;
    for (std::size_t i = 0; i < nt; ++i) {
        const std::size_t xa = i >= hx ? i - hx : 0;
        const std::size_t xb = std::min(nt - 1, i + hx);
        for (std::size_t j = 0; j < ns; ++j) {
            const std::size_t ta = j >= ht ? j - ht : 0;
            const std::size_t tb = std::min(ns - 1, j + ht);
            if (kind == SmoothKind::Mean) {
                double m = 0.0;
                for (std::size_t xi = xa; xi <= xb; ++xi)
                    for (std::size_t tj = ta; tj <= tb; ++tj) m += r.traces[xi].samples[tj];
                out.traces[i].samples[j] = m / double((xb - xa + 1) * (tb - ta + 1));
            } else {
                buf.clear();
                for (std::size_t xi = xa; xi <= xb; ++xi)
                    for (std::size_t tj = ta; tj <= tb; ++tj)
                        buf.push_back(r.traces[xi].samples[tj]);
                out.traces[i].samples[j] = median_of(buf);
            }
        }
    }
    return out;
}

Trace gain_spreading(const Trace& t, double t_ref, double exponent) {
    validate(t);
    const double t_end = t.t0 + double(t.samples.size() - 1) * t.dt;
    if (!(t_ref > 0.0) || t_ref > t_end)
        throw std::invalid_argument("gain_spreading: t_ref must be > 0 and within the trace span");
    Trace out = t;
    for (std::size_t i = 0; i < out.samples.size(); ++i) {
        const double tau = t.t0 + double(i) * t.dt;
        out.samples[i] *= std::pow(std::max(tau / t_ref, 1.0), exponent);
    }
    return out;
}

AgcResult gain_agc(const Trace& t, std::size_t window) {
    validate(t);
    if (window < 2) throw std::invalid_argument("gain_agc: window must be >= 2");
    const std::size_t n = t.samples.size();
    const std::size_t n_win = (n + window - 1) / window;
    std::vector<double> wmean(n_win);
    double target = 0.0;
    for (std::size_t w = 0; w < n_win; ++w) {
        const std::size_t a = w * window;
        const std::size_t b = std::min(n, a + window);
        wmean[w] = kernels::abs_sum(t.samples.data() + a, b - a) / double(b - a);
        target = std::max(target, wmean[w]);
    }
    AgcResult res;
    res.trace = t;
    for (std::size_t w = 0; w < n_win; ++w) {
        const std::size_t a = w * window;
        const std::size_t b = std::min(n, a + window);
        if (wmean[w] == 0.0) {
            res.zero_windows.push_back(w);
            continue;
        }
        kernels::scale(res.trace.samples.data() + a, target / wmean[w], b - a);
    }
    return res;
}

Trace gain_custom(const Trace& t, const std::vector<std::pair<double, double>>& curve) {
    validate(t);
    if (curve.size() < 2) throw std::invalid_argument("gain_custom: need >= 2 knots");
    for (std::size_t i = 0; i < curve.size(); ++i) {
        if (!(curve[i].second > 0.0))
            throw std::invalid_argument("gain_custom: non-positive gain value");
        if (i > 0 && !(curve[i].first > curve[i - 1].first))
            throw std::invalid_argument("gain_custom: knots not sorted by time");
    }
    const double t_end = t.t0 + double(t.samples.size() - 1) * t.dt;
    const double tol = 0.5 * t.dt;
    if (curve.front().first > t.t0 + tol || curve.back().first < t_end - tol)
        throw std::invalid_argument("gain_custom: curve does not cover the trace span");
    Trace out = t;
    for (std::size_t i = 0; i < out.samples.size(); ++i) {
        const double tau = std::clamp(t.t0 + double(i) * t.dt, curve.front().first,
                                      curve.back().first);
        std::size_t k = 1;
        while (k + 1 < curve.size() && curve[k].first < tau) ++k;
        const double u = (tau - curve[k - 1].first) / (curve[k].first - curve[k - 1].first);
        out.samples[i] *= (1.0 - u) * curve[k - 1].second + u * curve[k].second;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Pipeline

PipelineConfig parse_pipeline(const std::string& json_text) {
    json j = json::parse(json_text);
    if (!j.is_array()) throw std::invalid_argument("pipeline: top level must be a JSON list");
    PipelineConfig cfg;
    for (const auto& step : j) {
        if (!step.contains("op")) throw std::invalid_argument("pipeline: step missing 'op'");
        PipelineStep s;
        s.op = step.at("op").get<std::string>();
        s.params_json = step.contains("params") ? step.at("params").dump() : "{}";
        cfg.steps.push_back(std::move(s));
    }
    return cfg;
}

namespace {

SmoothKind parse_kind(const json& p) {
    const std::string k = p.value("kind", "mean");
    if (k == "mean") return SmoothKind::Mean;
    if (k == "median") return SmoothKind::Median;
    throw std::invalid_argument("kind must be 'mean' or 'median'");
}

Radargram per_trace(const Radargram& r, const std::function<Trace(const Trace&)>& f) {
    Radargram out = r;
    for (std::size_t i = 0; i < r.traces.size(); ++i) out.traces[i] = f(r.traces[i]);
    return out;
}

Radargram apply_step(const Radargram& r, const PipelineStep& step, std::string& note) {
    const json p = json::parse(step.params_json);
    const std::string& op = step.op;
    if (op == "repair_traces") {
        return repair_traces(r, p.at("dead").get<std::vector<std::size_t>>());
    } else if (op == "reverse_line") {
        return reverse_line(r);
    } else if (op == "restore_clipped") {
        const double lvl = p.at("clip_level").get<double>();
        return per_trace(r, [&](const Trace& t) { return restore_clipped(t, lvl); });
    } else if (op == "time_zero_align") {
        const auto w = p.at("window_ns").get<std::vector<double>>();
        if (w.size() != 2) throw std::invalid_argument("window_ns must be [lo, hi]");
        return time_zero_align(r, {w[0] * 1e-9, w[1] * 1e-9});
    } else if (op == "equalize_traces") {
        return equalize_traces(r);
    } else if (op == "remove_dc") {
        const std::size_t nseg = p.value("n_segments", std::size_t(1));
        return per_trace(r, [&](const Trace& t) { return remove_dc(t, nseg); });
    } else if (op == "remove_direct_wave") {
        const std::string path = p.at("reference_rgr1").get<std::string>();
        const Radargram ref = io::read_rgr1(path);
        // The reference is the average of the supplied (sky) traces.
        Trace avg = ref.traces.front();
        std::fill(avg.samples.begin(), avg.samples.end(), 0.0);
        for (const Trace& t : ref.traces)
            kernels::axpy(avg.samples.data(), t.samples.data(), 1.0, avg.samples.size());
        kernels::scale(avg.samples.data(), 1.0 / double(ref.traces.size()), avg.samples.size());
        note = "reference averaged over " + std::to_string(ref.traces.size()) + " traces";
        return remove_direct_wave(r, avg);
    } else if (op == "bandpass") {
        double lo, hi;
        if (p.contains("fc_hz")) {
            std::tie(lo, hi) = default_band(p.at("fc_hz").get<double>());
        } else {
            lo = p.at("f_lo_hz").get<double>();
            hi = p.at("f_hi_hz").get<double>();
        }
        return per_trace(r, [&](const Trace& t) { return bandpass(t, lo, hi); });
    } else if (op == "time_varying_bandpass") {
        std::vector<BandKnot> sched;
        for (const auto& k : p.at("schedule"))
            sched.push_back({k.at("time_ns").get<double>() * 1e-9,
                             k.at("f_lo_hz").get<double>(), k.at("f_hi_hz").get<double>()});
        return per_trace(r, [&](const Trace& t) { return time_varying_bandpass(t, sched); });
    } else if (op == "smooth") {
        const std::size_t w = p.at("window").get<std::size_t>();
        const SmoothKind kind = parse_kind(p);
        return per_trace(r, [&](const Trace& t) { return smooth(t, w, kind); });
    } else if (op == "spatial_moving_average") {
        return spatial_moving_average(r, p.at("width").get<std::size_t>());
    } else if (op == "background_removal") {
        return background_removal(r);
    } else if (op == "tx_filter") {
        return tx_filter(r, p.at("t_window").get<std::size_t>(),
                         p.at("x_window").get<std::size_t>(), parse_kind(p));
    } else if (op == "gain_spreading") {
        const double t_ref = p.at("t_ref_ns").get<double>() * 1e-9;
        const double expo = p.value("exponent", 1.0);
        return per_trace(r, [&](const Trace& t) { return gain_spreading(t, t_ref, expo); });
    } else if (op == "gain_agc") {
        const std::size_t w = p.at("window").get<std::size_t>();
        std::size_t flagged = 0;
        Radargram out = per_trace(r, [&](const Trace& t) {
            AgcResult res = gain_agc(t, w);
            flagged += res.zero_windows.size();
            return res.trace;
        });
        if (flagged) note = std::to_string(flagged) + " zero windows left unscaled";
        return out;
    } else if (op == "gain_custom") {
        std::vector<std::pair<double, double>> curve;
        for (const auto& k : p.at("curve"))
            curve.emplace_back(k.at(0).get<double>() * 1e-9, k.at(1).get<double>());
        return per_trace(r, [&](const Trace& t) { return gain_custom(t, curve); });
    }
    throw std::invalid_argument("unknown pipeline op '" + op + "'");
}

}  // namespace

PipelineResult run_pipeline(const Radargram& r, const PipelineConfig& cfg) {
    validate(r);
    PipelineResult res;
    res.radargram = r;
    for (std::size_t i = 0; i < cfg.steps.size(); ++i) {
        std::string note;
        try {
            res.radargram = apply_step(res.radargram, cfg.steps[i], note);
        } catch (const std::exception& e) {
            throw std::runtime_error("pipeline step " + std::to_string(i) + " (" +
                                     cfg.steps[i].op + "): " + e.what());
        }
        res.provenance.push_back({i, cfg.steps[i].op, note});
    }
    return res;
}

}  // namespace gpr::sigproc
