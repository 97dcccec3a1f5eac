#include "gpr/equip.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <json.hpp>

namespace gpr::equip {

namespace {

struct PlatePick {
    std::size_t index;
    double peak;  // |amplitude|
};

PlatePick plate_pick(const Trace& t, std::pair<double, double> window) {
    const std::size_t n = t.samples.size();
    const double t_end = t.t0 + double(n - 1) * t.dt;
    if (!(window.first < window.second) || window.first < t.t0 || window.second > t_end)
        throw std::invalid_argument("calibration: plate window outside trace span");
    const std::size_t i0 = std::size_t((window.first - t.t0) / t.dt);
    const std::size_t i1 = std::min(n - 1, std::size_t((window.second - t.t0) / t.dt));
    std::size_t best = i0;
    for (std::size_t k = i0 + 1; k <= i1; ++k)
        if (std::fabs(t.samples[k]) > std::fabs(t.samples[best])) best = k;
    return {best, std::fabs(t.samples[best])};
}

}  // namespace

void validate(const CalibrationSet& cs) {
    gpr::validate(cs.traces);
    if (cs.traces.traces.size() < 2)
        throw std::invalid_argument("calibration: need >= 2 traces");
    if (!cs.timestamps.empty() && cs.timestamps.size() != cs.traces.traces.size())
        throw std::invalid_argument("calibration: timestamp count mismatch");
}

double noise_to_signal(const CalibrationSet& cs) {
    gpr::validate(cs.traces);
    double acc = 0.0;
    for (const Trace& t : cs.traces.traces) {
        const PlatePick pick = plate_pick(t, cs.plate_peak_window);
        if (pick.peak == 0.0) throw std::invalid_argument("noise_to_signal: zero plate peak");
        const std::size_t n = t.samples.size();
        // Noise window: half the time window, right after the plate pick.
        const std::size_t len = n / 2;
        const std::size_t a = pick.index + 1;
        if (a >= n) throw std::invalid_argument("noise_to_signal: no samples after the plate pick");
        const std::size_t b = std::min(n - 1, a + len - 1);
        double noise = 0.0;
        for (std::size_t k = a; k <= b; ++k) noise = std::max(noise, std::fabs(t.samples[k]));
        acc += noise / pick.peak;
    }
    return acc / double(cs.traces.traces.size());
}

double amplitude_jitter(const CalibrationSet& cs) {
    validate(cs);
    double lo = 1e300, hi = 0.0, sum = 0.0;
    for (const Trace& t : cs.traces.traces) {
        const double p = plate_pick(t, cs.plate_peak_window).peak;
        lo = std::min(lo, p);
        hi = std::max(hi, p);
        sum += p;
    }
    const double ave = sum / double(cs.traces.traces.size());
    if (ave == 0.0) throw std::invalid_argument("amplitude_jitter: zero mean peak");
    return (hi - lo) / ave;
}

double time_jitter(const std::vector<double>& durations) {
    if (durations.size() < 2) throw std::invalid_argument("time_jitter: need >= 2 durations");
    double lo = 1e300, hi = 0.0;
    for (double d : durations) {
        if (!(d > 0.0)) throw std::invalid_argument("time_jitter: durations must be > 0");
        lo = std::min(lo, d);
        hi = std::max(hi, d);
    }
    return (hi - lo) / lo;
}

LongTermStability long_term_stability(const CalibrationSet& cs, double anchor, double horizon) {
    validate(cs);
    if (cs.timestamps.empty())
        throw std::invalid_argument("long_term_stability: timestamps required");
    const double span = cs.timestamps.back() - cs.timestamps.front();
    if (span + 1e-9 < horizon)
        throw std::invalid_argument("long_term_stability: span shorter than the horizon");

    double ref = -1.0, lo = 1e300, hi = 0.0;
    double lag_lo = 1e300, lag_hi = 0.0;
    for (std::size_t i = 0; i < cs.traces.traces.size(); ++i) {
        const Trace& t = cs.traces.traces[i];
        const PlatePick pick = plate_pick(t, cs.plate_peak_window);
        const double lag = double(pick.index) * t.dt;
        lag_lo = std::min(lag_lo, lag);
        lag_hi = std::max(lag_hi, lag);
        if (cs.timestamps[i] - cs.timestamps.front() >= anchor) {
            if (ref < 0.0) ref = pick.peak;
            lo = std::min(lo, pick.peak);
            hi = std::max(hi, pick.peak);
        }
    }
    if (ref < 0.0)
        throw std::invalid_argument("long_term_stability: no trace at/after the anchor mark");
    if (ref == 0.0) throw std::invalid_argument("long_term_stability: zero reference peak");
    return {(hi - lo) / ref, (lag_hi - lag_lo) / horizon};
}

double penetration_index(double a_water, double a_air) {
    if (!(a_air > 0.0)) throw std::invalid_argument("penetration_index: A_air must be > 0");
    return a_water / a_air;
}

Scorecard score(const CalibrationSet& cs, const std::vector<double>& durations,
                std::optional<double> wpi) {
    Scorecard sc;
    sc.n_s = noise_to_signal(cs);
    sc.j_amp = amplitude_jitter(cs);
    sc.n_s_pass = sc.n_s <= 0.05;
    sc.j_amp_pass = sc.j_amp <= 0.01;
    if (durations.size() >= 2) {
        sc.j_time = time_jitter(durations);
        sc.j_time_pass = *sc.j_time <= 0.01;
    }
    if (!cs.timestamps.empty()) {
        try {
            const LongTermStability lt = long_term_stability(cs);
            sc.lav = lt.lav;
            sc.lts = lt.lts;
            sc.lav_pass = lt.lav <= 0.03;
        } catch (const std::exception&) {
            // Short recording: long-term metrics stay unset.
        }
    }
    sc.wpi = wpi;
    return sc;
}

std::string to_json(const Scorecard& sc) {
    nlohmann::json j;
    j["noise_to_signal"] = {{"value", sc.n_s}, {"limit", 0.05}, {"pass", sc.n_s_pass}};
    j["amplitude_jitter"] = {{"value", sc.j_amp}, {"limit", 0.01}, {"pass", sc.j_amp_pass}};
    if (sc.j_time)
        j["time_jitter"] = {{"value", *sc.j_time}, {"limit", 0.01}, {"pass", sc.j_time_pass}};
    if (sc.lav) j["lav"] = {{"value", *sc.lav}, {"limit", 0.03}, {"pass", sc.lav_pass}};
    if (sc.lts) j["lts"] = {{"value", *sc.lts}};
    if (sc.wpi) j["wpi"] = {{"value", *sc.wpi}};
    return j.dump(2) + "\n";
}

}  // namespace gpr::equip
