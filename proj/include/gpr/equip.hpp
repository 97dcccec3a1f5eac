// Equipment quality metrics over calibration recordings: metal-plate shots,
// sky shots and long-duration shots.

#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "gpr/types.hpp"

namespace gpr::equip {

struct CalibrationSet {
    Radargram traces;                           // plate shots
    std::pair<double, double> plate_peak_window{0.0, 0.0};  // s
    std::vector<double> timestamps;             // optional, s since start
};

void validate(const CalibrationSet& cs);

// Mean over traces of (max |amplitude| in the post-plate noise half) /
// (max |amplitude| in the plate window). The noise half spans half the
// total time window, starting right after the plate pick.
double noise_to_signal(const CalibrationSet& cs);

// (A_max - A_min) / A_ave over per-trace plate peaks.
double amplitude_jitter(const CalibrationSet& cs);

// (dt_max - dt_min) / dt_min over acquisition durations.
double time_jitter(const std::vector<double>& durations);

struct LongTermStability {
    double lav;  // long-term amplitude variation
    double lts;  // long-term time-window shift
};

// LAV = (A_max - A_min)/A_ref over plate peaks from `anchor` seconds onward
// (A_ref = first peak at/after the anchor); LTS = (lag_max - lag_min) /
// horizon, where lag is the time from trace start to the max-amplitude
// sample. Defaults follow the 2 h / 20 min protocol.
LongTermStability long_term_stability(const CalibrationSet& cs, double anchor = 1200.0,
                                      double horizon = 7200.0);

// Water penetration index A_water / A_air.
double penetration_index(double a_water, double a_air);

struct Scorecard {
    double n_s = 0.0;
    double j_amp = 0.0;
    std::optional<double> j_time;
    std::optional<double> lav;
    std::optional<double> lts;
    std::optional<double> wpi;
    bool n_s_pass = false;    // <= 5%
    bool j_amp_pass = false;  // <= 1%
    bool j_time_pass = false; // <= 1%
    bool lav_pass = false;    // <= 3%
};

// Evaluates every metric the inputs allow and applies the standard limits.
Scorecard score(const CalibrationSet& cs, const std::vector<double>& durations = {},
                std::optional<double> wpi = std::nullopt);

std::string to_json(const Scorecard& sc);

}  // namespace gpr::equip
