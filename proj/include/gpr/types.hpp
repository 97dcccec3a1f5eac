// Shared trace and material types.

#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace gpr {

// Speed of light in vacuum (m/s).
inline constexpr double kC0 = 2.99792458e8;
inline constexpr double kEps0 = 8.8541878128e-12;  // F/m
inline constexpr double kMu0 = 1.25663706212e-6;   // H/m

// Electromagnetic properties of one medium. Real permittivity only; loss
// enters through the conductivity.
struct Material {
    std::string name;
    double eps_r = 1.0;   // relative permittivity
    double sigma = 0.0;   // S/m
    double mu_r = 1.0;    // relative permeability
};

void validate(const Material& m);

// One A-scan: uniformly sampled field amplitudes.
struct Trace {
    std::vector<double> samples;
    double dt = 0.0;  // s
    double t0 = 0.0;  // s
    double x = 0.0;   // along-track position, m
};

void validate(const Trace& t);

// A B-scan: equally spaced traces sharing dt, t0 and sample count.
struct Radargram {
    std::vector<Trace> traces;
    double dx = 0.0;  // m
    double x0 = 0.0;  // m
};

void validate(const Radargram& r);

// Ricker source description; the wavelet peaks at amplitude when
// t = sqrt(2)/fc.
struct RickerSpec {
    double fc = 0.0;         // Hz
    double amplitude = 1.0;  // peak scale
};

void validate(const RickerSpec& s);

inline bool all_finite(const std::vector<double>& v) {
    for (double x : v)
        if (!std::isfinite(x)) return false;
    return true;
}

}  // namespace gpr
