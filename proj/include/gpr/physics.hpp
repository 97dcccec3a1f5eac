// Wave propagation formulas, interface coefficients, mixing laws and the
// source wavelet. All functions are pure.

#pragma once

#include <utility>
#include <vector>

#include "gpr/types.hpp"

namespace gpr::phys {

// Phase velocity in a low-loss medium, c / sqrt(eps_r).
double wave_speed(double eps_r);

struct PropagationConstants {
    double alpha;  // attenuation, Np/m
    double beta;   // phase constant, rad/m
    double v;      // phase velocity, m/s
};

// Attenuation and phase constant of a lossy medium at frequency f.
PropagationConstants propagation_constants(const Material& m, double f);

struct FresnelCoefficients {
    double R;  // reflection
    double T;  // transmission
};

// Perpendicular-polarization interface coefficients for a wave passing
// eps1 -> eps2 at incidence theta_i (radians, default normal). Throws on
// total internal reflection.
FresnelCoefficients fresnel(double eps1, double eps2, double theta_i = 0.0);

// CRIM volumetric mixing: (sum f_i sqrt(eps_i))^2. Fractions must sum to 1.
double crim_mix(const std::vector<std::pair<double, double>>& components);

// Three-phase CRIM: porosity phi, saturation s_w, and the permittivities of
// water, solid matrix and gas.
double crim_three_phase(double phi, double s_w, double eps_w, double eps_m,
                        double eps_g);

// Topp/Annan empirical soil model: eps'(theta_v).
double annan_moisture(double theta_v);

// Source wavelet sample at time t.
double ricker(double t, const RickerSpec& spec);

// Wavelet sampled at t = 0, dt, ..., (n-1)*dt.
std::vector<double> sample_ricker(const RickerSpec& spec, double dt, std::size_t n);

// Two-way travel time to a point target at depth a, lateral offset x,
// medium velocity v.
double point_target_arrival(double depth, double offset, double v);

// Causal discrete convolution of a reflectivity sequence with a sampled
// wavelet, truncated to the reflectivity length.
std::vector<double> convolve_reflectivity(const std::vector<double>& reflectivity,
                                          const std::vector<double>& wavelet);

}  // namespace gpr::phys
