#include "gpr/physics.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "gpr/kernels.hpp"

namespace gpr {

void validate(const Material& m) {
    if (!(m.eps_r >= 1.0)) throw std::domain_error("material '" + m.name + "': eps_r must be >= 1");
    if (!(m.sigma >= 0.0)) throw std::domain_error("material '" + m.name + "': sigma must be >= 0");
    if (!(m.mu_r >= 1.0)) throw std::domain_error("material '" + m.name + "': mu_r must be >= 1");
}

void validate(const Trace& t) {
    if (!(t.dt > 0.0)) throw std::invalid_argument("trace: dt must be > 0");
    if (t.samples.size() < 2) throw std::invalid_argument("trace: needs at least 2 samples");
    if (!all_finite(t.samples)) throw std::invalid_argument("trace: non-finite sample");
}

void validate(const Radargram& r) {
    if (r.traces.empty()) throw std::invalid_argument("radargram: no traces");
    if (!(r.dx > 0.0)) throw std::invalid_argument("radargram: dx must be > 0");
    const Trace& first = r.traces.front();
    for (const Trace& t : r.traces) {
        validate(t);
        if (t.dt != first.dt || t.t0 != first.t0 ||
            t.samples.size() != first.samples.size())
            throw std::invalid_argument("radargram: traces must share dt, t0 and length");
    }
}

void validate(const RickerSpec& s) {
    if (!(s.fc > 0.0)) throw std::invalid_argument("ricker: fc must be > 0");
    if (s.amplitude == 0.0) throw std::invalid_argument("ricker: amplitude must be nonzero");
}

}  // namespace gpr

namespace gpr::phys {

double wave_speed(double eps_r) {
    if (!(eps_r >= 1.0)) throw std::domain_error("wave_speed: eps_r must be >= 1");
    return kC0 / std::sqrt(eps_r);
}

PropagationConstants propagation_constants(const Material& m, double f) {
    validate(m);
    if (!std::isfinite(f) || !(f > 0.0))
        throw std::domain_error("propagation_constants: f must be finite and > 0");
    const double omega = 2.0 * std::numbers::pi * f;
    const double eps = m.eps_r * kEps0;
    const double mu = m.mu_r * kMu0;
    const double loss = m.sigma / (omega * eps);
    const double root = std::sqrt(loss * loss + 1.0);
    const double alpha = omega * std::sqrt(mu * eps / 2.0) * std::sqrt(root - 1.0);
    const double beta = omega * std::sqrt(mu * eps / 2.0) * std::sqrt(root + 1.0);
    return {alpha, beta, omega / beta};
}

FresnelCoefficients fresnel(double eps1, double eps2, double theta_i) {
    if (!(eps1 >= 1.0) || !(eps2 >= 1.0))
        throw std::domain_error("fresnel: permittivities must be >= 1");
    if (!(theta_i >= 0.0) || !(theta_i < std::numbers::pi / 2.0))
        throw std::domain_error("fresnel: theta_i must lie in [0, pi/2)");
    if (theta_i == 0.0) {
        // Normal incidence; T = 1 + R holds exactly in this form.
        const double n = std::sqrt(eps2 / eps1);
        const double r = (1.0 - n) / (1.0 + n);
        return {r, 1.0 + r};
    }
    const double n2 = eps2 / eps1;
    const double s = std::sin(theta_i);
    const double rad = n2 - s * s;
    if (rad <= 0.0)
        throw std::domain_error("fresnel: total internal reflection (sin^2 theta_i >= n^2)");
    const double c = std::cos(theta_i);
    const double root = std::sqrt(rad);
    return {(c - root) / (c + root), 2.0 * c / (c + root)};
}

double crim_mix(const std::vector<std::pair<double, double>>& components) {
    if (components.empty()) throw std::invalid_argument("crim_mix: no components");
    double fsum = 0.0, acc = 0.0;
    for (const auto& [f, eps] : components) {
        if (!(f >= 0.0)) throw std::invalid_argument("crim_mix: negative fraction");
        if (!(eps > 0.0)) throw std::invalid_argument("crim_mix: non-positive permittivity");
        fsum += f;
        acc += f * std::sqrt(eps);
    }
    if (std::fabs(fsum - 1.0) > 1e-9)
        throw std::invalid_argument("crim_mix: fractions must sum to 1");
    return acc * acc;
}

double crim_three_phase(double phi, double s_w, double eps_w, double eps_m,
                        double eps_g) {
    if (!(phi >= 0.0 && phi <= 1.0)) throw std::invalid_argument("crim: phi out of [0,1]");
    if (!(s_w >= 0.0 && s_w <= 1.0)) throw std::invalid_argument("crim: s_w out of [0,1]");
    const double acc = phi * s_w * std::sqrt(eps_w) + (1.0 - phi) * std::sqrt(eps_m) +
                       phi * (1.0 - s_w) * std::sqrt(eps_g);
    return acc * acc;
}

double annan_moisture(double theta_v) {
    if (!(theta_v >= 0.0 && theta_v <= 1.0))
        throw std::domain_error("annan_moisture: theta_v out of [0,1]");
    return 3.03 + 9.3 * theta_v + 146.0 * theta_v * theta_v -
           76.6 * theta_v * theta_v * theta_v;
}

double ricker(double t, const RickerSpec& spec) {
    validate(spec);
    const double zeta = std::numbers::pi * std::numbers::pi * spec.fc * spec.fc;
    const double chi = std::numbers::sqrt2 / spec.fc;
    const double u = t - chi;
    return spec.amplitude * -(2.0 * zeta * u * u - 1.0) * std::exp(-zeta * u * u);
}

std::vector<double> sample_ricker(const RickerSpec& spec, double dt, std::size_t n) {
    validate(spec);
    if (!(dt > 0.0)) throw std::invalid_argument("sample_ricker: dt must be > 0");
    std::vector<double> w(n);
    for (std::size_t i = 0; i < n; ++i) w[i] = ricker(i * dt, spec);
    return w;
}

double point_target_arrival(double depth, double offset, double v) {
    if (!(depth > 0.0)) throw std::invalid_argument("point_target_arrival: depth must be > 0");
    if (!(v > 0.0)) throw std::invalid_argument("point_target_arrival: v must be > 0");
    return 2.0 * std::sqrt(depth * depth + offset * offset) / v;
}

std::vector<double> convolve_reflectivity(const std::vector<double>& reflectivity,
                                          const std::vector<double>& wavelet) {
    if (reflectivity.empty() || wavelet.empty())
        throw std::invalid_argument("convolve_reflectivity: empty input");
    const std::size_t n = reflectivity.size();
    std::vector<double> y(n, 0.0);
    // Tap-major accumulation; each tap is an elementwise axpy.
    for (std::size_t k = 0; k < wavelet.size() && k < n; ++k)
        kernels::axpy(y.data() + k, reflectivity.data(), wavelet[k], n - k);
    return y;
}

}  // namespace gpr::phys
