// Void identification: thickness/permittivity estimation from reflection
// amplitudes, least-squares template matching against a simulated height
// library, Tikhonov-regularized deconvolution, fill classification and
// horizontal-extent estimation.

#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "gpr/fdtd.hpp"
#include "gpr/types.hpp"

namespace gpr::detect {

struct ReflectionPick {
    double time;       // s
    double amplitude;  // signed field units
    int polarity;      // +1 / -1
};

// Local extrema whose magnitude reaches min_prominence * max|trace|,
// sorted by time. May return an empty list.
std::vector<ReflectionPick> pick_reflections(const Trace& t, double min_prominence);

// Signed amplitude of the reflection inside a time window: the strongest
// interior local extremum (falling back to the strongest sample).
double pick_amplitude(const Trace& t, std::pair<double, double> window);

// Eq-family thickness/permittivity relations.
double layer_thickness(double delta_t, double eps_r);       // c dt / (2 sqrt(eps))
double resolution_limit(double period, double eps_r);       // c T / (2 sqrt(eps))
double eps_from_core(double delta_t, double delta_d);       // (c dt / 2 dd)^2
double eps_surface(double a0, double ap);                   // ((Ap+A0)/(Ap-A0))^2

// Recursive reflection-amplitude estimate for layer n. amplitudes holds the
// signed picks A0..A_{n-1} (surface-reflection-positive convention) and
// eps_chain the already-estimated permittivities of layers 1..n-1.
double eps_layer_n(const std::vector<double>& amplitudes, double ap,
                   const std::vector<double>& eps_chain);

// Convenience: estimate every layer top-down from the amplitude list.
std::vector<double> eps_profile(const std::vector<double>& amplitudes, double ap);

struct CmpResult {
    double eps;
    double thickness;
};

// Common-midpoint two-offset estimate of the top layer.
CmpResult cmp_estimate(double x1, double t1, double x2, double t2);

// ---------------------------------------------------------------------------
// Template matching

struct TemplateLibrary {
    fdtd::Scene base_scene;  // void-free
    Material fill;
    std::vector<double> heights;   // strictly increasing, m
    std::vector<Trace> templates;  // direct wave removed
};

// One simulate_ascan per height at the shot nearest the void center, with
// the free-space direct wave subtracted. The void's lateral placement comes
// from base_scene.void_box if present, otherwise it spans the full non-PML
// width.
TemplateLibrary build_template_library(const fdtd::Scene& base_scene, const Material& fill,
                                       const std::vector<double>& heights, int n_threads = 1);

struct HeightMatch {
    double height;                  // argmin height, m
    std::vector<double> sse_curve;  // one SSE per library height
};

// Sum of squared sample differences against every template; the query must
// already share the library's time alignment.
HeightMatch identify_height_lsq(const Trace& query, const TemplateLibrary& lib);

// ---------------------------------------------------------------------------
// Deconvolution

// Lower-triangular constant-diagonal operator built from a sampled wavelet:
// entry (i, j) = wavelet[i - j] for i >= j.
struct WaveletMatrix {
    std::vector<double> wavelet;
    std::size_t n = 0;
};

WaveletMatrix build_wavelet_matrix(std::vector<double> wavelet, std::size_t n);

double wavelet_matrix_entry(const WaveletMatrix& e, std::size_t i, std::size_t j);

// y = E h and E^T y.
std::vector<double> apply(const WaveletMatrix& e, const std::vector<double>& h);
std::vector<double> apply_transpose(const WaveletMatrix& e, const std::vector<double>& y);

// Drops leading wavelet samples below rel_threshold * max|w|; returns the
// trimmed wavelet and the number of dropped samples. A Ricker sampled from
// t = 0 starts ~1e-7 of peak, which makes the triangular solve useless
// without this.
std::pair<std::vector<double>, std::size_t> trim_wavelet_onset(
    const std::vector<double>& w, double rel_threshold = 1e-3);

// Exact triangular solve E h = y (forward substitution).
std::vector<double> deconvolve_naive(const std::vector<double>& y, const WaveletMatrix& e);

// (E^T E + alpha I) h = E^T y via banded Cholesky.
std::vector<double> deconvolve_tikhonov(const std::vector<double>& y, const WaveletMatrix& e,
                                        double alpha);

// Discrepancy principle: the alpha whose residual ||E h - y|| matches
// noise_rms * sqrt(n).
double choose_alpha_discrepancy(const std::vector<double>& y, const WaveletMatrix& e,
                                double noise_rms);

// One-norm bound of E^T E, handy for scale-aware alpha choices.
double normal_matrix_norm_bound(const WaveletMatrix& e);

// ---------------------------------------------------------------------------
// Classification and extent

enum class FillClass { Air, Water, Grout, Unknown };

const char* to_string(FillClass f);

// Threshold bands are field-calibratable; defaults follow the simulated
// lossy-scene estimates (water reads ~20 rather than 81).
struct FillThresholds {
    double air_max = 3.0;
    double grout_min = 9.0;
    double grout_max = 17.0;  // above this: water
};

FillClass classify_void_fill(double eps_estimate, const FillThresholds& thr = {});

struct FeatureExtent {
    double d;  // m
    double x_left;
    double x_right;
    std::size_t i_left;
    std::size_t i_right;
};

// Lateral gap in the base-subgrade interface reflection. Per-trace signed
// horizon amplitude inside layer_window; traces departing >50% from the
// lateral median seed the anomaly, extended outward at 25% hysteresis.
// Throws "no anomaly" when nothing crosses the threshold.
FeatureExtent extract_feature_length(const Radargram& r,
                                     std::pair<double, double> layer_window);

struct ExtentModel {
    double slope = 0.0;      // d per meter of true length
    double intercept = 0.0;  // m
    double r = 0.0;          // correlation coefficient
};

// OLS of feature length d on true length L (d = slope*L + intercept).
ExtentModel fit_extent_regression(const std::vector<std::pair<double, double>>& pairs);

// Inverts the model: L = (d - intercept) / slope.
double estimate_extent(double d, const ExtentModel& model);

// ---------------------------------------------------------------------------
// Orchestration

struct DetectConfig {
    std::pair<double, double> layer_window{0.0, 0.0};    // base-subgrade horizon, s
    std::pair<double, double> surface_window{0.0, 0.0};  // surface reflection, s
    std::vector<std::pair<double, double>> interface_windows;  // interfaces above the horizon
    double plate_amplitude = 0.0;                        // Ap; 0 disables classification
    FillThresholds thresholds;
    ExtentModel extent_model{0.8077, 0.2877, 0.99};
    const TemplateLibrary* library = nullptr;  // precise height path when present
    std::vector<double> wavelet;               // trimmed wavelet for the fast path
    double noise_rms = 0.0;                    // 0: estimated from the pre-surface samples
    double source_fc = 0.0;                    // annotation only
    double max_void_height = 0.35;             // m, bounds the extrema pairing
};

struct DetectionReport {
    bool void_present = false;
    FillClass fill_class = FillClass::Unknown;
    std::optional<double> height_m;
    std::optional<double> extent_m;
    std::string method;
    // diagnostics
    std::optional<FeatureExtent> feature;
    std::vector<double> eps_chain;
    std::optional<double> eps_anomaly;
    std::vector<double> sse_heights;
    std::vector<double> sse_curve;
    std::vector<std::string> notes;
};

// Expects a preprocessed radargram (direct wave removed, time-zero
// aligned). Failures in individual stages are recorded in notes and leave
// the corresponding fields unset.
DetectionReport detect_pipeline(const Radargram& r, const DetectConfig& cfg);

std::string to_json(const DetectionReport& rep);

// "height_m,sse" rows for the diagnostics curve.
std::string sse_curve_csv(const DetectionReport& rep);

}  // namespace gpr::detect
