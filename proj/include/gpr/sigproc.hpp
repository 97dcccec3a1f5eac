// Trace/radargram processing chain: trace editing, channel adjustment,
// drift and direct-wave removal, filtering and gain. Pure transformations;
// none changes dt, t0 or sample count, and only repair/reverse touch trace
// order.

#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "gpr/types.hpp"

namespace gpr::sigproc {

enum class SmoothKind { Mean, Median };

// Replaces dead traces by linear interpolation of the nearest live
// neighbors; at the line ends the nearest live trace is copied.
Radargram repair_traces(const Radargram& r, const std::vector<std::size_t>& dead);

// Reverses trace order and remaps positions to x0 + (n-1-i)*dx.
Radargram reverse_line(const Radargram& r);

// Rebuilds samples clipped at |v| >= clip_level*(1-1e-6) with a cubic
// spline through the flanking unclipped samples. A clipped run touching the
// trace boundary is an error.
Trace restore_clipped(const Trace& t, double clip_level);

// Shifts every trace (zero-filled, non-circular) so its peak inside the
// search window lands at the median peak index of all traces.
Radargram time_zero_align(const Radargram& r, std::pair<double, double> search_window);

// Scales trace i by mean(mean|A_j|) / mean|A_i|.
Radargram equalize_traces(const Radargram& r);

// Per-segment mean removal; for n_segments > 1 the segment means are
// linearly blended across boundaries.
Trace remove_dc(const Trace& t, std::size_t n_segments = 1);

// Subtracts a reference trace (e.g. the averaged sky shot) samplewise.
Radargram remove_direct_wave(const Radargram& r, const Trace& reference);

// Zero-phase windowed-sinc (Hamming) band-pass. The kernel order is chosen
// for >= 40 dB stopband at 1.2x the band edges.
Trace bandpass(const Trace& t, double f_lo, double f_hi);

// Band edges for a center frequency per the 1.5x-bandwidth rule:
// [fc - 0.75 fc, fc + 0.75 fc].
std::pair<double, double> default_band(double fc);

struct BandKnot {
    double time;  // s
    double f_lo;  // Hz
    double f_hi;  // Hz
};

// Band edges interpolated between knots; the output is assembled from
// 50%-overlapping raised-cosine windowed segments, each filtered with its
// local band.
Trace time_varying_bandpass(const Trace& t, const std::vector<BandKnot>& schedule);

// Sliding-window mean or median; edge windows shrink.
Trace smooth(const Trace& t, std::size_t window, SmoothKind kind);

// Sliding mean across traces at each time sample.
Radargram spatial_moving_average(const Radargram& r, std::size_t width);

// Subtracts the mean trace from every trace.
Radargram background_removal(const Radargram& r);

// 2D sliding mean/median over the time x trace grid.
Radargram tx_filter(const Radargram& r, std::size_t t_window, std::size_t x_window,
                    SmoothKind kind);

// Spreading-loss gain: sample at time tau is multiplied by
// max(tau/t_ref, 1)^exponent.
Trace gain_spreading(const Trace& t, double t_ref, double exponent = 1.0);

struct AgcResult {
    Trace trace;
    std::vector<std::size_t> zero_windows;  // left at zero, flagged
};

// Window-wise automatic gain: each window is scaled so its mean |amplitude|
// matches the largest pre-scaling window mean.
AgcResult gain_agc(const Trace& t, std::size_t window);

// Samplewise multiplication by a positive gain curve given as (time, gain)
// knots, linearly interpolated.
Trace gain_custom(const Trace& t, const std::vector<std::pair<double, double>>& curve);

// ---------------------------------------------------------------------------
// Pipeline

struct PipelineStep {
    std::string op;
    std::string params_json;  // raw JSON object, may be "{}"
};

struct PipelineConfig {
    std::vector<PipelineStep> steps;
};

PipelineConfig parse_pipeline(const std::string& json_text);

struct StepRecord {
    std::size_t index;
    std::string op;
    std::string note;
};

struct PipelineResult {
    Radargram radargram;
    std::vector<StepRecord> provenance;
};

// Applies the steps in order; the first failing step aborts with its index
// and cause in the exception message.
PipelineResult run_pipeline(const Radargram& r, const PipelineConfig& cfg);

}  // namespace gpr::sigproc
