// File formats and run bookkeeping: RGR1 radargrams, CSV and P5 graymap
// export, seeded noise injection, atomic writes, run manifests.

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "gpr/types.hpp"

namespace gpr::io {

// RGR1: magic "RGR1", little-endian u32 n_traces, u32 n_samples, f64 dt_s,
// f64 t0_s, f64 dx_m, f64 x0_m, then n_traces x n_samples float32 samples,
// trace-major.
void write_rgr1(const std::filesystem::path& path, const Radargram& r);
Radargram read_rgr1(const std::filesystem::path& path);

// Long-format CSV: header "x_m,t_ns,amplitude", '.' decimal point, '\n'.
std::string to_csv(const Radargram& r);

// 8-bit binary P5 graymap, width = n_traces, height = n_samples. Amplitude
// is mapped linearly and clipped symmetrically at the given percentile of
// |amplitude|; zero maps to mid-gray 128.
std::vector<std::uint8_t> to_pgm(const Radargram& r, double clip_percentile);

// Additive white Gaussian noise at a signal-power / noise-power ratio
// (dB-free). Deterministic: hand-rolled generator, same stream everywhere.
void add_awgn(Radargram& r, double snr_power_ratio, std::uint64_t seed);
void add_awgn(Trace& t, double snr_power_ratio, std::uint64_t seed);

// Small deterministic PRNG (xoshiro256++) with a Box-Muller normal.
class Rng {
  public:
    explicit Rng(std::uint64_t seed);
    std::uint64_t next_u64();
    double next_unit();    // [0, 1)
    double next_normal();  // standard normal
  private:
    std::uint64_t s_[4];
    bool have_spare_ = false;
    double spare_ = 0.0;
};

// FNV-1a 64-bit over a byte string; used for config hashes.
std::uint64_t fnv1a64(const void* data, std::size_t n, std::uint64_t seed = 0xcbf29ce484222325ull);

// Write bytes atomically (temp file in the same directory + rename).
void atomic_write(const std::filesystem::path& path, const void* data, std::size_t n);
void atomic_write(const std::filesystem::path& path, const std::string& text);

struct RunManifest {
    std::string command;
    std::vector<std::string> inputs;
    std::vector<std::string> outputs;
    std::uint64_t config_hash = 0;
    std::uint64_t seed = 0;
    std::string version;
    double wall_time_s = 0.0;
    std::vector<std::string> notes;
};

// Serialized next to the primary output as <output>.manifest.json.
void write_manifest(const std::filesystem::path& output, const RunManifest& m);

}  // namespace gpr::io
