#include "gpr/io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <numbers>
#include <stdexcept>

#include <json.hpp>

namespace gpr::io {

namespace {

void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(char((v >> (8 * i)) & 0xff));
}

void put_f64(std::string& out, double v) {
    std::uint64_t bits = std::bit_cast<std::uint64_t>(v);
    for (int i = 0; i < 8; ++i) out.push_back(char((bits >> (8 * i)) & 0xff));
}

void put_f32(std::string& out, float v) {
    std::uint32_t bits = std::bit_cast<std::uint32_t>(v);
    put_u32(out, bits);
}

struct Reader {
    const std::uint8_t* p;
    const std::uint8_t* end;
    void need(std::size_t n) const {
        if (std::size_t(end - p) < n) throw std::runtime_error("rgr1: truncated file");
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= std::uint32_t(p[i]) << (8 * i);
        p += 4;
        return v;
    }
    double f64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= std::uint64_t(p[i]) << (8 * i);
        p += 8;
        return std::bit_cast<double>(v);
    }
    float f32() { return std::bit_cast<float>(u32()); }
};

}  // namespace

void write_rgr1(const std::filesystem::path& path, const Radargram& r) {
    validate(r);
    const std::uint32_t nt = std::uint32_t(r.traces.size());
    const std::uint32_t ns = std::uint32_t(r.traces.front().samples.size());
    std::string buf;
    buf.reserve(44 + std::size_t(4) * nt * ns);
    buf += "RGR1";
    put_u32(buf, nt);
    put_u32(buf, ns);
    put_f64(buf, r.traces.front().dt);
    put_f64(buf, r.traces.front().t0);
    put_f64(buf, r.dx);
    put_f64(buf, r.x0);
    for (const Trace& t : r.traces)
        for (double s : t.samples) put_f32(buf, float(s));
    atomic_write(path, buf);
}

Radargram read_rgr1(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("rgr1: cannot open " + path.string());
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (bytes.size() < 44 || std::memcmp(bytes.data(), "RGR1", 4) != 0)
        throw std::runtime_error("rgr1: bad magic in " + path.string());
    Reader rd{reinterpret_cast<const std::uint8_t*>(bytes.data()) + 4,
              reinterpret_cast<const std::uint8_t*>(bytes.data()) + bytes.size()};
    const std::uint32_t nt = rd.u32();
    const std::uint32_t ns = rd.u32();
    const double dt = rd.f64();
    const double t0 = rd.f64();
    const double dx = rd.f64();
    const double x0 = rd.f64();
    rd.need(std::size_t(4) * nt * ns);
    Radargram r;
    r.dx = dx;
    r.x0 = x0;
    r.traces.resize(nt);
    for (std::uint32_t i = 0; i < nt; ++i) {
        Trace& t = r.traces[i];
        t.dt = dt;
        t.t0 = t0;
        t.x = x0 + i * dx;
        t.samples.resize(ns);
        for (std::uint32_t j = 0; j < ns; ++j) t.samples[j] = rd.f32();
    }
    validate(r);
    return r;
}

std::string to_csv(const Radargram& r) {
    std::string out = "x_m,t_ns,amplitude\n";
    char line[96];
    for (std::size_t i = 0; i < r.traces.size(); ++i) {
        const Trace& t = r.traces[i];
        const double x = r.x0 + double(i) * r.dx;
        for (std::size_t j = 0; j < t.samples.size(); ++j) {
            const double tns = (t.t0 + double(j) * t.dt) * 1e9;
            std::snprintf(line, sizeof line, "%.9g,%.9g,%.9g\n", x, tns, t.samples[j]);
            out += line;
        }
    }
    return out;
}

std::vector<std::uint8_t> to_pgm(const Radargram& r, double clip_percentile) {
    if (r.traces.empty()) throw std::invalid_argument("to_pgm: empty radargram");
    if (!(clip_percentile > 50.0 && clip_percentile <= 100.0))
        throw std::invalid_argument("to_pgm: clip_percentile must be in (50, 100]");
    validate(r);
    const std::size_t nt = r.traces.size();
    const std::size_t ns = r.traces.front().samples.size();

    std::vector<double> mags;
    mags.reserve(nt * ns);
    for (const Trace& t : r.traces)
        for (double s : t.samples) mags.push_back(std::fabs(s));
    std::sort(mags.begin(), mags.end());
    // Nearest-rank percentile.
    std::size_t rank = std::size_t(std::ceil(clip_percentile / 100.0 * double(mags.size())));
    if (rank == 0) rank = 1;
    double clip = mags[rank - 1];
    if (clip == 0.0) clip = 1.0;  // all-zero data renders mid-gray

    std::string header = "P5\n" + std::to_string(nt) + " " + std::to_string(ns) + "\n255\n";
    std::vector<std::uint8_t> img(header.size() + nt * ns);
    std::memcpy(img.data(), header.data(), header.size());
    std::uint8_t* px = img.data() + header.size();
    for (std::size_t j = 0; j < ns; ++j) {
        for (std::size_t i = 0; i < nt; ++i) {
            double v = r.traces[i].samples[j] / clip;
            v = std::clamp(v, -1.0, 1.0);
            double g = std::round(128.0 + 127.0 * v);
            px[j * nt + i] = std::uint8_t(std::clamp(g, 0.0, 255.0));
        }
    }
    return img;
}

Rng::Rng(std::uint64_t seed) {
    // splitmix64 expansion of the seed into the xoshiro state
    std::uint64_t x = seed;
    for (auto& s : s_) {
        x += 0x9e3779b97f4a7c15ull;
        std::uint64_t z = x;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        s = z ^ (z >> 31);
    }
}

std::uint64_t Rng::next_u64() {
    auto rotl = [](std::uint64_t v, int k) { return (v << k) | (v >> (64 - k)); };
    const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
}

double Rng::next_unit() {
    return double(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::next_normal() {
    if (have_spare_) {
        have_spare_ = false;
        return spare_;
    }
    double u1 = next_unit(), u2 = next_unit();
    while (u1 <= 0.0) u1 = next_unit();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
}

void add_awgn(Trace& t, double snr_power_ratio, std::uint64_t seed) {
    if (!(snr_power_ratio > 0.0)) throw std::invalid_argument("add_awgn: snr must be > 0");
    validate(t);
    double power = 0.0;
    for (double s : t.samples) power += s * s;
    power /= double(t.samples.size());
    const double sigma = std::sqrt(power / snr_power_ratio);
    Rng rng(seed);
    for (double& s : t.samples) s += sigma * rng.next_normal();
}

void add_awgn(Radargram& r, double snr_power_ratio, std::uint64_t seed) {
    if (!(snr_power_ratio > 0.0)) throw std::invalid_argument("add_awgn: snr must be > 0");
    validate(r);
    double power = 0.0;
    std::size_t n = 0;
    for (const Trace& t : r.traces) {
        for (double s : t.samples) power += s * s;
        n += t.samples.size();
    }
    power /= double(n);
    const double sigma = std::sqrt(power / snr_power_ratio);
    Rng rng(seed);
    for (Trace& t : r.traces)
        for (double& s : t.samples) s += sigma * rng.next_normal();
}

std::uint64_t fnv1a64(const void* data, std::size_t n, std::uint64_t seed) {
    const auto* p = static_cast<const std::uint8_t*>(data);
    std::uint64_t h = seed;
    for (std::size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ull;
    }
    return h;
}

void atomic_write(const std::filesystem::path& path, const void* data, std::size_t n) {
    namespace fs = std::filesystem;
    fs::path dir = path.parent_path();
    if (dir.empty()) dir = ".";
    fs::path tmp = dir / (path.filename().string() + ".tmp");
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write " + tmp.string());
        out.write(static_cast<const char*>(data), std::streamsize(n));
        if (!out) throw std::runtime_error("write failed: " + tmp.string());
    }
    fs::rename(tmp, path);
}

void atomic_write(const std::filesystem::path& path, const std::string& text) {
    atomic_write(path, text.data(), text.size());
}

void write_manifest(const std::filesystem::path& output, const RunManifest& m) {
    nlohmann::json j;
    j["command"] = m.command;
    j["inputs"] = m.inputs;
    j["outputs"] = m.outputs;
    char hex[17];
    std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(m.config_hash));
    j["config_hash"] = hex;
    j["seed"] = m.seed;
    j["version"] = m.version;
    j["wall_time_s"] = m.wall_time_s;
    if (!m.notes.empty()) j["notes"] = m.notes;
    atomic_write(output.string() + ".manifest.json", j.dump(2) + "\n");
}

}  // namespace gpr::io
