// Command-line front end: scene simulation, pipeline processing, detection
// reports, calibration scoring and image/CSV export.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "gpr/detect.hpp"
#include "gpr/equip.hpp"
#include "gpr/fdtd.hpp"
#include "gpr/io.hpp"
#include "gpr/physics.hpp"
#include "gpr/sigproc.hpp"
#include "gpr/types.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kVersion = "gpr 1.0.0";

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

struct Timer {
    std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    }
};

gpr::io::RunManifest make_manifest(const std::string& command,
                                   const std::vector<std::string>& inputs,
                                   const std::vector<std::string>& outputs,
                                   std::uint64_t hash, std::uint64_t seed, double wall) {
    gpr::io::RunManifest m;
    m.command = command;
    m.inputs = inputs;
    m.outputs = outputs;
    m.config_hash = hash;
    m.seed = seed;
    m.version = kVersion;
    m.wall_time_s = wall;
    return m;
}

std::pair<double, double> window_from_json(const json& j) {
    const auto v = j.get<std::vector<double>>();
    if (v.size() != 2) throw std::runtime_error("window must be [lo_ns, hi_ns]");
    return {v[0] * 1e-9, v[1] * 1e-9};
}

int run_simulate(const std::string& scene_path, const std::string& out,
                 int threads, std::optional<double> snr, std::uint64_t seed) {
    Timer timer;
    const std::string scene_text = slurp(scene_path);
    gpr::fdtd::Scene scene = gpr::fdtd::build_scene(scene_text);
    gpr::Radargram r = gpr::fdtd::simulate_bscan(scene, threads);
    std::uint64_t hash = gpr::io::fnv1a64(scene_text.data(), scene_text.size());
    gpr::io::RunManifest m =
        make_manifest("simulate", {scene_path}, {out}, hash, seed, 0.0);
    if (snr) {
        gpr::io::add_awgn(r, *snr, seed);
        m.notes.push_back("awgn snr (power ratio) = " + std::to_string(*snr));
    }
    gpr::io::write_rgr1(out, r);
    m.wall_time_s = timer.seconds();
    gpr::io::write_manifest(out, m);
    std::printf("wrote %s: %zu traces x %zu samples\n", out.c_str(), r.traces.size(),
                r.traces.front().samples.size());
    return 0;
}

int run_process(const std::string& in, const std::string& pipeline_path,
                const std::string& out) {
    Timer timer;
    const std::string cfg_text = slurp(pipeline_path);
    gpr::sigproc::PipelineConfig cfg = gpr::sigproc::parse_pipeline(cfg_text);
    gpr::Radargram r = gpr::io::read_rgr1(in);
    gpr::sigproc::PipelineResult res = gpr::sigproc::run_pipeline(r, cfg);
    gpr::io::write_rgr1(out, res.radargram);
    gpr::io::RunManifest m = make_manifest(
        "process", {in, pipeline_path}, {out},
        gpr::io::fnv1a64(cfg_text.data(), cfg_text.size()), 0, timer.seconds());
    for (const auto& step : res.provenance)
        m.notes.push_back("step " + std::to_string(step.index) + ": " + step.op +
                          (step.note.empty() ? "" : " (" + step.note + ")"));
    gpr::io::write_manifest(out, m);
    std::printf("wrote %s (%zu steps applied)\n", out.c_str(), res.provenance.size());
    return 0;
}

gpr::detect::TemplateLibrary load_library(const fs::path& dir) {
    const json meta = json::parse(slurp(dir / "library.json"));
    gpr::detect::TemplateLibrary lib;
    lib.heights = meta.at("heights_m").get<std::vector<double>>();
    lib.fill.name = meta.value("fill", "air");
    const gpr::Radargram r = gpr::io::read_rgr1(dir / "templates.rgr1");
    lib.templates = r.traces;
    if (lib.templates.size() != lib.heights.size())
        throw std::runtime_error("library: template/height count mismatch");
    return lib;
}

int run_detect(const std::string& in, const std::string& cfg_path, const std::string& out,
               const std::string& sse_csv) {
    Timer timer;
    const std::string cfg_text = slurp(cfg_path);
    const json j = json::parse(cfg_text);

    gpr::detect::DetectConfig cfg;
    cfg.layer_window = window_from_json(j.at("layer_window_ns"));
    if (j.contains("surface_window_ns"))
        cfg.surface_window = window_from_json(j.at("surface_window_ns"));
    if (j.contains("interface_windows_ns"))
        for (const auto& w : j.at("interface_windows_ns"))
            cfg.interface_windows.push_back(window_from_json(w));
    cfg.plate_amplitude = j.value("plate_amplitude", 0.0);
    if (j.contains("thresholds")) {
        const json& t = j.at("thresholds");
        cfg.thresholds.air_max = t.value("air_max", cfg.thresholds.air_max);
        cfg.thresholds.grout_min = t.value("grout_min", cfg.thresholds.grout_min);
        cfg.thresholds.grout_max = t.value("grout_max", cfg.thresholds.grout_max);
    }
    if (j.contains("extent_model")) {
        cfg.extent_model.slope = j.at("extent_model").at("slope").get<double>();
        cfg.extent_model.intercept = j.at("extent_model").at("intercept").get<double>();
    }
    cfg.noise_rms = j.value("noise_rms", 0.0);
    cfg.source_fc = j.value("source_fc_hz", 0.0);
    cfg.max_void_height = j.value("max_void_height_m", 0.35);

    gpr::Radargram r = gpr::io::read_rgr1(in);

    gpr::detect::TemplateLibrary lib;
    if (j.contains("library_dir")) {
        lib = load_library(j.at("library_dir").get<std::string>());
        cfg.library = &lib;
    }
    if (j.contains("wavelet")) {
        const json& w = j.at("wavelet");
        const double fc = w.at("fc_hz").get<double>();
        const double dt = r.traces.front().dt;
        const std::size_t n = std::size_t(3.0 * std::numbers::sqrt2 / fc / dt);
        auto full = gpr::phys::sample_ricker({fc, 1.0}, dt, n);
        cfg.wavelet = gpr::detect::trim_wavelet_onset(full, w.value("trim", 1e-3)).first;
        if (cfg.source_fc == 0.0) cfg.source_fc = fc;
    }

    gpr::detect::DetectionReport rep = gpr::detect::detect_pipeline(r, cfg);
    gpr::io::atomic_write(out, gpr::detect::to_json(rep));
    if (!sse_csv.empty()) gpr::io::atomic_write(sse_csv, gpr::detect::sse_curve_csv(rep));
    gpr::io::RunManifest m = make_manifest(
        "detect", {in, cfg_path}, {out},
        gpr::io::fnv1a64(cfg_text.data(), cfg_text.size()), 0, timer.seconds());
    gpr::io::write_manifest(out, m);
    std::printf("wrote %s (void_present=%s)\n", out.c_str(),
                rep.void_present ? "true" : "false");
    return 0;
}

int run_library_build(const std::string& scene_path, const std::string& heights_spec,
                      const std::string& fill_name, const std::string& out_dir, int threads) {
    Timer timer;
    const std::string scene_text = slurp(scene_path);
    gpr::fdtd::Scene scene = gpr::fdtd::build_scene(scene_text);

    // "lo:hi:step" or comma-separated metres.
    std::vector<double> heights;
    if (heights_spec.find(':') != std::string::npos) {
        double lo, hi, step;
        if (std::sscanf(heights_spec.c_str(), "%lf:%lf:%lf", &lo, &hi, &step) != 3)
            throw std::runtime_error("--heights expects lo:hi:step or a comma list");
        for (double h = lo; h <= hi + 1e-12; h += step) heights.push_back(h);
    } else {
        std::stringstream ss(heights_spec);
        std::string tok;
        while (std::getline(ss, tok, ',')) heights.push_back(std::stod(tok));
    }

    gpr::detect::TemplateLibrary lib = gpr::detect::build_template_library(
        scene, gpr::fdtd::builtin_material(fill_name), heights, threads);

    fs::create_directories(out_dir);
    gpr::Radargram tr;
    tr.dx = 1.0;
    tr.x0 = 0.0;
    tr.traces = lib.templates;
    for (std::size_t i = 0; i < tr.traces.size(); ++i) tr.traces[i].x = double(i);
    gpr::io::write_rgr1(fs::path(out_dir) / "templates.rgr1", tr);
    json meta;
    meta["heights_m"] = lib.heights;
    meta["fill"] = fill_name;
    meta["dt_s"] = lib.templates.front().dt;
    meta["n_samples"] = lib.templates.front().samples.size();
    gpr::io::atomic_write(fs::path(out_dir) / "library.json", meta.dump(2) + "\n");

    gpr::io::RunManifest m = make_manifest(
        "library build", {scene_path}, {out_dir},
        gpr::io::fnv1a64(scene_text.data(), scene_text.size()), 0, timer.seconds());
    gpr::io::write_manifest(fs::path(out_dir) / "library.json", m);
    std::printf("wrote %s: %zu templates\n", out_dir.c_str(), lib.templates.size());
    return 0;
}

int run_calibrate(const std::string& in, const std::string& out,
                  const std::string& sidecar_path, std::vector<double> window_ns) {
    Timer timer;
    gpr::equip::CalibrationSet cs;
    cs.traces = gpr::io::read_rgr1(in);

    std::vector<double> durations;
    std::optional<double> wpi;
    std::string side_text;
    if (!sidecar_path.empty()) {
        side_text = slurp(sidecar_path);
        const json s = json::parse(side_text);
        if (s.contains("timestamps_s"))
            cs.timestamps = s.at("timestamps_s").get<std::vector<double>>();
        if (s.contains("durations_s"))
            durations = s.at("durations_s").get<std::vector<double>>();
        if (s.contains("plate_window_ns")) {
            cs.plate_peak_window = window_from_json(s.at("plate_window_ns"));
            window_ns.clear();
        }
        if (s.contains("wpi"))
            wpi = gpr::equip::penetration_index(s.at("wpi").at("a_water").get<double>(),
                                                s.at("wpi").at("a_air").get<double>());
    }
    if (window_ns.size() == 2)
        cs.plate_peak_window = {window_ns[0] * 1e-9, window_ns[1] * 1e-9};
    if (!(cs.plate_peak_window.first < cs.plate_peak_window.second))
        throw std::runtime_error("calibrate: plate window required (--window-ns or sidecar)");

    gpr::equip::Scorecard sc = gpr::equip::score(cs, durations, wpi);
    gpr::io::atomic_write(out, gpr::equip::to_json(sc));
    gpr::io::RunManifest m = make_manifest(
        "calibrate", {in, sidecar_path}, {out},
        gpr::io::fnv1a64(side_text.data(), side_text.size()), 0, timer.seconds());
    gpr::io::write_manifest(out, m);
    std::printf("wrote %s\n", out.c_str());
    return 0;
}

int run_export(const std::string& kind, const std::string& in, const std::string& out,
               double clip_percentile) {
    Timer timer;
    const gpr::Radargram r = gpr::io::read_rgr1(in);
    if (kind == "image") {
        const auto img = gpr::io::to_pgm(r, clip_percentile);
        gpr::io::atomic_write(out, img.data(), img.size());
    } else {
        gpr::io::atomic_write(out, gpr::io::to_csv(r));
    }
    gpr::io::RunManifest m =
        make_manifest("export " + kind, {in}, {out}, gpr::io::fnv1a64(in.data(), in.size()),
                      0, timer.seconds());
    gpr::io::write_manifest(out, m);
    std::printf("wrote %s\n", out.c_str());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Ground-penetrating-radar toolkit: simulate layered road scenes, "
                 "process radargrams, detect under-base voids"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);

    // simulate
    std::string scene_path, out_path;
    int threads = 1;
    std::uint64_t seed = 12345;
    double snr = 0.0;
    auto* sim = app.add_subcommand("simulate", "Run the FDTD survey for a scene file");
    sim->add_option("scene", scene_path, "Scene JSON")->required();
    sim->add_option("-o,--output", out_path, "Output RGR1")->required();
    sim->add_option("--threads", threads, "Worker threads for B-scan shots");
    sim->add_option("--seed", seed, "Noise seed");
    sim->add_option("--snr", snr, "Inject AWGN at this signal/noise power ratio");

    // process
    std::string proc_in, pipeline_path, proc_out;
    auto* proc = app.add_subcommand("process", "Apply a processing pipeline");
    proc->add_option("input", proc_in, "Input RGR1")->required();
    proc->add_option("--pipeline", pipeline_path, "Pipeline JSON")->required();
    proc->add_option("-o,--output", proc_out, "Output RGR1")->required();

    // detect
    std::string det_in, det_cfg, det_out, det_sse;
    auto* det = app.add_subcommand("detect", "Run void detection and write a report");
    det->add_option("input", det_in, "Input RGR1 (preprocessed)")->required();
    det->add_option("--config", det_cfg, "Detection config JSON")->required();
    det->add_option("-o,--output", det_out, "Report JSON")->required();
    det->add_option("--sse-csv", det_sse, "Optional SSE-curve CSV");

    // library build
    std::string lib_scene, lib_heights, lib_fill = "air", lib_out;
    int lib_threads = 1;
    auto* lib = app.add_subcommand("library", "Template library commands");
    auto* lib_build = lib->add_subcommand("build", "Simulate a height template library");
    lib_build->add_option("scene", lib_scene, "Base scene JSON")->required();
    lib_build->add_option("--heights", lib_heights, "lo:hi:step (m) or comma list")->required();
    lib_build->add_option("--fill", lib_fill, "Void fill material name");
    lib_build->add_option("-o,--output", lib_out, "Output directory")->required();
    lib_build->add_option("--threads", lib_threads, "Worker threads");

    // calibrate
    std::string cal_in, cal_out, cal_side;
    std::vector<double> cal_window;
    auto* cal = app.add_subcommand("calibrate", "Score equipment metrics from plate shots");
    cal->add_option("input", cal_in, "Plate-shot RGR1")->required();
    cal->add_option("-o,--output", cal_out, "Scorecard JSON")->required();
    cal->add_option("--sidecar", cal_side, "JSON sidecar (timestamps, durations, wpi)");
    cal->add_option("--window-ns", cal_window, "Plate peak window [lo hi] in ns")->expected(2);

    // export
    std::string exp_in, exp_out;
    double clip_percentile = 100.0;
    auto* exp = app.add_subcommand("export", "Export a radargram");
    auto* exp_img = exp->add_subcommand("image", "8-bit P5 graymap");
    exp_img->add_option("input", exp_in, "Input RGR1")->required();
    exp_img->add_option("-o,--output", exp_out, "Output PGM")->required();
    exp_img->add_option("--clip-percentile", clip_percentile, "Symmetric clip percentile");
    auto* exp_csv = exp->add_subcommand("csv", "Long-format CSV");
    exp_csv->add_option("input", exp_in, "Input RGR1")->required();
    exp_csv->add_option("-o,--output", exp_out, "Output CSV")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 1;
    }

    try {
        if (sim->parsed())
            return run_simulate(scene_path, out_path, threads,
                                snr > 0.0 ? std::optional<double>(snr) : std::nullopt, seed);
        if (proc->parsed()) return run_process(proc_in, pipeline_path, proc_out);
        if (det->parsed()) return run_detect(det_in, det_cfg, det_out, det_sse);
        if (lib->parsed() && lib_build->parsed())
            return run_library_build(lib_scene, lib_heights, lib_fill, lib_out, lib_threads);
        if (cal->parsed()) return run_calibrate(cal_in, cal_out, cal_side, cal_window);
        if (exp->parsed()) {
            if (exp_img->parsed()) return run_export("image", exp_in, exp_out, clip_percentile);
            if (exp_csv->parsed()) return run_export("csv", exp_in, exp_out, clip_percentile);
            std::cerr << "export: choose image or csv\n";
            return 1;
        }
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 1;
}
