#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "gpr/fdtd.hpp"
#include "gpr/physics.hpp"

using namespace gpr;
namespace fd = gpr::fdtd;

namespace {

// Layered test scene; grid height derived from the stack.
fd::Scene make_scene(double width, double spacing, double air_gap,
                     std::vector<std::pair<Material, double>> layers, double fc,
                     double elevation, double tx_x0, int n_shots = 1, double step = 0.02,
                     double time_window = 0.0) {
    fd::Scene s;
    s.grid.spacing = spacing;
    s.grid.pml_cells = 10;
    s.grid.width = width;
    s.layers = std::move(layers);
    s.air_gap = air_gap;
    double stack = 0.0;
    for (const auto& [m, th] : s.layers) stack += th;
    const double wanted = stack + air_gap + 2.0 * 10 * spacing;
    s.grid.height = std::ceil(wanted / spacing - 1e-9) * spacing;
    s.air_gap += s.grid.height - wanted;  // pad the air column to a whole cell
    s.survey.tx_x0 = tx_x0;
    s.survey.gap = 0.04;
    s.survey.elevation = elevation;
    s.survey.step = step;
    s.survey.n_shots = n_shots;
    if (time_window <= 0.0) {
        auto all = s.layers;
        all.insert(all.begin(), {fd::builtin_material("air"), air_gap});
        time_window = fd::recommended_time_window(all);
    }
    s.survey.time_window = time_window;
    s.source = {fc, 1.0};
    return s;
}

double abs_peak(const std::vector<double>& s, std::size_t a, std::size_t b) {
    double m = 0.0;
    for (std::size_t i = a; i < std::min(b, s.size()); ++i)
        m = std::max(m, std::fabs(s[i]));
    return m;
}

// Sub-sample extremum location by parabolic interpolation.
double refine_extremum(const std::vector<double>& s, std::size_t i) {
    if (i == 0 || i + 1 >= s.size()) return double(i);
    const double a = s[i - 1], b = s[i], c = s[i + 1];
    const double den = a - 2.0 * b + c;
    if (den == 0.0) return double(i);
    return double(i) + 0.5 * (a - c) / den;
}

}  // namespace

TEST_CASE("grid spacing, stability limit, time window") {
    CHECK(fd::estimate_grid_spacing(3e9, 81.0) == doctest::Approx(1.110342e-3).epsilon(1e-6));
    CHECK(fd::estimate_grid_spacing(1e9, 1.0) == doctest::Approx(0.0299792458).epsilon(1e-9));
    CHECK(fd::estimate_grid_spacing(kC0 / 10.0, 1.0) == doctest::Approx(1.0).epsilon(1e-12));

    fd::GridSpec g3{1.0, 1.0, 0.003, 10};
    fd::GridSpec g5{1.0, 1.0, 0.005, 10};
    fd::GridSpec g6{1.0, 1.0, 0.006, 10};
    CHECK(fd::courant_dt(g3) == doctest::Approx(7.005203e-12).epsilon(1e-6));
    CHECK(fd::courant_dt(g5) == doctest::Approx(1.167534e-11).epsilon(1e-6));
    CHECK(fd::courant_dt(g6) == doctest::Approx(2.0 * fd::courant_dt(g3)).epsilon(1e-12));

    // Reference road stack and the paper's two-way estimate.
    const std::vector<std::pair<Material, double>> stack{
        {fd::builtin_material("asphalt"), 0.15},
        {fd::builtin_material("base"), 0.35},
        {fd::builtin_material("subgrade"), 0.50}};
    CHECK(fd::recommended_time_window_raw(stack) ==
          doctest::Approx(22.98e-9).epsilon(0.002));
    CHECK(fd::recommended_time_window(stack) == doctest::Approx(26e-9).epsilon(1e-9));

    const std::vector<std::pair<Material, double>> single{{{"m", 6.0, 0.0, 1.0}, 0.15}};
    CHECK(fd::recommended_time_window_raw(single) == doctest::Approx(2.45e-9).epsilon(0.002));
    CHECK(fd::recommended_time_window_raw({{{"m", 6.0, 0.0, 1.0}, 0.0}}) == 0.0);
    CHECK_THROWS(fd::recommended_time_window_raw({}));
}

TEST_CASE("build_scene parses the reference configuration and validates") {
    const std::string paper_json = R"({
      "grid": {"width_m": 2.7, "spacing_m": 0.003, "pml_cells": 10},
      "air_gap_m": 0.57,
      "layers": [
        {"name": "asphalt", "eps_r": 6.0, "sigma": 0.005, "thickness_m": 0.15},
        {"name": "base", "eps_r": 7.5, "sigma": 0.01, "thickness_m": 0.35},
        {"name": "subgrade", "eps_r": 18.0, "sigma": 0.2, "thickness_m": 0.50}
      ],
      "void": {"x_center_m": 1.35, "width_m": 0.5, "height_m": 0.1, "fill": "air"},
      "survey": {"tx_x0_m": 0.45, "gap_m": 0.04, "elevation_m": 0.5, "step_m": 0.02,
                 "n_shots": 90, "time_window_ns": 25},
      "source": {"fc_hz": 800e6, "amplitude": 1.0}
    })";
    const fd::Scene s = fd::build_scene(paper_json);
    REQUIRE(s.layers.size() == 3);
    CHECK(s.layers[0].second == 0.15);
    CHECK(s.layers[1].second == 0.35);
    CHECK(s.layers[2].second == 0.50);
    CHECK(s.layers[1].first.eps_r == 7.5);
    // 1.63 m rounds up to a whole 3 mm cell; the air gap absorbs the pad
    CHECK(s.grid.height == doctest::Approx(1.632));
    CHECK(s.air_gap == doctest::Approx(0.572));
    CHECK(s.survey.n_shots == 90);
    CHECK(s.survey.time_window == doctest::Approx(25e-9));
    CHECK(s.void_box->fill.eps_r == 1.0);

    // void thinner than a cell
    std::string bad = paper_json;
    bad.replace(bad.find("\"height_m\": 0.1"), 15, "\"height_m\": 0.002");
    CHECK_THROWS_WITH_AS(fd::build_scene(bad), doctest::Contains("void.height"),
                         std::invalid_argument);

    // unknown material name
    std::string unk = paper_json;
    unk.replace(unk.find("\"fill\": \"air\""), 13, "\"fill\": \"cheese\"");
    CHECK_THROWS_WITH_AS(fd::build_scene(unk), doctest::Contains("cheese"),
                         std::invalid_argument);

    // spacing coarser than lambda_min/5 (water scene at 3 mm passes; 5 mm must not)
    std::string coarse = paper_json;
    coarse.replace(coarse.find("\"spacing_m\": 0.003"), 18, "\"spacing_m\": 0.006");
    coarse.replace(coarse.find("\"fill\": \"air\""), 13, "\"fill\": \"water\"");
    CHECK_THROWS_WITH_AS(fd::build_scene(coarse), doctest::Contains("lambda_min"),
                         std::invalid_argument);
}

TEST_CASE("vacuum scene: only the direct wave and residual PML leakage") {
    // All-air scene, antennas centered. In 2D the line source leaves an
    // algebraically decaying wake, so "post-direct" starts once that has
    // died down (~5 ns for an 800 MHz Ricker).
    fd::Scene s = make_scene(1.0, 0.01, 0.9, {}, 800e6, 0.45, 0.48, 1, 0.02, 25e-9);
    const Trace t = fd::simulate_ascan(s, 0);

    const double direct_peak = abs_peak(t.samples, 0, t.samples.size());
    CHECK(direct_peak > 0.0);
    const std::size_t i5 = std::size_t(5e-9 / t.dt);
    const double late = abs_peak(t.samples, i5, t.samples.size());
    CHECK(late <= 1e-3 * direct_peak);

    // polarity convention: the direct wave's main lobe is negative
    const double dmin = *std::min_element(t.samples.begin(), t.samples.end());
    const double dmax = *std::max_element(t.samples.begin(), t.samples.end());
    CHECK(-dmin > dmax);

    // Isolate the boundary reflection itself: a double-size domain is
    // boundary-silent until 6 ns, so the trace difference over [0, 6 ns]
    // is the small domain's PML leakage.
    fd::Scene big = make_scene(2.0, 0.01, 1.9, {}, 800e6, 0.95, 0.98, 1, 0.02, 6e-9);
    const Trace tb = fd::simulate_ascan(big, 0);
    double leak = 0.0;
    const std::size_t n6 = std::size_t(6e-9 / t.dt);
    for (std::size_t i = 0; i < n6; ++i)
        leak = std::max(leak, std::fabs(t.samples[i] - tb.samples[i]));
    CHECK(leak <= 1e-3 * direct_peak);
}

TEST_CASE("half-space reflection ratio matches the analytic coefficient") {
    const double eps = 6.0;
    auto layers = [&](double e) {
        return std::vector<std::pair<Material, double>>{{{"hs", e, 0.0, 1.0}, 0.5}};
    };
    fd::Scene ground = make_scene(1.2, 0.005, 0.4, layers(eps), 800e6, 0.3, 0.58, 1, 0.02, 9e-9);
    fd::Scene freespace = make_scene(1.2, 0.005, 0.9, {}, 800e6, 0.3, 0.58, 1, 0.02, 9e-9);
    freespace.grid.height = ground.grid.height;
    freespace.air_gap = ground.grid.height - 2.0 * 10 * 0.005;

    fd::Scene plate = ground;
    plate.plate = fd::PlateSpec{0.6, 1.0};

    const Trace tg = fd::simulate_ascan(ground, 0);
    const Trace tf = fd::simulate_ascan(freespace, 0);
    const Trace tp = fd::simulate_ascan(plate, 0);

    std::vector<double> refl(tg.samples), plate_refl(tp.samples);
    for (std::size_t i = 0; i < refl.size(); ++i) {
        refl[i] -= tf.samples[i];
        plate_refl[i] -= tf.samples[i];
    }
    const double r_measured = abs_peak(refl, 0, refl.size()) /
                              abs_peak(plate_refl, 0, plate_refl.size());
    const double r_analytic = std::fabs(phys::fresnel(1.0, eps).R);
    CHECK(r_measured == doctest::Approx(r_analytic).epsilon(0.05));

    // polarity convention: low-to-high surface reflection is a positive peak
    const std::size_t at = std::max_element(refl.begin(), refl.end(), [](double a, double b) {
                               return std::fabs(a) < std::fabs(b);
                           }) - refl.begin();
    CHECK(refl[at] > 0.0);
}

TEST_CASE("air void produces two opposite reflections 2.0 ns apart") {
    // Reference road stack, 0.3 m air void, 800 MHz, 3 mm cells. A narrow
    // domain keeps this fast; the void spans the full non-PML width. The
    // void response is isolated by subtracting the void-free scene.
    auto run = [&](double subgrade_sigma) {
        const std::vector<std::pair<Material, double>> stack{
            {fd::builtin_material("asphalt"), 0.15},
            {fd::builtin_material("base"), 0.35},
            {{"subgrade", 18.0, subgrade_sigma, 1.0}, 0.50}};
        fd::Scene novoid =
            make_scene(0.6, 0.003, 0.57, stack, 800e6, 0.5, 0.28, 1, 0.02, 18e-9);
        fd::Scene voided = novoid;
        fd::VoidSpec v;
        v.x_center = 0.3;
        v.width = 0.48;
        v.height = 0.30;
        v.fill = fd::builtin_material("air");
        voided.void_box = v;

        const Trace t0 = fd::simulate_ascan(novoid, 0);
        const Trace t1 = fd::simulate_ascan(voided, 0);
        std::vector<double> diff(t1.samples);
        for (std::size_t i = 0; i < diff.size(); ++i) diff[i] -= t0.samples[i];

        // dominant trough of the base-void echo, then the matching peak of
        // the flipped void-subgrade echo ~2 ns later
        const std::size_t w0 = std::size_t(12.5e-9 / t1.dt);
        const std::size_t w1 = std::size_t(15.5e-9 / t1.dt);
        std::size_t neg = w0;
        for (std::size_t i = w0; i < w1; ++i)
            if (diff[i] < diff[neg]) neg = i;
        const std::size_t p0 = neg + std::size_t(1.5e-9 / t1.dt);
        const std::size_t p1 = neg + std::size_t(2.5e-9 / t1.dt);
        std::size_t pos = p0;
        for (std::size_t i = p0; i < std::min(p1, diff.size()); ++i)
            if (diff[i] > diff[pos]) pos = i;
        REQUIRE(diff[neg] < 0.0);
        REQUIRE(diff[pos] > 0.0);
        return (refine_extremum(diff, pos) - refine_extremum(diff, neg)) * t1.dt;
    };

    // Ray theory puts the echoes 2.0014 ns apart. The full-wave solution
    // carries a repeatable -0.13 ns feature shift (the in-void beam is
    // limited to the 21 degree critical cone of the base-air interface,
    // which reshapes the second echo), so the check allows 0.15 ns. The
    // shift is height- and conductivity-independent; height estimation via
    // the template library absorbs it by construction.
    const double expect = 2.0 * 0.30 / kC0;
    CHECK(std::fabs(run(0.0) - expect) <= 0.15e-9);
    CHECK(std::fabs(run(0.2) - expect) <= 0.15e-9);
}

TEST_CASE("laterally invariant scene gives identical traces; symmetry holds") {
    // Wide domain and a window short enough that nothing scattered off the
    // lateral PML margins reaches any shot.
    const std::vector<std::pair<Material, double>> stack{
        {{"top", 4.0, 0.002, 1.0}, 0.2}, {{"bottom", 9.0, 0.01, 1.0}, 0.3}};
    fd::Scene s = make_scene(2.4, 0.01, 0.3, stack, 600e6, 0.2, 1.04, 5, 0.04, 6e-9);
    const Radargram r = fd::simulate_bscan(s, 2);
    REQUIRE(r.traces.size() == 5);

    double scale = 0.0;
    for (double v : r.traces[2].samples) scale = std::max(scale, std::fabs(v));
    for (std::size_t i = 0; i < 5; ++i)
        for (std::size_t k = 0; k < r.traces[0].samples.size(); ++k)
            CHECK(std::fabs(r.traces[i].samples[k] - r.traces[2].samples[k]) <=
                  1e-6 * scale);

    // geometric symmetry about the center trace (reciprocity across the
    // mirror plane): compare the outermost shots
    for (std::size_t k = 0; k < r.traces[0].samples.size(); ++k)
        CHECK(std::fabs(r.traces[0].samples[k] - r.traces[4].samples[k]) <= 1e-6 * scale);
}

TEST_CASE("buried contrast block traces a hyperbola") {
    // Uniform air medium with a small high-contrast block 0.4 m below the
    // antenna line; first arrivals must fit 2 sqrt(a^2+x^2)/c + t0.
    const std::vector<std::pair<Material, double>> stack{
        {fd::builtin_material("air"), 0.3}, {fd::builtin_material("air"), 0.4}};
    fd::Scene s = make_scene(1.6, 0.01, 0.2, stack, 600e6, 0.1, 0.3, 21, 0.05, 14e-9);
    fd::VoidSpec block;
    block.x_center = 0.8;
    block.width = 0.06;
    block.height = 0.06;
    block.fill = {"scatterer", 4.0, 0.0, 1.0};
    s.void_box = block;

    fd::Scene ref = s;
    ref.void_box.reset();

    const Trace t_ref = fd::simulate_ascan(ref, 0);
    const Radargram r = fd::simulate_bscan(s, 2);

    // depth of the block top below the antennas
    const double a_true = 0.1 + 0.3 + 0.4 - 0.4;  // elevation + layer1 + (block at top of layer2)
    std::vector<double> xs, ts;
    for (std::size_t i = 0; i < r.traces.size(); ++i) {
        std::vector<double> diff(r.traces[i].samples);
        for (std::size_t k = 0; k < diff.size(); ++k) diff[k] -= t_ref.samples[k];
        const double pk = abs_peak(diff, 0, diff.size());
        std::size_t at = 0;
        for (std::size_t k = 1; k < diff.size(); ++k)
            if (std::fabs(diff[k]) > std::fabs(diff[at])) at = k;
        if (pk <= 0.0) continue;
        xs.push_back(r.x0 + double(i) * r.dx - block.x_center);
        ts.push_back(refine_extremum(diff, at) * r.traces[i].dt);
    }
    REQUIRE(xs.size() == 21);

    // fit (a, t_offset) by grid search against the point-target model
    double best_a = 0.0, best_t0 = 0.0, best_rms = 1e300;
    for (double a = 0.30; a <= 0.60; a += 0.002) {
        // optimal offset for this a is the mean residual
        double off = 0.0;
        for (std::size_t i = 0; i < xs.size(); ++i)
            off += ts[i] - phys::point_target_arrival(a, xs[i], kC0);
        off /= double(xs.size());
        double rms = 0.0;
        for (std::size_t i = 0; i < xs.size(); ++i) {
            const double e = ts[i] - phys::point_target_arrival(a, xs[i], kC0) - off;
            rms += e * e;
        }
        rms = std::sqrt(rms / double(xs.size()));
        if (rms < best_rms) {
            best_rms = rms;
            best_a = a;
            best_t0 = off;
        }
    }
    CHECK(best_rms < 2.0 * r.traces[0].dt);
    CHECK(best_a == doctest::Approx(a_true).epsilon(0.15));
    CHECK(best_t0 > 0.0);  // waveform-feature delay
}

TEST_CASE("determinism: repeated and threaded runs are bit-identical") {
    const std::vector<std::pair<Material, double>> stack{{{"m", 5.0, 0.01, 1.0}, 0.3}};
    fd::Scene s = make_scene(0.8, 0.01, 0.2, stack, 600e6, 0.1, 0.3, 4, 0.04, 6e-9);

    const Trace a = fd::simulate_ascan(s, 1);
    const Trace b = fd::simulate_ascan(s, 1);
    REQUIRE(a.samples.size() == b.samples.size());
    for (std::size_t i = 0; i < a.samples.size(); ++i) CHECK(a.samples[i] == b.samples[i]);

    const Radargram serial = fd::simulate_bscan(s, 1);
    const Radargram threaded = fd::simulate_bscan(s, 2);
    for (std::size_t i = 0; i < serial.traces.size(); ++i)
        for (std::size_t k = 0; k < serial.traces[i].samples.size(); ++k)
            CHECK(serial.traces[i].samples[k] == threaded.traces[i].samples[k]);
}

TEST_CASE("energy stays bounded after source injection") {
    fd::Scene s = make_scene(1.0, 0.01, 0.8, {}, 800e6, 0.4, 0.48, 1, 0.02, 14e-9);
    fd::Simulation sim(s, 0);
    const double t_source_end = 3.0 * std::numbers::sqrt2 / 800e6;
    const int n_steps = int(14e-9 / sim.dt());
    double e_after_source = 0.0, e_max_later = 0.0;
    for (int k = 0; k < n_steps; ++k) {
        sim.step();
        if ((k & 7) == 0) {
            const double e = sim.field_energy();
            if (k * sim.dt() <= t_source_end) {
                e_after_source = std::max(e_after_source, e);
            } else {
                e_max_later = std::max(e_max_later, e);
            }
        }
    }
    CHECK(e_after_source > 0.0);
    CHECK(e_max_later <= 1.05 * e_after_source);
    // and the tail should be strongly absorbed
    CHECK(sim.field_energy() < 1e-3 * e_after_source);
}

TEST_CASE("reciprocity: swapping tx and rx leaves the trace almost unchanged") {
    const std::vector<std::pair<Material, double>> stack{
        {{"top", 4.0, 0.005, 1.0}, 0.2}, {{"deep", 12.0, 0.02, 1.0}, 0.3}};
    fd::Scene s = make_scene(1.0, 0.01, 0.3, stack, 600e6, 0.2, 0.4, 1, 0.02, 8e-9);

    fd::Simulation fwd(s, 0.40, 0.52);
    fd::Simulation rev(s, 0.52, 0.40);
    const int n = int(8e-9 / fwd.dt());
    double num = 0.0, den = 0.0;
    for (int k = 0; k < n; ++k) {
        fwd.step();
        rev.step();
        const double d = fwd.receiver_sample() - rev.receiver_sample();
        num += d * d;
        den += fwd.receiver_sample() * fwd.receiver_sample();
    }
    CHECK(std::sqrt(num / den) < 0.01);
}

TEST_CASE("halving the cell size changes the surface peak by < 3%") {
    auto run = [&](double spacing) {
        const std::vector<std::pair<Material, double>> stack{{{"hs", 6.0, 0.0, 1.0}, 0.4}};
        fd::Scene g = make_scene(1.2, spacing, 0.4, stack, 600e6, 0.3, 0.58, 1, 0.02, 8e-9);
        fd::Scene f = make_scene(1.2, spacing, 0.8, {}, 600e6, 0.3, 0.58, 1, 0.02, 8e-9);
        f.grid.height = g.grid.height;
        f.air_gap = g.grid.height - 2.0 * 10 * spacing;
        const Trace tg = fd::simulate_ascan(g, 0);
        const Trace tf = fd::simulate_ascan(f, 0);
        std::vector<double> diff(tg.samples);
        for (std::size_t i = 0; i < diff.size(); ++i) diff[i] -= tf.samples[i];
        return abs_peak(diff, 0, diff.size());
    };
    const double coarse = run(0.01);
    const double fine = run(0.005);
    CHECK(std::fabs(fine - coarse) / fine < 0.03);
}

TEST_CASE("free-space reference removes the direct wave by >= 20 dB") {
    const std::vector<std::pair<Material, double>> stack{{{"hs", 6.0, 0.0, 1.0}, 0.5}};
    fd::Scene ground = make_scene(1.2, 0.01, 0.4, stack, 800e6, 0.3, 0.58, 1, 0.02, 9e-9);
    fd::Scene sky = make_scene(1.2, 0.01, 0.9, {}, 800e6, 0.3, 0.58, 1, 0.02, 9e-9);
    sky.grid.height = ground.grid.height;
    sky.air_gap = ground.grid.height - 2.0 * 10 * 0.01;

    const Trace tg = fd::simulate_ascan(ground, 0);
    const Trace ts = fd::simulate_ascan(sky, 0);

    // direct-wave window: everything before the surface echo (~2 ns)
    const std::size_t i_end = std::size_t(1.8e-9 / tg.dt);
    double before = 0.0, after = 0.0;
    for (std::size_t i = 0; i < i_end; ++i) {
        before += tg.samples[i] * tg.samples[i];
        const double d = tg.samples[i] - ts.samples[i];
        after += d * d;
    }
    CHECK(before > 0.0);
    CHECK(after <= 0.01 * before);  // >= 20 dB energy reduction
}

TEST_CASE("scene validation rejects bad geometry") {
    const std::vector<std::pair<Material, double>> stack{{{"m", 6.0, 0.0, 1.0}, 0.3}};
    fd::Scene ok = make_scene(1.0, 0.01, 0.2, stack, 600e6, 0.1, 0.4, 1, 0.02, 5e-9);
    CHECK_NOTHROW(fd::validate(ok));

    fd::Scene bad = ok;
    bad.air_gap = 0.25;  // stack no longer matches the grid height
    CHECK_THROWS(fd::validate(bad));

    bad = ok;
    bad.survey.tx_x0 = 0.05;  // inside the PML margin
    CHECK_THROWS(fd::validate(bad));

    bad = ok;
    bad.survey.elevation = 0.25;  // above the air gap
    CHECK_THROWS(fd::validate(bad));

    bad = ok;
    bad.grid.pml_cells = 4;
    CHECK_THROWS(fd::validate(bad));

    bad = ok;
    fd::VoidSpec v;
    v.x_center = 0.5;
    v.width = 0.2;
    v.height = 0.05;
    v.fill = fd::builtin_material("air");
    bad.void_box = v;  // single layer: no base above the subgrade
    CHECK_THROWS(fd::validate(bad));
}
