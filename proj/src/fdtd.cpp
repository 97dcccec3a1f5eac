#include "gpr/fdtd.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <thread>

#include <json.hpp>

#include "gpr/kernels.hpp"
#include "gpr/physics.hpp"

namespace gpr::fdtd {

namespace {

constexpr double kPmlGradingOrder = 4.0;   // quartic conductivity profile
constexpr double kPmlReflection = 1e-6;    // theoretical reflection target
constexpr double kPmlAlphaMax = 0.005;     // CFS alpha at the interface, S/m

double layer_eps_max(const Scene& s) {
    double m = 1.0;
    for (const auto& [mat, th] : s.layers) m = std::max(m, mat.eps_r);
    if (s.void_box) m = std::max(m, s.void_box->fill.eps_r);
    return m;
}

int snap(double x, double spacing, const char* what) {
    const double u = x / spacing;
    const int i = int(std::llround(u));
    (void)what;
    return i;
}

bool integral(double x, double spacing) {
    const double u = x / spacing;
    return std::fabs(u - std::round(u)) < 1e-9 * std::max(1.0, std::fabs(u));
}

}  // namespace

double estimate_grid_spacing(double f_max, double eps_max) {
    if (!(f_max > 0.0)) throw std::invalid_argument("estimate_grid_spacing: f_max must be > 0");
    if (!(eps_max >= 1.0)) throw std::invalid_argument("estimate_grid_spacing: eps_max must be >= 1");
    return kC0 / (10.0 * f_max * std::sqrt(eps_max));
}

double courant_dt(const GridSpec& grid) {
    if (!(grid.spacing > 0.0)) throw std::invalid_argument("courant_dt: spacing must be > 0");
    return 0.99 * grid.spacing / (kC0 * std::numbers::sqrt2);
}

double recommended_time_window_raw(const std::vector<std::pair<Material, double>>& layers) {
    if (layers.empty()) throw std::invalid_argument("recommended_time_window: no layers");
    double t = 0.0;
    for (const auto& [mat, th] : layers) {
        if (th < 0.0) throw std::invalid_argument("recommended_time_window: negative thickness");
        t += 2.0 * th * std::sqrt(mat.eps_r) / kC0;
    }
    return t;
}

double recommended_time_window(const std::vector<std::pair<Material, double>>& layers) {
    const double raw = recommended_time_window_raw(layers);
    return std::ceil(raw * 1.1 * 1e9) * 1e-9;
}

void validate(const Scene& s) {
    const GridSpec& g = s.grid;
    if (!(g.spacing > 0.0)) throw std::invalid_argument("grid.spacing must be > 0");
    if (!(g.width > 0.0) || !integral(g.width, g.spacing))
        throw std::invalid_argument("grid.width must be a positive multiple of grid.spacing");
    if (!(g.height > 0.0) || !integral(g.height, g.spacing))
        throw std::invalid_argument("grid.height must be a positive multiple of grid.spacing");
    if (g.pml_cells < 8) throw std::invalid_argument("grid.pml_cells must be >= 8");

    const double pml_m = g.pml_cells * g.spacing;
    double stack = 0.0;
    for (const auto& [mat, th] : s.layers) {
        gpr::validate(mat);
        if (!(th > 0.0))
            throw std::invalid_argument("layer '" + mat.name + "': thickness must be > 0");
        stack += th;
    }
    if (s.air_gap < 0.0) throw std::invalid_argument("air_gap must be >= 0");
    const double interior = g.height - 2.0 * pml_m;
    if (std::fabs(stack + s.air_gap - interior) > 1e-6 * g.height)
        throw std::invalid_argument(
            "layer thicknesses + air_gap must equal grid.height minus the PML margins");

    if (s.void_box) {
        const VoidSpec& v = *s.void_box;
        if (s.layers.size() < 2)
            throw std::invalid_argument("void: needs at least a base layer above the subgrade");
        gpr::validate(v.fill);
        if (!(v.height >= g.spacing))
            throw std::invalid_argument("void.height must be >= grid.spacing");
        if (!(v.width > 0.0)) throw std::invalid_argument("void.width must be > 0");
        const double subgrade_th = s.layers.back().second;
        if (v.height > subgrade_th)
            throw std::invalid_argument("void.height exceeds the subgrade thickness");
        if (v.x_center - v.width / 2.0 < pml_m || v.x_center + v.width / 2.0 > g.width - pml_m)
            throw std::invalid_argument("void extends into the PML margin");
    }
    if (s.plate) {
        if (!(s.plate->width > 0.0)) throw std::invalid_argument("plate.width must be > 0");
    }

    const SurveySpec& sv = s.survey;
    if (!(sv.gap > 0.0)) throw std::invalid_argument("survey.gap must be > 0");
    if (sv.n_shots < 1) throw std::invalid_argument("survey.n_shots must be >= 1");
    if (sv.n_shots > 1 && !(sv.step > 0.0))
        throw std::invalid_argument("survey.step must be > 0 for multi-shot surveys");
    if (!(sv.time_window > 0.0)) throw std::invalid_argument("survey.time_window must be > 0");
    if (!(sv.elevation >= 0.0) || sv.elevation >= s.air_gap)
        throw std::invalid_argument("survey.elevation must sit inside the air gap");
    const double last = sv.tx_x0 + (sv.n_shots - 1) * sv.step;
    const double x_min = std::min(sv.tx_x0, sv.tx_x0 + sv.gap);
    const double x_max = std::max(last, last + sv.gap);
    if (x_min <= pml_m || x_max >= g.width - pml_m)
        throw std::invalid_argument("survey: shot positions must stay inside the non-PML region");

    gpr::validate(s.source);
    // The significant spectral content of a Ricker source extends to about
    // 2.5x the center frequency; refuse grids coarser than lambda_min/5.
    const double lambda_min = kC0 / (2.5 * s.source.fc * std::sqrt(layer_eps_max(s)));
    if (g.spacing > lambda_min / 5.0)
        throw std::invalid_argument("grid.spacing is coarser than lambda_min/5 for this source");
}

Material builtin_material(const std::string& name) {
    // Table of road materials used throughout the simulations.
    if (name == "air") return {"air", 1.0, 0.0, 1.0};
    if (name == "water") return {"water", 81.0, 1.0, 1.0};
    if (name == "grout") return {"grout", 28.0, 0.01, 1.0};
    if (name == "asphalt") return {"asphalt", 6.0, 0.005, 1.0};
    if (name == "base") return {"base", 7.5, 0.01, 1.0};
    if (name == "subgrade") return {"subgrade", 18.0, 0.2, 1.0};
    throw std::invalid_argument("unknown material name '" + name + "'");
}

namespace {

Material material_from_json(const nlohmann::json& j, const std::string& where) {
    if (j.is_string()) return builtin_material(j.get<std::string>());
    Material m;
    if (!j.contains("eps_r")) throw std::invalid_argument(where + ": missing eps_r");
    m.name = j.value("name", where);
    m.eps_r = j.at("eps_r").get<double>();
    m.sigma = j.value("sigma", 0.0);
    m.mu_r = j.value("mu_r", 1.0);
    return m;
}

}  // namespace

Scene build_scene(const std::string& json_text) {
    using nlohmann::json;
    const json j = json::parse(json_text);
    Scene s;

    if (!j.contains("layers")) throw std::invalid_argument("scene: missing 'layers'");
    double eps_max = 1.0;
    for (const auto& lj : j.at("layers")) {
        if (!lj.is_object())
            throw std::invalid_argument("layer: must be an object with thickness_m");
        Material m;
        if (lj.contains("eps_r")) {
            m = material_from_json(lj, "layer");
            if (lj.contains("name")) m.name = lj.at("name").get<std::string>();
        } else if (lj.contains("name")) {
            m = builtin_material(lj.at("name").get<std::string>());
        } else {
            throw std::invalid_argument("layer: needs eps_r or a known material name");
        }
        if (!lj.contains("thickness_m"))
            throw std::invalid_argument("layer '" + m.name + "': missing thickness_m");
        s.layers.emplace_back(m, lj.at("thickness_m").get<double>());
        eps_max = std::max(eps_max, m.eps_r);
    }

    if (!j.contains("source")) throw std::invalid_argument("scene: missing 'source'");
    s.source.fc = j.at("source").at("fc_hz").get<double>();
    s.source.amplitude = j.at("source").value("amplitude", 1.0);

    if (!j.contains("survey")) throw std::invalid_argument("scene: missing 'survey'");
    const json& sv = j.at("survey");
    s.survey.tx_x0 = sv.at("tx_x0_m").get<double>();
    s.survey.gap = sv.value("gap_m", 0.04);
    s.survey.elevation = sv.value("elevation_m", 0.10);
    s.survey.step = sv.value("step_m", 0.02);
    s.survey.n_shots = sv.value("n_shots", 1);

    if (j.contains("void")) {
        const json& vj = j.at("void");
        VoidSpec v;
        v.x_center = vj.at("x_center_m").get<double>();
        v.width = vj.at("width_m").get<double>();
        v.height = vj.at("height_m").get<double>();
        v.fill = material_from_json(vj.at("fill"), "void.fill");
        if (vj.contains("eps_r")) throw std::invalid_argument("void: material goes under 'fill'");
        s.void_box = v;
        eps_max = std::max(eps_max, v.fill.eps_r);
    }
    if (j.contains("plate")) {
        PlateSpec p;
        p.x_center = j.at("plate").at("x_center_m").get<double>();
        p.width = j.at("plate").at("width_m").get<double>();
        s.plate = p;
    }

    s.air_gap = j.value("air_gap_m", s.survey.elevation + 0.10);

    const json& gj = j.contains("grid") ? j.at("grid") : json::object();
    s.grid.pml_cells = gj.value("pml_cells", 10);
    s.grid.spacing = gj.value("spacing_m", 0.0);
    if (s.grid.spacing <= 0.0)
        s.grid.spacing = estimate_grid_spacing(2.5 * s.source.fc, eps_max);
    if (!gj.contains("width_m")) throw std::invalid_argument("grid: missing width_m");
    s.grid.width = gj.at("width_m").get<double>();
    if (gj.contains("height_m") && gj.at("height_m").get<double>() > 0.0) {
        s.grid.height = gj.at("height_m").get<double>();
    } else {
        double stack = 0.0;
        for (const auto& [m, th] : s.layers) stack += th;
        s.grid.height = stack + s.air_gap + 2.0 * s.grid.pml_cells * s.grid.spacing;
        // Round up to a whole cell.
        s.grid.height = std::ceil(s.grid.height / s.grid.spacing - 1e-9) * s.grid.spacing;
        const double interior = s.grid.height - 2.0 * s.grid.pml_cells * s.grid.spacing;
        s.air_gap = interior - stack;
    }

    if (sv.contains("time_window_ns") && sv.at("time_window_ns").get<double>() > 0.0) {
        s.survey.time_window = sv.at("time_window_ns").get<double>() * 1e-9;
    } else {
        // Default window covers the air gap plus the full stack.
        auto stack = s.layers;
        stack.insert(stack.begin(), {builtin_material("air"), s.air_gap});
        s.survey.time_window = recommended_time_window(stack);
    }

    validate(s);
    return s;
}

// ---------------------------------------------------------------------------
// Solver

Simulation::Simulation(const Scene& scene, int shot_index) {
    validate(scene);
    if (shot_index < 0 || shot_index >= scene.survey.n_shots)
        throw std::invalid_argument("simulate_ascan: shot_index out of range");
    const double tx = scene.survey.tx_x0 + shot_index * scene.survey.step;
    init(scene, tx, tx + scene.survey.gap);
}

Simulation::Simulation(const Scene& scene, double tx_x, double rx_x) {
    validate(scene);
    init(scene, tx_x, rx_x);
}

void Simulation::init(const Scene& scene, double tx_x, double rx_x) {
    spacing_ = scene.grid.spacing;
    nx_ = snap(scene.grid.width, spacing_, "width");
    ny_ = snap(scene.grid.height, spacing_, "height");
    stride_ = nx_ + 1;
    pml_ = scene.grid.pml_cells;
    dt_ = courant_dt(scene.grid);
    ch_ = dt_ / (kMu0 * spacing_);
    src_amp_ = scene.source.amplitude;
    src_fc_ = scene.source.fc;

    const std::size_t total = std::size_t(stride_) * (ny_ + 1);
    ez_.assign(total, 0.0);
    hx_.assign(total, 0.0);
    hy_.assign(total, 0.0);
    psi_ezx_.assign(total, 0.0);
    psi_ezy_.assign(total, 0.0);
    psi_hx_.assign(total, 0.0);
    psi_hy_.assign(total, 0.0);

    build_materials(scene);
    build_pml(scene);

    const double y_surface = scene.grid.height - pml_ * spacing_ - scene.air_gap;
    const int jy = snap(y_surface + scene.survey.elevation, spacing_, "antenna");
    const int itx = snap(tx_x, spacing_, "tx");
    const int irx = snap(rx_x, spacing_, "rx");
    if (itx <= 0 || itx >= nx_ || irx <= 0 || irx >= nx_ || jy <= 0 || jy >= ny_)
        throw std::invalid_argument("antenna position outside the grid");
    src_idx_ = jy * stride_ + itx;
    rx_idx_ = jy * stride_ + irx;
}

void Simulation::build_materials(const Scene& scene) {
    const std::size_t total = std::size_t(stride_) * (ny_ + 1);
    ca_.assign(total, 0.0);
    cb_.assign(total, 0.0);

    const double y_surface = scene.grid.height - pml_ * spacing_ - scene.air_gap;

    std::vector<double> cum;  // cumulative depth of layer bottoms
    double acc = 0.0;
    for (const auto& [m, th] : scene.layers) {
        acc += th;
        cum.push_back(acc);
    }
    const double subgrade_top = scene.layers.size() >= 2 ? cum[cum.size() - 2] : 0.0;

    auto material_at = [&](double x, double y) -> const Material* {
        static const Material air = builtin_material("air");
        const double depth = y_surface - y;
        if (depth <= 0.0 || scene.layers.empty()) return &air;
        if (scene.void_box) {
            const VoidSpec& v = *scene.void_box;
            if (std::fabs(x - v.x_center) <= v.width / 2.0 && depth > subgrade_top &&
                depth <= subgrade_top + v.height)
                return &v.fill;
        }
        for (std::size_t k = 0; k < cum.size(); ++k)
            if (depth <= cum[k]) return &scene.layers[k].first;
        return &scene.layers.back().first;  // continues through the bottom PML
    };

    for (int jj = 0; jj <= ny_; ++jj) {
        for (int ii = 0; ii <= nx_; ++ii) {
            const Material& m = *material_at(ii * spacing_, jj * spacing_);
            const double eps = m.eps_r * kEps0;
            const double s = m.sigma * dt_ / (2.0 * eps);
            ca_[jj * stride_ + ii] = (1.0 - s) / (1.0 + s);
            cb_[jj * stride_ + ii] = (dt_ / (eps * spacing_)) / (1.0 + s);
        }
    }

    if (scene.plate) {
        // PEC strip on the surface: freezing Ez at zero via ca = cb = 0.
        const int jp = snap(y_surface, spacing_, "plate");
        const int a = std::max(1, snap(scene.plate->x_center - scene.plate->width / 2.0,
                                       spacing_, "plate"));
        const int b = std::min(nx_ - 1, snap(scene.plate->x_center + scene.plate->width / 2.0,
                                             spacing_, "plate"));
        for (int ii = a; ii <= b; ++ii) {
            ca_[jp * stride_ + ii] = 0.0;
            cb_[jp * stride_ + ii] = 0.0;
        }
    }
}

void Simulation::build_pml(const Scene& scene) {
    (void)scene;
    const double d_pml = pml_ * spacing_;
    const double sigma_max =
        -(kPmlGradingOrder + 1.0) * kEps0 * kC0 * std::log(kPmlReflection) / (2.0 * d_pml);

    auto coeffs = [&](double u, double& b, double& c) {
        // u in [0,1]: normalized depth into the PML (1 at the outer edge).
        if (u <= 0.0) {
            b = 1.0;
            c = 0.0;
            return;
        }
        const double sig = sigma_max * std::pow(u, kPmlGradingOrder);
        const double alpha = kPmlAlphaMax * (1.0 - u);
        b = std::exp(-(sig + alpha) * dt_ / kEps0);
        c = sig + alpha > 0.0 ? sig / (sig + alpha) * (b - 1.0) : 0.0;
    };

    auto fill = [&](std::vector<double>& bs, std::vector<double>& cs, int n, double stagger) {
        bs.assign(n + 1, 1.0);
        cs.assign(n + 1, 0.0);
        for (int i = 0; i <= n; ++i) {
            const double pos = i + stagger;
            double u = 0.0;
            if (pos < pml_) u = (pml_ - pos) / pml_;
            else if (pos > n - pml_) u = (pos - (n - pml_)) / pml_;
            if (u > 1.0) u = 1.0;
            coeffs(u, bs[i], cs[i]);
        }
    };

    fill(bex_, cex_, nx_, 0.0);   // Ez x-profile, integer positions
    fill(bhx_, chx_c_, nx_, 0.5); // Hy x-profile, half positions
    fill(bey_, cey_, ny_, 0.0);   // Ez y-profile, integer positions
    fill(bhy_, chy_c_, ny_, 0.5); // Hx y-profile, half positions
}

void Simulation::step() {
    const int nx = nx_, ny = ny_, stride = stride_, pml = pml_;

    // H update. Hx rows 0..ny-1, Hy rows 0..ny.
    for (int j = 0; j < ny; ++j) {
        double* hx = hx_.data() + std::size_t(j) * stride;
        const double* ez = ez_.data() + std::size_t(j) * stride;
        const double* ez_up = ez + stride;
        kernels::fdtd_update_hx(hx, ez, ez_up, ch_, std::size_t(nx + 1));
        if (j < pml || j > ny - 1 - pml) {
            double* psi = psi_hx_.data() + std::size_t(j) * stride;
            const double b = bhy_[j], c = chy_c_[j];
            for (int i = 0; i <= nx; ++i) {
                const double d = ez_up[i] - ez[i];
                psi[i] = b * psi[i] + c * d;
                hx[i] -= ch_ * psi[i];
            }
        }
    }
    for (int j = 0; j <= ny; ++j) {
        double* hy = hy_.data() + std::size_t(j) * stride;
        const double* ez = ez_.data() + std::size_t(j) * stride;
        kernels::fdtd_update_hy(hy, ez, ch_, std::size_t(nx));
        double* psi = psi_hy_.data() + std::size_t(j) * stride;
        for (int i = 0; i < pml; ++i) {
            const double d = ez[i + 1] - ez[i];
            psi[i] = bhx_[i] * psi[i] + chx_c_[i] * d;
            hy[i] += ch_ * psi[i];
        }
        for (int i = nx - pml; i < nx; ++i) {
            const double d = ez[i + 1] - ez[i];
            psi[i] = bhx_[i] * psi[i] + chx_c_[i] * d;
            hy[i] += ch_ * psi[i];
        }
    }

    // E update over the interior; the outermost ring stays at zero (PEC
    // backing behind the PML).
    for (int j = 1; j < ny; ++j) {
        const std::size_t row = std::size_t(j) * stride;
        double* ez = ez_.data() + row;
        const double* ca = ca_.data() + row;
        const double* cb = cb_.data() + row;
        const double* hy = hy_.data() + row;
        const double* hx = hx_.data() + row;
        const double* hx_dn = hx_.data() + row - stride;
        kernels::fdtd_update_ez(ez + 1, ca + 1, cb + 1, hy + 1, hy, hx + 1, hx_dn + 1,
                                std::size_t(nx - 1));

        double* psix = psi_ezx_.data() + row;
        auto fix_x = [&](int i0, int i1) {
            for (int i = i0; i <= i1; ++i) {
                const double d = hy[i] - hy[i - 1];
                psix[i] = bex_[i] * psix[i] + cex_[i] * d;
                ez[i] += cb[i] * psix[i];
            }
        };
        fix_x(1, pml);
        fix_x(nx - pml, nx - 1);

        if (j <= pml || j >= ny - pml) {
            double* psiy = psi_ezy_.data() + row;
            const double b = bey_[j], c = cey_[j];
            for (int i = 1; i < nx; ++i) {
                const double d = hx[i] - hx_dn[i];
                psiy[i] = b * psiy[i] + c * d;
                ez[i] -= cb[i] * psiy[i];
            }
        }
    }

    // Soft line-current source; the sign keeps the recorded direct wave's
    // main lobe negative, matching the survey display convention.
    const double t_src = (step_ + 0.5) * dt_;
    ez_[src_idx_] -= cb_[src_idx_] *
                     phys::ricker(t_src, {src_fc_, src_amp_}) / spacing_;

    ++step_;

    if (!std::isfinite(ez_[rx_idx_]) || !std::isfinite(ez_[src_idx_]))
        throw std::runtime_error("fdtd: non-finite field at step " + std::to_string(step_));
}

double Simulation::receiver_sample() const { return ez_[rx_idx_]; }

double Simulation::field_energy() const {
    // eps/2 Ez^2 + mu/2 (Hx^2 + Hy^2) per cell over the non-PML interior.
    double e = 0.0;
    for (int j = pml_; j <= ny_ - pml_; ++j) {
        for (int i = pml_; i <= nx_ - pml_; ++i) {
            const std::size_t k = std::size_t(j) * stride_ + i;
            // cb = dt/(eps*spacing)/(1+s); recover eps via dt/(cb*spacing*(1+s)).
            // Plate cells (cb = 0) hold no field.
            if (cb_[k] == 0.0) continue;
            const double s_term = (1.0 - ca_[k]) / (1.0 + ca_[k]);  // sigma dt / 2 eps
            const double eps = dt_ / (cb_[k] * spacing_ * (1.0 + s_term));
            e += 0.5 * eps * ez_[k] * ez_[k] +
                 0.5 * kMu0 * (hx_[k] * hx_[k] + hy_[k] * hy_[k]);
        }
    }
    return e * spacing_ * spacing_;
}

Trace simulate_ascan(const Scene& scene, int shot_index) {
    Simulation sim(scene, shot_index);
    const double dt = sim.dt();
    const std::size_t n = std::size_t(std::ceil(scene.survey.time_window / dt));
    Trace t;
    t.dt = dt;
    t.t0 = 0.0;
    const double tx = scene.survey.tx_x0 + shot_index * scene.survey.step;
    t.x = tx + scene.survey.gap / 2.0;
    t.samples.resize(n);
    for (std::size_t k = 0; k < n; ++k) {
        t.samples[k] = sim.receiver_sample();
        sim.step();
        if ((k & 0xff) == 0xff && !all_finite(t.samples))
            throw std::runtime_error("fdtd: non-finite trace near step " + std::to_string(k));
    }
    return t;
}

Radargram simulate_bscan(const Scene& scene, int n_threads) {
    validate(scene);
    const int n = scene.survey.n_shots;
    Radargram r;
    r.dx = scene.survey.step;
    r.x0 = scene.survey.tx_x0 + scene.survey.gap / 2.0;
    r.traces.resize(n);

    n_threads = std::clamp(n_threads, 1, n);
    if (n_threads == 1) {
        for (int s = 0; s < n; ++s) r.traces[s] = simulate_ascan(scene, s);
    } else {
        std::vector<std::thread> pool;
        std::atomic<int> next{0};
        std::vector<std::string> errors(n);
        for (int w = 0; w < n_threads; ++w) {
            pool.emplace_back([&] {
                for (int s = next.fetch_add(1); s < n; s = next.fetch_add(1)) {
                    try {
                        r.traces[s] = simulate_ascan(scene, s);
                    } catch (const std::exception& e) {
                        errors[s] = e.what();
                    }
                }
            });
        }
        for (auto& th : pool) th.join();
        for (const auto& e : errors)
            if (!e.empty()) throw std::runtime_error(e);
    }
    return r;
}

}  // namespace gpr::fdtd
