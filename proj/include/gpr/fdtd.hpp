// 2D TMz finite-difference time-domain solver for layered road scenes with
// rectangular under-base voids. One electric component (Ez, normal to the
// scan plane) and two in-plane magnetic components on a uniform Yee grid;
// conductivity loss; convolutional PML boundary; soft line-current source
// driven by a Ricker waveform.

#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "gpr/types.hpp"

namespace gpr::fdtd {

struct GridSpec {
    double width = 0.0;    // m, along-track
    double height = 0.0;   // m, vertical
    double spacing = 0.0;  // m, uniform cell size
    int pml_cells = 10;
};

struct SurveySpec {
    double tx_x0 = 0.0;       // first transmitter position, m
    double gap = 0.04;        // tx -> rx offset, m
    double elevation = 0.10;  // antenna height above the surface, m
    double step = 0.02;       // m per shot
    int n_shots = 1;
    double time_window = 0.0;  // s
};

struct VoidSpec {
    double x_center = 0.0;  // m
    double width = 0.0;     // m
    double height = 0.0;    // m, downward from the subgrade top
    Material fill;
};

// PEC calibration strip lying on the surface.
struct PlateSpec {
    double x_center = 0.0;
    double width = 0.0;
};

struct Scene {
    GridSpec grid;
    std::vector<std::pair<Material, double>> layers;  // (material, thickness), surface down
    double air_gap = 0.0;                             // air column above the surface, m
    std::optional<VoidSpec> void_box;
    std::optional<PlateSpec> plate;
    SurveySpec survey;
    RickerSpec source{1e9, 1.0};
};

// lambda_min/10 = c / (10 f_max sqrt(eps_max)).
double estimate_grid_spacing(double f_max, double eps_max);

// 2D stability limit with a 1% margin: 0.99 * spacing / (c sqrt(2)).
double courant_dt(const GridSpec& grid);

// Two-way travel time through the layer stack plus 10% margin, rounded up
// to a whole nanosecond. recommended_time_window_raw omits margin/rounding.
double recommended_time_window(const std::vector<std::pair<Material, double>>& layers);
double recommended_time_window_raw(const std::vector<std::pair<Material, double>>& layers);

void validate(const Scene& s);

// Parse a scene description (JSON text), apply defaults and validate.
// Built-in material names: air, water, grout, asphalt, base, subgrade.
Scene build_scene(const std::string& json_text);

Material builtin_material(const std::string& name);

// Single shot; deterministic, bit-identical across repeated runs.
Trace simulate_ascan(const Scene& scene, int shot_index);

// All shots; shots are independent and may be fanned out over n_threads
// without changing the result.
Radargram simulate_bscan(const Scene& scene, int n_threads = 1);

// Stepping interface used by the simulate_* wrappers and by diagnostics.
class Simulation {
  public:
    Simulation(const Scene& scene, int shot_index);
    Simulation(const Scene& scene, double tx_x, double rx_x);  // explicit antennas

    void step();
    double receiver_sample() const;    // Ez at the receiver node
    double dt() const { return dt_; }
    int steps_done() const { return step_; }

    // Field energy over the non-PML interior (J per meter of strike).
    double field_energy() const;

    int nx() const { return nx_; }
    int ny() const { return ny_; }
    double spacing() const { return spacing_; }

  private:
    void init(const Scene& scene, double tx_x, double rx_x);
    void build_materials(const Scene& scene);
    void build_pml(const Scene& scene);

    int nx_ = 0, ny_ = 0, stride_ = 0, pml_ = 0;
    double spacing_ = 0.0, dt_ = 0.0, ch_ = 0.0;
    double src_amp_ = 0.0, src_fc_ = 0.0;
    int src_idx_ = 0, rx_idx_ = 0;
    int step_ = 0;

    std::vector<double> ez_, hx_, hy_, ca_, cb_;
    std::vector<double> psi_ezx_, psi_ezy_, psi_hx_, psi_hy_;
    // CPML profiles: e-grid (integer) and h-grid (half) positions.
    std::vector<double> bex_, cex_, bey_, cey_, bhx_, chx_c_, bhy_, chy_c_;
};

}  // namespace gpr::fdtd
