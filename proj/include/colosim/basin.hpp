#pragma once

#include <vector>

#include "colosim/simulator.hpp"

namespace colosim {

struct GridSpec {
    double theta_lo = 0.0;
    double theta_hi = 0.0;
    int theta_steps = 41;
    double varpi_lo_pu = -0.05;  // per-unit on omega_base
    double varpi_hi_pu = 0.05;
    int varpi_steps = 41;
    bool centered = true;  // theta range interpreted relative to the SEP
};

enum class CellClass { STABLE_CVC, STABLE_CLC, UNSTABLE };

const char* to_string(CellClass c);

struct BasinCell {
    double theta0 = 0.0;
    double varpi0_pu = 0.0;
    CellClass cls = CellClass::UNSTABLE;
    double final_theta = 0.0;
    GfmcMode final_mode = GfmcMode::CVC;
    GfmcMode start_mode = GfmcMode::CVC;
    double energy = 0.0;  // active-mode Lyapunov V of the initial state
    bool borderline = false;
};

struct BasinMap {
    GridSpec grid;
    double theta_center = 0.0;  // SEP used for centered grids
    double delta_eq = 0.0;
    std::vector<BasinCell> cells;  // row-major over (varpi, theta)
    int borderline_count = 0;
};

/// Free-run classification of initial (theta, varpi) cells; the grid runs in
/// parallel over rows with a deterministic merge.
BasinMap map_basin(const ScenarioConfig& cfg, const GridSpec& grid, int threads = 0);

struct SweepPoint {
    double t_c = 0.0;
    bool stable = false;
};

struct CctResult {
    std::vector<SweepPoint> table;
    double t_critical = 0.0;  // last stable duration found by bisection
    bool bracketed = false;
    bool monotone = true;
};

/// Bisection on the fault duration between the last stable and the first
/// unstable outcome; stability here means retained synchronism within the
/// probe horizon.
CctResult critical_clearing_sweep(const ScenarioConfig& cfg, double t_c_lo, double t_c_hi,
                                  double tol = 1e-4, int coarse = 8);

}  // namespace colosim
