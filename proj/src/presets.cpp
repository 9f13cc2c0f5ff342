#include "colosim/presets.hpp"

#include <stdexcept>

namespace colosim {

namespace {

// Current limits in the case table are per-unit on the converter's own
// rating; the star network is per-unit on the 200 MVA system base. The
// GFMC of test system 1 is rated 56 MVA (0.28 pu), the GFLCs carry a
// 1.2 pu ceiling on a rating equal to their dispatch.
constexpr double kGfmcBaseScale1 = 0.28;
constexpr double kGflcCeiling = 1.2;

struct Case1Row {
    double t_c;
    double p1_mw;
    double p2_mw;
    double k_q;
    double k_2p;
    double i_c1_max;
    double eta_1;
    double rho;
};

// Test-system-1 case table.
const Case1Row kCaseTable[8] = {
    {0.05, 35.0, 110.0, 3.0, 0.07, 1.10, 0.0, 0.3},
    {0.05, 35.0, 110.0, 3.0, 0.07, 1.25, 0.0, 0.3},
    {0.05, 35.0, 110.0, 3.0, 0.07, 1.70, 0.0, 0.3},
    {0.10, 35.0, 70.0, 3.0, 0.15, 1.20, 0.0, 0.3},
    {0.10, 35.0, 70.0, 0.5, 0.15, 1.20, -kPi / 2.0, 0.3},
    {0.15, 20.0, 100.0, 3.0, 0.15, 1.10, 0.0, 0.5},
    {0.15, 20.0, 100.0, 0.5, 0.15, 1.10, -kPi / 2.0, 0.5},
    {0.20, 40.0, 60.0, 0.0, 0.075, 1.30, 0.0, 0.1},
};

ScenarioConfig test_system_1(int case_no, bool vfdc_on) {
    const Case1Row& row = kCaseTable[case_no - 1];
    ScenarioConfig cfg;
    cfg.name = "CASE" + std::to_string(case_no);

    cfg.net.x_c1 = 0.05;
    cfg.net.x_c2 = 0.03;
    cfg.net.x_g = 0.58;
    cfg.net.u_g = 1.0;
    cfg.net.u_c1_set = 1.0;
    cfg.net.f_base = 50.0;
    cfg.net.s_base = 200.0;

    cfg.gfmc.m_p = 0.04;
    cfg.gfmc.p_ref = row.p1_mw / cfg.net.s_base;
    cfg.gfmc.u_set = 1.0;
    cfg.gfmc.i_max = row.i_c1_max * kGfmcBaseScale1;
    cfg.gfmc.eta_1 = row.eta_1;
    cfg.gfmc.vfdc_enabled = vfdc_on;

    GflcParams g;
    g.k_2p = row.k_2p;
    g.k_2i = 100.0;
    g.x_c2 = 0.03;
    g.i_d_ref = row.p2_mw / cfg.net.s_base;
    g.i_q_ref = 0.0;
    g.k_q = row.k_q;
    g.i_max = kGflcCeiling * g.i_d_ref;
    g.tau_meas = 0.005;
    g.vfdc_enabled = vfdc_on;
    cfg.gflcs = {g};

    cfg.fault.t_start = 1.0;
    cfg.fault.duration = row.t_c;
    cfg.fault.rho = row.rho;

    cfg.sim.t_end = 10.0;
    cfg.sim.dt = 5e-5;

    // Cases 4-7 reproduce the plain windup-latched limiter that parks the
    // converter at the CLC equilibrium; the alternation studies use the
    // anti-windup-style release.
    if (case_no >= 4 && case_no <= 7) {
        cfg.sat_policy = SatPolicy::CROSSING;
        cfg.release_dwell = 0.05;
    } else {
        cfg.sat_policy = SatPolicy::LEVEL;
        cfg.release_dwell = 0.0;
    }
    return cfg;
}

ScenarioConfig test_system_2(int case_no, bool vfdc_on) {
    ScenarioConfig cfg;
    cfg.name = "CASE" + std::to_string(case_no);

    cfg.net.x_c1 = 0.26;
    cfg.net.x_c2 = 0.05;
    cfg.net.x_g = 0.40;
    cfg.net.u_g = 1.0;
    cfg.net.u_c1_set = 1.0;
    cfg.net.f_base = 50.0;
    cfg.net.s_base = 200.0;

    // Two 12 MVA units; dispatch below rating, 1.2 pu ceiling on own base.
    cfg.gfmc.m_p = 0.02;
    cfg.gfmc.p_ref = 0.06;
    cfg.gfmc.u_set = 1.0;
    cfg.gfmc.i_max = 1.2 * 24.0 / cfg.net.s_base;
    cfg.gfmc.eta_1 = 0.0;
    cfg.gfmc.vfdc_enabled = vfdc_on;

    const auto cluster = [&](double k_2p, double k_2i, double p_mw, double x_c2) {
        GflcParams g;
        g.k_2p = k_2p;
        g.k_2i = k_2i;
        g.x_c2 = x_c2;
        g.i_d_ref = p_mw / cfg.net.s_base;
        g.i_q_ref = 0.0;
        g.k_q = 0.0;  // active-priority ride-through, as in the CHIL rig
        g.i_max = kGflcCeiling * g.i_d_ref;
        g.tau_meas = 0.005;
        g.vfdc_enabled = vfdc_on;
        return g;
    };

    if (case_no == 9) {
        cfg.gflcs = {cluster(0.25, 100.0, 60.2, 0.05)};
    } else {
        // Three clusters behind their own branches; the parallel combination
        // reproduces the table's aggregate reactance.
        cfg.gflcs = {cluster(0.25, 100.0, 27.9, 0.15), cluster(0.15, 50.0, 16.8, 0.15),
                     cluster(0.60, 100.0, 8.4, 0.15)};
    }

    cfg.fault.t_start = 1.0;
    cfg.fault.duration = 0.2;
    cfg.fault.rho = 0.01;

    cfg.sim.t_end = 18.0;
    cfg.sim.dt = 5e-5;
    cfg.sat_policy = SatPolicy::LEVEL;
    return cfg;
}

}  // namespace

ScenarioConfig case_preset(const std::string& name, bool vfdc_on) {
    for (int k = 1; k <= 8; ++k)
        if (name == "CASE" + std::to_string(k)) return test_system_1(k, vfdc_on);
    if (name == "CASE9") return test_system_2(9, vfdc_on);
    if (name == "CASE10") return test_system_2(10, vfdc_on);
    throw std::invalid_argument("unknown case preset: " + name);
}

std::vector<std::string> preset_names() {
    std::vector<std::string> names;
    for (int k = 1; k <= 10; ++k) names.push_back("CASE" + std::to_string(k));
    return names;
}

}  // namespace colosim
