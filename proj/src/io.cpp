#include "colosim/io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "colosim/stability.hpp"
#include "colosim/switching.hpp"

namespace colosim {

namespace {

std::string fmt9(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return buf;
}

void require(bool ok, const std::string& what) {
    if (!ok) throw ConfigError("invalid config: " + what);
}

}  // namespace

nlohmann::json config_to_json(const ScenarioConfig& cfg) {
    nlohmann::json j;
    j["name"] = cfg.name;
    j["net"] = {{"x_c1", cfg.net.x_c1},       {"x_c2", cfg.net.x_c2},
                {"x_g", cfg.net.x_g},         {"u_g", cfg.net.u_g},
                {"u_c1_set", cfg.net.u_c1_set}, {"f_base", cfg.net.f_base},
                {"s_base", cfg.net.s_base}};
    j["gfmc"] = {{"m_p", cfg.gfmc.m_p},     {"p_ref", cfg.gfmc.p_ref},
                 {"u_set", cfg.gfmc.u_set}, {"i_max", cfg.gfmc.i_max},
                 {"eta_1", cfg.gfmc.eta_1}, {"vfdc_enabled", cfg.gfmc.vfdc_enabled},
                 {"epsilon", cfg.gfmc.epsilon}};
    j["gflcs"] = nlohmann::json::array();
    for (const auto& g : cfg.gflcs) {
        j["gflcs"].push_back({{"k_2p", g.k_2p},
                              {"k_2i", g.k_2i},
                              {"x_c2", g.x_c2},
                              {"i_d_ref", g.i_d_ref},
                              {"i_q_ref", g.i_q_ref},
                              {"k_q", g.k_q},
                              {"i_max", g.i_max},
                              {"vfdc_enabled", g.vfdc_enabled},
                              {"vfdc_hold", g.vfdc_hold},
                              {"tau_meas", g.tau_meas}});
    }
    j["fault"] = {{"t_start", cfg.fault.t_start},
                  {"duration", cfg.fault.duration},
                  {"rho", cfg.fault.rho}};
    j["sim"] = {{"t_end", cfg.sim.t_end},
                {"dt", cfg.sim.dt},
                {"event_tol", cfg.sim.event_tol},
                {"model", cfg.sim.model == Model::REDUCED ? "reduced" : "reference"},
                {"trace_decimation", cfg.sim.trace_decimation},
                {"log_energy", cfg.sim.log_energy},
                {"min_event_separation", cfg.sim.min_event_separation}};
    j["sat_policy"] = cfg.sat_policy == SatPolicy::LEVEL ? "level" : "crossing";
    j["release_dwell"] = cfg.release_dwell;
    return j;
}

ScenarioConfig config_from_json(const nlohmann::json& j) {
    ScenarioConfig cfg;
    try {
        cfg.name = j.value("name", "scenario");
        const auto& n = j.at("net");
        cfg.net.x_c1 = n.at("x_c1");
        cfg.net.x_c2 = n.at("x_c2");
        cfg.net.x_g = n.at("x_g");
        cfg.net.u_g = n.value("u_g", 1.0);
        cfg.net.u_c1_set = n.value("u_c1_set", 1.0);
        cfg.net.f_base = n.value("f_base", 50.0);
        cfg.net.s_base = n.value("s_base", 200.0);

        const auto& m = j.at("gfmc");
        cfg.gfmc.m_p = m.at("m_p");
        cfg.gfmc.p_ref = m.at("p_ref");
        cfg.gfmc.u_set = m.value("u_set", 1.0);
        cfg.gfmc.i_max = m.at("i_max");
        cfg.gfmc.eta_1 = m.value("eta_1", 0.0);
        cfg.gfmc.vfdc_enabled = m.value("vfdc_enabled", false);
        cfg.gfmc.epsilon = m.value("epsilon", -kPi / 2.0);

        cfg.gflcs.clear();
        for (const auto& gj : j.at("gflcs")) {
            GflcParams g;
            g.k_2p = gj.at("k_2p");
            g.k_2i = gj.at("k_2i");
            g.x_c2 = gj.at("x_c2");
            g.i_d_ref = gj.at("i_d_ref");
            g.i_q_ref = gj.value("i_q_ref", 0.0);
            g.k_q = gj.value("k_q", 3.0);
            g.i_max = gj.value("i_max", 1.2);
            g.vfdc_enabled = gj.value("vfdc_enabled", false);
            g.vfdc_hold = gj.value("vfdc_hold", 2.0);
            g.tau_meas = gj.value("tau_meas", 0.005);
            require(g.k_2p > 0.0 && g.k_2i > 0.0, "PLL gains must be positive");
            require(g.i_max > 0.0 && g.k_q >= 0.0, "GFLC limits must be sane");
            cfg.gflcs.push_back(g);
        }
        require(!cfg.gflcs.empty(), "at least one GFLC required");

        const auto& f = j.at("fault");
        cfg.fault.t_start = f.at("t_start");
        cfg.fault.duration = f.at("duration");
        cfg.fault.rho = f.at("rho");
        require(cfg.fault.rho >= 0.0 && cfg.fault.rho <= 1.0, "rho must lie in [0,1]");

        const auto& s = j.at("sim");
        cfg.sim.t_end = s.at("t_end");
        cfg.sim.dt = s.value("dt", 5e-5);
        cfg.sim.event_tol = s.value("event_tol", 1e-9);
        const std::string model = s.value("model", "reduced");
        require(model == "reduced" || model == "reference", "model must be reduced|reference");
        cfg.sim.model = model == "reduced" ? Model::REDUCED : Model::REFERENCE;
        cfg.sim.trace_decimation = s.value("trace_decimation", 20);
        cfg.sim.log_energy = s.value("log_energy", true);
        cfg.sim.min_event_separation = s.value("min_event_separation", 1e-6);
        require(cfg.sim.dt > 0.0, "dt must be positive");
        require(cfg.fault.t_start + cfg.fault.duration < cfg.sim.t_end,
                "fault must clear before t_end");

        const std::string pol = j.value("sat_policy", "crossing");
        require(pol == "level" || pol == "crossing", "sat_policy must be level|crossing");
        cfg.sat_policy = pol == "level" ? SatPolicy::LEVEL : SatPolicy::CROSSING;
        cfg.release_dwell = j.value("release_dwell", 0.0);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("invalid config: ") + e.what());
    }
    return cfg;
}

ScenarioConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("cannot parse config: ") + e.what());
    }
    return config_from_json(j);
}

void write_trace_csv(const std::string& path, const Trace& trace) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path);
    const std::size_t n = trace.rows.empty() ? 0 : trace.rows.front().theta.size();
    out << "t,S,delta,p_c1,i_c1_mag,u_pcc_mag";
    for (std::size_t i = 0; i < n; ++i)
        out << ",theta_" << i << ",varpi_" << i << ",v_" << i;
    out << "\n";
    for (const auto& r : trace.rows) {
        out << fmt9(r.t) << ',' << r.s << ',' << fmt9(r.delta) << ',' << fmt9(r.p_c1) << ','
            << fmt9(r.i_c1_mag) << ',' << fmt9(r.u_pcc_mag);
        for (std::size_t i = 0; i < n; ++i) {
            out << ',' << fmt9(r.theta[i]) << ',' << fmt9(r.varpi_pu[i]) << ',';
            if (i < r.energy.size() && std::isfinite(r.energy[i])) out << fmt9(r.energy[i]);
        }
        out << "\n";
    }
}

void write_events_csv(const std::string& path, const EventLog& events, std::size_t n_gflc) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path);
    out << "t,kind,S,delta";
    for (std::size_t i = 0; i < n_gflc; ++i) out << ",theta_" << i << ",varpi_" << i;
    out << "\n";
    for (const auto& e : events.events) {
        out << fmt9(e.t) << ',' << to_string(e.kind) << ',' << e.state.mode_indicator()
            << ',' << fmt9(e.state.gfmc.delta);
        for (std::size_t i = 0; i < n_gflc; ++i)
            out << ',' << fmt9(e.state.gflcs[i].theta) << ','
                << fmt9(e.state.gflcs[i].varpi);
        out << "\n";
    }
}

void write_basin_csv(const std::string& path, const BasinMap& map) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path);
    out << "theta0,varpi0,class,final_theta,final_mode\n";
    for (const auto& c : map.cells) {
        out << fmt9(c.theta0) << ',' << fmt9(c.varpi0_pu) << ',' << to_string(c.cls) << ','
            << fmt9(c.final_theta) << ',' << to_string(c.final_mode) << "\n";
    }
}

nlohmann::json summary_to_json(const Summary& s) {
    nlohmann::json j;
    j["name"] = s.name;
    j["final_mode"] = to_string(s.final_mode);
    j["pll"] = nlohmann::json::array();
    for (const auto v : s.pll) j["pll"].push_back(to_string(v));
    j["pll_all_stable"] = s.pll_all_stable;
    j["diverged"] = s.diverged;
    if (s.diverged) j["t_diverged"] = s.t_diverged;
    j["clearance_mode"] = to_string(s.clearance_mode);
    j["clearance_energy"] = s.clearance_energy;
    j["clearance_energy_cvc"] = s.clearance_energy_cvc;
    j["final_delta"] = s.final_delta;
    j["final_p_c1"] = s.final_p_c1;
    j["final_theta"] = s.final_theta;
    j["final_varpi"] = s.final_varpi;
    j["final_theta_sep"] = s.final_theta_sep;
    j["wall_seconds"] = s.wall_seconds;
    j["cycles"] = nlohmann::json::array();
    for (std::size_t i = 0; i < s.audits.size(); ++i) {
        nlohmann::json cj = nlohmann::json::array();
        for (const auto& c : s.audits[i].cycles) {
            cj.push_back({{"t_entry", c.t_entry},
                          {"t_exit", c.t_exit},
                          {"theta_ka", c.theta_ka},
                          {"theta_kb", c.theta_kb},
                          {"v_entry", c.v_entry},
                          {"v_exit", c.v_exit},
                          {"dv_p_entry", c.dv_p_entry},
                          {"dv_p_exit", c.dv_p_exit},
                          {"dv_damping", c.dv_damping},
                          {"dv_total", c.dv_total}});
        }
        j["cycles"].push_back(cj);
    }
    return j;
}

nlohmann::json analyze_to_json(const ScenarioConfig& cfg) {
    const NetworkParams& net = cfg.net;
    const DerivedParams derived = derive_params(net);
    const Equilibrium eq = solve_equilibrium(cfg);
    const std::size_t n = cfg.gflcs.size();

    nlohmann::json j;
    j["name"] = cfg.name;
    j["derived"] = {{"alpha", derived.alpha},
                    {"y_1g", derived.y_1g},
                    {"l_v", derived.l_v},
                    {"beta_1", derived.beta_1},
                    {"gamma", derived.gamma},
                    {"weak_coupling_warning", derived.weak_coupling_warning}};
    j["equilibrium"] = {{"delta", eq.delta}, {"theta", eq.theta}, {"u_pcc", eq.u_pcc_mag}};

    const auto ctx_for = [&](GfmcMode mode) {
        PllContext ctx;
        ctx.mode = mode;
        ctx.delta = eq.delta;
        ctx.u_g_eff = net.u_g;
        if (mode == GfmcMode::CLC) {
            ctx.gfmc_current = cfg.gfmc.vfdc_enabled
                                   ? Phasor{cfg.gfmc.i_max, cfg.gfmc.epsilon}
                                   : Phasor{cfg.gfmc.i_max, eq.delta + cfg.gfmc.eta_1};
            ctx.gfmc_pinned = cfg.gfmc.vfdc_enabled;
        }
        ctx.refs.resize(n);
        ctx.theta = eq.theta;
        ctx.x_c2.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            ctx.refs[i] = GflcRefs{cfg.gflcs[i].i_d_ref, cfg.gflcs[i].i_q_ref, false, 0.0};
            ctx.x_c2[i] = cfg.gflcs[i].x_c2;
        }
        return ctx;
    };

    j["gflcs"] = nlohmann::json::array();
    for (std::size_t i = 0; i < n; ++i) {
        nlohmann::json gj;
        for (const GfmcMode mode : {GfmcMode::CVC, GfmcMode::CLC}) {
            PllContext ctx = ctx_for(mode);
            nlohmann::json mj;
            try {
                const double ths = sep_exact(ctx, i, net, derived);
                mj["theta_sep"] = ths;
                for (const LineVariant variant :
                     {LineVariant::BASE, LineVariant::MULTI, LineVariant::VFDC}) {
                    const DampingLine line =
                        damping_line(mode, variant, cfg.gflcs[i], ctx, i, net, derived);
                    const StabilityBoundary b =
                        stability_boundary(line, cfg.gflcs[i], ctx, i, net, derived);
                    const char* vname = variant == LineVariant::BASE    ? "base"
                                        : variant == LineVariant::MULTI ? "multi"
                                                                        : "vfdc";
                    mj[vname] = {{"intercept", line.intercept},
                                 {"slope", line.slope()},
                                 {"theta_s", line.theta_s},
                                 {"theta_min", b.theta_min},
                                 {"theta_max", b.theta_max},
                                 {"v_max", b.v_max},
                                 {"collapsed", b.collapsed}};
                }
            } catch (const std::domain_error& e) {
                mj["error"] = e.what();
            }
            gj[mode == GfmcMode::CVC ? "cvc" : "clc"] = mj;
        }
        j["gflcs"].push_back(gj);
    }

    // Constant-power line the GFMC would trace in CLC under VFDC, with the
    // GFLC current pinned at its equilibrium angle.
    {
        double i_sum_d = 0.0, i_sum_q = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const Phasor p =
                gflc_current_from_refs({cfg.gflcs[i].i_d_ref, cfg.gflcs[i].i_q_ref, true,
                                        eq.theta[i]},
                                       eq.theta[i]);
            i_sum_d += p.mag * std::cos(p.ang);
            i_sum_q += p.mag * std::sin(p.ang);
        }
        const Phasor agg = Phasor::from_complex({i_sum_d, i_sum_q});
        const VfdcPowerLine line =
            vfdc_power_line(cfg.gfmc.i_max, cfg.gfmc.epsilon, agg, derived, net.u_g);
        j["vfdc_power_line"] = {{"k_a", line.k_a}, {"beta", line.beta},
                                {"p_line", line.p_line}, {"epsilon", cfg.gfmc.epsilon}};
    }
    return j;
}

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path);
    out << content;
}

}  // namespace colosim
