#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "colosim/basin.hpp"
#include "colosim/io.hpp"
#include "colosim/presets.hpp"
#include "colosim/simulator.hpp"

namespace {

using namespace colosim;

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitInfeasible = 3;
constexpr int kExitInternal = 4;

int thread_count() {
    if (const char* env = std::getenv("COLOSIM_THREADS")) {
        const int n = std::atoi(env);
        if (n > 0) return n;
    }
    return 0;  // auto
}

struct CommonOpts {
    std::string case_name;
    std::string config_path;
    std::string vfdc;  // "", "on", "off"
    std::string model;
    std::string out_dir = ".";
};

ScenarioConfig resolve_config(const CommonOpts& o) {
    ScenarioConfig cfg;
    if (!o.case_name.empty()) {
        cfg = case_preset(o.case_name, o.vfdc == "on");
    } else if (!o.config_path.empty()) {
        cfg = load_config(o.config_path);
        if (o.vfdc == "on" || o.vfdc == "off") {
            const bool on = o.vfdc == "on";
            cfg.gfmc.vfdc_enabled = on;
            for (auto& g : cfg.gflcs) g.vfdc_enabled = on;
        }
    } else {
        throw ConfigError("either --case or --config is required");
    }
    if (o.model == "reduced") cfg.sim.model = Model::REDUCED;
    else if (o.model == "reference") cfg.sim.model = Model::REFERENCE;
    else if (!o.model.empty()) throw ConfigError("model must be reduced|reference");
    return cfg;
}

bool parse_range(const std::string& spec, double& lo, double& hi, int& n) {
    char colon1 = 0, colon2 = 0;
    std::istringstream in(spec);
    if (!(in >> lo >> colon1 >> hi >> colon2 >> n)) return false;
    return colon1 == ':' && colon2 == ':' && n >= 1;
}

void set_param(ScenarioConfig& cfg, const std::string& path, double value) {
    const auto fail = [&]() { throw ConfigError("unknown sweep parameter: " + path); };
    if (path == "gfmc.i_max") cfg.gfmc.i_max = value;
    else if (path == "gfmc.p_ref") cfg.gfmc.p_ref = value;
    else if (path == "gfmc.m_p") cfg.gfmc.m_p = value;
    else if (path == "gfmc.eta_1") cfg.gfmc.eta_1 = value;
    else if (path == "fault.duration") cfg.fault.duration = value;
    else if (path == "fault.rho") cfg.fault.rho = value;
    else if (path == "net.x_g") cfg.net.x_g = value;
    else if (path.rfind("gflcs.", 0) == 0) {
        const auto rest = path.substr(6);
        const auto dot = rest.find('.');
        if (dot == std::string::npos) fail();
        const std::size_t idx = std::stoul(rest.substr(0, dot));
        if (idx >= cfg.gflcs.size()) fail();
        const std::string field = rest.substr(dot + 1);
        GflcParams& g = cfg.gflcs[idx];
        if (field == "k_2p") g.k_2p = value;
        else if (field == "k_2i") g.k_2i = value;
        else if (field == "i_d_ref") g.i_d_ref = value;
        else if (field == "i_max") g.i_max = value;
        else if (field == "k_q") g.k_q = value;
        else fail();
    } else {
        fail();
    }
}

int cmd_run(const CommonOpts& o) {
    ScenarioConfig cfg = resolve_config(o);
    HybridSimulator sim(cfg);
    const ScenarioResult res = sim.run();

    std::filesystem::create_directories(o.out_dir);
    write_trace_csv(o.out_dir + "/trace.csv", res.trace);
    write_events_csv(o.out_dir + "/events.csv", res.events, cfg.gflcs.size());
    write_text_file(o.out_dir + "/summary.json", summary_to_json(res.summary).dump(2) + "\n");

    std::cout << cfg.name << ": final_mode=" << to_string(res.summary.final_mode)
              << " pll=" << (res.summary.pll_all_stable ? "STABLE" : "UNSTABLE")
              << " events=" << res.events.events.size() << "\n";
    return kExitOk;
}

int cmd_analyze(const CommonOpts& o) {
    ScenarioConfig cfg = resolve_config(o);
    const nlohmann::json j = analyze_to_json(cfg);
    std::filesystem::create_directories(o.out_dir);
    write_text_file(o.out_dir + "/analysis.json", j.dump(2) + "\n");
    std::cout << j.dump(2) << "\n";
    return kExitOk;
}

int cmd_basin(const CommonOpts& o, const std::string& grid_spec) {
    ScenarioConfig cfg = resolve_config(o);
    GridSpec grid;
    if (!grid_spec.empty()) {
        double tlo, thi, vlo, vhi;
        int tn, vn;
        const auto comma = grid_spec.find(',');
        if (comma == std::string::npos ||
            !parse_range(grid_spec.substr(0, comma), tlo, thi, tn) ||
            !parse_range(grid_spec.substr(comma + 1), vlo, vhi, vn))
            throw ConfigError("grid spec must be tLo:tHi:N,vLo:vHi:M");
        grid.theta_lo = tlo;
        grid.theta_hi = thi;
        grid.theta_steps = tn;
        grid.varpi_lo_pu = vlo;
        grid.varpi_hi_pu = vhi;
        grid.varpi_steps = vn;
    } else {
        grid.theta_lo = -kPi;
        grid.theta_hi = kPi;
        grid.theta_steps = 41;
        grid.varpi_lo_pu = -0.05;
        grid.varpi_hi_pu = 0.05;
        grid.varpi_steps = 41;
    }
    const BasinMap map = map_basin(cfg, grid, thread_count());
    std::filesystem::create_directories(o.out_dir);
    write_basin_csv(o.out_dir + "/basin.csv", map);
    int stable = 0;
    for (const auto& c : map.cells)
        if (c.cls != CellClass::UNSTABLE) ++stable;
    std::cout << "basin: " << map.cells.size() << " cells, " << stable << " stable, "
              << map.borderline_count << " borderline\n";
    return kExitOk;
}

int cmd_sweep(const CommonOpts& o, const std::string& param, const std::string& range) {
    ScenarioConfig base = resolve_config(o);
    double lo = 0.0, hi = 0.0;
    int n = 0;
    if (range.empty() || !parse_range(range, lo, hi, n))
        throw ConfigError("sweep range must be lo:hi:n with n >= 1");

    std::filesystem::create_directories(o.out_dir);
    std::ofstream out(o.out_dir + "/sweep.csv");
    out << "value,final_mode,pll,diverged\n";
    for (int k = 0; k < n; ++k) {
        const double v = n == 1 ? lo : lo + (hi - lo) * k / (n - 1);
        ScenarioConfig cfg = base;
        set_param(cfg, param, v);
        cfg.sim.log_energy = false;
        HybridSimulator sim(cfg);
        const ScenarioResult res = sim.run();
        out << v << ',' << to_string(res.summary.final_mode) << ','
            << (res.summary.pll_all_stable ? "STABLE" : "UNSTABLE") << ','
            << (res.summary.diverged ? 1 : 0) << "\n";
        std::cout << param << "=" << v << " -> " << to_string(res.summary.final_mode)
                  << " pll=" << (res.summary.pll_all_stable ? "STABLE" : "UNSTABLE") << "\n";
    }
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"colosim: co-located GFMC/GFLC switched-system laboratory"};
    app.require_subcommand(1);

    CommonOpts opts;
    std::string grid_spec, sweep_param, sweep_range;

    const auto add_common = [&](CLI::App* sub) {
        sub->add_option("--case", opts.case_name, "preset name (CASE1..CASE10)");
        sub->add_option("--config", opts.config_path, "scenario config JSON");
        sub->add_option("--vfdc", opts.vfdc, "on|off")->check(CLI::IsMember({"on", "off"}));
        sub->add_option("--model", opts.model, "reduced|reference")
            ->check(CLI::IsMember({"reduced", "reference"}));
        sub->add_option("--out", opts.out_dir, "output directory");
    };

    CLI::App* run = app.add_subcommand("run", "run one scenario");
    add_common(run);
    CLI::App* analyze = app.add_subcommand("analyze", "emit SEP/boundary/energy report");
    add_common(analyze);
    CLI::App* basin = app.add_subcommand("basin", "map a basin of attraction");
    add_common(basin);
    basin->add_option("--grid", grid_spec, "tLo:tHi:N,vLo:vHi:M (theta relative to SEP)");
    CLI::App* sweep = app.add_subcommand("sweep", "sweep one parameter");
    add_common(sweep);
    sweep->add_option("--param", sweep_param, "parameter path, e.g. gfmc.i_max")->required();
    sweep->add_option("--range", sweep_range, "lo:hi:n")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitConfig;
    }

    try {
        if (run->parsed()) return cmd_run(opts);
        if (analyze->parsed()) return cmd_analyze(opts);
        if (basin->parsed()) return cmd_basin(opts, grid_spec);
        if (sweep->parsed()) return cmd_sweep(opts, sweep_param, sweep_range);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::domain_error& e) {
        std::cerr << "infeasible scenario: " << e.what() << "\n";
        return kExitInfeasible;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return kExitInternal;
    }
    return kExitInternal;
}
