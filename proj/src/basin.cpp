#include "colosim/basin.hpp"

#include <atomic>
#include <limits>
#include <cmath>
#include <future>
#include <stdexcept>
#include <thread>

#include "colosim/switching.hpp"

namespace colosim {

namespace {

constexpr double kWellTheta = 1.0;      // rad, well membership at the horizon
constexpr double kWellVarpiPu = 0.05;

struct CellOutcome {
    CellClass cls;
    double final_theta;
    GfmcMode final_mode;
    bool borderline;
};

CellOutcome classify_cell(const ScenarioConfig& cfg, const SimState& init) {
    HybridSimulator sim(cfg);
    const ScenarioResult r = sim.run_from(init);

    CellOutcome out{CellClass::UNSTABLE, r.summary.final_theta[0], r.summary.final_mode,
                    false};
    if (r.summary.diverged) return out;

    bool well = true;
    for (std::size_t i = 0; i < r.summary.final_theta.size(); ++i) {
        const double ths = r.summary.final_theta_sep[i];
        if (!std::isfinite(ths)) {
            well = false;
            break;
        }
        const double dth = r.summary.final_theta[i] - ths;
        const double wrapped = dth - 2.0 * kPi * std::round(dth / (2.0 * kPi));
        if (std::abs(wrapped) > kWellTheta ||
            std::abs(r.summary.final_varpi[i]) > kWellVarpiPu) {
            well = false;
            break;
        }
    }
    if (well) {
        out.cls = r.summary.final_mode == GfmcMode::CVC ? CellClass::STABLE_CVC
                                                        : CellClass::STABLE_CLC;
    } else {
        out.borderline = true;  // bounded but not settled: counted separately
    }
    return out;
}

}  // namespace

const char* to_string(CellClass c) {
    switch (c) {
        case CellClass::STABLE_CVC: return "STABLE_CVC";
        case CellClass::STABLE_CLC: return "STABLE_CLC";
        case CellClass::UNSTABLE: return "UNSTABLE";
    }
    return "?";
}

BasinMap map_basin(const ScenarioConfig& cfg, const GridSpec& grid, int threads) {
    if (grid.theta_steps < 1 || grid.varpi_steps < 1)
        throw std::invalid_argument("basin grid needs at least one cell per axis");

    ScenarioConfig run_cfg = cfg;
    run_cfg.sim.log_energy = false;
    run_cfg.fault.t_start = run_cfg.sim.t_end + 1.0;

    const Equilibrium eq = solve_equilibrium(cfg);
    const NetworkParams& net = cfg.net;
    const DerivedParams derived = derive_params(net);

    BasinMap map;
    map.grid = grid;
    map.delta_eq = eq.delta;
    map.theta_center = eq.theta[0];

    const double th_lo = grid.centered ? map.theta_center + grid.theta_lo : grid.theta_lo;
    const double th_hi = grid.centered ? map.theta_center + grid.theta_hi : grid.theta_hi;

    const int total = grid.theta_steps * grid.varpi_steps;
    map.cells.resize(total);

    const auto cell_at = [&](int idx) {
        const int iv = idx / grid.theta_steps;
        const int it = idx % grid.theta_steps;
        const double th = grid.theta_steps == 1
                              ? th_lo
                              : th_lo + (th_hi - th_lo) * it / (grid.theta_steps - 1);
        const double wv_pu =
            grid.varpi_steps == 1
                ? grid.varpi_lo_pu
                : grid.varpi_lo_pu +
                      (grid.varpi_hi_pu - grid.varpi_lo_pu) * iv / (grid.varpi_steps - 1);

        SimState init;
        init.t = 0.0;
        init.gfmc.delta = eq.delta;
        init.gfmc.mode = GfmcMode::CVC;
        init.gflcs.resize(cfg.gflcs.size());
        for (std::size_t i = 0; i < init.gflcs.size(); ++i) {
            init.gflcs[i].theta = i == 0 ? th : eq.theta[i];
            init.gflcs[i].varpi = i == 0 ? wv_pu : 0.0;
            init.gflcs[i].u_meas = eq.u_pcc_mag;
            init.gflcs[i].theta_snapshot = eq.theta[i];
        }

        BasinCell cell;
        cell.theta0 = th;
        cell.varpi0_pu = wv_pu;

        // Active mode of the initial point decides which energy well applies.
        std::vector<Phasor> cur(cfg.gflcs.size());
        PllContext ctx;
        ctx.mode = GfmcMode::CVC;
        ctx.delta = eq.delta;
        ctx.u_g_eff = net.u_g;
        ctx.refs.resize(cfg.gflcs.size());
        ctx.theta.resize(cfg.gflcs.size());
        ctx.x_c2.resize(cfg.gflcs.size());
        for (std::size_t i = 0; i < cfg.gflcs.size(); ++i) {
            ctx.refs[i] = GflcRefs{cfg.gflcs[i].i_d_ref, cfg.gflcs[i].i_q_ref, false, 0.0};
            ctx.theta[i] = init.gflcs[i].theta;
            ctx.x_c2[i] = cfg.gflcs[i].x_c2;
            cur[i] = gflc_current_from_refs(ctx.refs[i], ctx.theta[i]);
        }
        const double g = saturation_guard(eq.delta, cur, net, derived, cfg.gfmc.i_max);
        cell.start_mode = g > 0.0 ? GfmcMode::CLC : GfmcMode::CVC;
        ctx.mode = cell.start_mode;
        if (cell.start_mode == GfmcMode::CLC) {
            ctx.gfmc_current = cfg.gfmc.vfdc_enabled
                                   ? Phasor{cfg.gfmc.i_max, cfg.gfmc.epsilon}
                                   : Phasor{cfg.gfmc.i_max, eq.delta + cfg.gfmc.eta_1};
            ctx.gfmc_pinned = cfg.gfmc.vfdc_enabled;
        }
        try {
            cell.energy = lyapunov_energy(th, wv_pu, cfg.gflcs[0], ctx, 0, net, derived);
        } catch (const std::domain_error&) {
            cell.energy = std::numeric_limits<double>::quiet_NaN();
        }

        const CellOutcome oc = classify_cell(run_cfg, init);
        cell.cls = oc.cls;
        cell.final_theta = oc.final_theta;
        cell.final_mode = oc.final_mode;
        cell.borderline = oc.borderline;
        return cell;
    };

    int n_threads = threads > 0 ? threads
                                : static_cast<int>(std::thread::hardware_concurrency());
    if (n_threads < 1) n_threads = 1;

    std::vector<std::future<void>> jobs;
    std::atomic<int> next{0};
    for (int w = 0; w < n_threads; ++w) {
        jobs.push_back(std::async(std::launch::async, [&]() {
            for (int idx = next.fetch_add(1); idx < total; idx = next.fetch_add(1))
                map.cells[idx] = cell_at(idx);
        }));
    }
    for (auto& j : jobs) j.get();

    for (const auto& c : map.cells)
        if (c.borderline) ++map.borderline_count;
    return map;
}

CctResult critical_clearing_sweep(const ScenarioConfig& cfg, double t_c_lo, double t_c_hi,
                                  double tol, int coarse) {
    if (t_c_hi <= t_c_lo || coarse < 2)
        throw std::invalid_argument("invalid clearing-time sweep range");

    const auto probe = [&](double t_c) {
        ScenarioConfig c = cfg;
        c.fault.duration = t_c;
        c.sim.log_energy = false;
        if (t_c <= 0.0) return true;  // no perturbation
        HybridSimulator sim(c);
        return !sim.run().summary.diverged;
    };

    CctResult res;
    double last_stable = -1.0, first_unstable = -1.0;
    for (int k = 0; k < coarse; ++k) {
        const double t_c = t_c_lo + (t_c_hi - t_c_lo) * k / (coarse - 1);
        const bool ok = probe(t_c);
        res.table.push_back({t_c, ok});
        if (ok && first_unstable < 0.0) last_stable = t_c;
        if (!ok && first_unstable < 0.0) first_unstable = t_c;
        if (!ok && first_unstable >= 0.0 && t_c > first_unstable) continue;
        if (ok && first_unstable >= 0.0) res.monotone = false;
    }
    if (last_stable < 0.0 || first_unstable < 0.0) {
        res.t_critical = last_stable >= 0.0 ? t_c_hi : t_c_lo;
        return res;
    }
    res.bracketed = true;
    double lo = last_stable, hi = first_unstable;
    while (hi - lo > tol) {
        const double mid = 0.5 * (lo + hi);
        (probe(mid) ? lo : hi) = mid;
    }
    res.t_critical = lo;
    return res;
}

}  // namespace colosim
