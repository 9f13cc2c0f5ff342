#include "colosim/simulator.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <complex>
#include <limits>
#include <stdexcept>

#include "colosim/switching.hpp"

namespace colosim {

const char* to_string(EventKind k) {
    switch (k) {
        case EventKind::FAULT_ON: return "FAULT_ON";
        case EventKind::FAULT_CLEAR: return "FAULT_CLEAR";
        case EventKind::CVC_TO_CLC: return "CVC_TO_CLC";
        case EventKind::CLC_TO_CVC: return "CLC_TO_CVC";
        case EventKind::VFDC_ON: return "VFDC_ON";
        case EventKind::VFDC_OFF: return "VFDC_OFF";
    }
    return "?";
}

const char* to_string(PllVerdict v) {
    return v == PllVerdict::STABLE ? "STABLE" : "UNSTABLE";
}

const char* to_string(GfmcMode m) { return m == GfmcMode::CVC ? "CVC" : "CLC"; }

namespace {

constexpr double kLvrtThreshold = 0.9;
constexpr double kStableVarpiPu = 1e-3;
constexpr double kStableTheta = 1e-2;
constexpr double kStableWindow = 0.5;
constexpr double kDivergenceTheta = 3.0 * kPi;

struct Engine {
    const ScenarioConfig& cfg;
    NetworkParams net;
    DerivedParams derived;
    double w_b;
    std::size_t n;

    // Discrete regime, frozen between refresh points.
    GfmcMode mode = GfmcMode::CVC;
    double u_g_eff;
    bool fault_active = false;
    bool fault_done = false;
    std::vector<GflcRefs> refs;
    std::vector<CtrlMode> ctrl;
    std::vector<double> theta_snapshot;
    std::vector<double> vfdc_off_at;  // <0: no timer pending
    double zeno_until = -1.0;
    double release_armed_at = -1.0;  // crossing instant awaiting the dwell

    // Flat state layout: [delta | theta_0.. | varpi_0.. | u_meas_0..]
    std::vector<double> y, k1, k2, k3, k4, ystage, ytrial, yprobe;
    double t = 0.0;

    // Hot-path scratch kept allocation-free.
    mutable PllContext ctx;
    mutable std::vector<Phasor> cur;

    Trace trace;
    EventLog events;
    Summary summary;
    const HybridSimulator::Observer* observer = nullptr;

    std::vector<double> window_start;
    std::vector<double> theta_sep_initial;
    bool diverged = false;

    explicit Engine(const ScenarioConfig& c)
        : cfg(c), net(c.net), derived(derive_params(c.net)), w_b(c.net.omega_base()),
          n(c.gflcs.size()) {
        u_g_eff = net.u_g;
        refs.resize(n);
        ctrl.assign(n, CtrlMode::NORMAL);
        theta_snapshot.assign(n, 0.0);
        vfdc_off_at.assign(n, -1.0);
        const std::size_t len = 1 + 3 * n;
        for (auto* v : {&y, &k1, &k2, &k3, &k4, &ystage, &ytrial, &yprobe})
            v->assign(len, 0.0);
        window_start.assign(n, -1.0);
        theta_sep_initial.assign(n, 0.0);
        cur.resize(n);
        ctx.refs.resize(n);
        ctx.theta.resize(n);
        ctx.x_c2.resize(n);
        for (std::size_t i = 0; i < n; ++i) ctx.x_c2[i] = cfg.gflcs[i].x_c2;
    }

    double theta(std::size_t i) const { return y[1 + i]; }
    double varpi(std::size_t i) const { return y[1 + n + i]; }
    double u_meas(std::size_t i) const { return y[1 + 2 * n + i]; }

    Phasor gfmc_current_at(double dlt) const {
        if (cfg.gfmc.vfdc_enabled) return {cfg.gfmc.i_max, cfg.gfmc.epsilon};
        return {cfg.gfmc.i_max, dlt + cfg.gfmc.eta_1};
    }

    // Synchronizes the scratch context with the frozen regime; called after
    // every refs/mode/u_g change.
    void sync_ctx() {
        ctx.mode = mode;
        ctx.u_g_eff = u_g_eff;
        ctx.refs = refs;
    }

    void point_ctx(const std::vector<double>& s) const {
        ctx.delta = s[0];
        for (std::size_t i = 0; i < n; ++i) ctx.theta[i] = s[1 + i];
        if (mode == GfmcMode::CLC) {
            ctx.gfmc_current = gfmc_current_at(s[0]);
            ctx.gfmc_pinned = cfg.gfmc.vfdc_enabled;
        } else {
            ctx.gfmc_pinned = false;
        }
    }

    void currents_at(const std::vector<double>& s) const {
        for (std::size_t i = 0; i < n; ++i)
            cur[i] = gflc_current_from_refs(refs[i], s[1 + i]);
    }

    double guard_at(const std::vector<double>& s) const {
        currents_at(s);
        return saturation_guard(s[0], cur, net, derived, cfg.gfmc.i_max, u_g_eff);
    }

    // Active power and PCC voltage magnitude without the full bus solution.
    std::pair<double, double> power_and_upcc(const std::vector<double>& s) const {
        std::complex<double> i_sum{0.0, 0.0};
        for (std::size_t i = 0; i < n; ++i) i_sum += cur[i].to_complex();
        if (mode == GfmcMode::CVC) {
            const std::complex<double> u_c1 = Phasor{net.u_c1_set, s[0]}.to_complex();
            const std::complex<double> u_pcc =
                derived.alpha * u_c1 + (1.0 - derived.alpha) * u_g_eff +
                std::complex<double>{0.0, (1.0 - derived.alpha) * net.x_g} * i_sum;
            const std::complex<double> i_c1 =
                (u_c1 - u_pcc) / std::complex<double>{0.0, net.x_c1};
            const double p = (u_c1 * std::conj(i_c1)).real();
            return {p, std::abs(u_pcc)};
        }
        const Phasor i1 = gfmc_current_at(s[0]);
        const std::complex<double> u_pcc =
            std::complex<double>{u_g_eff, 0.0} +
            std::complex<double>{0.0, net.x_g} * (i_sum + i1.to_complex());
        const double p = (u_pcc * std::conj(i1.to_complex())).real();
        return {p, std::abs(u_pcc)};
    }

    void deriv(const std::vector<double>& s, std::vector<double>& out) const {
        currents_at(s);
        point_ctx(s);
        const auto [p_c1, u_pcc] = power_and_upcc(s);
        out[0] = apl_rhs(cfg.gfmc, p_c1, w_b);
        for (std::size_t i = 0; i < n; ++i) {
            const PllDerivs d =
                cfg.sim.model == Model::REDUCED
                    ? pll_rhs_reduced(cfg.gflcs[i], s[1 + i], s[1 + n + i], i, ctx, net,
                                      derived)
                    : pll_rhs_reference(cfg.gflcs[i], s[1 + i], s[1 + n + i], i, ctx, net,
                                        derived);
            out[1 + i] = d.dtheta;
            out[1 + n + i] = d.dvarpi;
            out[1 + 2 * n + i] = (u_pcc - s[1 + 2 * n + i]) / cfg.gflcs[i].tau_meas;
        }
    }

    void rk4(const std::vector<double>& from, double h, std::vector<double>& to) {
        const std::size_t len = from.size();
        deriv(from, k1);
        for (std::size_t j = 0; j < len; ++j) ystage[j] = from[j] + 0.5 * h * k1[j];
        deriv(ystage, k2);
        for (std::size_t j = 0; j < len; ++j) ystage[j] = from[j] + 0.5 * h * k2[j];
        deriv(ystage, k3);
        for (std::size_t j = 0; j < len; ++j) ystage[j] = from[j] + h * k3[j];
        deriv(ystage, k4);
        for (std::size_t j = 0; j < len; ++j)
            to[j] = from[j] + h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
    }

    SimState snapshot() const {
        SimState s;
        s.t = t;
        s.gfmc.delta = y[0];
        s.gfmc.mode = mode;
        s.gflcs.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            s.gflcs[i].theta = theta(i);
            s.gflcs[i].varpi = varpi(i);
            s.gflcs[i].ctrl_mode = ctrl[i];
            s.gflcs[i].theta_snapshot = theta_snapshot[i];
            s.gflcs[i].u_meas = u_meas(i);
        }
        return s;
    }

    void log_event(EventKind kind) {
        Event e;
        e.t = t;
        e.kind = kind;
        e.state = snapshot();
        e.refs = refs;
        e.u_g_eff = u_g_eff;
        events.events.push_back(std::move(e));
    }

    void refresh_refs() {
        for (std::size_t i = 0; i < n; ++i) {
            GflcState gs;
            gs.theta = theta(i);
            gs.ctrl_mode = ctrl[i];
            gs.theta_snapshot = theta_snapshot[i];
            refs[i] = gflc_refs(cfg.gflcs[i], gs, u_meas(i), false);
        }
        sync_ctx();
    }

    void refresh_ctrl_modes() {
        for (std::size_t i = 0; i < n; ++i) {
            const double um = u_meas(i);
            if (ctrl[i] == CtrlMode::NORMAL && um < kLvrtThreshold) {
                ctrl[i] = CtrlMode::LVRT;
                theta_snapshot[i] = theta(i);
                if (cfg.gflcs[i].vfdc_enabled) log_event(EventKind::VFDC_ON);
            } else if (ctrl[i] == CtrlMode::LVRT && um >= kLvrtThreshold) {
                if (cfg.gflcs[i].vfdc_enabled) {
                    ctrl[i] = CtrlMode::VFDC_HOLD;
                    vfdc_off_at[i] = t + cfg.gflcs[i].vfdc_hold;
                } else {
                    ctrl[i] = CtrlMode::NORMAL;
                }
            } else if (ctrl[i] == CtrlMode::VFDC_HOLD && um < kLvrtThreshold) {
                ctrl[i] = CtrlMode::LVRT;  // pin and snapshot carry over
                vfdc_off_at[i] = -1.0;
            }
        }
    }

    void switch_mode(GfmcMode target) {
        GfmcState tmp{y[0], mode};
        apply_transition(tmp, target);
        mode = tmp.mode;
        sync_ctx();
        zeno_until = t + cfg.sim.min_event_separation;
        release_armed_at = -1.0;
        log_event(target == GfmcMode::CLC ? EventKind::CVC_TO_CLC : EventKind::CLC_TO_CVC);
    }

    void level_mode_check() {
        if (t < zeno_until) return;
        const double g = guard_at(y);
        if (mode == GfmcMode::CVC && g > 0.0) {
            switch_mode(GfmcMode::CLC);
        } else if (mode == GfmcMode::CLC && cfg.sat_policy == SatPolicy::LEVEL && g < 0.0) {
            switch_mode(GfmcMode::CVC);
        }
    }

    double next_landmark(double t_end) const {
        double lm = t_end;
        if (!fault_done) {
            if (!fault_active && cfg.fault.t_start > t) lm = std::min(lm, cfg.fault.t_start);
            if (fault_active) lm = std::min(lm, cfg.fault.t_start + cfg.fault.duration);
        }
        for (std::size_t i = 0; i < n; ++i)
            if (vfdc_off_at[i] > t) lm = std::min(lm, vfdc_off_at[i]);
        if (release_armed_at >= 0.0 && release_armed_at + cfg.release_dwell > t)
            lm = std::min(lm, release_armed_at + cfg.release_dwell);
        return lm;
    }

    PllContext energy_ctx(GfmcMode m, double dlt) const {
        PllContext c;
        c.mode = m;
        c.delta = dlt;
        c.u_g_eff = net.u_g;
        if (m == GfmcMode::CLC) {
            c.gfmc_current = gfmc_current_at(dlt);
            c.gfmc_pinned = cfg.gfmc.vfdc_enabled;
        }
        c.refs.resize(n);
        c.theta.resize(n);
        c.x_c2.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            c.refs[i] = GflcRefs{cfg.gflcs[i].i_d_ref, cfg.gflcs[i].i_q_ref, false, 0.0};
            c.theta[i] = theta(i);
            c.x_c2[i] = cfg.gflcs[i].x_c2;
        }
        return c;
    }

    void compute_clearance_energies() {
        summary.clearance_mode = mode;
        summary.clearance_energy.assign(n, std::numeric_limits<double>::quiet_NaN());
        summary.clearance_energy_cvc.assign(n, std::numeric_limits<double>::quiet_NaN());
        const PllContext post = energy_ctx(mode, y[0]);
        const PllContext post_cvc = energy_ctx(GfmcMode::CVC, y[0]);
        for (std::size_t i = 0; i < n; ++i) {
            try {
                summary.clearance_energy[i] =
                    lyapunov_energy(theta(i), varpi(i), cfg.gflcs[i], post, i, net, derived);
            } catch (const std::domain_error&) {
            }
            try {
                summary.clearance_energy_cvc[i] = lyapunov_energy(
                    theta(i), varpi(i), cfg.gflcs[i], post_cvc, i, net, derived);
            } catch (const std::domain_error&) {
            }
        }
    }

    void track_stability(double t_now) {
        point_ctx(y);
        for (std::size_t i = 0; i < n; ++i) {
            bool ok = false;
            try {
                const double ths = sep_exact(ctx, i, net, derived);
                const double dth = theta(i) - ths;
                const double wrapped = dth - 2.0 * kPi * std::round(dth / (2.0 * kPi));
                ok = std::abs(varpi(i)) < kStableVarpiPu &&
                     std::abs(wrapped) < kStableTheta;
            } catch (const std::domain_error&) {
            }
            if (ok) {
                if (window_start[i] < 0.0) window_start[i] = t_now;
            } else {
                window_start[i] = -1.0;
            }
        }
    }

    void emit_trace_row() {
        TraceRow row;
        row.t = t;
        row.s = mode == GfmcMode::CVC ? 1 : 0;
        row.delta = y[0];
        currents_at(y);
        const auto [p_c1, u_pcc] = power_and_upcc(y);
        row.p_c1 = p_c1;
        row.u_pcc_mag = u_pcc;
        if (mode == GfmcMode::CVC) {
            const BusSolution sol = solve_cvc(y[0], cur, net, derived, {}, u_g_eff);
            row.i_c1_mag = sol.i_c1.mag;
        } else {
            row.i_c1_mag = cfg.gfmc.i_max;
        }
        row.theta.resize(n);
        row.varpi_pu.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            row.theta[i] = theta(i);
            row.varpi_pu[i] = varpi(i);
        }
        if (cfg.sim.log_energy) {
            row.energy.assign(n, std::numeric_limits<double>::quiet_NaN());
            point_ctx(y);
            for (std::size_t i = 0; i < n; ++i) {
                try {
                    const double ths = sep_exact(ctx, i, net, derived);
                    row.energy[i] = lyapunov_energy_fast(theta(i), varpi(i), cfg.gflcs[i],
                                                         ctx, i, net, derived, ths);
                } catch (const std::domain_error&) {
                }
            }
        }
        trace.rows.push_back(std::move(row));
    }

    bool check_divergence() {
        for (std::size_t i = 0; i < n; ++i) {
            const double th = theta(i);
            if (!std::isfinite(th) || !std::isfinite(varpi(i)) ||
                std::abs(th - theta_sep_initial[i]) > kDivergenceTheta) {
                diverged = true;
                summary.diverged = true;
                summary.t_diverged = t;
                return true;
            }
        }
        return false;
    }
};

}  // namespace

Equilibrium solve_equilibrium(const ScenarioConfig& cfg) {
    const NetworkParams& net = cfg.net;
    const DerivedParams derived = derive_params(net);
    const std::size_t n = cfg.gflcs.size();

    PllContext ctx;
    ctx.mode = GfmcMode::CVC;
    ctx.u_g_eff = net.u_g;
    ctx.refs.resize(n);
    ctx.theta.assign(n, 0.0);
    ctx.x_c2.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        ctx.refs[i] = GflcRefs{cfg.gflcs[i].i_d_ref, cfg.gflcs[i].i_q_ref, false, 0.0};
        ctx.x_c2[i] = cfg.gflcs[i].x_c2;
    }

    const auto solve_thetas = [&](double dlt) {
        ctx.delta = dlt;
        for (int pass = 0; pass < 80; ++pass) {
            double shift = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                const double th = sep_cvc(ctx, i, net, derived);
                shift = std::max(shift, std::abs(th - ctx.theta[i]));
                ctx.theta[i] = th;
            }
            if (shift < 1e-14) break;
        }
    };

    std::vector<Phasor> cur(n);
    const auto currents = [&]() {
        for (std::size_t i = 0; i < n; ++i)
            cur[i] = gflc_current_from_refs(ctx.refs[i], ctx.theta[i]);
    };

    const auto power_residual = [&](double dlt) {
        solve_thetas(dlt);
        currents();
        return gfmc_power(GfmcMode::CVC, dlt, {}, cur, net, derived) - cfg.gfmc.p_ref;
    };

    double lo = -0.5 * kPi + 1e-3, hi = 0.5 * kPi - 1e-3;
    if (power_residual(lo) > 0.0 || power_residual(hi) < 0.0)
        throw std::domain_error("infeasible scenario: droop power balance has no CVC solution");
    for (int it = 0; it < 200 && hi - lo > 1e-14; ++it) {
        const double mid = 0.5 * (lo + hi);
        (power_residual(mid) < 0.0 ? lo : hi) = mid;
    }
    const double dlt = 0.5 * (lo + hi);
    solve_thetas(dlt);
    currents();

    const double p_res =
        std::abs(gfmc_power(GfmcMode::CVC, dlt, {}, cur, net, derived) - cfg.gfmc.p_ref);
    double u_res = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const UqTerms tq = uq_terms(ctx, i, ctx.theta[i], net, derived);
        u_res = std::max(u_res, std::abs(uq_value(tq, 1.0)));
    }
    if (p_res > 1e-9 || u_res > 1e-9)
        throw std::domain_error("equilibrium solve did not reach the required residual");

    if (saturation_guard(dlt, cur, net, derived, cfg.gfmc.i_max) >= 0.0)
        throw std::domain_error(
            "infeasible scenario: pre-fault operating point exceeds the GFMC current limit");

    Equilibrium eq;
    eq.delta = dlt;
    eq.theta = ctx.theta;
    eq.u_pcc_mag = solve_cvc(dlt, cur, net, derived).u_pcc.mag;
    return eq;
}

HybridSimulator::HybridSimulator(const ScenarioConfig& cfg) : cfg_(cfg) {
    if (cfg_.gflcs.empty()) throw std::invalid_argument("at least one GFLC is required");
    if (cfg_.sim.dt <= 0.0) throw std::invalid_argument("dt must be positive");
    if (cfg_.fault.rho < 0.0 || cfg_.fault.rho > 1.0)
        throw std::invalid_argument("rho must lie in [0, 1]");
    if (cfg_.fault.t_start < cfg_.sim.t_end &&
        cfg_.fault.t_start + cfg_.fault.duration >= cfg_.sim.t_end)
        throw std::invalid_argument("fault must clear before t_end");
}

ScenarioResult HybridSimulator::execute(SimState initial, bool with_fault) {
    const auto wall0 = std::chrono::steady_clock::now();
    Engine eng(cfg_);
    if (observer_) eng.observer = &observer_;

    const std::size_t n = eng.n;
    eng.t = initial.t;
    eng.y[0] = initial.gfmc.delta;
    eng.mode = initial.gfmc.mode;
    for (std::size_t i = 0; i < n; ++i) {
        eng.y[1 + i] = initial.gflcs[i].theta;
        eng.y[1 + n + i] = initial.gflcs[i].varpi;
        eng.y[1 + 2 * n + i] = initial.gflcs[i].u_meas;
        eng.ctrl[i] = initial.gflcs[i].ctrl_mode;
        eng.theta_snapshot[i] = initial.gflcs[i].theta_snapshot;
    }
    eng.fault_done = !with_fault;

    eng.refresh_refs();
    eng.point_ctx(eng.y);
    for (std::size_t i = 0; i < n; ++i) {
        try {
            eng.theta_sep_initial[i] = sep_exact(eng.ctx, i, eng.net, eng.derived);
        } catch (const std::domain_error&) {
            eng.theta_sep_initial[i] = eng.y[1 + i];
        }
    }

    const double t_end = cfg_.sim.t_end;
    const double dt = cfg_.sim.dt;
    long step_count = 0;

    eng.refresh_ctrl_modes();
    eng.refresh_refs();
    eng.level_mode_check();
    eng.emit_trace_row();

    while (eng.t < t_end - 1e-15 && !eng.diverged) {
        eng.refresh_ctrl_modes();
        eng.refresh_refs();
        eng.level_mode_check();

        const double lm = eng.next_landmark(t_end);
        double h = std::min(dt, lm - eng.t);
        if (h <= 1e-15) h = dt;

        const double g0 = eng.guard_at(eng.y);
        eng.rk4(eng.y, h, eng.ytrial);
        const double g1 = eng.guard_at(eng.ytrial);

        const bool dwell_rel = cfg_.sat_policy == SatPolicy::CROSSING &&
                               cfg_.release_dwell > 0.0;
        const bool want_sat = eng.mode == GfmcMode::CVC && g0 <= 0.0 && g1 > 0.0;
        const bool want_rel =
            eng.mode == GfmcMode::CLC && g0 >= 0.0 && g1 < 0.0 && !dwell_rel;
        const bool want_arm =
            eng.mode == GfmcMode::CLC && g0 >= 0.0 && g1 < 0.0 && dwell_rel;
        bool handled_event = false;

        if ((want_sat || want_rel || want_arm) && eng.t >= eng.zeno_until) {
            double a = 0.0, b = h;
            for (int it = 0; it < 64 && b - a > cfg_.sim.event_tol; ++it) {
                const double m = 0.5 * (a + b);
                eng.rk4(eng.y, m, eng.yprobe);
                const double gm = eng.guard_at(eng.yprobe);
                if ((gm > 0.0) == (g0 > 0.0))
                    a = m;
                else
                    b = m;
            }
            if (want_arm) {
                // Start the under-limit dwell; the release fires later and
                // the step itself is accepted by the common path below.
                eng.release_armed_at = eng.t + b;
            } else {
                eng.rk4(eng.y, b, eng.yprobe);
                std::swap(eng.y, eng.yprobe);
                eng.t += b;
                eng.switch_mode(eng.mode == GfmcMode::CVC ? GfmcMode::CLC : GfmcMode::CVC);
                handled_event = true;
            }
        }

        if (!handled_event) {
            std::swap(eng.y, eng.ytrial);
            eng.t += h;

            if (!eng.fault_done && !eng.fault_active &&
                std::abs(eng.t - cfg_.fault.t_start) < 1e-12) {
                eng.t = cfg_.fault.t_start;
                eng.fault_active = true;
                eng.u_g_eff = cfg_.fault.rho * eng.net.u_g;
                eng.refresh_refs();
                eng.log_event(EventKind::FAULT_ON);
            } else if (eng.fault_active &&
                       std::abs(eng.t - (cfg_.fault.t_start + cfg_.fault.duration)) < 1e-12) {
                eng.t = cfg_.fault.t_start + cfg_.fault.duration;
                eng.fault_active = false;
                eng.fault_done = true;
                eng.u_g_eff = eng.net.u_g;
                eng.refresh_refs();
                eng.log_event(EventKind::FAULT_CLEAR);
                eng.compute_clearance_energies();
            }
            if (eng.release_armed_at >= 0.0 && eng.mode == GfmcMode::CLC) {
                if (eng.guard_at(eng.y) >= 0.0) {
                    eng.release_armed_at = -1.0;  // demand back above the limit
                } else if (eng.t + 1e-12 >= eng.release_armed_at + cfg_.release_dwell) {
                    eng.switch_mode(GfmcMode::CVC);
                    handled_event = true;
                }
            }
            for (std::size_t i = 0; i < n; ++i) {
                if (eng.vfdc_off_at[i] > 0.0 &&
                    std::abs(eng.t - eng.vfdc_off_at[i]) < 1e-12) {
                    eng.vfdc_off_at[i] = -1.0;
                    eng.ctrl[i] = CtrlMode::NORMAL;
                    eng.refresh_refs();
                    eng.log_event(EventKind::VFDC_OFF);
                }
            }
        }

        ++step_count;
        if (eng.check_divergence()) break;
        if (step_count % cfg_.sim.trace_decimation == 0 || handled_event) {
            eng.emit_trace_row();
            eng.track_stability(eng.t);
            if (eng.observer) {
                eng.point_ctx(eng.y);
                (*eng.observer)(eng.snapshot(), eng.ctx);
            }
        }
    }
    if (eng.trace.rows.empty() || eng.trace.rows.back().t < eng.t) eng.emit_trace_row();

    Summary& s = eng.summary;
    s.name = cfg_.name;
    s.final_mode = eng.mode;
    s.final_delta = eng.y[0];
    s.final_p_c1 = eng.trace.rows.back().p_c1;
    s.final_theta.resize(n);
    s.final_varpi.resize(n);
    s.final_u_meas.resize(n);
    s.final_theta_sep.assign(n, std::numeric_limits<double>::quiet_NaN());
    s.pll.assign(n, PllVerdict::UNSTABLE);
    eng.point_ctx(eng.y);
    for (std::size_t i = 0; i < n; ++i) {
        s.final_theta[i] = eng.theta(i);
        s.final_varpi[i] = eng.varpi(i);
        s.final_u_meas[i] = eng.u_meas(i);
        try {
            s.final_theta_sep[i] = sep_exact(eng.ctx, i, eng.net, eng.derived);
        } catch (const std::domain_error&) {
        }
        const bool window_ok =
            eng.window_start[i] >= 0.0 && eng.t - eng.window_start[i] >= kStableWindow;
        if (!eng.diverged && window_ok) s.pll[i] = PllVerdict::STABLE;
    }
    s.pll_all_stable = std::all_of(s.pll.begin(), s.pll.end(),
                                   [](PllVerdict v) { return v == PllVerdict::STABLE; });
    s.audits.resize(n);
    for (std::size_t i = 0; i < n; ++i)
        s.audits[i] = switching_energy_audit(eng.events, cfg_, i);
    s.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - wall0).count();

    ScenarioResult res;
    res.trace = std::move(eng.trace);
    res.events = std::move(eng.events);
    res.summary = std::move(s);
    return res;
}

ScenarioResult HybridSimulator::run() {
    const Equilibrium eq = solve_equilibrium(cfg_);
    SimState init;
    init.t = 0.0;
    init.gfmc.delta = eq.delta;
    init.gfmc.mode = GfmcMode::CVC;
    init.gflcs.resize(cfg_.gflcs.size());
    for (std::size_t i = 0; i < init.gflcs.size(); ++i) {
        init.gflcs[i].theta = eq.theta[i];
        init.gflcs[i].varpi = 0.0;
        init.gflcs[i].u_meas = eq.u_pcc_mag;
        init.gflcs[i].theta_snapshot = eq.theta[i];
    }
    return execute(init, true);
}

ScenarioResult HybridSimulator::run_from(const SimState& initial) {
    return execute(initial, false);
}

SimState step(const SimState& state, const ScenarioConfig& cfg) {
    ScenarioConfig one = cfg;
    one.sim.t_end = state.t + cfg.sim.dt;
    one.sim.trace_decimation = 1;
    one.sim.log_energy = false;
    one.fault.t_start = one.sim.t_end + 1.0;
    one.fault.duration = 0.0;
    HybridSimulator sim(one);
    const ScenarioResult r = sim.run_from(state);
    SimState out = state;
    out.t = r.trace.rows.back().t;
    out.gfmc.delta = r.summary.final_delta;
    out.gfmc.mode = r.summary.final_mode;
    for (std::size_t i = 0; i < out.gflcs.size(); ++i) {
        out.gflcs[i].theta = r.summary.final_theta[i];
        out.gflcs[i].varpi = r.summary.final_varpi[i];
        out.gflcs[i].u_meas = r.summary.final_u_meas[i];
    }
    return out;
}

EnergyAudit switching_energy_audit(const EventLog& events, const ScenarioConfig& cfg,
                                   std::size_t gflc_index) {
    EnergyAudit audit;
    const NetworkParams& net = cfg.net;
    const DerivedParams derived = derive_params(net);
    const std::size_t n = cfg.gflcs.size();
    const double t_clear = cfg.fault.t_start + cfg.fault.duration;

    const auto make_ctx = [&](GfmcMode mode, double delta, const SimState& st) {
        PllContext ctx;
        ctx.mode = mode;
        ctx.delta = delta;
        ctx.u_g_eff = net.u_g;
        if (mode == GfmcMode::CLC) {
            ctx.gfmc_current = cfg.gfmc.vfdc_enabled
                                   ? Phasor{cfg.gfmc.i_max, cfg.gfmc.epsilon}
                                   : Phasor{cfg.gfmc.i_max, delta + cfg.gfmc.eta_1};
            ctx.gfmc_pinned = cfg.gfmc.vfdc_enabled;
        }
        ctx.refs.resize(n);
        ctx.theta.resize(n);
        ctx.x_c2.resize(n);
        for (std::size_t j = 0; j < n; ++j) {
            ctx.refs[j] = GflcRefs{cfg.gflcs[j].i_d_ref, cfg.gflcs[j].i_q_ref, false, 0.0};
            ctx.theta[j] = st.gflcs[j].theta;
            ctx.x_c2[j] = cfg.gflcs[j].x_c2;
        }
        return ctx;
    };

    const auto& ev = events.events;
    for (std::size_t k = 0; k + 1 < ev.size(); ++k) {
        if (ev[k].kind != EventKind::CLC_TO_CVC || ev[k].t < t_clear) continue;
        std::size_t f = k + 1;
        while (f < ev.size() && ev[f].kind != EventKind::CVC_TO_CLC &&
               ev[f].kind != EventKind::CLC_TO_CVC)
            ++f;
        if (f >= ev.size() || ev[f].kind != EventKind::CVC_TO_CLC) continue;

        const SimState& se = ev[k].state;
        const SimState& sf = ev[f].state;
        const std::size_t i = gflc_index;
        const double delta_cycle = se.gfmc.delta;  // frozen over the cycle

        EnergyCycle c;
        c.t_entry = ev[k].t;
        c.t_exit = ev[f].t;
        c.theta_ka = se.gflcs[i].theta;
        c.theta_kb = sf.gflcs[i].theta;
        try {
            const PllContext clc_ctx = make_ctx(GfmcMode::CLC, delta_cycle, se);
            const PllContext cvc_ctx = make_ctx(GfmcMode::CVC, delta_cycle, se);
            const GflcParams& p = cfg.gflcs[i];
            const double ths_l = sep_clc(clc_ctx, i, net, derived);
            const double ths_v = sep_cvc(cvc_ctx, i, net, derived);
            c.theta_s_v = ths_v;
            c.theta_s_l = ths_l;

            const auto v_l = [&](double th, double w) {
                return lyapunov_energy(th, w, p, clc_ctx, i, net, derived, ths_l);
            };
            const auto v_v = [&](double th, double w) {
                return lyapunov_energy(th, w, p, cvc_ctx, i, net, derived, ths_v);
            };

            c.v_entry = v_l(c.theta_ka, se.gflcs[i].varpi);
            c.v_exit = v_l(c.theta_kb, sf.gflcs[i].varpi);
            c.dv_p_entry = v_v(c.theta_ka, 0.0) - v_l(c.theta_ka, 0.0);
            c.dv_p_exit = v_l(c.theta_kb, 0.0) - v_v(c.theta_kb, 0.0);
            c.dv_damping =
                v_v(c.theta_kb, sf.gflcs[i].varpi) - v_v(c.theta_ka, se.gflcs[i].varpi);
            c.dv_total = c.v_exit - c.v_entry;
        } catch (const std::domain_error&) {
            continue;
        }
        audit.cycles.push_back(c);
        k = f;
    }
    return audit;
}

CrossCheckReport cross_check(const ScenarioConfig& cfg, int n_samples) {
    CrossCheckReport rep;
    ScenarioConfig run_cfg = cfg;
    run_cfg.sim.log_energy = false;
    HybridSimulator sim(run_cfg);
    const NetworkParams& net = cfg.net;
    const DerivedParams derived = derive_params(net);

    sim.set_observer([&](const SimState& st, const PllContext& ctx) {
        if (rep.samples >= n_samples) return;
        ++rep.samples;
        for (std::size_t i = 0; i < cfg.gflcs.size(); ++i) {
            const double th = st.gflcs[i].theta;
            const double w = st.gflcs[i].varpi;
            const PllDerivs a = pll_rhs_reduced(cfg.gflcs[i], th, w, i, ctx, net, derived);
            const PllDerivs b = pll_rhs_reference(cfg.gflcs[i], th, w, i, ctx, net, derived);
            const double scale = std::max({1.0, std::abs(a.dvarpi), std::abs(b.dvarpi)});
            rep.max_rel_deviation =
                std::max(rep.max_rel_deviation, std::abs(a.dvarpi - b.dvarpi) / scale);

            const PllDerivs a0 = pll_rhs_reduced(cfg.gflcs[i], th, 0.0, i, ctx, net, derived);
            const PllDerivs b0 =
                pll_rhs_reference(cfg.gflcs[i], th, 0.0, i, ctx, net, derived);
            const double scale0 = std::max({1.0, std::abs(a0.dvarpi), std::abs(b0.dvarpi)});
            rep.max_rel_deviation_at_zero_varpi =
                std::max(rep.max_rel_deviation_at_zero_varpi,
                         std::abs(a0.dvarpi - b0.dvarpi) / scale0);
        }
    });
    sim.run();
    return rep;
}

}  // namespace colosim
