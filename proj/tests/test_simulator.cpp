#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "colosim/presets.hpp"
#include "colosim/simulator.hpp"
#include "colosim/stability.hpp"
#include "colosim/switching.hpp"

using namespace colosim;
using Catch::Approx;

namespace {

ScenarioConfig quiet_case1() {
    ScenarioConfig cfg = case_preset("CASE1");
    cfg.fault.t_start = cfg.sim.t_end + 1.0;  // no fault
    cfg.sim.log_energy = false;
    return cfg;
}

SimState equilibrium_state(const ScenarioConfig& cfg) {
    const Equilibrium eq = solve_equilibrium(cfg);
    SimState s;
    s.gfmc.delta = eq.delta;
    s.gfmc.mode = GfmcMode::CVC;
    s.gflcs.resize(cfg.gflcs.size());
    for (std::size_t i = 0; i < s.gflcs.size(); ++i) {
        s.gflcs[i].theta = eq.theta[i];
        s.gflcs[i].u_meas = eq.u_pcc_mag;
        s.gflcs[i].theta_snapshot = eq.theta[i];
    }
    return s;
}

}  // namespace

TEST_CASE("equilibrium initialization meets the residual target", "[simulator]") {
    const ScenarioConfig cfg = case_preset("CASE1");
    const Equilibrium eq = solve_equilibrium(cfg);
    const DerivedParams der = derive_params(cfg.net);

    PllContext ctx;
    ctx.mode = GfmcMode::CVC;
    ctx.delta = eq.delta;
    ctx.u_g_eff = cfg.net.u_g;
    ctx.refs = {GflcRefs{cfg.gflcs[0].i_d_ref, 0.0, false, 0.0}};
    ctx.theta = eq.theta;
    ctx.x_c2 = {cfg.gflcs[0].x_c2};
    const UqTerms t = uq_terms(ctx, 0, eq.theta[0], cfg.net, der);
    CHECK(std::abs(uq_value(t, 1.0)) < 1e-9);

    std::vector<Phasor> cur = {gflc_current_from_refs(ctx.refs[0], eq.theta[0])};
    CHECK(gfmc_power(GfmcMode::CVC, eq.delta, {}, cur, cfg.net, der) ==
          Approx(cfg.gfmc.p_ref).margin(1e-9));
    CHECK(saturation_guard(eq.delta, cur, cfg.net, der, cfg.gfmc.i_max) < 0.0);
}

TEST_CASE("infeasible scenarios are rejected", "[simulator]") {
    ScenarioConfig cfg = case_preset("CASE1");
    cfg.gfmc.p_ref = 3.0;  // beyond the transfer capability
    CHECK_THROWS_AS(solve_equilibrium(cfg), std::domain_error);

    cfg = case_preset("CASE1");
    cfg.gfmc.i_max = 0.1;  // below the pre-fault demand
    CHECK_THROWS_AS(solve_equilibrium(cfg), std::domain_error);
}

TEST_CASE("step holds the equilibrium", "[simulator]") {
    const ScenarioConfig cfg = quiet_case1();
    const SimState s0 = equilibrium_state(cfg);
    const SimState s1 = step(s0, cfg);
    CHECK(s1.gfmc.mode == GfmcMode::CVC);
    CHECK(s1.gfmc.delta == Approx(s0.gfmc.delta).margin(1e-10));
    CHECK(s1.gflcs[0].theta == Approx(s0.gflcs[0].theta).margin(1e-10));
    CHECK(std::abs(s1.gflcs[0].varpi) < 1e-10);
}

TEST_CASE("integration order on a smooth interval", "[simulator]") {
    // Perturbed free oscillation, no events; halving the step must shrink
    // the error by the classical fourth-order factor.
    ScenarioConfig cfg = quiet_case1();
    cfg.sim.t_end = 0.15;
    cfg.sim.trace_decimation = 1000000;  // endpoints only

    SimState s0 = equilibrium_state(cfg);
    s0.gflcs[0].theta += 0.05;

    const auto theta_end = [&](double dt) {
        ScenarioConfig c = cfg;
        c.sim.dt = dt;
        HybridSimulator sim(c);
        return sim.run_from(s0).summary.final_theta[0];
    };
    const double h = 2e-3;
    const double y1 = theta_end(h);
    const double y2 = theta_end(h / 2.0);
    const double y4 = theta_end(h / 4.0);
    const double ratio = std::abs(y1 - y2) / std::abs(y2 - y4);
    CHECK(ratio > 12.0);
    CHECK(ratio < 20.0);
}

TEST_CASE("reruns are bit-identical", "[simulator]") {
    ScenarioConfig cfg = case_preset("CASE2");
    cfg.sim.t_end = 3.0;
    cfg.sim.log_energy = false;

    const auto run_hash = [&]() {
        HybridSimulator sim(cfg);
        const ScenarioResult r = sim.run();
        std::uint64_t h = 1469598103934665603ull;
        const auto mix = [&](double v) {
            std::uint64_t bits;
            std::memcpy(&bits, &v, sizeof bits);
            h ^= bits;
            h *= 1099511628211ull;
        };
        for (const auto& row : r.trace.rows) {
            mix(row.t);
            mix(row.delta);
            mix(row.theta[0]);
            mix(row.varpi_pu[0]);
            mix(static_cast<double>(row.s));
        }
        for (const auto& e : r.events.events) mix(e.t);
        return h;
    };
    CHECK(run_hash() == run_hash());
}

TEST_CASE("fault schedule lands exactly and clearance energies are recorded", "[simulator]") {
    ScenarioConfig cfg = case_preset("CASE3");
    cfg.sim.t_end = 2.0;
    cfg.sim.log_energy = false;
    HybridSimulator sim(cfg);
    const ScenarioResult r = sim.run();

    bool on = false, clear = false;
    for (const auto& e : r.events.events) {
        if (e.kind == EventKind::FAULT_ON) {
            CHECK(e.t == Approx(1.0).margin(1e-9));
            on = true;
        }
        if (e.kind == EventKind::FAULT_CLEAR) {
            CHECK(e.t == Approx(1.05).margin(1e-9));
            clear = true;
        }
    }
    CHECK(on);
    CHECK(clear);
    REQUIRE(r.summary.clearance_energy.size() == 1);
    CHECK(std::isfinite(r.summary.clearance_energy[0]));
    CHECK(r.summary.clearance_energy[0] > 0.0);
}

TEST_CASE("saturation events pin the guard zero", "[simulator]") {
    ScenarioConfig cfg = case_preset("CASE2");
    cfg.sim.t_end = 3.0;
    cfg.sim.log_energy = false;
    HybridSimulator sim(cfg);
    const ScenarioResult r = sim.run();
    const DerivedParams der = derive_params(cfg.net);

    int switches = 0, located = 0;
    for (const auto& e : r.events.events) {
        if (e.kind != EventKind::CVC_TO_CLC && e.kind != EventKind::CLC_TO_CVC) continue;
        ++switches;
        std::vector<Phasor> cur(cfg.gflcs.size());
        for (std::size_t i = 0; i < cur.size(); ++i)
            cur[i] = gflc_current_from_refs(e.refs[i], e.state.gflcs[i].theta);
        const double g = saturation_guard(e.state.gfmc.delta, cur, cfg.net, der,
                                          cfg.gfmc.i_max, e.u_g_eff);
        // Saturations fire on or above the limit, releases on or below it;
        // events located inside a step sit on the guard zero itself, while
        // reference jumps can fire at a distance.
        if (e.kind == EventKind::CVC_TO_CLC)
            CHECK(g > -1e-6);
        else
            CHECK(g < 1e-6);
        if (std::abs(g) < 1e-5) ++located;
    }
    CHECK(switches > 4);
    CHECK(located > 4);

    // Mode flips in the trace always carry a matching event.
    int last_s = r.trace.rows.front().s;
    for (const auto& row : r.trace.rows) {
        if (row.s != last_s) {
            bool matched = false;
            for (const auto& e : r.events.events)
                if (std::abs(e.t - row.t) <= cfg.sim.dt * 21) matched = true;
            CHECK(matched);
            last_s = row.s;
        }
    }
}

TEST_CASE("reduced and reference trajectories agree", "[simulator]") {
    ScenarioConfig cfg = case_preset("CASE2");
    cfg.sim.t_end = 4.0;
    const CrossCheckReport rep = cross_check(cfg, 2000);
    CHECK(rep.samples >= 1000);
    CHECK(rep.max_rel_deviation < 1e-5);
    CHECK(rep.max_rel_deviation_at_zero_varpi < 1e-9);
}

TEST_CASE("reference-model run reproduces the reduced one", "[simulator]") {
    ScenarioConfig cfg = case_preset("CASE3");
    cfg.sim.t_end = 2.0;
    cfg.sim.log_energy = false;
    HybridSimulator a(cfg);
    const Summary sa = a.run().summary;
    cfg.sim.model = Model::REFERENCE;
    HybridSimulator b(cfg);
    const Summary sb = b.run().summary;
    CHECK(sa.final_mode == sb.final_mode);
    CHECK(sa.final_theta[0] == Approx(sb.final_theta[0]).margin(1e-4));
    CHECK(sa.final_delta == Approx(sb.final_delta).margin(1e-4));
}

TEST_CASE("virtual fixed d-axis pins the current angle", "[simulator]") {
    ScenarioConfig cfg = case_preset("CASE1", true);
    cfg.sim.t_end = 4.5;
    cfg.sim.log_energy = false;
    HybridSimulator sim(cfg);
    const ScenarioResult r = sim.run();

    bool saw_pin = false;
    for (const auto& e : r.events.events) {
        if (e.kind == EventKind::VFDC_ON) saw_pin = true;
        if (e.refs[0].pinned) {
            const Phasor i = gflc_current_from_refs(e.refs[0], e.state.gflcs[0].theta);
            CHECK(i.ang == Approx(e.state.gflcs[0].theta_snapshot).margin(1e-12));
        }
    }
    CHECK(saw_pin);
    CHECK(r.summary.pll_all_stable);
    CHECK(r.summary.final_mode == GfmcMode::CVC);
}

TEST_CASE("state stays continuous across switching events", "[simulator]") {
    ScenarioConfig cfg = case_preset("CASE2");
    cfg.sim.t_end = 2.0;
    cfg.sim.log_energy = false;
    HybridSimulator sim(cfg);
    const ScenarioResult r = sim.run();

    // Every event snapshot interleaves smoothly with the surrounding trace:
    // the angle jump across one decimated sample stays O(step).
    for (std::size_t k = 1; k < r.trace.rows.size(); ++k) {
        const auto& a = r.trace.rows[k - 1];
        const auto& b = r.trace.rows[k];
        if (b.t - a.t > 2e-3) continue;
        CHECK(std::abs(b.theta[0] - a.theta[0]) < 0.2);
        CHECK(std::abs(b.delta - a.delta) < 0.1);
    }
}

TEST_CASE("three-cluster coupling agrees between model routes", "[simulator]") {
    ScenarioConfig cfg = case_preset("CASE10");
    cfg.sim.t_end = 3.0;
    const CrossCheckReport rep = cross_check(cfg, 1500);
    CHECK(rep.samples >= 800);
    CHECK(rep.max_rel_deviation < 1e-5);
}

TEST_CASE("switching audit identity and empty cases", "[simulator]") {
    ScenarioConfig cfg = case_preset("CASE2");
    cfg.sim.t_end = 4.0;
    cfg.sim.log_energy = false;
    HybridSimulator sim(cfg);
    const ScenarioResult r = sim.run();
    REQUIRE_FALSE(r.summary.audits[0].cycles.empty());
    for (const auto& c : r.summary.audits[0].cycles) {
        CHECK(c.dv_total ==
              Approx(c.dv_p_entry + c.dv_p_exit + c.dv_damping).margin(1e-6));
    }
    const auto sig = significant_cycles(r.summary.audits[0]);
    REQUIRE_FALSE(sig.empty());
    for (const auto& c : sig) {
        CHECK(c.v_exit < c.v_entry);
        CHECK(c.theta_ka < c.theta_s_v);
        CHECK(c.theta_s_v < c.theta_kb);
        CHECK(c.dv_p_entry <= 1e-9);
        CHECK(c.dv_p_exit <= 1e-9);
    }

    // A fault-free run has no switching cycles to audit.
    ScenarioConfig quiet = quiet_case1();
    HybridSimulator qs(quiet);
    const ScenarioResult qr = qs.run_from(equilibrium_state(quiet));
    CHECK(switching_energy_audit(qr.events, quiet, 0).cycles.empty());
}
