#include <catch2/catch_amalgamated.hpp>

#include <complex>

#include "colosim/converter.hpp"
#include "colosim/network.hpp"
#include "colosim/stability.hpp"

using namespace colosim;
using Catch::Approx;

namespace {

NetworkParams table_net() {
    NetworkParams net;
    net.x_c1 = 0.05;
    net.x_c2 = 0.03;
    net.x_g = 0.58;
    return net;
}

GflcParams table_gflc() {
    GflcParams p;
    p.k_2p = 0.07;
    p.k_2i = 100.0;
    p.x_c2 = 0.03;
    p.i_d_ref = 0.55;
    p.i_max = 0.66;
    return p;
}

PllContext random_ctx(SplitRng& rng, bool clc, bool pin_own, bool pin_gfmc) {
    PllContext ctx;
    ctx.mode = clc ? GfmcMode::CLC : GfmcMode::CVC;
    ctx.delta = rng.uniform(-0.8, 0.8);
    ctx.u_g_eff = rng.uniform(0.3, 1.1);
    ctx.refs.resize(2);
    ctx.theta = {rng.uniform(-1.5, 1.5), rng.uniform(-1.5, 1.5)};
    ctx.x_c2 = {0.03, 0.05};
    ctx.refs[0] = GflcRefs{rng.uniform(0.0, 0.7), rng.uniform(-0.3, 0.5), pin_own,
                           rng.uniform(-0.5, 0.8)};
    ctx.refs[1] = GflcRefs{rng.uniform(0.0, 0.5), rng.uniform(0.0, 0.4), false, 0.0};
    if (clc) {
        ctx.gfmc_current = Phasor{rng.uniform(0.1, 0.6), rng.uniform(-2.0, 2.0)};
        ctx.gfmc_pinned = pin_gfmc;
    }
    return ctx;
}

// q2-axis voltage straight from the algebraic network solution, with the
// frequency-coupled branch drops scaled by nu and the pinned ones left at
// nominal. The pinned corrections undo the solver's uniform scaling.
double uq_from_network(const PllContext& ctx, std::size_t self, double theta_self,
                       double nu, const NetworkParams& net, const DerivedParams& der) {
    std::vector<Phasor> cur(ctx.refs.size());
    for (std::size_t j = 0; j < ctx.refs.size(); ++j)
        cur[j] = gflc_current_from_refs(ctx.refs[j], j == self ? theta_self : ctx.theta[j]);

    std::vector<double> xs = ctx.x_c2;
    const BusSolution sol =
        ctx.mode == GfmcMode::CVC
            ? solve_cvc(ctx.delta, cur, net, der, xs, ctx.u_g_eff, nu)
            : solve_clc(ctx.gfmc_current, cur, net, xs, ctx.u_g_eff, nu);

    std::complex<double> u_c2 = sol.u_c2[self].to_complex();
    const double x_other = ctx.mode == GfmcMode::CVC ? (1.0 - der.alpha) * net.x_g : net.x_g;
    const double x_own = x_other + ctx.x_c2[self];
    for (std::size_t j = 0; j < ctx.refs.size(); ++j) {
        if (!ctx.refs[j].pinned) continue;
        const double x = j == self ? x_own : x_other;
        u_c2 -= std::complex<double>{0.0, (nu - 1.0) * x} * cur[j].to_complex();
    }
    if (ctx.mode == GfmcMode::CLC && ctx.gfmc_pinned)
        u_c2 -= std::complex<double>{0.0, (nu - 1.0) * net.x_g} *
                ctx.gfmc_current.to_complex();
    return std::imag(u_c2 * std::polar(1.0, -theta_self));
}

}  // namespace

TEST_CASE("q2 voltage closed form matches the network solver", "[converter][property]") {
    const NetworkParams net = table_net();
    const DerivedParams der = derive_params(net);
    SplitRng rng(101);
    for (int k = 0; k < 600; ++k) {
        const bool clc = rng.uniform(0.0, 1.0) < 0.5;
        const bool pin = rng.uniform(0.0, 1.0) < 0.4;
        const bool ping = rng.uniform(0.0, 1.0) < 0.4;
        PllContext ctx = random_ctx(rng, clc, pin, ping);
        const double th = rng.uniform(-2.0, 2.0);
        const double nu = rng.uniform(0.8, 1.2);
        const UqTerms t = uq_terms(ctx, 0, th, net, der);
        CHECK(uq_value(t, nu) ==
              Approx(uq_from_network(ctx, 0, th, nu, net, der)).margin(1e-9));
    }
}

TEST_CASE("closed-form partial derivatives match finite differences", "[converter][property]") {
    const NetworkParams net = table_net();
    const DerivedParams der = derive_params(net);
    SplitRng rng(102);
    const double h = 1e-6;
    for (int k = 0; k < 300; ++k) {
        const bool clc = rng.uniform(0.0, 1.0) < 0.5;
        PllContext ctx = random_ctx(rng, clc, rng.uniform(0.0, 1.0) < 0.5,
                                    rng.uniform(0.0, 1.0) < 0.5);
        const double th = rng.uniform(-2.0, 2.0);
        const double nu = rng.uniform(0.85, 1.15);

        const UqTerms t = uq_terms(ctx, 0, th, net, der);
        const UqTerms tp = uq_terms(ctx, 0, th + h, net, der);
        const UqTerms tm = uq_terms(ctx, 0, th - h, net, der);
        const double du_dth_fd = (uq_value(tp, nu) - uq_value(tm, nu)) / (2.0 * h);
        const double du_dth = nu * t.dxd_nu + t.dxd_fix - t.c_theta;
        CHECK(du_dth == Approx(du_dth_fd).margin(2e-6));

        const double du_dnu_fd = (uq_value(t, nu + h) - uq_value(t, nu - h)) / (2.0 * h);
        CHECK(t.xd_nu == Approx(du_dnu_fd).margin(2e-6));
    }
}

TEST_CASE("reduced swing form reproduces the PI reference law", "[converter][property]") {
    const NetworkParams net = table_net();
    const DerivedParams der = derive_params(net);
    SplitRng rng(103);
    GflcParams p = table_gflc();
    double worst = 0.0;
    for (int k = 0; k < 10000; ++k) {
        p.k_2p = rng.uniform(0.05, 0.6);
        p.k_2i = rng.uniform(40.0, 150.0);
        const bool clc = rng.uniform(0.0, 1.0) < 0.5;
        PllContext ctx = random_ctx(rng, clc, rng.uniform(0.0, 1.0) < 0.3,
                                    rng.uniform(0.0, 1.0) < 0.3);
        const double th = rng.uniform(-2.5, 2.5);
        const double w = rng.uniform(-0.3, 0.3);
        const PllDerivs a = pll_rhs_reduced(p, th, w, 0, ctx, net, der);
        const PllDerivs b = pll_rhs_reference(p, th, w, 0, ctx, net, der);
        const double scale = std::max({1.0, std::abs(a.dvarpi), std::abs(b.dvarpi)});
        worst = std::max(worst, std::abs(a.dvarpi - b.dvarpi) / scale);
        CHECK(a.dtheta == Approx(b.dtheta).margin(1e-12));
    }
    CHECK(worst < 1e-6);
}

TEST_CASE("PLL right-hand side vanishes at the equilibrium", "[converter]") {
    const NetworkParams net = table_net();
    const DerivedParams der = derive_params(net);
    const GflcParams p = table_gflc();

    PllContext cvc;
    cvc.mode = GfmcMode::CVC;
    cvc.delta = 0.3;
    cvc.u_g_eff = 1.0;
    cvc.refs = {GflcRefs{0.55, 0.0, false, 0.0}};
    cvc.theta = {0.3};
    cvc.x_c2 = {0.03};
    const double ths = sep_cvc(cvc, 0, net, der);
    const PllDerivs d = pll_rhs_reference(p, ths, 0.0, 0, cvc, net, der);
    CHECK(std::abs(d.dvarpi) < 1e-9);
    CHECK(d.dtheta == 0.0);

    PllContext clc = cvc;
    clc.mode = GfmcMode::CLC;
    clc.gfmc_current = Phasor{0.31, clc.delta};
    const double ths_l = sep_clc(clc, 0, net, der);
    const PllDerivs dl = pll_rhs_reference(p, ths_l, 0.0, 0, clc, net, der);
    CHECK(std::abs(dl.dvarpi) < 1e-9);
}

TEST_CASE("degenerate PLL inertia is rejected", "[converter]") {
    const NetworkParams net = table_net();
    const DerivedParams der = derive_params(net);
    GflcParams p = table_gflc();
    p.k_2p = 40.0;  // pathological gain drives 1 - k_2p*Xd negative
    PllContext ctx;
    ctx.mode = GfmcMode::CVC;
    ctx.delta = 0.0;
    ctx.refs = {GflcRefs{0.7, 0.0, false, 0.0}};
    ctx.theta = {0.0};
    ctx.x_c2 = {0.03};
    CHECK_THROWS_AS(pll_rhs_reduced(p, 0.1, 0.0, 0, ctx, net, der), std::domain_error);
}

TEST_CASE("droop law", "[converter]") {
    GfmcParams g;
    g.m_p = 0.04;
    g.p_ref = 0.3;
    const double w_b = 2.0 * kPi * 50.0;
    CHECK(apl_rhs(g, 0.3, w_b) == Approx(0.0).margin(1e-14));
    CHECK(apl_rhs(g, 0.2, w_b) == Approx(2.0 * kPi * 50.0 * 0.004).epsilon(1e-12));
    CHECK(apl_rhs(g, 0.2, w_b) == Approx(1.2566).margin(1e-3));
    CHECK(apl_rhs(g, 0.5, w_b) < 0.0);  // over target, back off
}

TEST_CASE("GFLC current law", "[converter]") {
    GflcParams p = table_gflc();
    GflcState s;
    s.theta = 0.7;

    const Phasor normal = gflc_current(p, s, 1.0, false);
    CHECK(normal.mag == Approx(0.55).epsilon(1e-12));
    CHECK(normal.ang == Approx(0.7).margin(1e-12));

    // Reactive-priority ride-through: the stated support demand saturates
    // the limit and crowds the active current out entirely.
    p.k_q = 3.0;
    p.i_max = 1.2;
    s.ctrl_mode = CtrlMode::LVRT;
    const Phasor lvrt = gflc_current(p, s, 0.4, true);
    CHECK(lvrt.mag == Approx(1.2).epsilon(1e-12));
    CHECK(lvrt.ang == Approx(0.7 - kPi / 2.0).margin(1e-12));

    // Virtual fixed d-axis: the synchronous-frame angle no longer tracks
    // the PLL.
    p.vfdc_enabled = true;
    s.ctrl_mode = CtrlMode::VFDC_HOLD;
    s.theta_snapshot = 0.45;
    for (double th : {-1.0, 0.2, 2.5}) {
        s.theta = th;
        const Phasor pin = gflc_current(p, s, 1.0, false);
        CHECK(pin.ang == Approx(0.45).margin(1e-12));
        CHECK(pin.mag == Approx(0.55).epsilon(1e-12));
    }
}

TEST_CASE("GFLC current magnitude never exceeds the limit", "[converter][property]") {
    SplitRng rng(104);
    for (int k = 0; k < 500; ++k) {
        GflcParams p = table_gflc();
        p.i_d_ref = rng.uniform(0.0, 2.0);
        p.i_q_ref = rng.uniform(-1.0, 1.0);
        p.i_max = rng.uniform(0.1, 1.5);
        p.k_q = rng.uniform(0.0, 5.0);
        p.vfdc_enabled = rng.uniform(0.0, 1.0) < 0.5;
        GflcState s;
        s.theta = rng.uniform(-3.0, 3.0);
        s.ctrl_mode = static_cast<CtrlMode>(static_cast<int>(rng.uniform(0.0, 2.999)));
        const Phasor i = gflc_current(p, s, rng.uniform(0.0, 1.2), false);
        CHECK(i.mag <= p.i_max + 1e-12);
    }
}

TEST_CASE("saturated GFMC current", "[converter]") {
    GfmcParams p;
    p.i_max = 1.1;
    p.eta_1 = 0.0;
    GfmcState s;
    s.delta = 0.5;
    s.mode = GfmcMode::CLC;
    const Phasor a = gfmc_clc_current(p, s);
    CHECK(a.mag == Approx(1.1));
    CHECK(a.ang == Approx(0.5));

    p.eta_1 = -kPi / 2.0;
    s.delta = 0.3;
    const Phasor b = gfmc_clc_current(p, s);
    CHECK(b.ang == Approx(0.3 - kPi / 2.0));

    p.vfdc_enabled = true;
    for (double dlt : {-1.0, 0.0, 2.0}) {
        s.delta = dlt;
        CHECK(gfmc_clc_current(p, s).ang == Approx(-kPi / 2.0));
    }

    s.mode = GfmcMode::CVC;
    CHECK_THROWS_AS(gfmc_clc_current(p, s), std::logic_error);
}

TEST_CASE("VFDC power line", "[converter]") {
    const NetworkParams net = table_net();
    const DerivedParams der = derive_params(net);

    // No GFLC current: the line degenerates to U_g*I*cos(eps).
    const VfdcPowerLine none = vfdc_power_line(1.1, -0.4, Phasor{0.0, 0.0}, der, 1.0);
    CHECK(none.k_a == Approx(1.1).epsilon(1e-12));
    CHECK(none.beta == Approx(kPi / 2.0).epsilon(1e-12));
    CHECK(none.p_line == Approx(1.1 * std::cos(-0.4)).epsilon(1e-12));

    const VfdcPowerLine line = vfdc_power_line(1.1, -0.4, Phasor{0.55, 0.3}, der, 1.0);
    CHECK(line.k_a == Approx(1.05119).margin(1e-4));

    // Oracle: the network active power with both injections frozen must be
    // flat in delta and equal to the closed form.
    for (double dlt : {-1.0, 0.0, 0.7, 2.4}) {
        const double p = gfmc_power(GfmcMode::CLC, dlt, Phasor{1.1, -0.4},
                                    {Phasor{0.55, 0.3}}, net, der);
        CHECK(p == Approx(line.p_line).margin(1e-12));
    }

    // Monotone in epsilon on [-pi/2, 0] while beta stays inside (0, pi/2).
    double prev = -1e9;
    for (int k = 0; k <= 20; ++k) {
        const double eps = -kPi / 2.0 + k * (kPi / 2.0) / 20.0;
        const VfdcPowerLine l = vfdc_power_line(1.1, eps, Phasor{0.55, 0.3}, der, 1.0);
        CHECK(l.beta > 0.0);
        CHECK(l.beta < kPi / 2.0);
        CHECK(l.p_line > prev);
        prev = l.p_line;
    }
}

TEST_CASE("coupling projection", "[converter]") {
    PllContext ctx;
    ctx.refs = {GflcRefs{0.5, 0.0, false, 0.0}, GflcRefs{0.3, 0.0, false, 0.0},
                GflcRefs{0.2, 0.0, false, 0.0}};
    ctx.theta = {0.4, 0.4, 0.4};
    ctx.x_c2 = {0.03, 0.03, 0.03};
    // Coherent clusters with aligned currents: plain magnitude sum.
    CHECK(multi_gflc_coupling(ctx, 0) == Approx(0.5).epsilon(1e-12));
    CHECK(multi_gflc_coupling(ctx, 1) == Approx(0.7).epsilon(1e-12));

    PllContext single;
    single.refs = {GflcRefs{0.5, 0.0, false, 0.0}};
    single.theta = {0.0};
    single.x_c2 = {0.03};
    CHECK(multi_gflc_coupling(single, 0) == 0.0);
}
