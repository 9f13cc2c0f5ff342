#include "colosim/stability.hpp"

#include <cmath>
#include <stdexcept>

#include "colosim/switching.hpp"

namespace colosim {

namespace {

double adaptive_simpson(const std::function<double(double)>& f, double a, double b,
                        double fa, double fm, double fb, double whole, double tol,
                        int depth) {
    const double m = 0.5 * (a + b);
    const double lm = 0.5 * (a + m);
    const double rm = 0.5 * (m + b);
    const double flm = f(lm);
    const double frm = f(rm);
    const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    if (depth <= 0 || std::abs(left + right - whole) < 15.0 * tol)
        return left + right + (left + right - whole) / 15.0;
    return adaptive_simpson(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
           adaptive_simpson(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

double integrate(const std::function<double(double)>& f, double a, double b,
                 double tol = 1e-10, int depth = 40) {
    if (a == b) return 0.0;
    const double fa = f(a);
    const double fb = f(b);
    const double fm = f(0.5 * (a + b));
    const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    return adaptive_simpson(f, a, b, fa, fm, fb, whole, tol, depth);
}

// Newton polish of E(theta) - Xd(theta) = 0 toward a root with positive
// restoring slope. Returns the root; throws when no stable root is found.
double polish_sep(const PllContext& ctx, std::size_t self, const NetworkParams& net,
                  const DerivedParams& derived, double seed) {
    double th = seed;
    for (int it = 0; it < 80; ++it) {
        const UqTerms t = uq_terms(ctx, self, th, net, derived);
        const double f = t.p_e - t.xd();      // -u_q at nominal frequency
        const double fp = t.c_theta - t.dxd_dtheta();
        if (std::abs(f) < 1e-13 && fp > 0.0) return th;
        if (std::abs(fp) < 1e-9) break;
        double step = f / fp;
        if (std::abs(step) > 0.5) step = std::copysign(0.5, step);
        th -= step;
        if (!std::isfinite(th)) break;
    }
    // Fallback: bracket the stable root near the seed and bisect.
    const auto g = [&](double x) {
        const UqTerms t = uq_terms(ctx, self, x, net, derived);
        return t.p_e - t.xd();
    };
    double lo = seed - 1.5, hi = seed + 1.5;
    const int n = 600;
    double prev = g(lo);
    for (int i = 1; i <= n; ++i) {
        const double x = lo + (hi - lo) * i / n;
        const double cur = g(x);
        if (prev < 0.0 && cur >= 0.0) {
            double a = x - (hi - lo) / n, b = x;
            for (int it = 0; it < 200; ++it) {
                const double m = 0.5 * (a + b);
                (g(m) < 0.0 ? a : b) = m;
            }
            return 0.5 * (a + b);
        }
        prev = cur;
    }
    throw std::domain_error("no stable equilibrium near the requested operating point");
}

}  // namespace

double sep_cvc_closed(double i_d_eff, double delta, const NetworkParams& net,
                      const DerivedParams& derived) {
    const double arg = derived.l_v * i_d_eff / net.u_c1_set;
    if (std::abs(arg) > 1.0)
        throw std::domain_error("no CVC equilibrium: arcsin argument exceeds 1");
    return std::asin(arg) + delta;
}

double sep_clc_closed(double i_c1_d1, double i_d_eff, const NetworkParams& net,
                      double u_g_eff) {
    const double ug = u_g_eff < 0.0 ? net.u_g : u_g_eff;
    const double arg = (net.x_g * i_c1_d1 + (net.x_g + net.x_c2) * i_d_eff) / ug;
    if (std::abs(arg) > 1.0)
        throw std::domain_error("no CLC equilibrium: arcsin argument exceeds 1");
    return std::asin(arg);
}

double sep_cvc(const PllContext& ctx, std::size_t self, const NetworkParams& net,
               const DerivedParams& derived) {
    if (ctx.mode != GfmcMode::CVC)
        throw std::logic_error("sep_cvc requires a CVC context");
    const UqTerms t0 = uq_terms(ctx, self, ctx.delta, net, derived);
    const double arg = t0.xd() / net.u_c1_set;
    if (std::abs(arg) > 1.0)
        throw std::domain_error("no CVC equilibrium: arcsin argument exceeds 1");
    return polish_sep(ctx, self, net, derived, ctx.delta + std::asin(arg));
}

double sep_clc(const PllContext& ctx, std::size_t self, const NetworkParams& net,
               const DerivedParams& derived) {
    if (ctx.mode != GfmcMode::CLC)
        throw std::logic_error("sep_clc requires a CLC context");
    const UqTerms t0 = uq_terms(ctx, self, 0.0, net, derived);
    const double arg = t0.xd() / ctx.u_g_eff;
    if (std::abs(arg) > 1.0)
        throw std::domain_error("no CLC equilibrium: arcsin argument exceeds 1");
    return polish_sep(ctx, self, net, derived, std::asin(arg));
}

double sep_exact(const PllContext& ctx, std::size_t self, const NetworkParams& net,
                 const DerivedParams& derived) {
    return ctx.mode == GfmcMode::CVC ? sep_cvc(ctx, self, net, derived)
                                     : sep_clc(ctx, self, net, derived);
}

double lyapunov_energy(double theta, double varpi, const GflcParams& p,
                       const PllContext& ctx, std::size_t self, const NetworkParams& net,
                       const DerivedParams& derived, std::optional<double> theta_s) {
    const double w_b = net.omega_base();
    const double ths = theta_s ? *theta_s : sep_exact(ctx, self, net, derived);
    const auto integrand = [&](double th) {
        const UqTerms t = uq_terms(ctx, self, th, net, derived);
        return p.k_2i * (t.p_e - t.xd()) / ((1.0 - p.k_2p * t.xd_nu) * w_b);
    };
    return 0.5 * varpi * varpi + integrate(integrand, ths, theta);
}

double lyapunov_energy_fast(double theta, double varpi, const GflcParams& p,
                            const PllContext& ctx, std::size_t self,
                            const NetworkParams& net, const DerivedParams& derived,
                            double theta_s) {
    // 16-point Gauss-Legendre nodes/weights on [-1, 1].
    static const double xg[8] = {0.0950125098376374, 0.2816035507792589,
                                 0.4580167776572274, 0.6178762444026438,
                                 0.7554044083550030, 0.8656312023878318,
                                 0.9445750230732326, 0.9894009349916499};
    static const double wg[8] = {0.1894506104550685, 0.1826034150449236,
                                 0.1691565193950025, 0.1495959888165767,
                                 0.1246289712555339, 0.0951585116824928,
                                 0.0622535239386479, 0.0271524594117541};
    const double w_b = net.omega_base();
    const auto integrand = [&](double th) {
        const UqTerms t = uq_terms(ctx, self, th, net, derived);
        return p.k_2i * (t.p_e - t.xd()) / ((1.0 - p.k_2p * t.xd_nu) * w_b);
    };
    const int panels = 1 + static_cast<int>(std::abs(theta - theta_s) / kPi);
    double total = 0.0;
    for (int k = 0; k < panels; ++k) {
        const double a = theta_s + (theta - theta_s) * k / panels;
        const double b = theta_s + (theta - theta_s) * (k + 1) / panels;
        const double mid = 0.5 * (a + b);
        const double hl = 0.5 * (b - a);
        double acc = 0.0;
        for (int j = 0; j < 8; ++j)
            acc += wg[j] * (integrand(mid + hl * xg[j]) + integrand(mid - hl * xg[j]));
        total += hl * acc;
    }
    return 0.5 * varpi * varpi + total;
}

DampingLine damping_line(GfmcMode mode, LineVariant variant, const GflcParams& p,
                         const PllContext& ctx, std::size_t self, const NetworkParams& net,
                         const DerivedParams& derived) {
    const double w_b = net.omega_base();
    const double gain = p.k_2i / (p.k_2p * w_b);

    DampingLine line;
    line.mode = mode;
    line.variant = variant;

    const GflcRefs& own = ctx.refs[self];
    const double own_mag = std::hypot(own.i_d, own.i_q);

    double coupling = 0.0;  // d2-axis projection of the other injections
    if (variant != LineVariant::BASE) coupling = multi_gflc_coupling(ctx, self);

    // The comparison geometry anchors at the closed-form equilibria; the
    // critical energy itself is evaluated on the exact potential.
    if (mode == GfmcMode::CVC) {
        line.delta_eff = ctx.delta;
        line.theta_s = sep_cvc_closed(own.i_d, ctx.delta, net, derived);
        line.intercept = std::sin(line.theta_s - line.delta_eff);
        const double u_scale = net.u_c1_set;
        const double own_coeff = variant == LineVariant::VFDC ? own_mag : own.i_d;
        line.slope_conv = gain * derived.l_v * own_coeff / u_scale;
        line.slope_fixed = gain * (1.0 - derived.alpha) * net.x_g * coupling / u_scale;
    } else {
        line.delta_eff = 0.0;
        const double i1_d1 =
            ctx.gfmc_current.mag * std::cos(ctx.gfmc_current.ang - ctx.delta);
        NetworkParams net_i = net;
        net_i.x_c2 = ctx.x_c2[self];
        line.theta_s = sep_clc_closed(i1_d1, own.i_d, net_i, ctx.u_g_eff);
        line.intercept = std::sin(line.theta_s);
        const double u_scale = ctx.u_g_eff;
        const double own_coeff = variant == LineVariant::VFDC ? own_mag : own.i_d;
        line.slope_conv = gain * (net.x_g + ctx.x_c2[self]) * own_coeff / u_scale;
        const double i1_d2 =
            ctx.gfmc_current.mag * std::cos(ctx.gfmc_current.ang - line.theta_s);
        line.slope_fixed = gain * net.x_g * (coupling + i1_d1) / u_scale +
                           net.x_g * i1_d2 / u_scale;
    }
    return line;
}

StabilityBoundary boundary_from_line(const DampingLine& line) {
    StabilityBoundary b;
    const auto h = [&](double th) {
        return std::sin(th - line.delta_eff) - line.value(th);
    };
    const double step = kPi / 180.0;

    const auto bisect = [&](double a, double bb) {
        for (int it = 0; it < 200; ++it) {
            const double m = 0.5 * (a + bb);
            if (h(a) * h(m) <= 0.0)
                bb = m;
            else
                a = m;
            if (bb - a < 1e-12) break;
        }
        return 0.5 * (a + bb);
    };

    // Upward: stability requires h > 0 just above theta_s; the boundary is
    // the first angle where the condition flips.
    if (h(line.theta_s + 1e-7) <= 0.0) {
        b.collapsed = true;
        b.theta_min = b.theta_max = line.theta_s;
        return b;
    }
    b.theta_max = line.theta_s + 2.0 * kPi;
    for (double th = line.theta_s + step; th <= line.theta_s + 2.0 * kPi + step; th += step) {
        if (h(th) <= 0.0) {
            b.theta_max = bisect(th - step, th);
            break;
        }
    }
    b.theta_min = line.theta_s - 2.0 * kPi;
    for (double th = line.theta_s - step; th >= line.theta_s - 2.0 * kPi - step; th -= step) {
        if (h(th) >= 0.0) {
            b.theta_min = bisect(th, th + step);  // keeps ordering a < b
            break;
        }
    }
    return b;
}

StabilityBoundary stability_boundary(const DampingLine& line, const GflcParams& p,
                                     const PllContext& ctx, std::size_t self,
                                     const NetworkParams& net, const DerivedParams& derived) {
    StabilityBoundary b = boundary_from_line(line);
    if (!b.collapsed)
        b.v_max = lyapunov_energy(b.theta_max, 0.0, p, ctx, self, net, derived);
    return b;
}

std::vector<EnergyCycle> significant_cycles(const EnergyAudit& audit,
                                            double min_duration) {
    std::vector<EnergyCycle> out;
    for (const auto& c : audit.cycles) {
        if (c.t_exit - c.t_entry < min_duration) continue;
        if (!(c.theta_ka < c.theta_s_v && c.theta_s_v < c.theta_kb)) continue;
        out.push_back(c);
    }
    return out;
}

std::uint64_t SplitRng::next() {
    // splitmix64: portable and deterministic across platforms.
    state_ += 0x9e3779b97f4a7c15ull;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

double SplitRng::uniform(double lo, double hi) {
    const double u = static_cast<double>(next() >> 11) * 0x1.0p-53;
    return lo + (hi - lo) * u;
}

AppendixReport check_appendix_properties(int n_draws, std::uint64_t seed,
                                         const NetworkParams& base_net) {
    AppendixReport rep;
    rep.draws = n_draws;
    SplitRng rng(seed);

    for (int k = 0; k < n_draws; ++k) {
        NetworkParams net = base_net;
        net.x_c1 = base_net.x_c1 * rng.uniform(0.5, 1.5);
        net.x_c2 = base_net.x_c2 * rng.uniform(0.5, 1.5);
        net.x_g = base_net.x_g * rng.uniform(0.5, 1.5);
        const DerivedParams derived = derive_params(net);

        const double delta_p = rng.uniform(-0.5, 0.8);
        const double i_c2 = rng.uniform(0.05, 0.9);
        const double i_max = rng.uniform(0.15, 1.6);
        const double eta_2 = rng.uniform(-0.3, 0.3);

        const ThetaCrossings cr =
            gflc_angle_crossings(delta_p, i_c2, eta_2, net, derived, i_max);
        if (!cr.solvable) {
            ++rep.skipped;
            continue;
        }

        PllContext ctx;
        ctx.mode = GfmcMode::CVC;
        ctx.delta = delta_p;
        ctx.u_g_eff = net.u_g;
        GflcRefs r;
        r.i_d = i_c2 * std::cos(eta_2);
        r.i_q = -i_c2 * std::sin(eta_2);
        ctx.refs = {r};
        ctx.theta = {delta_p};
        ctx.x_c2 = {net.x_c2};

        double theta_sv;
        try {
            theta_sv = sep_cvc(ctx, 0, net, derived);
        } catch (const std::domain_error&) {
            ++rep.skipped;
            continue;
        }

        // The ordering claim presumes the equilibrium itself is admissible.
        const Phasor i_eq{i_c2, theta_sv + eta_2};
        if (saturation_guard(delta_p, {i_eq}, net, derived, i_max) >= 0.0) {
            ++rep.skipped;
            continue;
        }

        const double mid = 0.5 * (cr.theta_1 + cr.theta_2);
        const double shifted =
            theta_sv - 2.0 * kPi * std::round((theta_sv - mid) / (2.0 * kPi));
        ++rep.checked_ordering;
        if (!(cr.theta_1 < shifted && shifted < cr.theta_2)) ++rep.ordering_violations;

        // SEP ordering at the switching instants, with the conservative
        // i_c1 ~ I_max approximation.
        for (double th_sw : {cr.theta_1, cr.theta_2}) {
            const double i_d_eff = i_c2 * std::cos((th_sw + eta_2) - th_sw);
            const double arg =
                (net.x_g * i_max + (net.x_g + net.x_c2) * i_d_eff) / net.u_g;
            if (std::abs(arg) > 1.0) {
                ++rep.skipped;
                continue;
            }
            ++rep.checked_sep_order;
            if (!(theta_sv <= std::asin(arg) + 1e-9)) ++rep.sep_order_violations;
        }

        // delta_p^max <= sigma whenever the collinear closure is feasible.
        const double reach = derived.beta_1 * i_max + derived.gamma * i_c2;
        const double cos_dp = (net.u_c1_set * net.u_c1_set + net.u_g * net.u_g -
                               reach * reach) /
                              (2.0 * net.u_c1_set * net.u_g);
        const double sig_arg = reach / net.u_g;
        if (std::abs(cos_dp) <= 1.0 && sig_arg <= 1.0) {
            ++rep.checked_delta_max;
            if (!(std::acos(cos_dp) <= std::asin(sig_arg) + 1e-9))
                ++rep.delta_max_violations;
        }
    }
    return rep;
}

}  // namespace colosim
