#include "colosim/converter.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace colosim {

GflcRefs gflc_refs(const GflcParams& p, const GflcState& s, double u_pcc_mag,
                   bool fault_active) {
    GflcRefs r;
    const bool lvrt = s.ctrl_mode == CtrlMode::LVRT ||
                      (s.ctrl_mode == CtrlMode::NORMAL && fault_active);
    if (lvrt) {
        r.i_q = std::clamp(p.k_q * (0.9 - u_pcc_mag), 0.0, p.i_max);
        r.i_d = std::min(p.i_d_ref, std::sqrt(std::max(0.0, p.i_max * p.i_max - r.i_q * r.i_q)));
    } else {
        r.i_d = p.i_d_ref;
        r.i_q = p.i_q_ref;
        const double mag = std::hypot(r.i_d, r.i_q);
        if (mag > p.i_max) {  // proportional back-off keeps the angle
            r.i_d *= p.i_max / mag;
            r.i_q *= p.i_max / mag;
        }
    }
    if (p.vfdc_enabled && (lvrt || s.ctrl_mode == CtrlMode::VFDC_HOLD)) {
        r.pinned = true;
        r.pin_angle = s.theta_snapshot;
    }
    return r;
}

Phasor gflc_current_from_refs(const GflcRefs& r, double theta) {
    const double mag = std::hypot(r.i_d, r.i_q);
    if (r.pinned) return {mag, r.pin_angle};
    return {mag, theta + std::atan2(-r.i_q, r.i_d)};
}

Phasor gflc_current(const GflcParams& p, const GflcState& s, double u_pcc_mag,
                    bool fault_active) {
    return gflc_current_from_refs(gflc_refs(p, s, u_pcc_mag, fault_active), s.theta);
}

Phasor gfmc_clc_current(const GfmcParams& p, const GfmcState& s) {
    if (s.mode != GfmcMode::CLC)
        throw std::logic_error("gfmc_clc_current called while the GFMC is in CVC mode");
    if (p.vfdc_enabled) return {p.i_max, p.epsilon};
    return {p.i_max, s.delta + p.eta_1};
}

double apl_rhs(const GfmcParams& p, double p_c1, double omega_base) {
    return omega_base * p.m_p * (p.p_ref - p_c1);
}

UqTerms uq_terms(const PllContext& ctx, std::size_t self, double theta_self,
                 const NetworkParams& net, const DerivedParams& derived) {
    UqTerms t;
    const double alpha = derived.alpha;
    const double x_own = (ctx.mode == GfmcMode::CVC)
                             ? ctx.x_c2[self] + (1.0 - alpha) * net.x_g
                             : net.x_g + ctx.x_c2[self];
    const double x_other = (ctx.mode == GfmcMode::CVC) ? (1.0 - alpha) * net.x_g : net.x_g;

    // Own injection: a current tracking the PLL frame keeps constant
    // projections and carries the frequency coupling; a pinned current keeps
    // a fixed synchronous angle, so its projection rotates with theta but
    // its drop stays at nominal frequency.
    const GflcRefs& r = ctx.refs[self];
    if (r.pinned) {
        const double mag = std::hypot(r.i_d, r.i_q);
        t.xd_fix += x_own * mag * std::cos(r.pin_angle - theta_self);
        t.dxd_fix += x_own * mag * std::sin(r.pin_angle - theta_self);
    } else {
        t.xd_nu += x_own * r.i_d;
    }

    for (std::size_t j = 0; j < ctx.refs.size(); ++j) {
        if (j == self) continue;
        const Phasor ij = gflc_current_from_refs(ctx.refs[j], ctx.theta[j]);
        const double c = ij.mag * std::cos(ij.ang - theta_self);
        const double q = ij.mag * std::sin(ij.ang - theta_self);
        if (ctx.refs[j].pinned) {
            t.xd_fix += x_other * c;
            t.dxd_fix += x_other * q;
        } else {
            t.xd_nu += x_other * c;
            t.dxd_nu += x_other * q;
        }
    }

    if (ctx.mode == GfmcMode::CVC) {
        t.p_e = alpha * net.u_c1_set * std::sin(theta_self - ctx.delta) +
                (1.0 - alpha) * ctx.u_g_eff * std::sin(theta_self);
        t.c_theta = alpha * net.u_c1_set * std::cos(theta_self - ctx.delta) +
                    (1.0 - alpha) * ctx.u_g_eff * std::cos(theta_self);
    } else {
        const double c =
            ctx.gfmc_current.mag * std::cos(ctx.gfmc_current.ang - theta_self);
        const double q =
            ctx.gfmc_current.mag * std::sin(ctx.gfmc_current.ang - theta_self);
        if (ctx.gfmc_pinned) {
            t.xd_fix += net.x_g * c;
            t.dxd_fix += net.x_g * q;
        } else {
            t.xd_nu += net.x_g * c;
            t.dxd_nu += net.x_g * q;
        }
        t.p_e = ctx.u_g_eff * std::sin(theta_self);
        t.c_theta = ctx.u_g_eff * std::cos(theta_self);
    }
    return t;
}

PllReducedTerms pll_reduced_terms(const GflcParams& p, const PllContext& ctx,
                                  std::size_t self, double theta_self,
                                  const NetworkParams& net, const DerivedParams& derived) {
    const double w_b = net.omega_base();
    const UqTerms t = uq_terms(ctx, self, theta_self, net, derived);

    PllReducedTerms out;
    out.t_c2 = (1.0 - p.k_2p * t.xd_nu) / p.k_2i;
    if (out.t_c2 <= 0.0)
        throw std::domain_error("degenerate PLL inertia: gain/current combination outside model validity");
    out.p_m = t.xd();
    out.p_e = t.p_e;
    out.d_c2 = (p.k_2p / p.k_2i) * w_b * (t.c_theta - t.dxd_dtheta()) - t.xd_nu;
    out.d_star = -(p.k_2p / p.k_2i) * w_b * t.dxd_nu;
    return out;
}

PllDerivs pll_rhs_reduced(const GflcParams& p, double theta, double varpi,
                          std::size_t self, const PllContext& ctx,
                          const NetworkParams& net, const DerivedParams& derived) {
    const PllReducedTerms t = pll_reduced_terms(p, ctx, self, theta, net, derived);
    PllDerivs d;
    d.dtheta = net.omega_base() * varpi;
    d.dvarpi = (t.p_m - t.p_e - t.d_c2 * varpi - t.d_star * varpi * varpi) / t.t_c2;
    return d;
}

PllDerivs pll_rhs_reference(const GflcParams& p, double theta, double varpi,
                            std::size_t self, const PllContext& ctx,
                            const NetworkParams& net, const DerivedParams& derived) {
    const double w_b = net.omega_base();
    const UqTerms t = uq_terms(ctx, self, theta, net, derived);
    const double nu = 1.0 + varpi;  // PLL frequency over nominal
    const double denom = 1.0 - p.k_2p * t.xd_nu;
    if (denom <= 0.0)
        throw std::domain_error("degenerate PLL inertia: gain/current combination outside model validity");

    const double u_q = uq_value(t, nu);
    const double du_dtheta = nu * t.dxd_nu + t.dxd_fix - t.c_theta;
    PllDerivs d;
    d.dtheta = w_b * varpi;
    d.dvarpi = (p.k_2i * u_q + p.k_2p * du_dtheta * w_b * varpi) / denom;
    return d;
}

VfdcPowerLine vfdc_power_line(double i_c1_max, double epsilon, const Phasor& i_c2_pinned,
                              const DerivedParams& derived, double u_g) {
    const double gi = derived.gamma * i_c2_pinned.mag;
    const double ths = i_c2_pinned.ang;
    VfdcPowerLine out;
    out.k_a = i_c1_max * std::sqrt(u_g * u_g + gi * gi - 2.0 * u_g * gi * std::sin(ths));
    out.beta = std::atan2(u_g - gi * std::sin(ths), gi * std::cos(ths));
    out.p_line = out.k_a * std::sin(epsilon + out.beta);
    return out;
}

double multi_gflc_coupling(const PllContext& ctx, std::size_t self) {
    double sum = 0.0;
    for (std::size_t j = 0; j < ctx.refs.size(); ++j) {
        if (j == self) continue;
        const Phasor ij = gflc_current_from_refs(ctx.refs[j], ctx.theta[j]);
        sum += ij.mag * std::cos(ctx.theta[self] - ij.ang);
    }
    return sum;
}

}  // namespace colosim
