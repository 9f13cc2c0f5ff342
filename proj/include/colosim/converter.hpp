#pragma once

#include <cstddef>
#include <vector>

#include "colosim/network.hpp"
#include "colosim/phasor.hpp"

namespace colosim {

enum class CtrlMode { NORMAL, LVRT, VFDC_HOLD };

struct GflcParams {
    double k_2p = 0.07;    // PLL proportional gain
    double k_2i = 100.0;   // PLL integral gain
    double x_c2 = 0.03;    // branch reactance to the PCC
    double i_d_ref = 0.5;  // normal active current reference
    double i_q_ref = 0.0;  // normal reactive current reference (capacitive positive)
    double k_q = 3.0;      // LVRT reactive support coefficient
    double i_max = 1.2;    // current magnitude limit
    bool vfdc_enabled = false;
    double vfdc_hold = 2.0;   // s the pin is kept after LVRT exit
    double tau_meas = 0.005;  // s, PCC voltage measurement filter
};

struct GflcState {
    double theta = 0.0;       // rad, unwrapped PLL angle
    double varpi = 0.0;       // rad/s, PLL frequency deviation
    CtrlMode ctrl_mode = CtrlMode::NORMAL;
    double theta_snapshot = 0.0;  // pinned current angle captured at LVRT entry
    double u_meas = 1.0;          // filtered |U_pcc|
};

struct GfmcParams {
    double m_p = 0.04;    // droop coefficient
    double p_ref = 0.2;   // pu power reference
    double u_set = 1.0;   // CVC voltage setpoint
    double i_max = 1.1;   // current limit
    double eta_1 = 0.0;   // saturation current angle relative to d1
    bool vfdc_enabled = false;
    double epsilon = -kPi / 2.0;  // VFDC current angle constant
};

struct GfmcState {
    double delta = 0.0;  // rad, unwrapped APL angle
    GfmcMode mode = GfmcMode::CVC;
};

/// Effective current references after the active control law.
struct GflcRefs {
    double i_d = 0.0;
    double i_q = 0.0;
    bool pinned = false;     // VFDC: current angle held in the synchronous frame
    double pin_angle = 0.0;  // angle used when pinned
};

GflcRefs gflc_refs(const GflcParams& p, const GflcState& s, double u_pcc_mag,
                   bool fault_active);

/// Current phasor for one GFLC given its references and PLL angle.
Phasor gflc_current_from_refs(const GflcRefs& r, double theta);

/// Spec-level convenience: control law + phasor in one call.
Phasor gflc_current(const GflcParams& p, const GflcState& s, double u_pcc_mag,
                    bool fault_active);

/// Saturated GFMC current in CLC mode. Throws std::logic_error in CVC.
Phasor gfmc_clc_current(const GfmcParams& p, const GfmcState& s);

/// First-order droop: ddelta/dt = omega_base * m_p * (p_ref - p_c1).
double apl_rhs(const GfmcParams& p, double p_c1, double omega_base);

/// Everything the PLL right-hand side needs besides the converter's own
/// (theta, varpi): the GFMC mode and angle, the effective grid voltage and
/// the other converters' frozen current references.
struct PllContext {
    GfmcMode mode = GfmcMode::CVC;
    double delta = 0.0;
    double u_g_eff = 1.0;
    Phasor gfmc_current{};           // used when mode == CLC
    bool gfmc_pinned = false;        // GFMC current angle held in the sync frame
    std::vector<GflcRefs> refs;      // one per GFLC
    std::vector<double> theta;       // PLL angles of all GFLCs
    std::vector<double> x_c2;        // branch reactance per GFLC
};

/// q2-axis voltage of GFLC `self` and the partial derivatives the implicit
/// PLL equation needs. Drops of currents that track a converter frame scale
/// with the PLL frequency ratio `nu`; currents pinned in the synchronous
/// frame stay at nominal frequency.
struct UqTerms {
    double xd_nu = 0.0;    // frequency-coupled d2 projections
    double xd_fix = 0.0;   // synchronous-frame-pinned projections
    double dxd_nu = 0.0;   // d/dtheta of the coupled part
    double dxd_fix = 0.0;  // d/dtheta of the pinned part
    double p_e = 0.0;      // voltage pull (P_E side)
    double c_theta = 0.0;  // dP_E/dtheta

    double xd() const { return xd_nu + xd_fix; }
    double dxd_dtheta() const { return dxd_nu + dxd_fix; }
};

UqTerms uq_terms(const PllContext& ctx, std::size_t self, double theta_self,
                 const NetworkParams& net, const DerivedParams& derived);

inline double uq_value(const UqTerms& t, double nu) {
    return nu * t.xd_nu + t.xd_fix - t.p_e;
}

struct PllDerivs {
    double dtheta = 0.0;
    double dvarpi = 0.0;
};

/// Swing-equation coefficients of the reduced model.
struct PllReducedTerms {
    double t_c2 = 0.0;
    double p_m = 0.0;
    double p_e = 0.0;
    double d_c2 = 0.0;
    double d_star = 0.0;  // second-order damping (CLC and pinned cases)
};

PllReducedTerms pll_reduced_terms(const GflcParams& p, const PllContext& ctx,
                                  std::size_t self, double theta_self,
                                  const NetworkParams& net, const DerivedParams& derived);

/// Reduced-model PLL right-hand side: swing form with equivalent inertia,
/// damping and second-order damping coefficients.
PllDerivs pll_rhs_reduced(const GflcParams& p, double theta, double varpi,
                          std::size_t self, const PllContext& ctx,
                          const NetworkParams& net, const DerivedParams& derived);

/// Reference PLL right-hand side: the PI law evaluated on the q2-axis
/// voltage with the implicit dvarpi/dt feedthrough resolved algebraically.
PllDerivs pll_rhs_reference(const GflcParams& p, double theta, double varpi,
                            std::size_t self, const PllContext& ctx,
                            const NetworkParams& net, const DerivedParams& derived);

/// Constant-power line the GFMC traces in CLC mode under VFDC.
struct VfdcPowerLine {
    double k_a = 0.0;
    double beta = 0.0;
    double p_line = 0.0;  // k_a * sin(epsilon + beta)
};

VfdcPowerLine vfdc_power_line(double i_c1_max, double epsilon, const Phasor& i_c2_pinned,
                              const DerivedParams& derived, double u_g);

/// Current coupling seen by GFLC i from the other converters' injections.
double multi_gflc_coupling(const PllContext& ctx, std::size_t self);

}  // namespace colosim
