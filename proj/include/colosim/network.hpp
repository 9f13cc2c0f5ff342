#pragma once

#include <vector>

#include "colosim/phasor.hpp"

namespace colosim {

/// Star network of Fig.-1 type: GFMC -- x_c1 -- PCC -- x_g -- infinite bus,
/// with each GFLC tied to the PCC through its own x_c2 branch. All values
/// per-unit on (s_base, f_base); reactances at nominal frequency.
struct NetworkParams {
    double x_c1 = 0.05;      // GFMC terminal <-> PCC
    double x_c2 = 0.03;      // GFLC terminal <-> PCC (aggregate default)
    double x_g = 0.58;       // PCC <-> infinite bus
    double u_g = 1.0;        // grid voltage magnitude
    double u_c1_set = 1.0;   // GFMC voltage setpoint
    double f_base = 50.0;    // Hz
    double s_base = 200.0;   // MVA

    double omega_base() const { return 2.0 * kPi * f_base; }
};

/// Constants derived from the branch reactances.
struct DerivedParams {
    double alpha = 0.0;   // x_g / (x_c1 + x_g)
    double y_1g = 0.0;    // 1 / (x_c1 + x_g)
    double l_v = 0.0;     // x_c2 + (1 - alpha) * x_g
    double beta_1 = 0.0;  // x_c1 + x_g
    double gamma = 0.0;   // x_g
    bool weak_coupling_warning = false;  // set when x_c1 is not << x_g
};

/// Algebraic solution of the star network for one operating point.
struct BusSolution {
    Phasor u_pcc;
    std::vector<Phasor> u_c2;  // one per GFLC branch
    Phasor u_c1_terminal;
    Phasor i_c1;
    Phasor i_g;
};

DerivedParams derive_params(const NetworkParams& net);

/// GFMC as ideal voltage source u_c1_set at angle `delta` behind x_c1;
/// GFLCs as current sources. `x_c2` may be empty when every branch uses
/// net.x_c2, otherwise it carries one reactance per GFLC.
BusSolution solve_cvc(double delta, const std::vector<Phasor>& gflc_currents,
                      const NetworkParams& net, const DerivedParams& derived,
                      const std::vector<double>& x_c2 = {}, double u_g_eff = -1.0,
                      double freq_scale = 1.0);

/// GFMC as saturated current source i_c1 (CLC mode).
BusSolution solve_clc(const Phasor& i_c1, const std::vector<Phasor>& gflc_currents,
                      const NetworkParams& net, const std::vector<double>& x_c2 = {},
                      double u_g_eff = -1.0, double freq_scale = 1.0);

enum class GfmcMode { CVC, CLC };

/// GFMC active power from the closed forms; cross-checked against
/// Re{U conj(I)} of the matching bus solution in the tests.
double gfmc_power(GfmcMode mode, double delta, const Phasor& i_c1_clc,
                  const std::vector<Phasor>& gflc_currents, const NetworkParams& net,
                  const DerivedParams& derived, double u_g_eff = -1.0);

/// Residual of the voltage closure identity at an operating point:
/// U_c1_terminal - U_g - beta_1*(i_c1 rot +90deg) - gamma*(sum i_c2 rot +90deg).
std::complex<double> closure_residual(const BusSolution& sol,
                                      const std::vector<Phasor>& gflc_currents,
                                      const NetworkParams& net, const DerivedParams& derived,
                                      double u_g_eff = -1.0);

}  // namespace colosim
