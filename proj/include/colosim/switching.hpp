#pragma once

#include <optional>
#include <vector>

#include "colosim/converter.hpp"
#include "colosim/network.hpp"
#include "colosim/phasor.hpp"

namespace colosim {

/// Range of APL angles that keeps the CVC subsystem admissible in period k.
struct SwitchingWindow {
    double delta_l = 0.0;
    double delta_r = 0.0;
    int k = 0;
    double lambda = 0.0;
    double d = 0.0;
    bool exists = false;      // false when |d| > 1
    bool always_cvc = false;  // d < -1: the limit is never reached
};

/// PLL angles at which the frozen-delta system enters (theta_1) and leaves
/// (theta_2) the CVC-admissible arc.
struct ThetaCrossings {
    double theta_1 = 0.0;
    double theta_2 = 0.0;
    bool solvable = false;
    bool always_admissible = false;  // limit never reached over the full turn
};

/// CVC current demand margin: |i_c1 demanded by the voltage source| - i_max.
/// Negative values mean the CVC subsystem is admissible.
double saturation_guard(double delta, const std::vector<Phasor>& gflc_currents,
                        const NetworkParams& net, const DerivedParams& derived,
                        double i_max, double u_g_eff = -1.0);

/// Closed-form window endpoints for a frozen GFLC current phasor; the
/// endpoints are saturation_guard roots in delta.
SwitchingWindow gfmc_angle_window(const Phasor& gflc_current_sum, const NetworkParams& net,
                                  const DerivedParams& derived, double i_max, int k = 0,
                                  double u_g_eff = -1.0);

/// Closed-form crossing angles for a frozen APL angle delta_p; roots of the
/// guard in theta for a GFLC current of magnitude i_c2 at angle theta + eta_2.
ThetaCrossings gflc_angle_crossings(double delta_p, double i_c2, double eta_2,
                                    const NetworkParams& net, const DerivedParams& derived,
                                    double i_max, double u_g_eff = -1.0);

/// The crossing-angle formula in its two literature readings; kept for
/// comparison against the guard-root oracle, which is authoritative.
enum class CrossingFormulaReading { QUADRATIC_TERM, LINEAR_TERM };

struct PrintedCrossings {
    double theta_1 = 0.0;
    double theta_2 = 0.0;
    bool solvable = false;
};

PrintedCrossings gflc_angle_crossings_printed(double i_c2, double eta_1, double i_max,
                                              const NetworkParams& net,
                                              const DerivedParams& derived,
                                              CrossingFormulaReading reading);

/// Comparison record between the closed-form crossings and the printed
/// formula; a discrepancy diagnostic is raised when they disagree.
struct CrossingDiagnostic {
    ThetaCrossings oracle;
    PrintedCrossings printed;
    bool discrepancy = false;
    double max_deviation = 0.0;
};

CrossingDiagnostic diagnose_crossing_formula(double delta_p, double i_c2, double eta_2,
                                             double eta_1, const NetworkParams& net,
                                             const DerivedParams& derived, double i_max,
                                             CrossingFormulaReading reading,
                                             double u_g_eff = -1.0);

/// Discrete CVC<->CLC transition. Angles and frequency states are left
/// untouched; only the mode flips. Throws std::logic_error when the target
/// equals the current mode.
void apply_transition(GfmcState& state, GfmcMode target);

}  // namespace colosim
