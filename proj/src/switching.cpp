#include "colosim/switching.hpp"

#include <cmath>
#include <limits>
#include <complex>
#include <stdexcept>

namespace colosim {

namespace {
std::complex<double> jay(double x) { return {0.0, x}; }
}

double saturation_guard(double delta, const std::vector<Phasor>& gflc_currents,
                        const NetworkParams& net, const DerivedParams& derived,
                        double i_max, double u_g_eff) {
    const double ug = u_g_eff < 0.0 ? net.u_g : u_g_eff;
    std::complex<double> v = Phasor{net.u_c1_set, delta}.to_complex() -
                             std::complex<double>{ug, 0.0};
    for (const auto& i : gflc_currents) v -= jay(net.x_g) * i.to_complex();
    return derived.y_1g * std::abs(v) - i_max;
}

SwitchingWindow gfmc_angle_window(const Phasor& gflc_current_sum, const NetworkParams& net,
                                  const DerivedParams& derived, double i_max, int k,
                                  double u_g_eff) {
    const double ug = u_g_eff < 0.0 ? net.u_g : u_g_eff;
    SwitchingWindow w;
    w.k = k;

    // Centre of the CLC circle: U_g plus the rotated GFLC drop.
    const std::complex<double> c =
        std::complex<double>{ug, 0.0} +
        jay(derived.gamma) * gflc_current_sum.to_complex();
    const double c_mag = std::abs(c);
    const double radius = derived.beta_1 * i_max;
    const double u1 = net.u_c1_set;

    if (c_mag < 1e-12) {
        w.exists = false;
        w.always_cvc = u1 < radius;
        w.d = u1 < radius ? -2.0 : 2.0;
        return w;
    }

    const double arg_c = std::arg(c);
    w.lambda = kPi / 2.0 - arg_c;
    w.d = (u1 * u1 + c_mag * c_mag - radius * radius) / (2.0 * u1 * c_mag);
    if (w.d >= 1.0) {
        w.exists = false;
        w.always_cvc = false;  // demand exceeds the limit at every angle
        return w;
    }
    if (w.d <= -1.0) {
        w.exists = false;
        w.always_cvc = true;
        return w;
    }
    const double half = std::acos(w.d);
    w.delta_l = arg_c - half + 2.0 * kPi * k;
    w.delta_r = arg_c + half + 2.0 * kPi * k;
    w.exists = true;
    return w;
}

ThetaCrossings gflc_angle_crossings(double delta_p, double i_c2, double eta_2,
                                    const NetworkParams& net, const DerivedParams& derived,
                                    double i_max, double u_g_eff) {
    const double ug = u_g_eff < 0.0 ? net.u_g : u_g_eff;
    ThetaCrossings out;

    const std::complex<double> a_vec =
        Phasor{net.u_c1_set, delta_p}.to_complex() - std::complex<double>{ug, 0.0};
    const double a = std::abs(a_vec);
    const double b = derived.gamma * i_c2;
    const double c = derived.beta_1 * i_max;

    if (b < 1e-12 || a < 1e-12) {
        // No theta dependence left in the guard; a crossing pair cannot exist.
        out.always_admissible = derived.y_1g * std::abs(a - b) < i_max;
        return out;
    }

    const double cos_d = (a * a + b * b - c * c) / (2.0 * a * b);
    if (cos_d >= 1.0) {  // limit is out of reach over the whole turn
        out.always_admissible = false;
        return out;
    }
    if (cos_d <= -1.0) {
        out.always_admissible = true;
        return out;
    }

    const double spread = std::acos(cos_d);
    const double arg_a = std::arg(a_vec);
    // The guard is minimal when the rotated GFLC drop aligns with a_vec; the
    // admissible arc spans +-spread around that alignment.
    out.theta_1 = arg_a - spread - kPi / 2.0 - eta_2;
    out.theta_2 = arg_a + spread - kPi / 2.0 - eta_2;
    out.solvable = true;
    return out;
}

PrintedCrossings gflc_angle_crossings_printed(double i_c2, double eta_1, double i_max,
                                              const NetworkParams& net,
                                              const DerivedParams& derived,
                                              CrossingFormulaReading reading) {
    PrintedCrossings out;
    const double u1 = net.u_c1_set;
    const double w = reading == CrossingFormulaReading::QUADRATIC_TERM
                         ? u1 * u1 - derived.beta_1 * i_max
                         : u1 - derived.beta_1 * i_max;
    const double gi = derived.gamma * i_c2;
    const double ug = net.u_g;
    if (gi < 1e-12 || std::abs(w) < 1e-12) return out;

    const double arg2 = (gi * gi + ug * ug - w * w) / (2.0 * gi * ug);
    const double arg1 = (w * w + ug * ug - gi * gi) / (2.0 * ug * w);
    if (std::abs(arg2) > 1.0 || std::abs(arg1) > 1.0) return out;

    out.theta_2 = kPi / 2.0 - std::acos(arg2);
    out.theta_1 = 2.0 * std::acos(arg1) - out.theta_2 + eta_1;
    out.solvable = true;
    return out;
}

CrossingDiagnostic diagnose_crossing_formula(double delta_p, double i_c2, double eta_2,
                                             double eta_1, const NetworkParams& net,
                                             const DerivedParams& derived, double i_max,
                                             CrossingFormulaReading reading,
                                             double u_g_eff) {
    CrossingDiagnostic d;
    d.oracle = gflc_angle_crossings(delta_p, i_c2, eta_2, net, derived, i_max, u_g_eff);
    d.printed = gflc_angle_crossings_printed(i_c2, eta_1, i_max, net, derived, reading);
    if (d.oracle.solvable != d.printed.solvable) {
        d.discrepancy = true;
        d.max_deviation = std::numeric_limits<double>::infinity();
        return d;
    }
    if (d.oracle.solvable) {
        d.max_deviation = std::max(std::abs(wrap_angle(d.oracle.theta_1 - d.printed.theta_1)),
                                   std::abs(wrap_angle(d.oracle.theta_2 - d.printed.theta_2)));
        d.discrepancy = d.max_deviation > 1e-6;
    }
    return d;
}

void apply_transition(GfmcState& state, GfmcMode target) {
    if (state.mode == target)
        throw std::logic_error("mode transition requested without a guard firing");
    state.mode = target;
}

}  // namespace colosim
