#include "colosim/network.hpp"

#include <stdexcept>

namespace colosim {

namespace {

std::complex<double> jay(double x) { return {0.0, x}; }

std::vector<double> branch_reactances(const NetworkParams& net, std::size_t n,
                                      const std::vector<double>& x_c2) {
    if (x_c2.empty()) return std::vector<double>(n, net.x_c2);
    if (x_c2.size() != n)
        throw std::invalid_argument("x_c2 list must match the number of GFLC currents");
    return x_c2;
}

}  // namespace

DerivedParams derive_params(const NetworkParams& net) {
    if (net.x_c1 <= 0.0 || net.x_c2 <= 0.0 || net.x_g <= 0.0)
        throw std::invalid_argument("branch reactances must be positive");
    if (net.u_g <= 0.0 || net.u_g > 1.5 || net.u_c1_set <= 0.0 || net.u_c1_set > 1.5)
        throw std::invalid_argument("voltage magnitudes must lie in (0, 1.5]");

    DerivedParams d;
    d.alpha = net.x_g / (net.x_c1 + net.x_g);
    d.y_1g = 1.0 / (net.x_c1 + net.x_g);
    d.l_v = net.x_c2 + (1.0 - d.alpha) * net.x_g;
    d.beta_1 = net.x_c1 + net.x_g;
    d.gamma = net.x_g;
    d.weak_coupling_warning = net.x_c1 > 0.5 * net.x_g;
    return d;
}

BusSolution solve_cvc(double delta, const std::vector<Phasor>& gflc_currents,
                      const NetworkParams& net, const DerivedParams& derived,
                      const std::vector<double>& x_c2, double u_g_eff, double freq_scale) {
    const double ug = u_g_eff < 0.0 ? net.u_g : u_g_eff;
    const double nu = freq_scale;
    const auto xs = branch_reactances(net, gflc_currents.size(), x_c2);

    std::complex<double> i_sum{0.0, 0.0};
    for (const auto& i : gflc_currents) i_sum += i.to_complex();

    const std::complex<double> u_c1 = Phasor{net.u_c1_set, delta}.to_complex();
    // alpha is a reactance ratio, so it is frequency-independent.
    const std::complex<double> u_pcc = derived.alpha * u_c1 +
                                       (1.0 - derived.alpha) * ug +
                                       jay((1.0 - derived.alpha) * nu * net.x_g) * i_sum;

    BusSolution sol;
    sol.u_pcc = Phasor::from_complex(u_pcc);
    sol.u_c2.reserve(gflc_currents.size());
    for (std::size_t k = 0; k < gflc_currents.size(); ++k)
        sol.u_c2.push_back(
            Phasor::from_complex(u_pcc + jay(nu * xs[k]) * gflc_currents[k].to_complex()));
    sol.u_c1_terminal = Phasor::from_complex(u_c1);
    sol.i_c1 = Phasor::from_complex((u_c1 - u_pcc) / jay(nu * net.x_c1));
    sol.i_g = Phasor::from_complex((u_pcc - std::complex<double>{ug, 0.0}) / jay(nu * net.x_g));
    return sol;
}

BusSolution solve_clc(const Phasor& i_c1, const std::vector<Phasor>& gflc_currents,
                      const NetworkParams& net, const std::vector<double>& x_c2,
                      double u_g_eff, double freq_scale) {
    const double ug = u_g_eff < 0.0 ? net.u_g : u_g_eff;
    const double nu = freq_scale;
    const auto xs = branch_reactances(net, gflc_currents.size(), x_c2);

    std::complex<double> i_sum = i_c1.to_complex();
    for (const auto& i : gflc_currents) i_sum += i.to_complex();

    const std::complex<double> u_pcc = std::complex<double>{ug, 0.0} + jay(nu * net.x_g) * i_sum;

    BusSolution sol;
    sol.u_pcc = Phasor::from_complex(u_pcc);
    sol.u_c2.reserve(gflc_currents.size());
    for (std::size_t k = 0; k < gflc_currents.size(); ++k)
        sol.u_c2.push_back(
            Phasor::from_complex(u_pcc + jay(nu * xs[k]) * gflc_currents[k].to_complex()));
    sol.u_c1_terminal = Phasor::from_complex(u_pcc + jay(nu * net.x_c1) * i_c1.to_complex());
    sol.i_c1 = i_c1;
    sol.i_g = Phasor::from_complex((u_pcc - std::complex<double>{ug, 0.0}) / jay(nu * net.x_g));
    return sol;
}

double gfmc_power(GfmcMode mode, double delta, const Phasor& i_c1_clc,
                  const std::vector<Phasor>& gflc_currents, const NetworkParams& net,
                  const DerivedParams& derived, double u_g_eff) {
    const double ug = u_g_eff < 0.0 ? net.u_g : u_g_eff;
    if (mode == GfmcMode::CVC) {
        double p = net.u_c1_set * ug * derived.y_1g * std::sin(delta);
        for (const auto& i : gflc_currents)
            p -= derived.alpha * net.u_c1_set * i.mag * std::cos(delta - i.ang);
        return p;
    }
    // CLC: P = Re{U_pcc conj(I_c1)} expanded; the grid-voltage term plus the
    // GFLC reaction through gamma = x_g.
    double p = ug * i_c1_clc.mag * std::cos(i_c1_clc.ang);
    for (const auto& i : gflc_currents)
        p -= derived.gamma * i_c1_clc.mag * i.mag * std::sin(i.ang - i_c1_clc.ang);
    return p;
}

std::complex<double> closure_residual(const BusSolution& sol,
                                      const std::vector<Phasor>& gflc_currents,
                                      const NetworkParams& net, const DerivedParams& derived,
                                      double u_g_eff) {
    const double ug = u_g_eff < 0.0 ? net.u_g : u_g_eff;
    std::complex<double> i2_sum{0.0, 0.0};
    for (const auto& i : gflc_currents) i2_sum += i.to_complex();
    return sol.u_c1_terminal.to_complex() - std::complex<double>{ug, 0.0} -
           jay(derived.beta_1) * sol.i_c1.to_complex() - jay(derived.gamma) * i2_sum;
}

}  // namespace colosim
