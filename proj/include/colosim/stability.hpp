#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "colosim/converter.hpp"
#include "colosim/network.hpp"

namespace colosim {

enum class LineVariant { BASE, MULTI, VFDC };

/// Linear (or cosine-tapered, for the VFDC variant) damping-condition
/// function compared against the sine curve of the active subsystem.
struct DampingLine {
    double intercept = 0.0;    // value at theta_s
    double slope_conv = 0.0;   // converter-current terms; cos-tapered under VFDC
    double slope_fixed = 0.0;  // remaining terms
    double theta_s = 0.0;
    double delta_eff = 0.0;    // delta for CVC, 0 for CLC
    GfmcMode mode = GfmcMode::CVC;
    LineVariant variant = LineVariant::BASE;

    double slope() const { return slope_conv + slope_fixed; }
    double value(double theta) const {
        const double taper =
            variant == LineVariant::VFDC ? std::cos(theta_s - theta) : 1.0;
        return intercept + (slope_conv * taper + slope_fixed) * (theta - theta_s);
    }
};

struct StabilityBoundary {
    double theta_min = 0.0;
    double theta_max = 0.0;
    double v_max = 0.0;
    bool collapsed = false;  // damping condition fails immediately above theta_s
};

/// Closed-form SEP seeds as printed; arguments are the frozen projections.
double sep_cvc_closed(double i_d_eff, double delta, const NetworkParams& net,
                      const DerivedParams& derived);
double sep_clc_closed(double i_c1_d1, double i_d_eff, const NetworkParams& net,
                      double u_g_eff = -1.0);

/// Exact SEPs: Newton-polished roots of the corresponding subsystem
/// right-hand side; the returned angle zeroes the PLL rhs to 1e-9.
double sep_cvc(const PllContext& ctx, std::size_t self, const NetworkParams& net,
               const DerivedParams& derived);
double sep_clc(const PllContext& ctx, std::size_t self, const NetworkParams& net,
               const DerivedParams& derived);

/// Exact SEP of the context's active mode.
double sep_exact(const PllContext& ctx, std::size_t self, const NetworkParams& net,
                 const DerivedParams& derived);

/// Transient energy of one GFLC: kinetic term plus the exact reduced-model
/// potential integrated from the subsystem SEP (adaptive Simpson, 1e-10).
double lyapunov_energy(double theta, double varpi, const GflcParams& p,
                       const PllContext& ctx, std::size_t self, const NetworkParams& net,
                       const DerivedParams& derived,
                       std::optional<double> theta_s = std::nullopt);

/// Fixed-order Gauss-Legendre variant of the energy evaluation, for trace
/// logging where the adaptive tolerance is not needed.
double lyapunov_energy_fast(double theta, double varpi, const GflcParams& p,
                            const PllContext& ctx, std::size_t self,
                            const NetworkParams& net, const DerivedParams& derived,
                            double theta_s);

DampingLine damping_line(GfmcMode mode, LineVariant variant, const GflcParams& p,
                         const PllContext& ctx, std::size_t self, const NetworkParams& net,
                         const DerivedParams& derived);

/// Boundary angles from the sine-vs-line geometry alone (no energies).
StabilityBoundary boundary_from_line(const DampingLine& line);

/// Boundary plus the critical energy of the enclosed region.
StabilityBoundary stability_boundary(const DampingLine& line, const GflcParams& p,
                                     const PllContext& ctx, std::size_t self,
                                     const NetworkParams& net, const DerivedParams& derived);

/// One CLC -> CVC -> CLC switching cycle as logged by the simulator.
struct EnergyCycle {
    double t_entry = 0.0;       // CVC entry (theta_ka)
    double t_exit = 0.0;        // CVC exit (theta_kb)
    double theta_ka = 0.0;
    double theta_kb = 0.0;
    double theta_s_v = 0.0;     // CVC equilibrium at the cycle's APL angle
    double theta_s_l = 0.0;     // CLC equilibrium at the cycle's APL angle
    double v_entry = 0.0;       // CLC-side energy at entry
    double v_exit = 0.0;        // CLC-side energy at exit
    double dv_p_entry = 0.0;    // potential jump CLC -> CVC
    double dv_p_exit = 0.0;     // potential jump CVC -> CLC
    double dv_damping = 0.0;    // energy change across the CVC interval
    double dv_total = 0.0;
};

struct EnergyAudit {
    std::vector<EnergyCycle> cycles;
};

/// Cycles long enough to be genuine angle-driven switching events, whose
/// CVC interval brackets the CVC equilibrium; grazing re-limit bounces at
/// the swing turning points are excluded.
std::vector<EnergyCycle> significant_cycles(const EnergyAudit& audit,
                                            double min_duration = 5e-3);

/// Report of the randomized geometric property checks.
struct AppendixReport {
    int draws = 0;
    int checked_ordering = 0;       // theta_1 < theta_s^V < theta_2 draws
    int ordering_violations = 0;
    int checked_sep_order = 0;      // theta_s^V <= theta_s^L draws
    int sep_order_violations = 0;
    int checked_delta_max = 0;      // delta_p^max <= sigma draws
    int delta_max_violations = 0;
    int skipped = 0;
};

AppendixReport check_appendix_properties(int n_draws, std::uint64_t seed,
                                         const NetworkParams& base_net);

/// Deterministic uniform draw helper shared by the property suites.
class SplitRng {
  public:
    explicit SplitRng(std::uint64_t seed) : state_(seed) {}
    double uniform(double lo, double hi);
    std::uint64_t next();

  private:
    std::uint64_t state_;
};

}  // namespace colosim
