#pragma once

#include <functional>
#include <string>
#include <vector>

#include "colosim/converter.hpp"
#include "colosim/network.hpp"
#include "colosim/stability.hpp"

namespace colosim {

enum class Model { REDUCED, REFERENCE };

/// How the CLC -> CVC release is granted. LEVEL releases whenever the
/// hypothetical CVC current fits under the limit; CROSSING releases only
/// when the demand decays through the limit along a trajectory, which
/// stands in for the voltage-loop windup of the physical limiter.
enum class SatPolicy { LEVEL, CROSSING };

struct FaultSpec {
    double t_start = 1.0;
    double duration = 0.05;
    double rho = 0.3;  // residual grid-voltage fraction
};

struct SimSpec {
    double t_end = 10.0;
    double dt = 5e-5;
    double event_tol = 1e-9;          // s, bisection window for mode events
    Model model = Model::REDUCED;
    int trace_decimation = 20;
    bool log_energy = true;
    double min_event_separation = 1e-6;  // s, numerical Zeno guard
};

struct ScenarioConfig {
    std::string name = "scenario";
    NetworkParams net;
    GfmcParams gfmc;
    std::vector<GflcParams> gflcs;
    FaultSpec fault;
    SimSpec sim;
    SatPolicy sat_policy = SatPolicy::LEVEL;
    double release_dwell = 0.0;  // s the demand must stay under the limit
                                 // before a CROSSING release is granted
};

struct SimState {
    double t = 0.0;
    GfmcState gfmc;
    std::vector<GflcState> gflcs;

    int mode_indicator() const { return gfmc.mode == GfmcMode::CVC ? 1 : 0; }
};

enum class EventKind { FAULT_ON, FAULT_CLEAR, CVC_TO_CLC, CLC_TO_CVC, VFDC_ON, VFDC_OFF };

const char* to_string(EventKind k);

struct Event {
    double t = 0.0;
    EventKind kind = EventKind::FAULT_ON;
    SimState state;
    std::vector<GflcRefs> refs;
    double u_g_eff = 1.0;
};

struct TraceRow {
    double t = 0.0;
    int s = 1;
    double delta = 0.0;
    double p_c1 = 0.0;
    double i_c1_mag = 0.0;
    double u_pcc_mag = 0.0;
    std::vector<double> theta;
    std::vector<double> varpi_pu;  // reported per-unit on omega_base
    std::vector<double> energy;   // active-mode Lyapunov V, when logged
};

struct Trace {
    std::vector<TraceRow> rows;
};

struct EventLog {
    std::vector<Event> events;
};

enum class PllVerdict { STABLE, UNSTABLE };

const char* to_string(PllVerdict v);
const char* to_string(GfmcMode m);

struct Summary {
    std::string name;
    GfmcMode final_mode = GfmcMode::CVC;
    std::vector<PllVerdict> pll;
    bool pll_all_stable = false;
    bool diverged = false;
    double t_diverged = -1.0;
    GfmcMode clearance_mode = GfmcMode::CVC;
    std::vector<double> clearance_energy;      // active-mode V at clearance
    std::vector<double> clearance_energy_cvc;  // CVC-referenced V at clearance
    double final_delta = 0.0;
    double final_p_c1 = 0.0;
    std::vector<double> final_theta;
    std::vector<double> final_varpi;     // rad/s
    std::vector<double> final_u_meas;
    std::vector<double> final_theta_sep; // SEP of the final mode per GFLC
    std::vector<EnergyAudit> audits;     // per GFLC, post-clearance cycles
    double wall_seconds = 0.0;
};

struct ScenarioResult {
    Trace trace;
    EventLog events;
    Summary summary;
};

/// Pre-fault equilibrium: droop power balance plus every PLL at its SEP.
/// Throws std::domain_error when no admissible CVC equilibrium exists.
struct Equilibrium {
    double delta = 0.0;
    std::vector<double> theta;
    double u_pcc_mag = 0.0;
};

Equilibrium solve_equilibrium(const ScenarioConfig& cfg);

class HybridSimulator {
  public:
    explicit HybridSimulator(const ScenarioConfig& cfg);

    /// Full scenario: init at equilibrium, fault, clearance, run to t_end.
    ScenarioResult run();

    /// Free run from a caller-supplied initial state (basin mapping).
    ScenarioResult run_from(const SimState& initial);

    /// Per-sample observer, called at decimated steps with the live context.
    using Observer = std::function<void(const SimState&, const PllContext&)>;
    void set_observer(Observer obs) { observer_ = std::move(obs); }

  private:
    struct Impl;
    ScenarioConfig cfg_;
    Observer observer_;

    ScenarioResult execute(SimState state, bool with_fault);
};

/// One integration step of the published step-operator contract: advances
/// the state by cfg.sim.dt with frozen references, locating guard events.
SimState step(const SimState& state, const ScenarioConfig& cfg);

/// Post-clearance switching-cycle energy audit for one GFLC.
EnergyAudit switching_energy_audit(const EventLog& events, const ScenarioConfig& cfg,
                                   std::size_t gflc_index);

/// Max relative deviation between the reduced and reference right-hand
/// sides sampled along a scenario trajectory.
struct CrossCheckReport {
    double max_rel_deviation = 0.0;
    double max_rel_deviation_at_zero_varpi = 0.0;
    int samples = 0;
};

CrossCheckReport cross_check(const ScenarioConfig& cfg, int n_samples);

}  // namespace colosim
