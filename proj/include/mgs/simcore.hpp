#pragma once

// Reduced-order dynamic model of a grid-connected microgrid with ten
// droop-controlled inverter units. The switching-level electromagnetic
// detail of the original plant is replaced by a quasi-stationary phasor
// network: each unit is a Thevenin source (droop voltage command behind its
// coupling impedance), loads are constant-power, and the network is
// re-solved algebraically at every integrator stage. Unit dynamics are the
// first-order measured-power filters plus the droop phase integrator.

#include <array>
#include <complex>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "mgs/common.hpp"

namespace mgs {

using Complex = std::complex<double>;

inline constexpr int kNumDg = 10;
inline constexpr int kNumLines = 9;
inline constexpr int kNumChannels = 36;  // 6 PCC signals + P/Q/f per unit

// Per-unit electrical and control parameters. Defaults follow the reference
// plant data sheet; nominal_voltage is the per-phase RMS droop reference
// (480 V line-to-line system).
struct DgParams {
    double filter_resistance = 0.1;        // R_f, ohm
    double filter_inductance = 4e-3;       // L_f, H
    double filter_capacitance = 200e-6;    // C_f, F (kept for completeness; below the model bandwidth)
    double coupling_resistance = 0.1;      // R_c, ohm
    double switching_freq = 10e3;          // f_sw, Hz (output-rate ceiling only)
    double rating = 10e3;                  // S, VA
    double droop_p = 1e-4;                 // m_P, rad/s per W
    double droop_q = 1e-4;                 // n_Q, V per var
    double dc_link = 1000.0;               // V_dc, V
    double nominal_freq = 60.0;            // f_n, Hz
    double nominal_omega = 2.0 * kPi * 60.0;  // omega_n = 2*pi*f_n, enforced on build
    double nominal_voltage = 480.0 / 1.7320508075688772;  // per-phase RMS, V
    double power_filter_cutoff = 10.0 * kPi;  // omega_c, rad/s (5 Hz)

    void validate(const std::string& context = "") const;  // throws ValidationError naming the field
};

struct LineParams {
    double resistance = 0.07;  // ohm
    double inductance = 0.5e-3;  // H
};

struct GridSource {
    double voltage = 480.0 / 1.7320508075688772;  // per-phase RMS, V
    double frequency = 60.0;                      // Hz
    bool online = true;
};

struct NetworkModel {
    std::array<DgParams, kNumDg> dg_units{};
    std::array<LineParams, kNumLines> lines{};
    // line k joins buses line_ends[k] (0-based bus indices)
    std::array<std::pair<int, int>, kNumLines> line_ends{};
    std::array<Complex, kNumDg> loads{};  // per-bus demand, W + j var
    GridSource grid{};
    LineParams tie{0.07, 0.5e-3};  // grid source to bus 1

    double v_nom_phase() const { return dg_units[0].nominal_voltage; }
    double omega_nominal() const { return dg_units[0].nominal_omega; }
    double freq_nominal() const { return dg_units[0].nominal_freq; }
};

struct BuildOptions {
    std::vector<std::pair<int, DgParams>> dg_overrides;      // 1-based unit index
    std::vector<std::pair<int, LineParams>> line_overrides;  // 1-based line index
    // empty -> radial chain bus1..bus10; else exactly 9 entries of 1-based bus pairs
    std::vector<std::pair<int, int>> topology;
    std::array<Complex, kNumDg> loads = default_loads();
    GridSource grid{};
    LineParams tie{0.07, 0.5e-3};
    double nominal_voltage = 480.0 / 1.7320508075688772;

    static std::array<Complex, kNumDg> default_loads() {
        std::array<Complex, kNumDg> l{};
        l.fill(Complex{5e3, 1e3});  // 50% aggregate loading
        return l;
    }
};

// Validated network with data-sheet defaults where not overridden.
// Throws ValidationError / TopologyError.
NetworkModel build_network(const BuildOptions& options = {});

// Time-varying forcing resolved from the event schedule by the caller.
struct ActiveEffects {
    std::array<Complex, kNumDg> load_add{};   // added demand per bus, W + j var
    double source_mag_factor = 1.0;           // voltage sag scaling on the grid source
    double source_freq_offset_hz = 0.0;       // grid frequency deviation
    std::array<bool, kNumDg> dg_online = online_all<kNumDg>();
    std::array<bool, kNumLines> line_online = online_all<kNumLines>();
    bool tie_online = true;
    // per-phase amplitude factors applied when synthesizing PCC waveforms
    // (single-phase faults cannot enter the positive-sequence solve)
    std::array<double, 3> phase_factor{1.0, 1.0, 1.0};

    template <std::size_t N>
    static std::array<bool, N> online_all() {
        std::array<bool, N> a{};
        a.fill(true);
        return a;
    }
};

struct EffectsProvider {
    virtual ~EffectsProvider() = default;
    virtual ActiveEffects at(double t) const = 0;
};

struct NoEffects final : EffectsProvider {
    ActiveEffects at(double) const override { return ActiveEffects{}; }
};

struct SimState {
    double time = 0.0;
    std::array<double, kNumDg> p_filt{};  // filtered active power, W
    std::array<double, kNumDg> q_filt{};  // filtered reactive power, var
    std::array<double, kNumDg> theta{};   // phase in the synchronous frame, rad
    double source_phase = 0.0;            // grid source phase drift, rad

    // filled by the network solve
    std::array<Complex, kNumDg> bus_v{};  // per-phase RMS phasors, V
    Complex source_v{};
    std::array<Complex, kNumDg> s_inj{};  // power injected at each bus, VA
    Complex s_grid{};                     // source-terminal injection, VA
    Complex tie_current{};                // source -> bus 1, A

    std::array<bool, kNumDg> dg_online = ActiveEffects::online_all<kNumDg>();
    std::array<bool, kNumLines> line_online = ActiveEffects::online_all<kNumLines>();
    bool tie_online = true;
    std::array<double, 3> phase_factor{1.0, 1.0, 1.0};
    bool solved = false;
};

// P-f / Q-V droop: omega = omega_n - m_P * P, |E| = V_nom - n_Q * Q.
struct DroopSetpoints {
    double omega;       // rad/s
    double v_mag_cmd;   // per-phase RMS, V
};
DroopSetpoints droop_setpoints(double p_filt, double q_filt, const DgParams& params);

// Phasor current through an impedance from node a to node b.
Complex line_current(Complex v_a, Complex v_b, const LineParams& line, double omega);

struct SolveReport {
    double residual_pu = 0.0;  // max nodal current mismatch / I_base
    int iterations = 0;
};

// Solves the complex nodal equations for the state's sources/flags and
// writes bus phasors and injections back into the state.
// Throws SolverError when no source is online or the network is singular.
SolveReport solve_network(SimState& state, const NetworkModel& net,
                          const ActiveEffects& effects = ActiveEffects{});

// One fixed RK4 step of the unit dynamics; the network is re-solved at each
// stage. Effects are sampled at stage times. Leaves the state solved and
// consistent at time + dt. Throws ValidationError for dt <= 0 and
// SolverError naming the offending channel if the state leaves the finite
// range.
void step(SimState& state, const NetworkModel& net, double dt, const EffectsProvider& effects);

// Marches the no-event system with a coarse internal step until the power
// filters settle (used to start recorded runs from quiescence).
SimState settle_to_steady_state(const NetworkModel& net, double tol = 1e-6, double t_max = 10.0);

// One simulator output sample: 6 instantaneous PCC signals + P/Q/f per unit.
struct MeasurementFrame {
    double time = 0.0;
    std::array<double, kNumChannels> channels{};
};

// Channel layout (fixed order, mirrored by the dataset schema):
//   0..2   V1,V2,V3   instantaneous PCC phase voltages, V
//   3..5   I1,I2,I3   instantaneous PCC phase currents (tie current), A
//   6..15  P_DG1..10  injected active power, W
//   16..25 Q_DG1..10  injected reactive power, var
//   26..35 f_DG1..10  droop frequency, Hz
const std::array<std::string, kNumChannels>& channel_names();
int channel_index(const std::string& name);  // throws FormatError for unknown names

// Synthesizes a frame from a solved state. PCC is bus 1 (the grid-tie bus).
MeasurementFrame measure(const SimState& state, const NetworkModel& net);

// Decomposition of the solved operating point used by the balance invariant:
// p_dg_total + p_grid == p_loads + p_line_losses (tie loss included).
struct PowerBalance {
    double p_dg_total = 0.0;
    double p_grid = 0.0;
    double p_loads = 0.0;
    double p_line_losses = 0.0;
    double residual() const { return p_dg_total + p_grid - p_loads - p_line_losses; }
};
PowerBalance compute_power_balance(const SimState& state, const NetworkModel& net,
                                   const ActiveEffects& effects = ActiveEffects{});

}  // namespace mgs
