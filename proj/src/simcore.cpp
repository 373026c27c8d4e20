#include "mgs/simcore.hpp"

#include <algorithm>
#include <cmath>

namespace mgs {

namespace {

void require_positive(double v, const char* field, const std::string& context) {
    if (!(v > 0.0) || !std::isfinite(v)) {
        throw ValidationError(context + field + " must be strictly positive, got " +
                              format_double(v));
    }
}

constexpr double kSqrt2 = 1.4142135623730951;

}  // namespace

void DgParams::validate(const std::string& context) const {
    require_positive(filter_resistance, "filter_resistance", context);
    require_positive(filter_inductance, "filter_inductance", context);
    require_positive(filter_capacitance, "filter_capacitance", context);
    require_positive(coupling_resistance, "coupling_resistance", context);
    require_positive(switching_freq, "switching_freq", context);
    require_positive(rating, "rating", context);
    require_positive(droop_p, "droop_p", context);
    require_positive(droop_q, "droop_q", context);
    require_positive(dc_link, "dc_link", context);
    require_positive(nominal_freq, "nominal_freq", context);
    require_positive(nominal_voltage, "nominal_voltage", context);
    require_positive(power_filter_cutoff, "power_filter_cutoff", context);
}

NetworkModel build_network(const BuildOptions& options) {
    NetworkModel net;
    for (auto& dg : net.dg_units) {
        dg.nominal_voltage = options.nominal_voltage;
    }
    // line groups: even-numbered lines are the heavier segments
    for (int l = 0; l < kNumLines; ++l) {
        const int one_based = l + 1;
        if (one_based % 2 == 0) {
            net.lines[l] = LineParams{0.1, 1.5e-3};
        } else {
            net.lines[l] = LineParams{0.07, 0.5e-3};
        }
    }

    for (const auto& [idx, params] : options.dg_overrides) {
        if (idx < 1 || idx > kNumDg) {
            throw ValidationError("dg override index out of range 1..10: " + std::to_string(idx));
        }
        net.dg_units[idx - 1] = params;
    }
    for (const auto& [idx, params] : options.line_overrides) {
        if (idx < 1 || idx > kNumLines) {
            throw ValidationError("line override index out of range 1..9: " + std::to_string(idx));
        }
        net.lines[idx - 1] = params;
    }

    if (options.topology.empty()) {
        for (int l = 0; l < kNumLines; ++l) {
            net.line_ends[l] = {l, l + 1};  // radial chain
        }
    } else {
        if (options.topology.size() != kNumLines) {
            throw TopologyError("custom topology must list exactly 9 lines, got " +
                                std::to_string(options.topology.size()));
        }
        for (int l = 0; l < kNumLines; ++l) {
            auto [a, b] = options.topology[static_cast<std::size_t>(l)];
            if (a < 1 || a > kNumDg || b < 1 || b > kNumDg || a == b) {
                throw TopologyError("line " + std::to_string(l + 1) + " joins invalid buses " +
                                    std::to_string(a) + "-" + std::to_string(b));
            }
            net.line_ends[l] = {a - 1, b - 1};
        }
    }

    net.loads = options.loads;
    net.grid = options.grid;
    net.tie = options.tie;

    int i = 1;
    for (auto& dg : net.dg_units) {
        dg.nominal_omega = 2.0 * kPi * dg.nominal_freq;  // invariant, not an input
        dg.validate("DG" + std::to_string(i) + ": ");
        ++i;
    }
    for (int l = 0; l < kNumLines; ++l) {
        require_positive(net.lines[l].resistance, "resistance", "line " + std::to_string(l + 1) + ": ");
        require_positive(net.lines[l].inductance, "inductance", "line " + std::to_string(l + 1) + ": ");
    }
    require_positive(net.tie.resistance, "resistance", "tie: ");
    require_positive(net.tie.inductance, "inductance", "tie: ");
    require_positive(net.grid.voltage, "grid.voltage", "");
    require_positive(net.grid.frequency, "grid.frequency", "");

    // connectivity over the bus graph (the tie does not join DG buses)
    std::array<bool, kNumDg> seen{};
    std::vector<int> stack{0};
    seen[0] = true;
    while (!stack.empty()) {
        int b = stack.back();
        stack.pop_back();
        for (int l = 0; l < kNumLines; ++l) {
            auto [x, y] = net.line_ends[l];
            int other = -1;
            if (x == b) other = y;
            if (y == b) other = x;
            if (other >= 0 && !seen[static_cast<std::size_t>(other)]) {
                seen[static_cast<std::size_t>(other)] = true;
                stack.push_back(other);
            }
        }
    }
    for (int b = 0; b < kNumDg; ++b) {
        if (!seen[static_cast<std::size_t>(b)]) {
            throw TopologyError("topology is disconnected: bus " + std::to_string(b + 1) +
                                " unreachable from bus 1");
        }
    }
    return net;
}

DroopSetpoints droop_setpoints(double p_filt, double q_filt, const DgParams& params) {
    return DroopSetpoints{params.nominal_omega - params.droop_p * p_filt,
                          params.nominal_voltage - params.droop_q * q_filt};
}

Complex line_current(Complex v_a, Complex v_b, const LineParams& line, double omega) {
    const Complex z{line.resistance, omega * line.inductance};
    return (v_a - v_b) / z;
}

namespace {

// Dense complex LU with partial pivoting; the network is 10x10.
class ComplexLu {
public:
    void factor(std::array<Complex, kNumDg * kNumDg>& a) {
        a_ = &a;
        for (int k = 0; k < kNumDg; ++k) {
            int p = k;
            double best = std::abs(a[idx(k, k)]);
            for (int i = k + 1; i < kNumDg; ++i) {
                double m = std::abs(a[idx(i, k)]);
                if (m > best) {
                    best = m;
                    p = i;
                }
            }
            if (!(best > 1e-9)) {
                throw SolverError("singular network: no online source reaches bus " +
                                  std::to_string(k + 1));
            }
            perm_[k] = p;
            if (p != k) {
                for (int j = 0; j < kNumDg; ++j) std::swap(a[idx(k, j)], a[idx(p, j)]);
            }
            const Complex inv_pivot = 1.0 / a[idx(k, k)];
            for (int i = k + 1; i < kNumDg; ++i) {
                const Complex f = a[idx(i, k)] * inv_pivot;
                a[idx(i, k)] = f;
                for (int j = k + 1; j < kNumDg; ++j) a[idx(i, j)] -= f * a[idx(k, j)];
            }
        }
    }

    void solve(std::array<Complex, kNumDg>& b) const {
        const auto& a = *a_;
        for (int k = 0; k < kNumDg; ++k) {
            if (perm_[k] != k) std::swap(b[k], b[perm_[k]]);
            for (int i = k + 1; i < kNumDg; ++i) b[i] -= a[idx(i, k)] * b[k];
        }
        for (int i = kNumDg - 1; i >= 0; --i) {
            for (int j = i + 1; j < kNumDg; ++j) b[i] -= a[idx(i, j)] * b[j];
            b[i] /= a[idx(i, i)];
        }
    }

private:
    static int idx(int i, int j) { return i * kNumDg + j; }
    const std::array<Complex, kNumDg * kNumDg>* a_ = nullptr;
    std::array<int, kNumDg> perm_{};
};

// Per-phase current drawn by a constant-power load. Powers are three-phase
// totals over per-phase RMS phasors, hence S/3. A quadratic rolloff below
// 10% voltage keeps the fixed point defined through deep sags.
Complex load_current(Complex s, Complex v, double v_nom) {
    const double mag = std::abs(v);
    if (mag <= 0.0 || s == Complex{}) return Complex{};
    const double v_min = 0.1 * v_nom;
    if (mag < v_min) {
        const double k = (mag / v_min);
        s *= k * k;
    }
    return std::conj(s / (3.0 * v));
}

}  // namespace

SolveReport solve_network(SimState& state, const NetworkModel& net, const ActiveEffects& effects) {
    const double omega = net.omega_nominal();
    const double v_nom = net.v_nom_phase();
    const bool grid_on = net.grid.online && effects.tie_online;

    bool any_source = grid_on;
    for (int k = 0; k < kNumDg; ++k) any_source = any_source || effects.dg_online[static_cast<std::size_t>(k)];
    if (!any_source) {
        throw SolverError("no online source: grid tie open and all units offline");
    }

    std::array<Complex, kNumDg * kNumDg> y{};
    std::array<Complex, kNumDg> i_fixed{};  // source injections independent of V

    const Complex v_src =
        net.grid.voltage * effects.source_mag_factor *
        Complex{std::cos(state.source_phase), std::sin(state.source_phase)};
    Complex y_tie{};
    if (grid_on) {
        y_tie = 1.0 / Complex{net.tie.resistance, omega * net.tie.inductance};
        y[0] += y_tie;
        i_fixed[0] += y_tie * v_src;
    }
    for (int l = 0; l < kNumLines; ++l) {
        if (!effects.line_online[static_cast<std::size_t>(l)]) continue;
        const auto [a, b] = net.line_ends[l];
        const auto& lp = net.lines[l];
        const Complex yl = 1.0 / Complex{lp.resistance, omega * lp.inductance};
        y[a * kNumDg + a] += yl;
        y[b * kNumDg + b] += yl;
        y[a * kNumDg + b] -= yl;
        y[b * kNumDg + a] -= yl;
    }
    std::array<Complex, kNumDg> emf{};
    std::array<Complex, kNumDg> y_cpl{};
    for (int k = 0; k < kNumDg; ++k) {
        if (!effects.dg_online[static_cast<std::size_t>(k)]) continue;
        const auto& dg = net.dg_units[static_cast<std::size_t>(k)];
        const auto sp = droop_setpoints(state.p_filt[static_cast<std::size_t>(k)],
                                        state.q_filt[static_cast<std::size_t>(k)], dg);
        const double th = state.theta[static_cast<std::size_t>(k)];
        emf[k] = sp.v_mag_cmd * Complex{std::cos(th), std::sin(th)};
        y_cpl[k] = 1.0 / Complex{dg.coupling_resistance, omega * dg.filter_inductance};
        y[k * kNumDg + k] += y_cpl[k];
        i_fixed[k] += emf[k] * y_cpl[k];
    }

    std::array<Complex, kNumDg> loads{};
    for (int k = 0; k < kNumDg; ++k) {
        loads[k] = net.loads[static_cast<std::size_t>(k)] + effects.load_add[static_cast<std::size_t>(k)];
    }

    ComplexLu lu;
    lu.factor(y);  // y now holds the factors

    // Gauss fixed point on the constant-power load currents, warm-started
    // from the previous solution.
    std::array<Complex, kNumDg> v{};
    bool warm = state.solved;
    for (int k = 0; k < kNumDg && warm; ++k) {
        if (std::abs(state.bus_v[static_cast<std::size_t>(k)]) < 1e-3 * v_nom) warm = false;
    }
    for (int k = 0; k < kNumDg; ++k) {
        v[k] = warm ? state.bus_v[static_cast<std::size_t>(k)] : Complex{v_nom, 0.0};
    }

    const double i_base = net.dg_units[0].rating / (3.0 * v_nom);
    const double tol = 1e-9 * i_base;
    constexpr int kMaxIter = 200;
    double residual = 0.0;
    int used = 0;
    for (int it = 0; it < kMaxIter; ++it) {
        std::array<Complex, kNumDg> rhs = i_fixed;
        std::array<Complex, kNumDg> i_load{};
        for (int k = 0; k < kNumDg; ++k) {
            i_load[k] = load_current(loads[k], v[k], v_nom);
            rhs[k] -= i_load[k];
        }
        lu.solve(rhs);
        used = it + 1;
        // mismatch of the linear solve against loads re-evaluated at the new voltages
        residual = 0.0;
        for (int k = 0; k < kNumDg; ++k) {
            const Complex d = load_current(loads[k], rhs[k], v_nom) - i_load[k];
            residual = std::max(residual, std::abs(d));
        }
        v = rhs;
        if (residual <= tol) break;
    }
    if (residual > tol) {
        throw SolverError("network solve did not converge: residual " +
                          format_double(residual / i_base) + " pu after " +
                          std::to_string(kMaxIter) + " iterations at t=" +
                          format_double(state.time));
    }

    for (int k = 0; k < kNumDg; ++k) {
        state.bus_v[static_cast<std::size_t>(k)] = v[k];
        if (effects.dg_online[static_cast<std::size_t>(k)]) {
            const Complex inj = (emf[k] - v[k]) * y_cpl[k];
            state.s_inj[static_cast<std::size_t>(k)] = 3.0 * v[k] * std::conj(inj);
        } else {
            state.s_inj[static_cast<std::size_t>(k)] = Complex{};  // offline units inject nothing
        }
    }
    state.source_v = grid_on ? v_src : Complex{};
    if (grid_on) {
        state.tie_current = (v_src - v[0]) * y_tie;
        state.s_grid = 3.0 * v_src * std::conj(state.tie_current);
    } else {
        state.tie_current = Complex{};
        state.s_grid = Complex{};
    }
    state.dg_online = effects.dg_online;
    state.line_online = effects.line_online;
    state.tie_online = effects.tie_online;
    state.phase_factor = effects.phase_factor;
    state.solved = true;
    return SolveReport{residual / i_base, used};
}

namespace {

constexpr int kStateDim = 3 * kNumDg + 1;  // p_filt, q_filt, theta per unit + source phase

using StateVec = std::array<double, kStateDim>;

StateVec pack(const SimState& s) {
    StateVec y{};
    for (int k = 0; k < kNumDg; ++k) {
        y[k] = s.p_filt[static_cast<std::size_t>(k)];
        y[kNumDg + k] = s.q_filt[static_cast<std::size_t>(k)];
        y[2 * kNumDg + k] = s.theta[static_cast<std::size_t>(k)];
    }
    y[3 * kNumDg] = s.source_phase;
    return y;
}

void unpack(const StateVec& y, SimState& s) {
    for (int k = 0; k < kNumDg; ++k) {
        s.p_filt[static_cast<std::size_t>(k)] = y[k];
        s.q_filt[static_cast<std::size_t>(k)] = y[kNumDg + k];
        s.theta[static_cast<std::size_t>(k)] = y[2 * kNumDg + k];
    }
    s.source_phase = y[3 * kNumDg];
}

StateVec derivative(SimState& scratch, const NetworkModel& net, const StateVec& y, double t,
                    const ActiveEffects& fx) {
    unpack(y, scratch);
    scratch.time = t;
    solve_network(scratch, net, fx);
    StateVec dy{};
    for (int k = 0; k < kNumDg; ++k) {
        const auto& dg = net.dg_units[static_cast<std::size_t>(k)];
        const bool on = fx.dg_online[static_cast<std::size_t>(k)];
        const double p_inst = on ? scratch.s_inj[static_cast<std::size_t>(k)].real() : 0.0;
        const double q_inst = on ? scratch.s_inj[static_cast<std::size_t>(k)].imag() : 0.0;
        dy[k] = dg.power_filter_cutoff * (p_inst - y[k]);
        dy[kNumDg + k] = dg.power_filter_cutoff * (q_inst - y[kNumDg + k]);
        // droop omega relative to the synchronous frame
        dy[2 * kNumDg + k] = -dg.droop_p * y[k];
    }
    dy[3 * kNumDg] = 2.0 * kPi * fx.source_freq_offset_hz;
    return dy;
}

const char* state_channel_name(int i) {
    static std::array<std::string, kStateDim> names = [] {
        std::array<std::string, kStateDim> n;
        for (int k = 0; k < kNumDg; ++k) {
            n[static_cast<std::size_t>(k)] = "P_filt_DG" + std::to_string(k + 1);
            n[static_cast<std::size_t>(kNumDg + k)] = "Q_filt_DG" + std::to_string(k + 1);
            n[static_cast<std::size_t>(2 * kNumDg + k)] = "theta_DG" + std::to_string(k + 1);
        }
        n[3 * kNumDg] = "source_phase";
        return n;
    }();
    return names[static_cast<std::size_t>(i)].c_str();
}

}  // namespace

void step(SimState& state, const NetworkModel& net, double dt, const EffectsProvider& effects) {
    if (!(dt > 0.0) || !std::isfinite(dt)) {
        throw ValidationError("step: dt must be > 0, got " + format_double(dt));
    }

    const double t = state.time;
    const StateVec y0 = pack(state);
    SimState scratch = state;

    const ActiveEffects fx0 = effects.at(t);
    const ActiveEffects fx_half = effects.at(t + 0.5 * dt);
    const ActiveEffects fx1 = effects.at(t + dt);

    const StateVec k1 = derivative(scratch, net, y0, t, fx0);
    StateVec ytmp{};
    for (int i = 0; i < kStateDim; ++i) ytmp[i] = y0[i] + 0.5 * dt * k1[i];
    const StateVec k2 = derivative(scratch, net, ytmp, t + 0.5 * dt, fx_half);
    for (int i = 0; i < kStateDim; ++i) ytmp[i] = y0[i] + 0.5 * dt * k2[i];
    const StateVec k3 = derivative(scratch, net, ytmp, t + 0.5 * dt, fx_half);
    for (int i = 0; i < kStateDim; ++i) ytmp[i] = y0[i] + dt * k3[i];
    const StateVec k4 = derivative(scratch, net, ytmp, t + dt, fx1);

    StateVec y1{};
    for (int i = 0; i < kStateDim; ++i) {
        y1[i] = y0[i] + (dt / 6.0) * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        if (!std::isfinite(y1[i])) {
            throw SolverError("simulation diverged at t=" + format_double(t + dt) +
                              ": non-finite " + state_channel_name(i));
        }
    }

    // carry over the warm start accumulated in the stage solves
    state.bus_v = scratch.bus_v;
    state.solved = scratch.solved;
    unpack(y1, state);
    state.time = t + dt;
    solve_network(state, net, fx1);
}

SimState settle_to_steady_state(const NetworkModel& net, double tol, double t_max) {
    SimState state;
    for (int k = 0; k < kNumDg; ++k) state.theta[static_cast<std::size_t>(k)] = 0.0;
    NoEffects none;
    solve_network(state, net);

    const double dt = 1e-3;  // settle phase only; recorded runs use the fine step
    SimState scratch = state;
    const long max_steps = static_cast<long>(t_max / dt);
    for (long i = 0; i < max_steps; ++i) {
        step(state, net, dt, none);
        // convergence on the power-filter derivatives plus steady relative
        // angles. A sourceless island keeps a common drift (its frequency is
        // off-nominal), which is steady for our purposes; with the grid
        // online the fixed source phase joins the spread, so any common
        // drift must die out too.
        const StateVec y = pack(state);
        const StateVec dy = derivative(scratch, net, y, state.time, ActiveEffects{});
        double worst = 0.0;
        for (int k = 0; k < 2 * kNumDg; ++k) worst = std::max(worst, std::abs(dy[k]));
        double dtheta_min = dy[2 * kNumDg];
        double dtheta_max = dy[2 * kNumDg];
        for (int k = 0; k < kNumDg; ++k) {
            dtheta_min = std::min(dtheta_min, dy[2 * kNumDg + k]);
            dtheta_max = std::max(dtheta_max, dy[2 * kNumDg + k]);
        }
        if (net.grid.online) {
            dtheta_min = std::min(dtheta_min, 0.0);
            dtheta_max = std::max(dtheta_max, 0.0);
        }
        if (worst < tol && (dtheta_max - dtheta_min) < tol) break;
    }
    state.time = 0.0;
    solve_network(state, net);
    return state;
}

const std::array<std::string, kNumChannels>& channel_names() {
    static const std::array<std::string, kNumChannels> names = [] {
        std::array<std::string, kNumChannels> n;
        n[0] = "V1";
        n[1] = "V2";
        n[2] = "V3";
        n[3] = "I1";
        n[4] = "I2";
        n[5] = "I3";
        for (int k = 0; k < kNumDg; ++k) n[static_cast<std::size_t>(6 + k)] = "P_DG" + std::to_string(k + 1);
        for (int k = 0; k < kNumDg; ++k) n[static_cast<std::size_t>(16 + k)] = "Q_DG" + std::to_string(k + 1);
        for (int k = 0; k < kNumDg; ++k) n[static_cast<std::size_t>(26 + k)] = "f_DG" + std::to_string(k + 1);
        return n;
    }();
    return names;
}

int channel_index(const std::string& name) {
    const auto& names = channel_names();
    for (int i = 0; i < kNumChannels; ++i) {
        if (names[static_cast<std::size_t>(i)] == name) return i;
    }
    throw FormatError("unknown channel name: " + name);
}

MeasurementFrame measure(const SimState& state, const NetworkModel& net) {
    MeasurementFrame frame;
    frame.time = state.time;

    const double omega = net.omega_nominal();
    const Complex v_pcc = state.bus_v[0];
    const Complex i_pcc = state.tie_current;
    const double v_mag = kSqrt2 * std::abs(v_pcc);
    const double i_mag = kSqrt2 * std::abs(i_pcc);
    const double v_arg = std::arg(v_pcc);
    const double i_arg = std::arg(i_pcc);
    const double wt = omega * state.time;
    constexpr double kShift = 2.0 * kPi / 3.0;

    frame.channels[0] = state.phase_factor[0] * v_mag * std::cos(wt + v_arg);
    frame.channels[1] = state.phase_factor[1] * v_mag * std::cos(wt + v_arg - kShift);
    frame.channels[2] = state.phase_factor[2] * v_mag * std::cos(wt + v_arg + kShift);
    frame.channels[3] = i_mag * std::cos(wt + i_arg);
    frame.channels[4] = i_mag * std::cos(wt + i_arg - kShift);
    frame.channels[5] = i_mag * std::cos(wt + i_arg + kShift);

    for (int k = 0; k < kNumDg; ++k) {
        const auto& dg = net.dg_units[static_cast<std::size_t>(k)];
        frame.channels[static_cast<std::size_t>(6 + k)] = state.s_inj[static_cast<std::size_t>(k)].real();
        frame.channels[static_cast<std::size_t>(16 + k)] = state.s_inj[static_cast<std::size_t>(k)].imag();
        frame.channels[static_cast<std::size_t>(26 + k)] =
            (dg.nominal_omega - dg.droop_p * state.p_filt[static_cast<std::size_t>(k)]) / (2.0 * kPi);
    }
    return frame;
}

PowerBalance compute_power_balance(const SimState& state, const NetworkModel& net,
                                   const ActiveEffects& effects) {
    PowerBalance pb;
    const double omega = net.omega_nominal();
    const double v_nom = net.v_nom_phase();
    for (int k = 0; k < kNumDg; ++k) {
        pb.p_dg_total += state.s_inj[static_cast<std::size_t>(k)].real();
        const Complex s = net.loads[static_cast<std::size_t>(k)] + effects.load_add[static_cast<std::size_t>(k)];
        const Complex i_l = load_current(s, state.bus_v[static_cast<std::size_t>(k)], v_nom);
        pb.p_loads += 3.0 * (state.bus_v[static_cast<std::size_t>(k)] * std::conj(i_l)).real();
    }
    pb.p_grid = state.s_grid.real();
    if (net.grid.online && state.tie_online) {
        pb.p_line_losses += 3.0 * std::norm(state.tie_current) * net.tie.resistance;
    }
    for (int l = 0; l < kNumLines; ++l) {
        if (!state.line_online[static_cast<std::size_t>(l)]) continue;
        const auto [a, b] = net.line_ends[l];
        const Complex i =
            line_current(state.bus_v[static_cast<std::size_t>(a)], state.bus_v[static_cast<std::size_t>(b)],
                         net.lines[l], omega);
        pb.p_line_losses += 3.0 * std::norm(i) * net.lines[l].resistance;
    }
    return pb;
}

}  // namespace mgs
