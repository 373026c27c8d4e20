#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <set>

#include "mgs/simcore.hpp"

using namespace mgs;

namespace {

// Closed-form steady state of one droop unit feeding a constant-power load
// at its own bus (no line flow): P = P_load exactly, Q = Q_load, f from the
// P-f droop. The symmetric islanded chain reduces to ten copies of this.
struct IslandOracle {
    double p;
    double q;
    double freq;
};

IslandOracle island_steady_state(const DgParams& dg, Complex load) {
    IslandOracle out{};
    out.p = load.real();
    out.q = load.imag();
    out.freq = (dg.nominal_omega - dg.droop_p * out.p) / (2.0 * kPi);
    return out;
}

NetworkModel default_net() { return build_network(); }

BuildOptions zero_load_options() {
    BuildOptions opt;
    opt.loads.fill(Complex{0.0, 0.0});
    return opt;
}

}  // namespace

TEST_CASE("table defaults populate the network") {
    const NetworkModel net = default_net();
    CHECK(net.dg_units[0].droop_p == doctest::Approx(1e-4));
    CHECK(net.dg_units[0].droop_q == doctest::Approx(1e-4));
    CHECK(net.dg_units[0].filter_resistance == doctest::Approx(0.1));
    CHECK(net.dg_units[0].filter_inductance == doctest::Approx(4e-3));
    CHECK(net.dg_units[0].filter_capacitance == doctest::Approx(200e-6));
    CHECK(net.dg_units[0].rating == doctest::Approx(10e3));
    CHECK(net.dg_units[0].dc_link == doctest::Approx(1000.0));
    CHECK(net.dg_units[0].nominal_freq == doctest::Approx(60.0));
    // omega_n = 2*pi*f_n exactly
    for (const auto& dg : net.dg_units) {
        CHECK(dg.nominal_omega == 2.0 * kPi * dg.nominal_freq);
    }
    // line groups: 2,4,6,8 heavy; 1,3,5,7,9 light
    CHECK(net.lines[1].inductance == doctest::Approx(1.5e-3));
    CHECK(net.lines[1].resistance == doctest::Approx(0.1));
    CHECK(net.lines[0].inductance == doctest::Approx(0.5e-3));
    CHECK(net.lines[0].resistance == doctest::Approx(0.07));
    CHECK(net.lines[4].resistance == doctest::Approx(0.07));
    CHECK(net.lines[7].resistance == doctest::Approx(0.1));
}

TEST_CASE("non-positive parameters are rejected by name") {
    BuildOptions opt;
    DgParams bad;
    bad.filter_inductance = 0.0;
    opt.dg_overrides.emplace_back(3, bad);
    try {
        build_network(opt);
        FAIL("expected ValidationError");
    } catch (const ValidationError& e) {
        CHECK(std::string(e.what()).find("filter_inductance") != std::string::npos);
    }
}

TEST_CASE("override indices are range-checked") {
    BuildOptions opt;
    opt.dg_overrides.emplace_back(11, DgParams{});
    CHECK_THROWS_AS(build_network(opt), ValidationError);
    BuildOptions opt2;
    opt2.line_overrides.emplace_back(0, LineParams{0.1, 1e-3});
    CHECK_THROWS_AS(build_network(opt2), ValidationError);
}

TEST_CASE("disconnected custom topology is rejected") {
    BuildOptions opt;
    // chain with the 4-5 segment replaced by a duplicate edge elsewhere
    opt.topology = {{1, 2}, {2, 3}, {3, 4}, {1, 3}, {5, 6}, {6, 7}, {7, 8}, {8, 9}, {9, 10}};
    CHECK_THROWS_AS(build_network(opt), TopologyError);

    // sanity: a valid permuted chain passes connectivity
    BuildOptions ok;
    ok.topology = {{1, 2}, {2, 3}, {3, 4}, {4, 5}, {5, 6}, {6, 7}, {7, 8}, {8, 9}, {9, 10}};
    CHECK_NOTHROW(build_network(ok));
}

TEST_CASE("droop setpoints follow the P-f / Q-V law") {
    const DgParams dg;
    const auto zero = droop_setpoints(0.0, 0.0, dg);
    CHECK(zero.omega == doctest::Approx(376.99112).epsilon(1e-7));
    CHECK(zero.v_mag_cmd == doctest::Approx(dg.nominal_voltage));

    const auto at_10kw = droop_setpoints(10e3, 0.0, dg);
    CHECK(at_10kw.omega == doctest::Approx(dg.nominal_omega - 1.0));
    CHECK(at_10kw.omega / (2.0 * kPi) == doctest::Approx(59.8408).epsilon(1e-5));

    const auto at_10kvar = droop_setpoints(0.0, 10e3, dg);
    CHECK(at_10kvar.v_mag_cmd == doctest::Approx(dg.nominal_voltage - 1.0));
}

TEST_CASE("line current follows phasor Ohm's law") {
    // 1 pu vs 0.95 pu across a pure 0.1 pu resistance -> 0.5 pu from A to B
    const LineParams line{0.1, 0.0};
    const Complex i = line_current(Complex{1.0, 0.0}, Complex{0.95, 0.0}, line, 2.0 * kPi * 60.0);
    CHECK(i.real() == doctest::Approx(0.5));
    CHECK(i.imag() == doctest::Approx(0.0));
}

TEST_CASE("a lone unit matching the grid exchanges no power") {
    NetworkModel net = build_network(zero_load_options());
    SimState state;
    ActiveEffects fx;
    for (int k = 1; k < kNumDg; ++k) fx.dg_online[static_cast<std::size_t>(k)] = false;
    solve_network(state, net, fx);
    CHECK(std::abs(state.s_inj[0]) < 1e-6);
    for (int k = 0; k < kNumDg; ++k) {
        CHECK(std::abs(state.bus_v[static_cast<std::size_t>(k)] - Complex{net.v_nom_phase(), 0.0}) < 1e-9);
    }
}

TEST_CASE("solve satisfies the nodal equations to 1e-9 pu") {
    const NetworkModel net = default_net();
    SimState state;
    const SolveReport report = solve_network(state, net);
    CHECK(report.residual_pu <= 1e-9);

    // re-solving the solved state stays inside the residual tolerance ball
    const auto v_before = state.bus_v;
    const SolveReport again = solve_network(state, net);
    CHECK(again.residual_pu <= 1e-9);
    for (int k = 0; k < kNumDg; ++k) {
        CHECK(std::abs(state.bus_v[static_cast<std::size_t>(k)] - v_before[static_cast<std::size_t>(k)]) < 1e-6);
    }
}

TEST_CASE("all sources offline is a solver error") {
    NetworkModel net = default_net();
    net.grid.online = false;
    SimState state;
    ActiveEffects fx;
    fx.dg_online.fill(false);
    CHECK_THROWS_AS(solve_network(state, net, fx), SolverError);
}

TEST_CASE("zero-load equilibrium is preserved by stepping") {
    const NetworkModel net = build_network(zero_load_options());
    SimState state;
    solve_network(state, net);
    NoEffects none;
    SimState before = state;
    for (int i = 0; i < 1000; ++i) {
        step(state, net, 5e-5, none);
        for (int k = 0; k < kNumDg; ++k) {
            CHECK(std::abs(state.p_filt[static_cast<std::size_t>(k)] - before.p_filt[static_cast<std::size_t>(k)]) < 1e-9);
            CHECK(std::abs(state.theta[static_cast<std::size_t>(k)] - before.theta[static_cast<std::size_t>(k)]) < 1e-9);
        }
        before = state;
    }
    for (int k = 0; k < kNumDg; ++k) {
        CHECK(std::abs(state.p_filt[static_cast<std::size_t>(k)]) < 1e-9);
        CHECK(std::abs(state.q_filt[static_cast<std::size_t>(k)]) < 1e-9);
    }
}

TEST_CASE("step rejects non-positive dt") {
    const NetworkModel net = default_net();
    SimState state;
    solve_network(state, net);
    NoEffects none;
    CHECK_THROWS_AS(step(state, net, -1e-4, none), ValidationError);
    CHECK_THROWS_AS(step(state, net, 0.0, none), ValidationError);
}

TEST_CASE("islanded droop sharing matches the closed form") {
    BuildOptions opt;
    opt.grid.online = false;
    const NetworkModel net = build_network(opt);
    const SimState state = settle_to_steady_state(net);

    const IslandOracle oracle = island_steady_state(net.dg_units[0], net.loads[0]);
    for (int k = 0; k < kNumDg; ++k) {
        const double f_k =
            (net.dg_units[static_cast<std::size_t>(k)].nominal_omega -
             net.dg_units[static_cast<std::size_t>(k)].droop_p * state.p_filt[static_cast<std::size_t>(k)]) /
            (2.0 * kPi);
        CHECK(std::abs(f_k - oracle.freq) < 1e-6);
        CHECK(state.p_filt[static_cast<std::size_t>(k)] == doctest::Approx(oracle.p).epsilon(1e-7));
        CHECK(state.q_filt[static_cast<std::size_t>(k)] == doctest::Approx(oracle.q).epsilon(1e-6));
    }
}

TEST_CASE("islanded load step settles to droop-shared generation") {
    BuildOptions opt;
    opt.grid.online = false;
    const NetworkModel net = build_network(opt);
    SimState state = settle_to_steady_state(net);

    // +5 kW at bus 5 from t = 0
    struct StepLoad final : EffectsProvider {
        ActiveEffects at(double) const override {
            ActiveEffects fx;
            fx.load_add[4] = Complex{5e3, 0.0};
            return fx;
        }
    } fx;

    const double p_before = state.p_filt[0];
    for (int i = 0; i < 60000; ++i) step(state, net, 5e-5, fx);  // 3 s to settle

    // equal droop coefficients share the step equally
    double p_min = state.p_filt[0];
    double p_max = state.p_filt[0];
    double p_sum = 0.0;
    for (int k = 0; k < kNumDg; ++k) {
        p_min = std::min(p_min, state.p_filt[static_cast<std::size_t>(k)]);
        p_max = std::max(p_max, state.p_filt[static_cast<std::size_t>(k)]);
        p_sum += state.p_filt[static_cast<std::size_t>(k)];
    }
    CHECK(p_max - p_min < 1e-3);
    CHECK(p_sum > 10.0 * p_before);

    // total generation = loads + line losses from the solved state
    const PowerBalance pb = compute_power_balance(state, net, fx.at(state.time));
    CHECK(pb.p_loads == doctest::Approx(55e3).epsilon(1e-6));
    CHECK(p_sum == doctest::Approx(pb.p_loads + pb.p_line_losses).epsilon(1e-6));

    // frequency settles on the droop line of the shared power
    const double f_expect =
        (net.dg_units[0].nominal_omega - net.dg_units[0].droop_p * (p_sum / kNumDg)) / (2.0 * kPi);
    const double f_actual =
        (net.dg_units[0].nominal_omega - net.dg_units[0].droop_p * state.p_filt[0]) / (2.0 * kPi);
    CHECK(std::abs(f_actual - f_expect) < 1e-6);
}

TEST_CASE("divergence reports time and state channel") {
    BuildOptions opt;
    DgParams wild;
    wild.droop_p = 10.0;  // absurd gain, unstable at a coarse step
    wild.droop_q = 10.0;
    for (int k = 1; k <= kNumDg; ++k) opt.dg_overrides.emplace_back(k, wild);
    const NetworkModel net = build_network(opt);
    SimState state;
    solve_network(state, net);
    NoEffects none;
    bool threw = false;
    try {
        for (int i = 0; i < 20000 && !threw; ++i) step(state, net, 5e-2, none);
    } catch (const SolverError& e) {
        threw = true;
        CHECK(std::string(e.what()).find("t=") != std::string::npos);
    }
    CHECK(threw);
}

TEST_CASE("measurement synthesizes a balanced three-phase set") {
    const NetworkModel net = default_net();
    SimState state = settle_to_steady_state(net);
    NoEffects none;
    for (int i = 0; i < 100; ++i) {
        step(state, net, 5e-5, none);
        const MeasurementFrame frame = measure(state, net);
        const double v_rms = std::abs(state.bus_v[0]);
        const double sum_sq = frame.channels[0] * frame.channels[0] +
                              frame.channels[1] * frame.channels[1] +
                              frame.channels[2] * frame.channels[2];
        CHECK(sum_sq == doctest::Approx(3.0 * v_rms * v_rms).epsilon(1e-9));
    }
}

TEST_CASE("offline unit measures zero injected power") {
    const NetworkModel net = default_net();
    SimState state = settle_to_steady_state(net);
    ActiveEffects fx;
    fx.dg_online[4] = false;
    solve_network(state, net, fx);
    const MeasurementFrame frame = measure(state, net);
    CHECK(frame.channels[6 + 4] == 0.0);
    CHECK(frame.channels[16 + 4] == 0.0);
}

TEST_CASE("event-free run keeps every unit frequency near nominal") {
    const NetworkModel net = default_net();
    SimState state = settle_to_steady_state(net);
    NoEffects none;
    for (int i = 0; i < 2000; ++i) {
        step(state, net, 5e-5, none);
        const MeasurementFrame frame = measure(state, net);
        for (int k = 0; k < kNumDg; ++k) {
            const double f = frame.channels[static_cast<std::size_t>(26 + k)];
            CHECK(f > 59.5);
            CHECK(f < 60.5);
        }
    }
}

TEST_CASE("power balance holds within 0.1% through an event-rich run") {
    const NetworkModel net = default_net();
    SimState state = settle_to_steady_state(net);

    struct Events final : EffectsProvider {
        ActiveEffects at(double t) const override {
            ActiveEffects fx;
            if (t >= 0.02) fx.load_add[2] = Complex{4e3, 1e3};
            if (t >= 0.04 && t < 0.08) fx.source_mag_factor = 0.7;
            if (t >= 0.06) fx.dg_online[7] = false;
            return fx;
        }
    } events;

    for (int i = 0; i < 3000; ++i) {
        step(state, net, 5e-5, events);
        if (i % 100 != 0) continue;
        const PowerBalance pb = compute_power_balance(state, net, events.at(state.time));
        const double scale = std::max(1.0, std::abs(pb.p_dg_total) + std::abs(pb.p_grid));
        CHECK(std::abs(pb.residual()) / scale < 1e-3);
    }
}

TEST_CASE("simulation is bit-deterministic") {
    const NetworkModel net = default_net();
    struct Events final : EffectsProvider {
        ActiveEffects at(double t) const override {
            ActiveEffects fx;
            if (t >= 0.01) fx.load_add[5] = Complex{2e3, 500.0};
            return fx;
        }
    } events;

    auto run = [&] {
        SimState state = settle_to_steady_state(net);
        std::vector<MeasurementFrame> frames;
        for (int i = 0; i < 500; ++i) {
            step(state, net, 5e-5, events);
            frames.push_back(measure(state, net));
        }
        return frames;
    };
    const auto a = run();
    const auto b = run();
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].time == b[i].time);
        for (int c = 0; c < kNumChannels; ++c) {
            CHECK(a[i].channels[static_cast<std::size_t>(c)] == b[i].channels[static_cast<std::size_t>(c)]);
        }
    }
}

TEST_CASE("channel schema is fixed at 36 names") {
    const auto& names = channel_names();
    CHECK(names.size() == 36);
    CHECK(names[0] == "V1");
    CHECK(names[5] == "I3");
    CHECK(names[6] == "P_DG1");
    CHECK(names[15] == "P_DG10");
    CHECK(names[16] == "Q_DG1");
    CHECK(names[26] == "f_DG1");
    CHECK(names[35] == "f_DG10");
    const std::set<std::string> unique(names.begin(), names.end());
    CHECK(unique.size() == 36);
    CHECK(channel_index("f_DG1") == 26);
    CHECK_THROWS_AS(channel_index("bogus"), FormatError);
}
