#include "mgs/scenario.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>

#include "mgs/inject.hpp"

namespace mgs {

namespace {

const std::vector<std::string> kCatalog = {
    "normal",          "load_step",    "voltage_sag",         "load_ramp",
    "frequency_ramp",  "generator_trip", "tieline_open",      "reactive_disturbance",
    "slg_fault",       "noise",        "comm_delay",
};

}  // namespace

std::string event_kind_name(EventKind kind) {
    switch (kind) {
        case EventKind::none: return "none";
        case EventKind::load_step: return "load_step";
        case EventKind::voltage_sag: return "voltage_sag";
        case EventKind::load_ramp: return "load_ramp";
        case EventKind::frequency_ramp: return "frequency_ramp";
        case EventKind::generator_trip: return "generator_trip";
        case EventKind::tieline_open: return "tieline_open";
        case EventKind::reactive_disturbance: return "reactive_disturbance";
        case EventKind::slg_fault: return "slg_fault";
        case EventKind::noise_injection: return "noise_injection";
        case EventKind::comm_delay: return "comm_delay";
    }
    return "none";
}

EventKind event_kind_from_name(const std::string& name) {
    static const std::vector<std::pair<std::string, EventKind>> table = {
        {"none", EventKind::none},
        {"load_step", EventKind::load_step},
        {"voltage_sag", EventKind::voltage_sag},
        {"load_ramp", EventKind::load_ramp},
        {"frequency_ramp", EventKind::frequency_ramp},
        {"generator_trip", EventKind::generator_trip},
        {"tieline_open", EventKind::tieline_open},
        {"reactive_disturbance", EventKind::reactive_disturbance},
        {"slg_fault", EventKind::slg_fault},
        {"noise_injection", EventKind::noise_injection},
        {"comm_delay", EventKind::comm_delay},
    };
    for (const auto& [n, k] : table) {
        if (n == name) return k;
    }
    throw FormatError("unknown event kind: " + name);
}

void EventEffect::validate(double scenario_duration) const {
    switch (kind) {
        case EventKind::none:
            break;
        case EventKind::load_step:
        case EventKind::reactive_disturbance:
            if (target < 1 || target > kNumDg) {
                throw ValidationError("load event target bus out of range 1..10: " + std::to_string(target));
            }
            break;
        case EventKind::load_ramp:
            if (target < 1 || target > kNumDg) {
                throw ValidationError("load_ramp target bus out of range 1..10: " + std::to_string(target));
            }
            if (!(duration > 0.0)) throw ValidationError("load_ramp duration must be > 0");
            break;
        case EventKind::voltage_sag:
            if (!(depth > 0.0 && depth <= 1.0)) {
                throw ValidationError("voltage_sag depth must be in (0, 1], got " + format_double(depth));
            }
            if (!(duration > 0.0)) throw ValidationError("voltage_sag duration must be > 0");
            break;
        case EventKind::frequency_ramp:
            if (!(duration > 0.0)) throw ValidationError("frequency_ramp duration must be > 0");
            break;
        case EventKind::generator_trip:
            if (target < 1 || target > kNumDg) {
                throw ValidationError("generator_trip target out of range 1..10: " + std::to_string(target));
            }
            break;
        case EventKind::tieline_open:
            if (target < 1 || target > kNumLines) {
                throw ValidationError("tieline_open target out of range 1..9: " + std::to_string(target));
            }
            break;
        case EventKind::slg_fault:
            if (!(depth > 0.0 && depth <= 1.0)) {
                throw ValidationError("slg_fault depth must be in (0, 1], got " + format_double(depth));
            }
            if (!(duration > 0.0)) throw ValidationError("slg_fault duration must be > 0");
            if (phase < 1 || phase > 3) {
                throw ValidationError("slg_fault phase must be 1..3, got " + std::to_string(phase));
            }
            break;
        case EventKind::noise_injection:
            if (std::isnan(snr_db)) throw ValidationError("noise snr_db must not be NaN");
            break;
        case EventKind::comm_delay:
            if (!(delay >= 0.0) || delay >= scenario_duration) {
                throw ValidationError("comm_delay delay must be in [0, duration), got " + format_double(delay));
            }
            break;
    }
}

void ScenarioSpec::validate() const {
    if (std::find(kCatalog.begin(), kCatalog.end(), name) == kCatalog.end()) {
        throw ValidationError("scenario name not in catalog: " + name);
    }
    if (!(duration > 0.0)) throw ValidationError("scenario duration must be > 0");
    if (!(dt_out > 0.0)) throw ValidationError("scenario dt_out must be > 0");
    for (const auto& ev : events) {
        if (!(ev.time >= 0.0) || ev.time >= duration) {
            throw ValidationError("event time " + format_double(ev.time) +
                                  " outside [0, duration) for scenario " + name);
        }
        ev.effect.validate(duration);
    }
}

const std::vector<std::string>& scenario_catalog_names() { return kCatalog; }

bool scenario_is_ood(const std::string& name) { return name == "noise" || name == "comm_delay"; }

std::vector<ScenarioSpec> list_scenarios(double duration, double dt_out) {
    if (!(duration > 0.0)) throw ValidationError("list_scenarios: duration must be > 0");
    std::vector<ScenarioSpec> catalog;
    catalog.reserve(kCatalog.size());
    const double t = duration;  // default event times below are for a 1.0 s run
    int label = 0;
    for (const auto& name : kCatalog) {
        ScenarioSpec spec;
        spec.name = name;
        spec.duration = duration;
        spec.dt_out = dt_out;
        spec.label = label++;
        spec.is_ood = scenario_is_ood(name);
        EventEffect fx;
        if (name == "load_step") {
            // +50% of the default 5 kW + 1 kvar bus load
            fx.kind = EventKind::load_step;
            fx.target = 5;
            fx.p_watts = 2.5e3;
            fx.q_vars = 0.5e3;
            spec.events.push_back({0.3 * t, fx});
        } else if (name == "voltage_sag") {
            fx.kind = EventKind::voltage_sag;
            fx.depth = 0.3;
            fx.duration = 0.1 * t;
            spec.events.push_back({0.3 * t, fx});
        } else if (name == "load_ramp") {
            fx.kind = EventKind::load_ramp;
            fx.target = 5;
            fx.p_watts = 5e3;
            fx.duration = 0.5 * t;
            spec.events.push_back({0.3 * t, fx});
        } else if (name == "frequency_ramp") {
            fx.kind = EventKind::frequency_ramp;
            fx.delta_hz = -0.2;
            fx.duration = 0.5 * t;
            spec.events.push_back({0.3 * t, fx});
        } else if (name == "generator_trip") {
            fx.kind = EventKind::generator_trip;
            fx.target = 5;
            spec.events.push_back({0.5 * t, fx});
        } else if (name == "tieline_open") {
            fx.kind = EventKind::tieline_open;
            fx.target = 5;
            spec.events.push_back({0.5 * t, fx});
        } else if (name == "reactive_disturbance") {
            fx.kind = EventKind::reactive_disturbance;
            fx.target = 5;
            fx.q_vars = 3e3;
            spec.events.push_back({0.4 * t, fx});
        } else if (name == "slg_fault") {
            fx.kind = EventKind::slg_fault;
            fx.depth = 0.5;
            fx.duration = 0.08 * t;
            fx.phase = 1;
            spec.events.push_back({0.3 * t, fx});
        } else if (name == "noise") {
            fx.kind = EventKind::noise_injection;
            fx.snr_db = 40.0;
            spec.events.push_back({0.0, fx});
        } else if (name == "comm_delay") {
            fx.kind = EventKind::comm_delay;
            fx.delay = std::min(5e-3, 0.05 * t);
            spec.events.push_back({0.0, fx});
        }
        spec.validate();
        catalog.push_back(std::move(spec));
    }
    return catalog;
}

namespace {

// Smooth seeded ambient conditions: per-bus demand fluctuation plus
// mains-frequency and supply-voltage wander on the grid source. Each is a
// unit-RMS sinusoid mixture scaled by its amplitude, zero at t = 0 so runs
// leave the settled point continuously.
class Ambient {
public:
    Ambient(std::uint64_t seed, const SimOptions& sim, const NetworkModel& net) : sim_(sim) {
        Rng rng(hash_mix(seed, 0x616d6269656e74ull));
        for (int k = 0; k < kNumDg; ++k) {
            buses_[static_cast<std::size_t>(k)].randomize(rng, 0.5, 4.0);
            bases_[static_cast<std::size_t>(k)] = net.loads[static_cast<std::size_t>(k)];
        }
        freq_wander_.randomize(rng, 0.05, 0.5);   // mains wander is slow
        volt_wander_.randomize(rng, 0.2, 2.0);
    }

    void apply(double t, ActiveEffects& fx) const {
        if (sim_.ambient_load > 0.0) {
            for (int k = 0; k < kNumDg; ++k) {
                fx.load_add[static_cast<std::size_t>(k)] +=
                    sim_.ambient_load * buses_[static_cast<std::size_t>(k)].at(t) *
                    bases_[static_cast<std::size_t>(k)];
            }
        }
        if (sim_.ambient_freq_hz > 0.0) {
            fx.source_freq_offset_hz += sim_.ambient_freq_hz * freq_wander_.at(t);
        }
        if (sim_.ambient_voltage > 0.0) {
            fx.source_mag_factor *= 1.0 + sim_.ambient_voltage * volt_wander_.at(t);
        }
    }

private:
    static constexpr int kTerms = 3;
    struct Mixture {
        double freq[kTerms]{};
        double weight[kTerms]{};

        void randomize(Rng& rng, double f_lo, double f_hi) {
            double norm = 0.0;
            for (int j = 0; j < kTerms; ++j) {
                freq[j] = f_lo + (f_hi - f_lo) * rng.uniform();
                weight[j] = 0.25 + rng.uniform();
                norm += weight[j] * weight[j];
            }
            norm = std::sqrt(norm / 2.0);  // unit RMS
            for (int j = 0; j < kTerms; ++j) weight[j] /= norm;
        }
        double at(double t) const {
            double a = 0.0;
            for (int j = 0; j < kTerms; ++j) a += weight[j] * std::sin(2.0 * kPi * freq[j] * t);
            return a;
        }
    };

    SimOptions sim_;
    std::array<Mixture, kNumDg> buses_{};
    std::array<Complex, kNumDg> bases_{};
    Mixture freq_wander_{};
    Mixture volt_wander_{};
};

// Resolves the physics events of a schedule at simulation time t.
// Measurement-layer events (noise, delay) are handled after the run.
class EventTimeline final : public EffectsProvider {
public:
    EventTimeline(const ScenarioSpec& spec, const Ambient* ambient)
        : spec_(spec), ambient_(ambient) {}

    ActiveEffects at(double t) const override {
        ActiveEffects fx;
        if (ambient_) ambient_->apply(t, fx);
        for (const auto& ev : spec_.events) {
            const auto& e = ev.effect;
            const double t0 = ev.time;
            switch (e.kind) {
                case EventKind::load_step:
                case EventKind::reactive_disturbance:
                    if (t >= t0) {
                        fx.load_add[static_cast<std::size_t>(e.target - 1)] += Complex{e.p_watts, e.q_vars};
                    }
                    break;
                case EventKind::load_ramp:
                    if (t >= t0) {
                        const double a = std::min(1.0, (t - t0) / e.duration);
                        fx.load_add[static_cast<std::size_t>(e.target - 1)] +=
                            a * Complex{e.p_watts, e.q_vars};
                    }
                    break;
                case EventKind::voltage_sag:
                    if (t >= t0 && t < t0 + e.duration) fx.source_mag_factor *= (1.0 - e.depth);
                    break;
                case EventKind::frequency_ramp:
                    if (t >= t0) {
                        const double a = std::min(1.0, (t - t0) / e.duration);
                        fx.source_freq_offset_hz += a * e.delta_hz;
                    }
                    break;
                case EventKind::generator_trip:
                    if (t >= t0) fx.dg_online[static_cast<std::size_t>(e.target - 1)] = false;
                    break;
                case EventKind::tieline_open:
                    if (t >= t0) fx.line_online[static_cast<std::size_t>(e.target - 1)] = false;
                    break;
                case EventKind::slg_fault:
                    if (t >= t0 && t < t0 + e.duration) {
                        fx.phase_factor[static_cast<std::size_t>(e.phase - 1)] *= (1.0 - e.depth);
                    }
                    break;
                case EventKind::noise_injection:
                case EventKind::comm_delay:
                case EventKind::none:
                    break;
            }
        }
        return fx;
    }

private:
    const ScenarioSpec& spec_;
    const Ambient* ambient_;
};

}  // namespace

TimeSeriesDataset run_scenario(const ScenarioSpec& spec, const NetworkModel& net,
                               const SimOptions& sim, std::uint64_t config_hash) {
    spec.validate();
    const double ratio = spec.dt_out / sim.dt_sim;
    const long steps_per_frame = std::lround(ratio);
    if (steps_per_frame < 1 || std::abs(ratio - static_cast<double>(steps_per_frame)) > 1e-9) {
        throw ValidationError("dt_out must be an integer multiple of dt_sim, got " +
                              format_double(spec.dt_out) + " / " + format_double(sim.dt_sim));
    }
    const long n_frames = std::lround(spec.duration / spec.dt_out);

    TimeSeriesDataset ds;
    ds.scenario_label = spec.label;
    ds.scenario_id = spec.name;
    ds.metadata.scenario = spec.name;
    ds.metadata.label = spec.label;
    ds.metadata.seed = spec.seed;
    ds.metadata.v_nom = net.v_nom_phase();
    ds.metadata.dt_out = spec.dt_out;
    ds.metadata.duration = spec.duration;
    ds.metadata.config_hash = config_hash;
    ds.frames.reserve(static_cast<std::size_t>(n_frames));

    const Ambient ambient(spec.seed, sim, net);
    EventTimeline timeline(spec, &ambient);
    SimState state = settle_to_steady_state(net, sim.settle_tol, sim.settle_t_max);

    try {
        for (long i = 0; i < n_frames; ++i) {
            solve_network(state, net, timeline.at(state.time));
            ds.frames.push_back(measure(state, net));
            for (long s = 0; s < steps_per_frame; ++s) {
                step(state, net, sim.dt_sim, timeline);
            }
        }
    } catch (const SolverError& e) {
        throw SolverError("scenario '" + spec.name + "': " + e.what());
    }

    // measurement-layer effects act on the recorded channels
    for (const auto& ev : spec.events) {
        if (ev.effect.kind == EventKind::noise_injection) {
            ds = inject_noise(ds, ev.effect.snr_db, all_channel_mask(), spec.seed);
        } else if (ev.effect.kind == EventKind::comm_delay) {
            ds = inject_delay(ds, ev.effect.delay, all_channel_mask());
        }
    }
    return ds;
}

const std::string& dataset_csv_header() {
    static const std::string header = [] {
        std::string h = "time";
        for (const auto& name : channel_names()) {
            h += ',';
            h += name;
        }
        h += ",scenario_label,scenario_id";
        return h;
    }();
    return header;
}

void write_dataset(const TimeSeriesDataset& ds, const std::string& path) {
    for (char c : ds.scenario_id) {
        if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_')) {
            throw FormatError("scenario_id must be [A-Za-z0-9_]: '" + ds.scenario_id + "'");
        }
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw EnvironmentError("cannot open for writing: " + path);
    out << dataset_csv_header() << '\n';
    std::string line;
    for (const auto& f : ds.frames) {
        line.clear();
        line += format_double(f.time);
        for (double v : f.channels) {
            line += ',';
            line += format_double(v);
        }
        line += ',';
        line += std::to_string(ds.scenario_label);
        line += ',';
        line += ds.scenario_id;
        line += '\n';
        out << line;
    }
    if (!out) throw EnvironmentError("write failed: " + path);

    std::ofstream meta(path + ".meta", std::ios::binary);
    if (!meta) throw EnvironmentError("cannot open for writing: " + path + ".meta");
    meta << "schema_version 1\n";
    meta << "scenario " << ds.metadata.scenario << '\n';
    meta << "label " << ds.metadata.label << '\n';
    meta << "seed " << ds.metadata.seed << '\n';
    meta << "v_nom " << format_double(ds.metadata.v_nom) << '\n';
    meta << "dt_out " << format_double(ds.metadata.dt_out) << '\n';
    meta << "duration " << format_double(ds.metadata.duration) << '\n';
    meta << "config_hash " << format_hex64(ds.metadata.config_hash) << '\n';
    if (!meta) throw EnvironmentError("write failed: " + path + ".meta");
}

namespace {

std::vector<std::string> split_csv_row(const std::string& line) {
    std::vector<std::string> cells;
    std::size_t start = 0;
    while (true) {
        const std::size_t pos = line.find(',', start);
        if (pos == std::string::npos) {
            cells.push_back(line.substr(start));
            break;
        }
        cells.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
    return cells;
}

}  // namespace

TimeSeriesDataset read_dataset(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw EnvironmentError("cannot open for reading: " + path);

    TimeSeriesDataset ds;
    std::string line;
    if (!std::getline(in, line)) throw FormatError(path + ": empty file");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != dataset_csv_header()) {
        throw FormatError(path + ": header does not match the documented column order");
    }

    long row = 1;
    double prev_time = 0.0;
    double spacing = 0.0;
    bool have_label = false;
    while (std::getline(in, line)) {
        ++row;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto cells = split_csv_row(line);
        if (cells.size() != 1 + kNumChannels + 2) {
            throw FormatError(path + ": row " + std::to_string(row) + " has " +
                              std::to_string(cells.size()) + " columns, expected " +
                              std::to_string(1 + kNumChannels + 2));
        }
        MeasurementFrame f;
        double value = 0.0;
        if (!try_parse_double(cells[0], value)) {
            throw FormatError(path + ": row " + std::to_string(row) + ": bad time value");
        }
        f.time = value;
        for (int c = 0; c < kNumChannels; ++c) {
            if (!try_parse_double(cells[static_cast<std::size_t>(c + 1)], value)) {
                throw FormatError(path + ": row " + std::to_string(row) + ": bad value in column " +
                                  channel_names()[static_cast<std::size_t>(c)]);
            }
            f.channels[static_cast<std::size_t>(c)] = value;
        }
        int label = 0;
        try {
            label = std::stoi(cells[kNumChannels + 1]);
        } catch (const std::exception&) {
            throw FormatError(path + ": row " + std::to_string(row) + ": bad scenario_label");
        }
        const std::string& id = cells[kNumChannels + 2];
        if (!have_label) {
            ds.scenario_label = label;
            ds.scenario_id = id;
            have_label = true;
        } else if (label != ds.scenario_label || id != ds.scenario_id) {
            throw FormatError(path + ": row " + std::to_string(row) + ": scenario label/id changed mid-file");
        }
        if (!ds.frames.empty()) {
            const double dt = f.time - prev_time;
            if (!(dt > 0.0)) {
                throw FormatError(path + ": row " + std::to_string(row) + ": time is not strictly increasing");
            }
            if (ds.frames.size() == 1) {
                spacing = dt;
            } else if (std::abs(dt - spacing) > 1e-9 * std::max(1.0, spacing)) {
                throw FormatError(path + ": row " + std::to_string(row) + ": non-constant frame spacing");
            }
        }
        prev_time = f.time;
        ds.frames.push_back(f);
    }

    std::ifstream meta(path + ".meta", std::ios::binary);
    if (!meta) throw FormatError(path + ".meta: missing metadata sidecar");
    while (std::getline(meta, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const std::size_t sp = line.find(' ');
        if (sp == std::string::npos) throw FormatError(path + ".meta: malformed line: " + line);
        const std::string key = line.substr(0, sp);
        const std::string val = line.substr(sp + 1);
        if (key == "scenario") ds.metadata.scenario = val;
        else if (key == "label") ds.metadata.label = std::stoi(val);
        else if (key == "seed") ds.metadata.seed = std::stoull(val);
        else if (key == "v_nom") ds.metadata.v_nom = parse_double(val);
        else if (key == "dt_out") ds.metadata.dt_out = parse_double(val);
        else if (key == "duration") ds.metadata.duration = parse_double(val);
        else if (key == "config_hash") ds.metadata.config_hash = parse_hex64(val);
        else if (key == "schema_version") { /* v1 only */ }
        else throw FormatError(path + ".meta: unknown key: " + key);
    }
    return ds;
}

CorpusSplit split_corpus(const std::vector<TimeSeriesDataset>& datasets, const SplitPolicy& policy) {
    CorpusSplit split;
    std::vector<std::size_t> pool;
    for (std::size_t i = 0; i < datasets.size(); ++i) {
        if (scenario_is_ood(datasets[i].scenario_id)) {
            split.test_ood.push_back(i);
        } else {
            pool.push_back(i);
        }
    }
    if (pool.empty()) throw ConfigError("split_corpus: no non-OOD runs available");
    if (split.test_ood.empty()) throw ConfigError("split_corpus: no OOD runs available");

    if (!policy.validation_scenarios.empty()) {
        for (const auto& name : policy.validation_scenarios) {
            if (scenario_is_ood(name)) {
                throw ConfigError("split_corpus: OOD scenario '" + name +
                                  "' cannot be assigned to validation");
            }
            bool found = false;
            for (const std::size_t i : pool) {
                if (datasets[i].scenario_id == name) {
                    split.validation.push_back(i);
                    found = true;
                }
            }
            if (!found) {
                throw ConfigError("split_corpus: validation scenario '" + name +
                                  "' not present in the corpus");
            }
        }
        for (const std::size_t i : pool) {
            if (std::find(split.validation.begin(), split.validation.end(), i) ==
                split.validation.end()) {
                split.train.push_back(i);
            }
        }
        if (split.train.empty()) throw ConfigError("split_corpus: train partition would be empty");
        std::sort(split.validation.begin(), split.validation.end());
        return split;
    }

    const auto n_val = static_cast<std::size_t>(
        std::lround(policy.validation_fraction * static_cast<double>(pool.size())));
    if (n_val < 1) {
        throw ConfigError("split_corpus: validation partition would be empty (fraction " +
                          format_double(policy.validation_fraction) + ")");
    }
    if (n_val >= pool.size()) {
        throw ConfigError("split_corpus: train partition would be empty");
    }

    Rng rng(hash_mix(policy.seed, 0x73706c6974ull));
    std::vector<std::size_t> order = pool;
    rng.shuffle(order);
    split.validation.assign(order.begin(), order.begin() + static_cast<long>(n_val));
    split.train.assign(order.begin() + static_cast<long>(n_val), order.end());
    std::sort(split.validation.begin(), split.validation.end());
    std::sort(split.train.begin(), split.train.end());
    return split;
}

}  // namespace mgs
