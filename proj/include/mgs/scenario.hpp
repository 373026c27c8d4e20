#pragma once

// Scripts the eleven disturbance scenarios as timed event schedules, runs
// the simulator, and persists labeled datasets. Noise and communication
// delay are measurement-layer effects: the physics of those runs is the
// normal run and the recorded channels are perturbed afterwards.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mgs/simcore.hpp"

namespace mgs {

enum class EventKind {
    none,
    load_step,
    voltage_sag,
    load_ramp,
    frequency_ramp,
    generator_trip,
    tieline_open,
    reactive_disturbance,
    slg_fault,
    noise_injection,
    comm_delay,
};

std::string event_kind_name(EventKind kind);
EventKind event_kind_from_name(const std::string& name);  // throws FormatError

struct EventEffect {
    EventKind kind = EventKind::none;
    int target = 0;          // 1-based bus / unit / line id; phase index for slg
    double p_watts = 0.0;    // load step / ramp magnitude
    double q_vars = 0.0;
    double depth = 0.0;      // sag / fault depth, pu of nominal
    double duration = 0.0;   // s; windowed effects (sag, fault) and ramps
    double delta_hz = 0.0;   // frequency ramp end offset
    int phase = 1;           // 1..3, slg fault
    double snr_db = 40.0;    // noise injection
    double delay = 0.0;      // s, communication delay

    void validate(double scenario_duration) const;  // throws ValidationError
};

struct TimedEvent {
    double time = 0.0;  // s from run start
    EventEffect effect;
};

struct ScenarioSpec {
    std::string name;
    double duration = 1.0;   // s
    double dt_out = 1e-4;    // s (10 kHz output)
    std::vector<TimedEvent> events;
    std::uint64_t seed = 42;
    int label = 0;           // catalog position
    bool is_ood = false;

    void validate() const;  // throws ValidationError
};

// The fixed catalog, in order. OOD entries are noise and comm_delay.
// Event schedules sit at fixed fractions of the horizon, so a non-default
// duration keeps the same shape.
std::vector<ScenarioSpec> list_scenarios(double duration = 1.0, double dt_out = 1e-4);
const std::vector<std::string>& scenario_catalog_names();

struct DatasetMetadata {
    std::string scenario;    // catalog name
    int label = 0;
    std::uint64_t seed = 0;
    double v_nom = 480.0 / 1.7320508075688772;  // per-phase RMS, V
    double dt_out = 1e-4;
    double duration = 1.0;
    std::uint64_t config_hash = 0;
};

struct TimeSeriesDataset {
    std::vector<MeasurementFrame> frames;
    int scenario_label = 0;
    std::string scenario_id;
    DatasetMetadata metadata;
};

struct SimOptions {
    double dt_sim = 5e-5;     // integrator step; dt_out must be an integer multiple
    double settle_tol = 1e-6;
    double settle_t_max = 10.0;
    // seeded smooth ambient processes, zero at t = 0: per-bus demand
    // fluctuation (fraction of base load), mains-frequency wander (Hz RMS),
    // and supply-voltage wander (fraction RMS). A live feeder never sits at
    // a mathematical fixed point; these keep every channel informative.
    double ambient_load = 0.02;
    double ambient_freq_hz = 0.015;
    double ambient_voltage = 0.005;
};

// Simulates the scenario horizon from a settled start and applies the event
// schedule; measurement-layer scenarios are perturbed after the run.
TimeSeriesDataset run_scenario(const ScenarioSpec& spec, const NetworkModel& net,
                               const SimOptions& sim = SimOptions{},
                               std::uint64_t config_hash = 0);

// CSV with a fixed 39-column header plus a key=value sidecar ("<path>.meta").
void write_dataset(const TimeSeriesDataset& ds, const std::string& path);
TimeSeriesDataset read_dataset(const std::string& path);
const std::string& dataset_csv_header();

struct SplitPolicy {
    double validation_fraction = 0.2;  // of the non-OOD runs, by whole runs
    std::uint64_t seed = 42;
    // non-empty pins the validation runs by scenario name; tree surrogates
    // cannot extrapolate, so the default keeps the widest-excursion runs
    // (frequency ramp, deep fault) in training
    std::vector<std::string> validation_scenarios{"load_ramp", "reactive_disturbance"};
};

struct CorpusSplit {
    std::vector<std::size_t> train;
    std::vector<std::size_t> validation;
    std::vector<std::size_t> test_ood;
};

// OOD scenarios go exclusively to test_ood; the rest is split by whole runs
// with a seeded deterministic assignment. Throws ConfigError when a
// partition would be empty.
CorpusSplit split_corpus(const std::vector<TimeSeriesDataset>& datasets, const SplitPolicy& policy);

bool scenario_is_ood(const std::string& name);

}  // namespace mgs
