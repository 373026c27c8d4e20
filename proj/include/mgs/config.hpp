#pragma once

// Run configuration: one INI-style document with sections per module.
// Values stated by the reference plant are defaults; every decided value is
// overridable. The config hash covers everything that shapes an artifact
// (paths and benchmark repetitions excluded) and is embedded in datasets,
// models, and reports; a mismatch at load time is an error.

#include <cstdint>
#include <map>
#include <string>

#include "mgs/cnn.hpp"
#include "mgs/gbm.hpp"
#include "mgs/scenario.hpp"
#include "mgs/window.hpp"

namespace mgs {

struct RunConfig {
    // [paths]
    std::string data_dir = "data";
    std::string model_dir = "models";
    std::string report_dir = "reports";

    // [simulator]
    double v_nom_ll = 480.0;  // line-to-line RMS, V
    double power_filter_cutoff = 10.0 * kPi;
    double dt_sim = 5e-5;
    double load_p = 5e3;  // per-bus demand
    double load_q = 1e3;
    bool grid_online = true;

    // [scenario]
    double duration = 1.0;
    double dt_out = 1e-4;
    double ambient_load = 0.02;      // demand fluctuation fraction
    double ambient_freq_hz = 0.015;  // mains wander, Hz RMS
    double ambient_voltage = 0.005;  // supply-voltage wander, fraction RMS

    // [pipeline]
    WindowConfig window_cfg{};

    // [gbm]
    gbm::Hyperparams gbm_hp{};

    // [cnn]
    int cnn_kernel = 3;
    std::array<int, 3> cnn_filters{32, 64, 64};
    int cnn_dense = 64;
    double cnn_learning_rate = 1e-3;
    int cnn_batch_size = 64;
    int cnn_max_epochs = 100;
    int cnn_patience = 10;

    // [split]
    double validation_fraction = 0.2;
    std::string validation_scenarios = "load_ramp,reactive_disturbance";  // empty -> seeded assignment

    // [ood] robustness sweep severities
    double ood_snr_db = 40.0;
    double ood_delay = 5e-3;

    // [bench]
    int bench_repetitions = 5;

    // [run]
    std::uint64_t seed = 42;

    void validate() const;
    double v_nom_phase() const { return v_nom_ll / std::sqrt(3.0); }

    BuildOptions build_options() const;
    SimOptions sim_options() const;
    SplitPolicy split_policy() const;
    cnn::Config cnn_config() const;  // window/channels filled from the pipeline section

    // canonical serialization; hash ignores [paths] and [bench]
    std::string to_ini() const;
    std::uint64_t hash() const;
};

RunConfig config_from_ini(const std::string& text);     // throws ConfigError
RunConfig load_config(const std::string& path);          // throws EnvironmentError/ConfigError
void save_config(const RunConfig& config, const std::string& path);

}  // namespace mgs
