#pragma once

// End-to-end orchestration shared by the CLI and the acceptance suite:
// dataset generation, corpus loading and splitting, scaler fitting, model
// training/persistence, evaluation, and the runtime benchmark.

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mgs/bench.hpp"
#include "mgs/cnn.hpp"
#include "mgs/config.hpp"
#include "mgs/gbm.hpp"
#include "mgs/hybrid.hpp"
#include "mgs/metrics.hpp"
#include "mgs/scenario.hpp"
#include "mgs/window.hpp"

namespace mgs {

struct Corpus {
    std::vector<TimeSeriesDataset> datasets;
    CorpusSplit split;
};

// Fitted preprocessing state; persisted as model_dir/pipeline.txt.
struct PipelineContext {
    WindowConfig window_cfg;
    std::vector<std::string> channels;
    Scaler seq_scaler;    // per input channel, fitted on train frames
    Scaler stat_scaler;   // per statistical feature
    std::array<double, kNumTargets> target_mean{};
    std::array<double, kNumTargets> target_std{};
    std::uint64_t schema = 0;
    std::uint64_t config_hash = 0;
};

struct Partition {
    std::vector<WindowSample> windows;
    std::vector<double> stats_scaled;  // windows x (5 * d), row-major
    std::array<std::vector<double>, kNumTargets> y;  // raw targets
};

// generate: one CSV + sidecar per catalog scenario (optionally a single one).
std::vector<std::string> generate_datasets(const RunConfig& config,
                                           const std::string& only_scenario = "");

// Loads every catalog scenario present in data_dir; all eleven are required
// unless only_required is false. Verifies the stored config hash.
Corpus load_corpus(const RunConfig& config);

Partition build_partition(const std::vector<TimeSeriesDataset>& datasets,
                          const std::vector<std::size_t>& indices, const PipelineContext& ctx);

PipelineContext fit_pipeline(const RunConfig& config, const Corpus& corpus);

void save_pipeline(const PipelineContext& ctx, const std::string& path);
PipelineContext load_pipeline(const std::string& path, std::uint64_t expect_config_hash);

struct ModelSet {
    PipelineContext ctx;
    std::vector<gbm::Model> gbm_models;  // per target, empty when not trained
    std::vector<cnn::Model> cnn_models;
    std::optional<HybridModel> hybrid;
};

// Trains the requested engines per target and writes model files, the
// pipeline context, and per-stage/epoch history tables. target == "all"
// trains all four.
ModelSet train_models(const RunConfig& config, const Corpus& corpus, bool do_gbm, bool do_cnn,
                      bool do_hybrid, const std::string& target = "all");

// Loads previously trained artifacts; throws DependencyError when missing
// and ContractError on a config-hash mismatch.
ModelSet load_models(const RunConfig& config, bool need_gbm, bool need_cnn, bool need_hybrid);

struct PredictionTable {
    // [model][target] -> per-window predictions, raw units
    std::vector<std::array<std::vector<double>, kNumTargets>> by_model;
    std::vector<std::string> model_names;
};

PredictionTable predict_all(const ModelSet& models, const Partition& part);

// Evaluates every trained model on the requested partitions and emits the
// report plus plot-ready companion files under report_dir.
MetricsReport evaluate_models(const RunConfig& config, const ModelSet& models, const Corpus& corpus,
                              const std::string& partition = "all", bool write_plot_data = true);

BenchReport run_benchmark(const RunConfig& config, const ModelSet& models, const Corpus& corpus);

}  // namespace mgs
