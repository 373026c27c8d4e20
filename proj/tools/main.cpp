// grid-surrogate: regenerate the microgrid transient corpus, train the
// surrogate models, evaluate them (including the OOD robustness partitions),
// and benchmark inference against the simulator.
//
// Exit codes: 0 success, 2 environment/path problem, 3 missing dependency
// artifact, 4 validation/config failure.

#include <cstdlib>
#include <iostream>

#include <CLI11.hpp>

#include "mgs/pipeline.hpp"

namespace {

mgs::RunConfig resolve_config(const std::string& config_path, std::uint64_t seed_override,
                              bool have_seed) {
    mgs::RunConfig config;
    std::string path = config_path;
    if (path.empty()) {
        if (const char* env = std::getenv("GRID_SURROGATE_CONFIG")) path = env;
    }
    if (!path.empty()) {
        config = mgs::load_config(path);
    }
    if (have_seed) config = [&] {
        mgs::RunConfig c = config;
        c.seed = seed_override;
        c.gbm_hp.seed = seed_override;
        return c;
    }();
    config.validate();
    return config;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Microgrid transient surrogate toolkit"};
    app.require_subcommand(1);

    std::string config_path;
    std::uint64_t seed_override = 0;
    bool have_seed = false;
    app.add_option("--config", config_path, "Run configuration file (INI)");
    auto* seed_opt = app.add_option("--seed", seed_override, "Override the run seed");

    std::string scenario;
    auto* cmd_generate = app.add_subcommand("generate", "Simulate the scenario catalog to CSV");
    cmd_generate->add_option("--scenario", scenario, "Only this catalog scenario");

    auto* cmd_featurize =
        app.add_subcommand("featurize", "Export per-partition feature matrices");

    std::string model = "all";
    std::string target = "all";
    auto* cmd_train = app.add_subcommand("train", "Fit surrogate models");
    cmd_train->add_option("--model", model, "gbm | cnn | hybrid | all")->capture_default_str();
    cmd_train->add_option("--target", target, "vmag | fdg1 | ptotal | vdip | all")
        ->capture_default_str();

    std::string partition = "all";
    auto* cmd_eval = app.add_subcommand("eval", "Evaluate trained models");
    cmd_eval->add_option("--partition", partition, "val | ood | all")->capture_default_str();

    auto* cmd_bench = app.add_subcommand("bench", "Benchmark simulator vs surrogate inference");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 4;
    }
    have_seed = seed_opt->count() > 0;

    try {
        const mgs::RunConfig config = resolve_config(config_path, seed_override, have_seed);

        if (cmd_generate->parsed()) {
            const auto written = mgs::generate_datasets(config, scenario);
            for (const auto& path : written) std::cout << "wrote " << path << '\n';
            std::cout << written.size() << " dataset(s), config " << mgs::format_hex64(config.hash())
                      << '\n';
        } else if (cmd_featurize->parsed()) {
            const mgs::Corpus corpus = mgs::load_corpus(config);
            const mgs::PipelineContext ctx = mgs::fit_pipeline(config, corpus);
            std::error_code ec;
            std::filesystem::create_directories(config.data_dir + "/features", ec);
            if (ec) throw mgs::EnvironmentError("cannot create features dir: " + ec.message());
            const struct {
                const char* name;
                const std::vector<std::size_t>& idx;
            } parts[] = {{"train", corpus.split.train},
                         {"val", corpus.split.validation},
                         {"test_ood", corpus.split.test_ood}};
            for (const auto& p : parts) {
                std::vector<mgs::WindowSample> windows;
                for (const std::size_t i : p.idx) {
                    auto w = mgs::make_windows(corpus.datasets[i], ctx.window_cfg, ctx.channels);
                    windows.insert(windows.end(), w.begin(), w.end());
                }
                const std::string path = config.data_dir + "/features/" + p.name + ".csv";
                mgs::write_feature_matrix(windows, path);
                std::cout << "wrote " << path << " (" << windows.size() << " windows)\n";
            }
        } else if (cmd_train->parsed()) {
            if (model != "gbm" && model != "cnn" && model != "hybrid" && model != "all") {
                throw mgs::ConfigError("train: unknown model '" + model + "'");
            }
            const mgs::Corpus corpus = mgs::load_corpus(config);
            const bool do_gbm = model == "gbm" || model == "all";
            const bool do_cnn = model == "cnn" || model == "all";
            const bool do_hybrid = model == "hybrid" || model == "all";
            if (model == "hybrid" && target != "all") {
                throw mgs::ConfigError("train: the hybrid blend is fitted for all targets at once");
            }
            mgs::train_models(config, corpus, do_gbm, do_cnn, do_hybrid, target);
            std::cout << "models written to " << config.model_dir << '\n';
        } else if (cmd_eval->parsed()) {
            const mgs::Corpus corpus = mgs::load_corpus(config);
            const mgs::ModelSet models = mgs::load_models(config, true, true, true);
            const mgs::MetricsReport report =
                mgs::evaluate_models(config, models, corpus, partition, true);
            const std::string path = config.report_dir + "/metrics.txt";
            mgs::write_report(report, path);
            std::cout << "wrote " << path << '\n';
            for (const auto& r : report.records) {
                std::cout << r.partition << ' ' << r.model << ' ' << r.target << " rmse="
                          << r.rmse << " mae=" << r.mae << " r2="
                          << (r.r2_defined ? mgs::format_double(r.r2) : std::string("undefined"))
                          << '\n';
            }
        } else if (cmd_bench->parsed()) {
            const mgs::Corpus corpus = mgs::load_corpus(config);
            const mgs::ModelSet models = mgs::load_models(config, true, true, true);
            const mgs::BenchReport report = mgs::run_benchmark(config, models, corpus);
            std::error_code ec;
            std::filesystem::create_directories(config.report_dir, ec);
            const std::string path = config.report_dir + "/bench.txt";
            mgs::write_bench_report(report, path);
            std::cout << mgs::render_bench_table(report);
            std::cout << "wrote " << path << '\n';
        }
        return 0;
    } catch (const mgs::EnvironmentError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const mgs::DependencyError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    } catch (const mgs::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
