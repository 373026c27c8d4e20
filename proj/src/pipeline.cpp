#include "mgs/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "mgs/inject.hpp"

namespace fs = std::filesystem;

namespace mgs {

namespace {

std::string dataset_path(const RunConfig& config, const std::string& scenario) {
    return config.data_dir + "/" + scenario + ".csv";
}

void ensure_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw EnvironmentError("cannot create directory " + dir + ": " + ec.message());
}

}  // namespace

std::vector<std::string> generate_datasets(const RunConfig& config, const std::string& only_scenario) {
    config.validate();
    ensure_dir(config.data_dir);
    const NetworkModel net = build_network(config.build_options());
    const std::uint64_t hash = config.hash();

    std::vector<std::string> written;
    for (ScenarioSpec spec : list_scenarios(config.duration, config.dt_out)) {
        if (!only_scenario.empty() && spec.name != only_scenario) continue;
        // the OOD runs perturb recordings of the normal run, so they share
        // its physics seed
        spec.seed = hash_mix(config.seed, fnv1a(spec.is_ood ? "normal" : spec.name.c_str()));
        if (spec.name == "noise") {
            for (auto& ev : spec.events) ev.effect.snr_db = config.ood_snr_db;
        } else if (spec.name == "comm_delay") {
            for (auto& ev : spec.events) {
                ev.effect.delay = std::min(config.ood_delay, 0.5 * config.duration);
            }
        }
        TimeSeriesDataset ds = run_scenario(spec, net, config.sim_options(), hash);
        const std::string path = dataset_path(config, spec.name);
        write_dataset(ds, path);
        written.push_back(path);
    }
    if (written.empty()) {
        throw ConfigError("generate: no scenario named '" + only_scenario + "' in the catalog");
    }
    return written;
}

Corpus load_corpus(const RunConfig& config) {
    Corpus corpus;
    const std::uint64_t hash = config.hash();
    for (const auto& name : scenario_catalog_names()) {
        const std::string path = dataset_path(config, name);
        if (!fs::exists(path)) {
            throw DependencyError("dataset missing: " + path + " (run generate first)");
        }
        TimeSeriesDataset ds = read_dataset(path);
        if (ds.metadata.config_hash != hash) {
            throw ContractError("dataset " + path + " was produced by config " +
                                format_hex64(ds.metadata.config_hash) + ", current config is " +
                                format_hex64(hash) + "; regenerate instead of mixing");
        }
        corpus.datasets.push_back(std::move(ds));
    }
    corpus.split = split_corpus(corpus.datasets, config.split_policy());
    return corpus;
}

PipelineContext fit_pipeline(const RunConfig& config, const Corpus& corpus) {
    PipelineContext ctx;
    ctx.window_cfg = config.window_cfg;
    ctx.channels = default_input_channels();
    ctx.schema = schema_hash(ctx.channels, ctx.window_cfg);
    ctx.config_hash = config.hash();

    // scalers are fitted on the training partition only
    std::vector<WindowSample> train_windows;
    for (const std::size_t i : corpus.split.train) {
        auto w = make_windows(corpus.datasets[i], ctx.window_cfg, ctx.channels);
        train_windows.insert(train_windows.end(), w.begin(), w.end());
    }
    if (train_windows.empty()) throw DataError("fit_pipeline: no training windows");

    const int d = train_windows.front().d();
    const int w = ctx.window_cfg.window;
    std::vector<double> frame_values;
    frame_values.reserve(train_windows.size() * static_cast<std::size_t>(d));
    for (const auto& s : train_windows) {
        for (int t = 0; t < w; ++t) {
            const double* row = s.row(t);
            frame_values.insert(frame_values.end(), row, row + d);
        }
    }
    ctx.seq_scaler = fit_scaler(frame_values.data(),
                                frame_values.size() / static_cast<std::size_t>(d),
                                static_cast<std::size_t>(d));

    std::vector<double> stats_values;
    stats_values.reserve(train_windows.size() * train_windows.front().stats.size());
    for (const auto& s : train_windows) {
        stats_values.insert(stats_values.end(), s.stats.begin(), s.stats.end());
    }
    ctx.stat_scaler = fit_scaler(stats_values.data(), train_windows.size(),
                                 train_windows.front().stats.size());

    for (int t = 0; t < kNumTargets; ++t) {
        double mean = 0.0;
        for (const auto& s : train_windows) mean += s.target[static_cast<std::size_t>(t)];
        mean /= static_cast<double>(train_windows.size());
        double var = 0.0;
        for (const auto& s : train_windows) {
            const double dx = s.target[static_cast<std::size_t>(t)] - mean;
            var += dx * dx;
        }
        var /= static_cast<double>(train_windows.size());
        ctx.target_mean[static_cast<std::size_t>(t)] = mean;
        ctx.target_std[static_cast<std::size_t>(t)] = var > 0.0 ? std::sqrt(var) : 1.0;
    }
    return ctx;
}

Partition build_partition(const std::vector<TimeSeriesDataset>& datasets,
                          const std::vector<std::size_t>& indices, const PipelineContext& ctx) {
    Partition part;
    for (const std::size_t i : indices) {
        auto w = make_windows(datasets[i], ctx.window_cfg, ctx.channels);
        part.windows.insert(part.windows.end(), w.begin(), w.end());
    }
    if (part.windows.empty()) return part;
    const std::size_t width = part.windows.front().stats.size();
    part.stats_scaled.reserve(part.windows.size() * width);
    for (const auto& s : part.windows) {
        const std::size_t base = part.stats_scaled.size();
        part.stats_scaled.insert(part.stats_scaled.end(), s.stats.begin(), s.stats.end());
        ctx.stat_scaler.transform(part.stats_scaled.data() + base);
    }
    for (int t = 0; t < kNumTargets; ++t) {
        auto& y = part.y[static_cast<std::size_t>(t)];
        y.reserve(part.windows.size());
        for (const auto& s : part.windows) y.push_back(s.target[static_cast<std::size_t>(t)]);
    }
    return part;
}

namespace {

void write_scaler(std::ofstream& out, const char* name, const Scaler& sc) {
    out << "scaler " << name << ' ' << sc.size() << '\n';
    for (std::size_t i = 0; i < sc.size(); ++i) {
        out << format_double(sc.mean[i]) << ' ' << format_double(sc.std_dev[i]) << ' '
            << static_cast<int>(sc.zero_variance[i]) << '\n';
    }
}

Scaler read_scaler(std::ifstream& in, const std::string& path, const char* name) {
    std::string line;
    if (!std::getline(in, line)) throw FormatError(path + ": truncated scaler " + name);
    std::vector<std::string> tok;
    {
        std::size_t i = 0;
        while (i < line.size()) {
            while (i < line.size() && line[i] == ' ') ++i;
            std::size_t j = i;
            while (j < line.size() && line[j] != ' ') ++j;
            if (j > i) tok.push_back(line.substr(i, j - i));
            i = j;
        }
    }
    if (tok.size() != 3 || tok[0] != "scaler" || tok[1] != name) {
        throw FormatError(path + ": expected scaler " + name);
    }
    const std::size_t n = std::stoull(tok[2]);
    Scaler sc;
    sc.mean.resize(n);
    sc.std_dev.resize(n);
    sc.zero_variance.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (!std::getline(in, line)) throw FormatError(path + ": truncated scaler " + name);
        std::size_t a = line.find(' ');
        std::size_t b = line.rfind(' ');
        if (a == std::string::npos || b == a) throw FormatError(path + ": malformed scaler row");
        sc.mean[i] = parse_double(std::string_view(line).substr(0, a));
        sc.std_dev[i] = parse_double(std::string_view(line).substr(a + 1, b - a - 1));
        sc.zero_variance[i] = static_cast<std::uint8_t>(line[b + 1] == '1');
    }
    return sc;
}

}  // namespace

void save_pipeline(const PipelineContext& ctx, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw EnvironmentError("cannot open for writing: " + path);
    out << "mgs-pipeline 1\n";
    out << "config_hash " << format_hex64(ctx.config_hash) << '\n';
    out << "schema " << format_hex64(ctx.schema) << '\n';
    out << "window " << ctx.window_cfg.window << ' ' << ctx.window_cfg.stride << ' '
        << ctx.window_cfg.horizon << '\n';
    out << "channels " << ctx.channels.size();
    for (const auto& c : ctx.channels) out << ' ' << c;
    out << '\n';
    write_scaler(out, "sequence", ctx.seq_scaler);
    write_scaler(out, "stats", ctx.stat_scaler);
    out << "targets";
    for (int t = 0; t < kNumTargets; ++t) {
        out << ' ' << format_double(ctx.target_mean[static_cast<std::size_t>(t)]) << ' '
            << format_double(ctx.target_std[static_cast<std::size_t>(t)]);
    }
    out << '\n';
    if (!out) throw EnvironmentError("write failed: " + path);
}

PipelineContext load_pipeline(const std::string& path, std::uint64_t expect_config_hash) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DependencyError("pipeline context missing: " + path + " (run train first)");
    std::string line;
    if (!std::getline(in, line) || line != "mgs-pipeline 1") {
        throw FormatError(path + ": not a pipeline file");
    }
    PipelineContext ctx;
    auto tokens = [&](const std::string& l) {
        std::vector<std::string> out;
        std::size_t i = 0;
        while (i < l.size()) {
            while (i < l.size() && l[i] == ' ') ++i;
            std::size_t j = i;
            while (j < l.size() && l[j] != ' ') ++j;
            if (j > i) out.push_back(l.substr(i, j - i));
            i = j;
        }
        return out;
    };
    std::getline(in, line);
    ctx.config_hash = parse_hex64(tokens(line).at(1));
    std::getline(in, line);
    ctx.schema = parse_hex64(tokens(line).at(1));
    std::getline(in, line);
    {
        auto t = tokens(line);
        ctx.window_cfg.window = std::stoi(t.at(1));
        ctx.window_cfg.stride = std::stoi(t.at(2));
        ctx.window_cfg.horizon = std::stoi(t.at(3));
    }
    std::getline(in, line);
    {
        auto t = tokens(line);
        const std::size_t n = std::stoull(t.at(1));
        for (std::size_t i = 0; i < n; ++i) ctx.channels.push_back(t.at(2 + i));
    }
    ctx.seq_scaler = read_scaler(in, path, "sequence");
    ctx.stat_scaler = read_scaler(in, path, "stats");
    std::getline(in, line);
    {
        auto t = tokens(line);
        for (int k = 0; k < kNumTargets; ++k) {
            ctx.target_mean[static_cast<std::size_t>(k)] = parse_double(t.at(1 + 2 * static_cast<std::size_t>(k)));
            ctx.target_std[static_cast<std::size_t>(k)] = parse_double(t.at(2 + 2 * static_cast<std::size_t>(k)));
        }
    }
    if (expect_config_hash != 0 && ctx.config_hash != expect_config_hash) {
        throw ContractError(path + ": pipeline was fitted under config " +
                            format_hex64(ctx.config_hash) + ", current config is " +
                            format_hex64(expect_config_hash));
    }
    return ctx;
}

namespace {

void write_history(const std::string& path, const std::vector<double>& train,
                   const std::vector<double>& val) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw EnvironmentError("cannot open for writing: " + path);
    out << "stage,train_mse,val_mse\n";
    for (std::size_t i = 0; i < train.size(); ++i) {
        out << (i + 1) << ',' << format_double(train[i]) << ',';
        if (i < val.size()) out << format_double(val[i]);
        out << '\n';
    }
}

std::vector<int> requested_targets(const std::string& target) {
    if (target == "all" || target.empty()) return {0, 1, 2, 3};
    return {target_index(target)};
}

}  // namespace

ModelSet train_models(const RunConfig& config, const Corpus& corpus, bool do_gbm, bool do_cnn,
                      bool do_hybrid, const std::string& target) {
    config.validate();
    ensure_dir(config.model_dir);
    const std::uint64_t cfg_hash = config.hash();

    ModelSet set;
    set.ctx = fit_pipeline(config, corpus);
    save_pipeline(set.ctx, config.model_dir + "/pipeline.txt");

    Partition train_part = build_partition(corpus.datasets, corpus.split.train, set.ctx);
    Partition val_part = build_partition(corpus.datasets, corpus.split.validation, set.ctx);
    if (train_part.windows.empty() || val_part.windows.empty()) {
        throw DataError("train: empty train or validation partition");
    }
    const std::size_t width = train_part.windows.front().stats.size();
    const auto targets = requested_targets(target);

    if (do_gbm) {
        set.gbm_models.resize(kNumTargets);
        for (const int t : targets) {
            gbm::Hyperparams hp = config.gbm_hp;
            hp.seed = hash_mix(config.seed, 0x67626d00ull + static_cast<std::uint64_t>(t));
            gbm::Model model = gbm::fit(
                train_part.stats_scaled.data(), train_part.y[static_cast<std::size_t>(t)].data(),
                train_part.windows.size(), val_part.stats_scaled.data(),
                val_part.y[static_cast<std::size_t>(t)].data(), val_part.windows.size(), width, hp,
                set.ctx.schema);
            model.config_hash = cfg_hash;
            model.target_name = target_names()[static_cast<std::size_t>(t)];
            gbm::save(model, config.model_dir + "/gbm_" + model.target_name + ".txt");
            write_history(config.model_dir + "/history_gbm_" + model.target_name + ".csv",
                          model.train_mse, model.val_mse);
            set.gbm_models[static_cast<std::size_t>(t)] = std::move(model);
        }
    }

    if (do_cnn) {
        set.cnn_models.resize(kNumTargets);
        cnn::Config base = config.cnn_config();
        base.channels = static_cast<int>(set.ctx.channels.size());
        for (const int t : targets) {
            cnn::Config cfg = base;
            cfg.seed = hash_mix(config.seed, 0x636e6e00ull + static_cast<std::uint64_t>(t));
            const cnn::TargetSpec spec{t, set.ctx.target_mean[static_cast<std::size_t>(t)],
                                       set.ctx.target_std[static_cast<std::size_t>(t)]};
            cnn::Model model =
                cnn::train(cfg, train_part.windows, val_part.windows, set.ctx.seq_scaler, spec);
            model.schema_hash = set.ctx.schema;
            model.config_hash = cfg_hash;
            model.target_name = target_names()[static_cast<std::size_t>(t)];
            cnn::save(model, config.model_dir + "/cnn_" + model.target_name + ".txt");
            write_history(config.model_dir + "/history_cnn_" + model.target_name + ".csv",
                          model.train_mse, model.val_mse);
            set.cnn_models[static_cast<std::size_t>(t)] = std::move(model);
        }
    }

    if (do_hybrid) {
        if (set.gbm_models.empty() || set.cnn_models.empty()) {
            ModelSet bases = load_models(config, true, true, false);
            if (set.gbm_models.empty()) set.gbm_models = std::move(bases.gbm_models);
            if (set.cnn_models.empty()) set.cnn_models = std::move(bases.cnn_models);
        }
        HybridModel hybrid;
        hybrid.config_hash = cfg_hash;
        for (int t = 0; t < kNumTargets; ++t) {
            const auto gbm_pred =
                gbm::predict(set.gbm_models[static_cast<std::size_t>(t)], val_part.stats_scaled.data(),
                             val_part.windows.size(), width, set.ctx.schema);
            const auto cnn_pred = cnn::predict(set.cnn_models[static_cast<std::size_t>(t)],
                                               val_part.windows, set.ctx.seq_scaler);
            hybrid.alpha[static_cast<std::size_t>(t)] =
                fit_hybrid_alpha(cnn_pred, gbm_pred, val_part.y[static_cast<std::size_t>(t)]);
        }
        save_hybrid(hybrid, config.model_dir + "/hybrid.txt");
        set.hybrid = hybrid;
    }
    return set;
}

ModelSet load_models(const RunConfig& config, bool need_gbm, bool need_cnn, bool need_hybrid) {
    const std::uint64_t cfg_hash = config.hash();
    ModelSet set;
    set.ctx = load_pipeline(config.model_dir + "/pipeline.txt", cfg_hash);

    auto require = [&](const std::string& path) {
        if (!fs::exists(path)) {
            throw DependencyError("model file missing: " + path + " (run train first)");
        }
    };
    if (need_gbm) {
        set.gbm_models.resize(kNumTargets);
        for (int t = 0; t < kNumTargets; ++t) {
            const std::string path =
                config.model_dir + "/gbm_" + target_names()[static_cast<std::size_t>(t)] + ".txt";
            require(path);
            gbm::Model m = gbm::load(path);
            if (m.config_hash != cfg_hash) {
                throw ContractError(path + ": trained under config " + format_hex64(m.config_hash) +
                                    ", current config is " + format_hex64(cfg_hash));
            }
            set.gbm_models[static_cast<std::size_t>(t)] = std::move(m);
        }
    }
    if (need_cnn) {
        set.cnn_models.resize(kNumTargets);
        for (int t = 0; t < kNumTargets; ++t) {
            const std::string path =
                config.model_dir + "/cnn_" + target_names()[static_cast<std::size_t>(t)] + ".txt";
            require(path);
            cnn::Model m = cnn::load(path);
            if (m.config_hash != cfg_hash) {
                throw ContractError(path + ": trained under config " + format_hex64(m.config_hash) +
                                    ", current config is " + format_hex64(cfg_hash));
            }
            set.cnn_models[static_cast<std::size_t>(t)] = std::move(m);
        }
    }
    if (need_hybrid) {
        const std::string path = config.model_dir + "/hybrid.txt";
        require(path);
        HybridModel h = load_hybrid(path);
        if (h.config_hash != cfg_hash) {
            throw ContractError(path + ": trained under config " + format_hex64(h.config_hash) +
                                ", current config is " + format_hex64(cfg_hash));
        }
        set.hybrid = h;
    }
    return set;
}

PredictionTable predict_all(const ModelSet& models, const Partition& part) {
    PredictionTable table;
    const std::size_t width = part.windows.empty() ? 0 : part.windows.front().stats.size();

    std::array<std::vector<double>, kNumTargets> gbm_pred;
    std::array<std::vector<double>, kNumTargets> cnn_pred;
    if (!models.gbm_models.empty()) {
        for (int t = 0; t < kNumTargets; ++t) {
            gbm_pred[static_cast<std::size_t>(t)] =
                gbm::predict(models.gbm_models[static_cast<std::size_t>(t)], part.stats_scaled.data(),
                             part.windows.size(), width, models.ctx.schema);
        }
        table.by_model.push_back(gbm_pred);
        table.model_names.push_back("gbm");
    }
    if (!models.cnn_models.empty()) {
        for (int t = 0; t < kNumTargets; ++t) {
            cnn_pred[static_cast<std::size_t>(t)] = cnn::predict(
                models.cnn_models[static_cast<std::size_t>(t)], part.windows, models.ctx.seq_scaler);
        }
        table.by_model.push_back(cnn_pred);
        table.model_names.push_back("cnn");
    }
    if (models.hybrid && !models.gbm_models.empty() && !models.cnn_models.empty()) {
        std::array<std::vector<double>, kNumTargets> hybrid_pred;
        for (int t = 0; t < kNumTargets; ++t) {
            hybrid_pred[static_cast<std::size_t>(t)] =
                hybrid_combine(models.hybrid->alpha[static_cast<std::size_t>(t)],
                               cnn_pred[static_cast<std::size_t>(t)], gbm_pred[static_cast<std::size_t>(t)]);
        }
        table.by_model.push_back(std::move(hybrid_pred));
        table.model_names.push_back("hybrid");
    }
    return table;
}

namespace {

void write_plot_files(const RunConfig& config, const std::string& partition,
                      const PredictionTable& preds, const Partition& part) {
    for (std::size_t m = 0; m < preds.model_names.size(); ++m) {
        for (int t = 0; t < kNumTargets; ++t) {
            const auto& target = target_names()[static_cast<std::size_t>(t)];
            const auto& y = part.y[static_cast<std::size_t>(t)];
            const auto& p = preds.by_model[m][static_cast<std::size_t>(t)];
            {
                std::ofstream out(config.report_dir + "/pred_" + partition + "_" +
                                  preds.model_names[m] + "_" + target + ".csv");
                out << "index,y_true,y_pred\n";
                for (std::size_t i = 0; i < y.size(); ++i) {
                    out << i << ',' << format_double(y[i]) << ',' << format_double(p[i]) << '\n';
                }
            }
            {
                // residual histogram, 30 bins
                std::vector<double> res(y.size());
                for (std::size_t i = 0; i < y.size(); ++i) res[i] = p[i] - y[i];
                const auto [lo_it, hi_it] = std::minmax_element(res.begin(), res.end());
                double lo = *lo_it;
                double hi = *hi_it;
                if (hi <= lo) hi = lo + 1e-12;
                constexpr int kBins = 30;
                std::array<long, kBins> counts{};
                for (const double r : res) {
                    int b = static_cast<int>((r - lo) / (hi - lo) * kBins);
                    b = std::clamp(b, 0, kBins - 1);
                    ++counts[static_cast<std::size_t>(b)];
                }
                std::ofstream out(config.report_dir + "/residual_hist_" + partition + "_" +
                                  preds.model_names[m] + "_" + target + ".csv");
                out << "bin_lo,bin_hi,count\n";
                for (int b = 0; b < kBins; ++b) {
                    const double blo = lo + (hi - lo) * b / kBins;
                    const double bhi = lo + (hi - lo) * (b + 1) / kBins;
                    out << format_double(blo) << ',' << format_double(bhi) << ','
                        << counts[static_cast<std::size_t>(b)] << '\n';
                }
            }
        }
    }
}

void append_metrics(MetricsReport& report, const std::string& partition,
                    const PredictionTable& preds, const Partition& part) {
    for (std::size_t m = 0; m < preds.model_names.size(); ++m) {
        for (int t = 0; t < kNumTargets; ++t) {
            const auto& y = part.y[static_cast<std::size_t>(t)];
            const auto& p = preds.by_model[m][static_cast<std::size_t>(t)];
            MetricsRecord rec;
            rec.partition = partition;
            rec.model = preds.model_names[m];
            rec.target = target_names()[static_cast<std::size_t>(t)];
            rec.samples = y.size();
            rec.rmse = rmse(y, p);
            rec.mae = mae(y, p);
            const R2 r = r2(y, p);
            rec.r2 = r.value;
            rec.r2_defined = r.defined;
            report.records.push_back(std::move(rec));
        }
    }
}

}  // namespace

MetricsReport evaluate_models(const RunConfig& config, const ModelSet& models, const Corpus& corpus,
                              const std::string& partition, bool write_plot_data) {
    if (write_plot_data) ensure_dir(config.report_dir);
    MetricsReport report;
    report.config_hash = config.hash();

    struct Job {
        std::string name;
        std::vector<std::size_t> indices;
    };
    std::vector<Job> jobs;
    std::vector<std::size_t> noise_idx;
    std::vector<std::size_t> delay_idx;
    for (const std::size_t i : corpus.split.test_ood) {
        if (corpus.datasets[i].scenario_id == "noise") noise_idx.push_back(i);
        if (corpus.datasets[i].scenario_id == "comm_delay") delay_idx.push_back(i);
    }
    const bool want_val = partition == "all" || partition == "val";
    const bool want_ood = partition == "all" || partition == "ood";
    if (want_val) jobs.push_back({"val", corpus.split.validation});
    if (want_ood) {
        if (!noise_idx.empty()) jobs.push_back({"ood_noise", noise_idx});
        if (!delay_idx.empty()) jobs.push_back({"ood_delay", delay_idx});
        jobs.push_back({"ood", corpus.split.test_ood});
    }
    if (jobs.empty()) throw ConfigError("evaluate: unknown partition '" + partition + "'");

    for (const auto& job : jobs) {
        const Partition part = build_partition(corpus.datasets, job.indices, models.ctx);
        if (part.windows.empty()) continue;
        const PredictionTable preds = predict_all(models, part);
        append_metrics(report, job.name, preds, part);
        if (write_plot_data) write_plot_files(config, job.name, preds, part);
    }
    return report;
}

BenchReport run_benchmark(const RunConfig& config, const ModelSet& models, const Corpus& corpus) {
    BenchReport report;
    report.config_hash = config.hash();
    report.hardware = hardware_note();
    report.repetitions = config.bench_repetitions;

    if (models.gbm_models.empty() || models.cnn_models.empty() || !models.hybrid) {
        throw DependencyError("benchmark requires trained gbm, cnn, and hybrid models");
    }

    // reference: the simulator over the fixed 1.0 s horizon of the normal scenario
    const NetworkModel net = build_network(config.build_options());
    ScenarioSpec normal_spec = list_scenarios(1.0, config.dt_out).front();
    normal_spec.seed = config.seed;
    const double simulated = normal_spec.duration;

    const double t_sim = time_median(
        [&] { (void)run_scenario(normal_spec, net, config.sim_options(), config.hash()); },
        config.bench_repetitions);

    // windows covering the same 1.0 s of signal
    const TimeSeriesDataset* normal_ds = nullptr;
    for (const auto& ds : corpus.datasets) {
        if (ds.scenario_id == "normal") normal_ds = &ds;
    }
    if (!normal_ds) throw DependencyError("benchmark requires the normal-scenario dataset");
    const Partition part = build_partition(
        corpus.datasets, {static_cast<std::size_t>(normal_ds - corpus.datasets.data())}, models.ctx);
    if (part.windows.empty()) throw ValidationError("benchmark: zero windows over the horizon");

    const std::size_t width = part.windows.front().stats.size();
    volatile double sink = 0.0;

    // inference with precomputed features
    const double t_gbm = time_median(
        [&] {
            double acc = 0.0;
            for (int t = 0; t < kNumTargets; ++t) {
                const auto p = gbm::predict(models.gbm_models[static_cast<std::size_t>(t)],
                                            part.stats_scaled.data(), part.windows.size(), width,
                                            models.ctx.schema);
                acc += p.back();
            }
            sink = acc;
        },
        config.bench_repetitions);
    const double t_cnn = time_median(
        [&] {
            double acc = 0.0;
            for (int t = 0; t < kNumTargets; ++t) {
                const auto p = cnn::predict(models.cnn_models[static_cast<std::size_t>(t)],
                                            part.windows, models.ctx.seq_scaler);
                acc += p.back();
            }
            sink = acc;
        },
        config.bench_repetitions);
    const double t_hybrid = time_median(
        [&] {
            double acc = 0.0;
            for (int t = 0; t < kNumTargets; ++t) {
                const auto g = gbm::predict(models.gbm_models[static_cast<std::size_t>(t)],
                                            part.stats_scaled.data(), part.windows.size(), width,
                                            models.ctx.schema);
                const auto c = cnn::predict(models.cnn_models[static_cast<std::size_t>(t)],
                                            part.windows, models.ctx.seq_scaler);
                const auto h =
                    hybrid_combine(models.hybrid->alpha[static_cast<std::size_t>(t)], c, g);
                acc += h.back();
            }
            sink = acc;
        },
        config.bench_repetitions);

    // end-to-end variants include featurization from raw frames
    const double t_gbm_e2e = time_median(
        [&] {
            const Partition p = build_partition(
                corpus.datasets, {static_cast<std::size_t>(normal_ds - corpus.datasets.data())},
                models.ctx);
            double acc = 0.0;
            for (int t = 0; t < kNumTargets; ++t) {
                const auto pr = gbm::predict(models.gbm_models[static_cast<std::size_t>(t)],
                                             p.stats_scaled.data(), p.windows.size(), width,
                                             models.ctx.schema);
                acc += pr.back();
            }
            sink = acc;
        },
        config.bench_repetitions);
    const double t_cnn_e2e = time_median(
        [&] {
            const Partition p = build_partition(
                corpus.datasets, {static_cast<std::size_t>(normal_ds - corpus.datasets.data())},
                models.ctx);
            double acc = 0.0;
            for (int t = 0; t < kNumTargets; ++t) {
                const auto pr = cnn::predict(models.cnn_models[static_cast<std::size_t>(t)],
                                             p.windows, models.ctx.seq_scaler);
                acc += pr.back();
            }
            sink = acc;
        },
        config.bench_repetitions);
    (void)sink;

    auto add_record = [&](const std::string& method, double wall) {
        RuntimeRecord rec;
        rec.method = method;
        rec.simulated_time = simulated;
        rec.wall_time = wall;
        rec.speedup = speedup(t_sim, wall);
        rec.rt_ratio = rt_ratio(simulated, wall);
        rec.repetitions = config.bench_repetitions;
        rec.hardware = report.hardware;
        report.records.push_back(std::move(rec));
    };
    add_record("simulator", t_sim);
    add_record("gbm", t_gbm);
    add_record("cnn", t_cnn);
    add_record("hybrid", t_hybrid);
    add_record("gbm_e2e", t_gbm_e2e);
    add_record("cnn_e2e", t_cnn_e2e);
    return report;
}

}  // namespace mgs
