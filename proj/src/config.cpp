#include "mgs/config.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

namespace mgs {

void RunConfig::validate() const {
    if (!(v_nom_ll > 0.0)) throw ConfigError("simulator.v_nom_ll must be > 0");
    if (!(power_filter_cutoff > 0.0)) throw ConfigError("simulator.power_filter_cutoff must be > 0");
    if (!(dt_sim > 0.0)) throw ConfigError("simulator.dt_sim must be > 0");
    if (!(duration > 0.0)) throw ConfigError("scenario.duration must be > 0");
    if (!(dt_out > 0.0)) throw ConfigError("scenario.dt_out must be > 0");
    window_cfg.validate();
    gbm_hp.validate();
    cnn_config().validate();
    if (!(validation_fraction > 0.0 && validation_fraction < 1.0)) {
        throw ConfigError("split.validation_fraction must be in (0, 1)");
    }
    if (bench_repetitions < 3) throw ConfigError("bench.repetitions must be >= 3");
}

BuildOptions RunConfig::build_options() const {
    BuildOptions opt;
    opt.nominal_voltage = v_nom_phase();
    opt.grid.voltage = v_nom_phase();
    opt.grid.online = grid_online;
    opt.loads.fill(Complex{load_p, load_q});
    for (int k = 1; k <= kNumDg; ++k) {
        DgParams dg;
        dg.nominal_voltage = v_nom_phase();
        dg.power_filter_cutoff = power_filter_cutoff;
        opt.dg_overrides.emplace_back(k, dg);
    }
    return opt;
}

SimOptions RunConfig::sim_options() const {
    SimOptions sim;
    sim.dt_sim = dt_sim;
    sim.ambient_load = ambient_load;
    sim.ambient_freq_hz = ambient_freq_hz;
    sim.ambient_voltage = ambient_voltage;
    return sim;
}

SplitPolicy RunConfig::split_policy() const {
    SplitPolicy policy;
    policy.validation_fraction = validation_fraction;
    policy.seed = seed;
    policy.validation_scenarios.clear();
    std::size_t start = 0;
    while (start < validation_scenarios.size()) {
        std::size_t pos = validation_scenarios.find(',', start);
        if (pos == std::string::npos) pos = validation_scenarios.size();
        std::string name = validation_scenarios.substr(start, pos - start);
        while (!name.empty() && name.front() == ' ') name.erase(name.begin());
        while (!name.empty() && name.back() == ' ') name.pop_back();
        if (!name.empty()) policy.validation_scenarios.push_back(std::move(name));
        start = pos + 1;
    }
    return policy;
}

cnn::Config RunConfig::cnn_config() const {
    cnn::Config cfg;
    cfg.window = window_cfg.window;
    cfg.channels = static_cast<int>(default_input_channels().size());
    cfg.kernel = cnn_kernel;
    cfg.conv_filters = cnn_filters;
    cfg.dense = cnn_dense;
    cfg.learning_rate = cnn_learning_rate;
    cfg.batch_size = cnn_batch_size;
    cfg.max_epochs = cnn_max_epochs;
    cfg.patience = cnn_patience;
    cfg.seed = seed;
    return cfg;
}

namespace {

std::string bool_str(bool b) { return b ? "true" : "false"; }

bool parse_bool(const std::string& v, const std::string& key) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw ConfigError("config: " + key + " must be true/false, got '" + v + "'");
}

}  // namespace

std::string RunConfig::to_ini() const {
    std::ostringstream out;
    out << "[paths]\n";
    out << "data_dir = " << data_dir << '\n';
    out << "model_dir = " << model_dir << '\n';
    out << "report_dir = " << report_dir << '\n';
    out << "\n[simulator]\n";
    out << "v_nom_ll = " << format_double(v_nom_ll) << '\n';
    out << "power_filter_cutoff = " << format_double(power_filter_cutoff) << '\n';
    out << "dt_sim = " << format_double(dt_sim) << '\n';
    out << "load_p = " << format_double(load_p) << '\n';
    out << "load_q = " << format_double(load_q) << '\n';
    out << "grid_online = " << bool_str(grid_online) << '\n';
    out << "\n[scenario]\n";
    out << "duration = " << format_double(duration) << '\n';
    out << "dt_out = " << format_double(dt_out) << '\n';
    out << "ambient_load = " << format_double(ambient_load) << '\n';
    out << "ambient_freq_hz = " << format_double(ambient_freq_hz) << '\n';
    out << "ambient_voltage = " << format_double(ambient_voltage) << '\n';
    out << "\n[pipeline]\n";
    out << "window = " << window_cfg.window << '\n';
    out << "stride = " << window_cfg.stride << '\n';
    out << "horizon = " << window_cfg.horizon << '\n';
    out << "\n[gbm]\n";
    out << "learning_rate = " << format_double(gbm_hp.learning_rate) << '\n';
    out << "n_estimators = " << gbm_hp.n_estimators << '\n';
    out << "max_depth = " << gbm_hp.max_depth << '\n';
    out << "num_leaves = " << gbm_hp.num_leaves << '\n';
    out << "min_child_samples = " << gbm_hp.min_child_samples << '\n';
    out << "subsample = " << format_double(gbm_hp.subsample) << '\n';
    out << "colsample = " << format_double(gbm_hp.colsample) << '\n';
    out << "n_bins = " << gbm_hp.n_bins << '\n';
    out << "early_stopping_rounds = " << gbm_hp.early_stopping_rounds << '\n';
    out << "\n[cnn]\n";
    out << "kernel = " << cnn_kernel << '\n';
    out << "conv1 = " << cnn_filters[0] << '\n';
    out << "conv2 = " << cnn_filters[1] << '\n';
    out << "conv3 = " << cnn_filters[2] << '\n';
    out << "dense = " << cnn_dense << '\n';
    out << "learning_rate = " << format_double(cnn_learning_rate) << '\n';
    out << "batch_size = " << cnn_batch_size << '\n';
    out << "max_epochs = " << cnn_max_epochs << '\n';
    out << "patience = " << cnn_patience << '\n';
    out << "\n[split]\n";
    out << "validation_fraction = " << format_double(validation_fraction) << '\n';
    out << "validation_scenarios = " << validation_scenarios << '\n';
    out << "\n[ood]\n";
    out << "snr_db = " << format_double(ood_snr_db) << '\n';
    out << "delay = " << format_double(ood_delay) << '\n';
    out << "\n[bench]\n";
    out << "repetitions = " << bench_repetitions << '\n';
    out << "\n[run]\n";
    out << "seed = " << seed << '\n';
    return out.str();
}

std::uint64_t RunConfig::hash() const {
    // everything that shapes artifacts; paths and timing repetitions do not
    const std::string ini = to_ini();
    std::string hashed;
    std::istringstream in(ini);
    std::string line;
    std::string section;
    while (std::getline(in, line)) {
        if (!line.empty() && line.front() == '[') section = line;
        if (section == "[paths]" || section == "[bench]") continue;
        hashed += line;
        hashed += '\n';
    }
    return fnv1a(hashed);
}

RunConfig config_from_ini(const std::string& text) {
    RunConfig cfg;
    std::istringstream in(text);
    std::string line;
    std::string section;
    int line_no = 0;
    auto trim = [](std::string s) {
        while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.erase(s.begin());
        while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.pop_back();
        return s;
    };
    while (std::getline(in, line)) {
        ++line_no;
        line = trim(line);
        if (line.empty() || line[0] == '#' || line[0] == ';') continue;
        if (line.front() == '[') {
            if (line.back() != ']') throw ConfigError("config line " + std::to_string(line_no) + ": malformed section");
            section = line.substr(1, line.size() - 2);
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        const std::string qual = section + "." + key;
        try {
            if (qual == "paths.data_dir") cfg.data_dir = value;
            else if (qual == "paths.model_dir") cfg.model_dir = value;
            else if (qual == "paths.report_dir") cfg.report_dir = value;
            else if (qual == "simulator.v_nom_ll") cfg.v_nom_ll = parse_double(value);
            else if (qual == "simulator.power_filter_cutoff") cfg.power_filter_cutoff = parse_double(value);
            else if (qual == "simulator.dt_sim") cfg.dt_sim = parse_double(value);
            else if (qual == "simulator.load_p") cfg.load_p = parse_double(value);
            else if (qual == "simulator.load_q") cfg.load_q = parse_double(value);
            else if (qual == "simulator.grid_online") cfg.grid_online = parse_bool(value, qual);
            else if (qual == "scenario.duration") cfg.duration = parse_double(value);
            else if (qual == "scenario.dt_out") cfg.dt_out = parse_double(value);
            else if (qual == "scenario.ambient_load") cfg.ambient_load = parse_double(value);
            else if (qual == "scenario.ambient_freq_hz") cfg.ambient_freq_hz = parse_double(value);
            else if (qual == "scenario.ambient_voltage") cfg.ambient_voltage = parse_double(value);
            else if (qual == "pipeline.window") cfg.window_cfg.window = std::stoi(value);
            else if (qual == "pipeline.stride") cfg.window_cfg.stride = std::stoi(value);
            else if (qual == "pipeline.horizon") cfg.window_cfg.horizon = std::stoi(value);
            else if (qual == "gbm.learning_rate") cfg.gbm_hp.learning_rate = parse_double(value);
            else if (qual == "gbm.n_estimators") cfg.gbm_hp.n_estimators = std::stoi(value);
            else if (qual == "gbm.max_depth") cfg.gbm_hp.max_depth = std::stoi(value);
            else if (qual == "gbm.num_leaves") cfg.gbm_hp.num_leaves = std::stoi(value);
            else if (qual == "gbm.min_child_samples") cfg.gbm_hp.min_child_samples = std::stoi(value);
            else if (qual == "gbm.subsample") cfg.gbm_hp.subsample = parse_double(value);
            else if (qual == "gbm.colsample") cfg.gbm_hp.colsample = parse_double(value);
            else if (qual == "gbm.n_bins") cfg.gbm_hp.n_bins = std::stoi(value);
            else if (qual == "gbm.early_stopping_rounds") cfg.gbm_hp.early_stopping_rounds = std::stoi(value);
            else if (qual == "cnn.kernel") cfg.cnn_kernel = std::stoi(value);
            else if (qual == "cnn.conv1") cfg.cnn_filters[0] = std::stoi(value);
            else if (qual == "cnn.conv2") cfg.cnn_filters[1] = std::stoi(value);
            else if (qual == "cnn.conv3") cfg.cnn_filters[2] = std::stoi(value);
            else if (qual == "cnn.dense") cfg.cnn_dense = std::stoi(value);
            else if (qual == "cnn.learning_rate") cfg.cnn_learning_rate = parse_double(value);
            else if (qual == "cnn.batch_size") cfg.cnn_batch_size = std::stoi(value);
            else if (qual == "cnn.max_epochs") cfg.cnn_max_epochs = std::stoi(value);
            else if (qual == "cnn.patience") cfg.cnn_patience = std::stoi(value);
            else if (qual == "split.validation_fraction") cfg.validation_fraction = parse_double(value);
            else if (qual == "split.validation_scenarios") cfg.validation_scenarios = value;
            else if (qual == "ood.snr_db") cfg.ood_snr_db = parse_double(value);
            else if (qual == "ood.delay") cfg.ood_delay = parse_double(value);
            else if (qual == "bench.repetitions") cfg.bench_repetitions = std::stoi(value);
            else if (qual == "run.seed") cfg.seed = std::stoull(value);
            else throw ConfigError("config line " + std::to_string(line_no) + ": unknown key " + qual);
        } catch (const ConfigError&) {
            throw;
        } catch (const std::exception& e) {
            throw ConfigError("config line " + std::to_string(line_no) + ": bad value for " + qual +
                              " (" + e.what() + ")");
        }
    }
    cfg.gbm_hp.seed = cfg.seed;
    return cfg;
}

RunConfig load_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw EnvironmentError("cannot open config: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    RunConfig cfg = config_from_ini(ss.str());
    cfg.validate();
    return cfg;
}

void save_config(const RunConfig& config, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw EnvironmentError("cannot open for writing: " + path);
    out << config.to_ini();
    if (!out) throw EnvironmentError("write failed: " + path);
}

}  // namespace mgs
