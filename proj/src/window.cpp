#include "mgs/window.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

namespace mgs {

DerivedChannels derive_channels(const MeasurementFrame& frame, double v_nom_mag) {
    DerivedChannels dc;
    const double v1 = frame.channels[0];
    const double v2 = frame.channels[1];
    const double v3 = frame.channels[2];
    dc.v_mag = std::sqrt(v1 * v1 + v2 * v2 + v3 * v3);
    for (int k = 0; k < kNumDg; ++k) {
        dc.p_total += frame.channels[static_cast<std::size_t>(6 + k)];
        dc.q_total += frame.channels[static_cast<std::size_t>(16 + k)];
    }
    const double dip = (v_nom_mag - dc.v_mag) / v_nom_mag;
    dc.v_dip = std::clamp(dip, 0.0, 1.0);
    return dc;
}

const std::array<std::string, kNumTargets>& target_names() {
    static const std::array<std::string, kNumTargets> names{"vmag", "fdg1", "ptotal", "vdip"};
    return names;
}

int target_index(const std::string& name) {
    const auto& names = target_names();
    for (int i = 0; i < kNumTargets; ++i) {
        if (names[static_cast<std::size_t>(i)] == name) return i;
    }
    throw FormatError("unknown target name: " + name);
}

std::vector<std::string> default_input_channels() {
    std::vector<std::string> chans(channel_names().begin(), channel_names().end());
    chans.push_back("P_total");
    chans.push_back("Q_total");
    return chans;
}

std::shared_ptr<const ChannelMatrix> build_channel_matrix(const TimeSeriesDataset& ds,
                                                          const std::vector<std::string>& channels) {
    auto mat = std::make_shared<ChannelMatrix>();
    mat->n = static_cast<int>(ds.frames.size());
    mat->d = static_cast<int>(channels.size());
    mat->channel_names = channels;
    mat->scenario_id = ds.scenario_id;
    mat->v_nom_mag = std::sqrt(3.0) * ds.metadata.v_nom;
    mat->values.resize(static_cast<std::size_t>(mat->n) * static_cast<std::size_t>(mat->d));
    mat->targets.resize(static_cast<std::size_t>(mat->n));

    // resolve each requested channel to a measured index or a derived slot
    enum class Slot { measured, p_total, q_total, v_mag, v_dip };
    std::vector<std::pair<Slot, int>> slots;
    slots.reserve(channels.size());
    for (const auto& name : channels) {
        if (name == "P_total") slots.emplace_back(Slot::p_total, 0);
        else if (name == "Q_total") slots.emplace_back(Slot::q_total, 0);
        else if (name == "V_mag") slots.emplace_back(Slot::v_mag, 0);
        else if (name == "V_dip") slots.emplace_back(Slot::v_dip, 0);
        else slots.emplace_back(Slot::measured, channel_index(name));
    }

    for (int t = 0; t < mat->n; ++t) {
        const auto& frame = ds.frames[static_cast<std::size_t>(t)];
        const DerivedChannels dc = derive_channels(frame, mat->v_nom_mag);
        double* row = mat->values.data() + static_cast<std::size_t>(t) * mat->d;
        for (int j = 0; j < mat->d; ++j) {
            switch (slots[static_cast<std::size_t>(j)].first) {
                case Slot::measured:
                    row[j] = frame.channels[static_cast<std::size_t>(slots[static_cast<std::size_t>(j)].second)];
                    break;
                case Slot::p_total: row[j] = dc.p_total; break;
                case Slot::q_total: row[j] = dc.q_total; break;
                case Slot::v_mag: row[j] = dc.v_mag; break;
                case Slot::v_dip: row[j] = dc.v_dip; break;
            }
        }
        mat->targets[static_cast<std::size_t>(t)] = {dc.v_mag, frame.channels[26], dc.p_total, dc.v_dip};
    }
    return mat;
}

void WindowConfig::validate() const {
    if (window < 1) throw ValidationError("window length W must be >= 1");
    if (stride < 1) throw ValidationError("stride S must be >= 1");
    if (horizon < 0) throw ValidationError("horizon h must be >= 0");
}

long expected_window_count(long frames, const WindowConfig& cfg) {
    if (frames < cfg.window + cfg.horizon) return 0;
    return (frames - cfg.window - cfg.horizon) / cfg.stride + 1;
}

std::vector<double> extract_stats(const double* sequence, int window, int d) {
    if (window < 1 || d < 1) throw ValidationError("extract_stats: empty sequence");
    std::vector<double> stats(static_cast<std::size_t>(5 * d));
    for (int j = 0; j < d; ++j) {
        double sum = 0.0;
        double lo = sequence[j];
        double hi = sequence[j];
        for (int t = 0; t < window; ++t) {
            const double x = sequence[static_cast<std::size_t>(t) * d + j];
            sum += x;
            lo = std::min(lo, x);
            hi = std::max(hi, x);
        }
        const double mean = sum / window;
        double ss = 0.0;
        for (int t = 0; t < window; ++t) {
            const double dx = sequence[static_cast<std::size_t>(t) * d + j] - mean;
            ss += dx * dx;
        }
        double* out = stats.data() + static_cast<std::size_t>(5 * j);
        out[0] = mean;
        out[1] = std::sqrt(ss / window);  // population std, defined for W = 1
        out[2] = lo;
        out[3] = hi;
        out[4] = sequence[static_cast<std::size_t>(window - 1) * d + j];
    }
    return stats;
}

std::vector<WindowSample> make_windows(const std::shared_ptr<const ChannelMatrix>& mat,
                                       const WindowConfig& cfg) {
    cfg.validate();
    std::vector<WindowSample> samples;
    const long count = expected_window_count(mat->n, cfg);
    samples.reserve(static_cast<std::size_t>(count));
    for (long j = 0; j < count; ++j) {
        WindowSample s;
        s.source = mat;
        s.start = static_cast<int>(j * cfg.stride);
        s.window = cfg.window;
        s.scenario_id = mat->scenario_id;
        s.end_index = s.start + cfg.window - 1;
        const long target_at = s.end_index + cfg.horizon;
        s.stats = extract_stats(mat->row(s.start), cfg.window, mat->d);
        s.target = mat->targets[static_cast<std::size_t>(target_at)];
        samples.push_back(std::move(s));
    }
    return samples;
}

std::vector<WindowSample> make_windows(const TimeSeriesDataset& ds, const WindowConfig& cfg,
                                       const std::vector<std::string>& channels) {
    return make_windows(build_channel_matrix(ds, channels), cfg);
}

void sort_canonical(std::vector<WindowSample>& samples) {
    std::stable_sort(samples.begin(), samples.end(), [](const WindowSample& a, const WindowSample& b) {
        if (a.scenario_id != b.scenario_id) return a.scenario_id < b.scenario_id;
        return a.end_index < b.end_index;
    });
}

void Scaler::transform(double* x) const {
    for (std::size_t i = 0; i < mean.size(); ++i) {
        x[i] = (x[i] - mean[i]) / std_dev[i];
    }
}

void Scaler::inverse(double* x) const {
    for (std::size_t i = 0; i < mean.size(); ++i) {
        x[i] = x[i] * std_dev[i] + mean[i];
    }
}

std::vector<double> Scaler::transformed(const std::vector<double>& x) const {
    std::vector<double> out = x;
    transform(out.data());
    return out;
}

Scaler fit_scaler(const double* values, std::size_t rows, std::size_t width) {
    if (rows == 0 || width == 0) throw DataError("fit_scaler: empty training set");
    Scaler sc;
    sc.mean.assign(width, 0.0);
    sc.std_dev.assign(width, 0.0);
    sc.zero_variance.assign(width, 0);
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t j = 0; j < width; ++j) {
            const double x = values[r * width + j];
            if (!std::isfinite(x)) {
                throw DataError("fit_scaler: non-finite value at row " + std::to_string(r) +
                                ", column " + std::to_string(j));
            }
            sc.mean[j] += x;
        }
    }
    for (std::size_t j = 0; j < width; ++j) sc.mean[j] /= static_cast<double>(rows);
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t j = 0; j < width; ++j) {
            const double dx = values[r * width + j] - sc.mean[j];
            sc.std_dev[j] += dx * dx;
        }
    }
    for (std::size_t j = 0; j < width; ++j) {
        sc.std_dev[j] = std::sqrt(sc.std_dev[j] / static_cast<double>(rows));
        if (sc.std_dev[j] <= 0.0) {
            sc.std_dev[j] = 1.0;  // degenerate feature maps to 0
            sc.zero_variance[j] = 1;
        }
    }
    return sc;
}

Scaler fit_scaler(const std::vector<std::vector<double>>& rows) {
    if (rows.empty()) throw DataError("fit_scaler: empty training set");
    const std::size_t width = rows[0].size();
    std::vector<double> flat;
    flat.reserve(rows.size() * width);
    for (const auto& r : rows) {
        if (r.size() != width) throw DataError("fit_scaler: ragged rows");
        flat.insert(flat.end(), r.begin(), r.end());
    }
    return fit_scaler(flat.data(), rows.size(), width);
}

void write_feature_matrix(const std::vector<WindowSample>& samples, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw EnvironmentError("cannot open for writing: " + path);
    std::string header;
    if (!samples.empty()) {
        const auto& chans = samples.front().source->channel_names;
        for (const auto& ch : chans) {
            for (const auto& st : stat_names()) {
                if (!header.empty()) header += ',';
                header += ch + "_" + st;
            }
        }
    }
    header += header.empty() ? "y_Vmag,y_fDG1,y_Ptotal,y_Vdip" : ",y_Vmag,y_fDG1,y_Ptotal,y_Vdip";
    out << header << '\n';
    std::string line;
    for (const auto& s : samples) {
        line.clear();
        for (double v : s.stats) {
            if (!line.empty()) line += ',';
            line += format_double(v);
        }
        for (double v : s.target) {
            if (!line.empty()) line += ',';
            line += format_double(v);
        }
        line += '\n';
        out << line;
    }
    if (!out) throw EnvironmentError("write failed: " + path);
}

std::uint64_t schema_hash(const std::vector<std::string>& channels, const WindowConfig& cfg) {
    std::string repr = "W=" + std::to_string(cfg.window) + ";S=" + std::to_string(cfg.stride) +
                       ";h=" + std::to_string(cfg.horizon) + ";stats=mean,std,min,max,last;channels=";
    for (const auto& c : channels) {
        repr += c;
        repr += ',';
    }
    return fnv1a(repr);
}

}  // namespace mgs
