#pragma once

// Converts datasets into supervised samples: derived channels, sliding
// windows, per-window statistics, standard scaling, and the 4-element
// target (V_mag, f_DG1, P_total, V_dip) taken at the window end plus the
// forecast horizon.

#include <array>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "mgs/scenario.hpp"

namespace mgs {

struct DerivedChannels {
    double v_mag = 0.0;    // sqrt(V1^2 + V2^2 + V3^2), V
    double p_total = 0.0;  // W
    double q_total = 0.0;  // var
    double v_dip = 0.0;    // relative shortfall below nominal, clamped to [0, 1]
};

// v_nom_mag is the balanced-nominal magnitude sqrt(3) * V_phase_rms.
DerivedChannels derive_channels(const MeasurementFrame& frame, double v_nom_mag);

inline constexpr int kNumTargets = 4;
const std::array<std::string, kNumTargets>& target_names();  // vmag fdg1 ptotal vdip
int target_index(const std::string& name);                   // throws FormatError

inline const std::array<std::string, 5>& stat_names() {
    static const std::array<std::string, 5> names{"mean", "std", "min", "max", "last"};
    return names;
}

// Input channels of one dataset laid out frames x d, plus the per-frame
// targets. Windows reference this storage instead of copying W x d blocks.
struct ChannelMatrix {
    int n = 0;  // frames
    int d = 0;  // channels
    std::vector<double> values;     // row-major n x d
    std::vector<std::string> channel_names;
    std::vector<std::array<double, kNumTargets>> targets;  // per frame
    std::string scenario_id;
    double v_nom_mag = 0.0;

    const double* row(int t) const { return values.data() + static_cast<std::size_t>(t) * d; }
};

// Default input set: the 36 measured channels plus P_total and Q_total.
// V_mag and V_dip stay out so the nowcast targets are not inputs.
std::vector<std::string> default_input_channels();

std::shared_ptr<const ChannelMatrix> build_channel_matrix(
    const TimeSeriesDataset& ds, const std::vector<std::string>& channels = default_input_channels());

struct WindowConfig {
    int window = 100;   // W, samples
    int stride = 10;    // S, samples
    int horizon = 0;    // h, samples ahead of the window end (0 = nowcast)

    void validate() const;
};

struct WindowSample {
    std::shared_ptr<const ChannelMatrix> source;
    int start = 0;           // first frame index
    int window = 0;          // W
    std::vector<double> stats;               // 5 * d, channel-major (mean,std,min,max,last)
    std::array<double, kNumTargets> target{};
    std::string scenario_id;
    std::int64_t end_index = 0;  // frame index of the window end (pre-horizon)

    int d() const { return source->d; }
    const double* row(int t) const { return source->row(start + t); }
};

// floor((N - W - h)/S) + 1 samples; an input shorter than W + h yields an
// empty list (reported through counts, not an error).
std::vector<WindowSample> make_windows(const std::shared_ptr<const ChannelMatrix>& mat,
                                       const WindowConfig& cfg);
std::vector<WindowSample> make_windows(const TimeSeriesDataset& ds, const WindowConfig& cfg,
                                       const std::vector<std::string>& channels = default_input_channels());

long expected_window_count(long frames, const WindowConfig& cfg);

// Per channel, in order: mean, population std, min, max, last.
std::vector<double> extract_stats(const double* sequence, int window, int d);

// Canonical training order: (scenario_id, end_index). Training entry points
// sort with this so the incoming sample order never changes a fit.
void sort_canonical(std::vector<WindowSample>& samples);

struct Scaler {
    std::vector<double> mean;
    std::vector<double> std_dev;           // zero-variance features replaced by 1
    std::vector<std::uint8_t> zero_variance;

    std::size_t size() const { return mean.size(); }
    void transform(double* x) const;       // in place, size() values
    void inverse(double* x) const;
    std::vector<double> transformed(const std::vector<double>& x) const;
};

// Fit on rows x width values (row-major). Throws DataError on an empty set
// or non-finite input.
Scaler fit_scaler(const double* values, std::size_t rows, std::size_t width);
Scaler fit_scaler(const std::vector<std::vector<double>>& rows);

// Feature-matrix export: <channel>_<stat> columns then the four targets.
void write_feature_matrix(const std::vector<WindowSample>& samples, const std::string& path);

std::uint64_t schema_hash(const std::vector<std::string>& channels, const WindowConfig& cfg);

}  // namespace mgs
