#include "mgs/inject.hpp"

#include <cmath>
#include <limits>

#include "mgs/common.hpp"

namespace mgs {

std::vector<int> all_channel_mask() {
    std::vector<int> mask(kNumChannels);
    for (int i = 0; i < kNumChannels; ++i) mask[static_cast<std::size_t>(i)] = i;
    return mask;
}

TimeSeriesDataset inject_noise(const TimeSeriesDataset& ds, double snr_db,
                               const std::vector<int>& channel_mask, std::uint64_t seed) {
    TimeSeriesDataset out = ds;
    if (std::isinf(snr_db) && snr_db > 0) return out;
    const std::size_t n = ds.frames.size();
    if (n == 0) return out;

    const double ratio = std::pow(10.0, snr_db / 10.0);
    for (int ch : channel_mask) {
        if (ch < 0 || ch >= kNumChannels) {
            throw ValidationError("inject_noise: channel index out of range: " + std::to_string(ch));
        }
        // signal power is the fluctuation (AC) power; channels with a large
        // standing offset (frequencies near 60, reactive power) would
        // otherwise drown their information content at any SNR
        double mean = 0.0;
        for (const auto& f : ds.frames) mean += f.channels[static_cast<std::size_t>(ch)];
        mean /= static_cast<double>(n);
        double power = 0.0;
        for (const auto& f : ds.frames) {
            const double x = f.channels[static_cast<std::size_t>(ch)] - mean;
            power += x * x;
        }
        power /= static_cast<double>(n);
        if (power <= 0.0) continue;  // constant channel: SNR undefined, leave untouched
        const double sigma = std::sqrt(power / ratio);
        Rng rng(hash_mix(seed, 0x6e6f697365ull + static_cast<std::uint64_t>(ch)));
        for (auto& f : out.frames) {
            f.channels[static_cast<std::size_t>(ch)] += sigma * rng.gaussian();
        }
    }
    return out;
}

TimeSeriesDataset inject_delay(const TimeSeriesDataset& ds, double delay,
                               const std::vector<int>& channel_mask) {
    const double duration = ds.metadata.duration;
    if (!(delay >= 0.0)) {
        throw ValidationError("inject_delay: delay must be >= 0, got " + format_double(delay));
    }
    if (delay >= duration) {
        throw ValidationError("inject_delay: delay " + format_double(delay) +
                              " s must be shorter than the dataset duration " +
                              format_double(duration) + " s");
    }
    TimeSeriesDataset out = ds;
    const long n = static_cast<long>(ds.frames.size());
    const long shift = std::lround(delay / ds.metadata.dt_out);
    if (shift == 0 || n == 0) return out;
    for (int ch : channel_mask) {
        if (ch < 0 || ch >= kNumChannels) {
            throw ValidationError("inject_delay: channel index out of range: " + std::to_string(ch));
        }
        for (long t = n - 1; t >= 0; --t) {
            const long src = t >= shift ? t - shift : 0;  // hold the initial value
            out.frames[static_cast<std::size_t>(t)].channels[static_cast<std::size_t>(ch)] =
                ds.frames[static_cast<std::size_t>(src)].channels[static_cast<std::size_t>(ch)];
        }
    }
    return out;
}

}  // namespace mgs
