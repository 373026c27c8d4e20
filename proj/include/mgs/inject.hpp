#pragma once

// Measurement-channel perturbations used both by the OOD scenario runs and
// by the robustness evaluation sweeps. Time stamps and labels are never
// touched.

#include <cstdint>
#include <vector>

#include "mgs/scenario.hpp"

namespace mgs {

// All 36 measured channels.
std::vector<int> all_channel_mask();

// Additive zero-mean Gaussian noise per masked channel with variance
// fluctuation_power / 10^(snr_db/10), where fluctuation power is the
// channel's variance over the run. Each channel draws from its own
// seed-derived stream, so the mask does not change the noise on a given
// channel. snr_db = +infinity returns the input unchanged.
TimeSeriesDataset inject_noise(const TimeSeriesDataset& ds, double snr_db,
                               const std::vector<int>& channel_mask, std::uint64_t seed);

// Masked channels shifted by D = round(delay/dt_out) samples; the first D
// samples hold the initial value. Throws ValidationError when delay is
// negative or reaches the dataset duration.
TimeSeriesDataset inject_delay(const TimeSeriesDataset& ds, double delay,
                               const std::vector<int>& channel_mask);

}  // namespace mgs
