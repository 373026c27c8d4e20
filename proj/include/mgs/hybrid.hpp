#pragma once

// Per-target convex blend of the two surrogates, fitted on validation
// predictions: prediction = alpha * cnn + (1 - alpha) * gbm with the
// closed-form least-squares alpha clamped to [0, 1].

#include <array>
#include <cstdint>
#include <span>
#include <string>

#include "mgs/window.hpp"

namespace mgs {

struct HybridModel {
    std::array<double, kNumTargets> alpha{0.5, 0.5, 0.5, 0.5};
    std::uint64_t config_hash = 0;
};

// Identical predictors tie to alpha = 0.5.
double fit_hybrid_alpha(std::span<const double> cnn_pred, std::span<const double> gbm_pred,
                        std::span<const double> y_val);

std::vector<double> hybrid_combine(double alpha, std::span<const double> cnn_pred,
                                   std::span<const double> gbm_pred);

void save_hybrid(const HybridModel& model, const std::string& path);
HybridModel load_hybrid(const std::string& path);

}  // namespace mgs
