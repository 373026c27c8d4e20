#pragma once

// Regression metrics and the evaluation report shared by the CLI and the
// acceptance suite.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mgs/common.hpp"

namespace mgs {

double rmse(std::span<const double> y, std::span<const double> y_hat);
double mae(std::span<const double> y, std::span<const double> y_hat);

struct R2 {
    double value = 0.0;
    bool defined = true;  // false when Var(y) == 0
};
R2 r2(std::span<const double> y, std::span<const double> y_hat);

struct MetricsRecord {
    std::string partition;  // val | ood_noise | ood_delay | ood
    std::string model;      // gbm | cnn | hybrid
    std::string target;     // vmag | fdg1 | ptotal | vdip
    std::size_t samples = 0;
    double rmse = 0.0;
    double mae = 0.0;
    double r2 = 0.0;
    bool r2_defined = true;
};

struct MetricsReport {
    std::uint64_t config_hash = 0;
    std::vector<MetricsRecord> records;

    const MetricsRecord* find(const std::string& partition, const std::string& model,
                              const std::string& target) const;
};

void write_report(const MetricsReport& report, const std::string& path);
MetricsReport read_report(const std::string& path);

}  // namespace mgs
