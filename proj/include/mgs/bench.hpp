#pragma once

// Wall-clock benchmarking of the simulator against surrogate inference:
// median over repetitions with one excluded warm-up, speedup and
// real-time-ratio bookkeeping, and the four-row comparison table.

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "mgs/common.hpp"

namespace mgs {

struct RuntimeRecord {
    std::string method;
    double simulated_time = 0.0;  // s
    double wall_time = 0.0;       // s, median
    double speedup = 0.0;         // wall(reference) / wall(method)
    double rt_ratio = 0.0;        // simulated / wall(method)
    int repetitions = 0;
    std::string hardware;
};

double speedup(double t_ref, double t_method);    // throws ValidationError on t_method <= 0
double rt_ratio(double simulated, double wall);   // throws ValidationError on wall <= 0

// Median wall seconds of fn() over `repetitions` runs after one untimed
// warm-up call. repetitions >= 3.
double time_median(const std::function<void()>& fn, int repetitions);

std::string hardware_note();

struct BenchReport {
    std::uint64_t config_hash = 0;
    std::string hardware;
    int repetitions = 0;
    std::vector<RuntimeRecord> records;
};

void write_bench_report(const BenchReport& report, const std::string& path);
std::string render_bench_table(const BenchReport& report);  // Method/Sim/Time/Speedup/RT Ratio

}  // namespace mgs
