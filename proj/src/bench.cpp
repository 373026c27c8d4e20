#include "mgs/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <thread>

namespace mgs {

double speedup(double t_ref, double t_method) {
    if (!(t_method > 0.0)) throw ValidationError("speedup: method wall time must be > 0");
    if (!(t_ref > 0.0)) throw ValidationError("speedup: reference wall time must be > 0");
    return t_ref / t_method;
}

double rt_ratio(double simulated, double wall) {
    if (!(wall > 0.0)) throw ValidationError("rt_ratio: wall time must be > 0");
    if (!(simulated > 0.0)) throw ValidationError("rt_ratio: simulated time must be > 0");
    return simulated / wall;
}

double time_median(const std::function<void()>& fn, int repetitions) {
    if (repetitions < 3) throw ValidationError("time_median: repetitions must be >= 3");
    fn();  // warm-up, excluded
    std::vector<double> times;
    times.reserve(static_cast<std::size_t>(repetitions));
    for (int r = 0; r < repetitions; ++r) {
        const auto t0 = std::chrono::steady_clock::now();
        fn();
        const auto t1 = std::chrono::steady_clock::now();
        times.push_back(std::chrono::duration<double>(t1 - t0).count());
    }
    std::sort(times.begin(), times.end());
    const std::size_t n = times.size();
    return n % 2 == 1 ? times[n / 2] : 0.5 * (times[n / 2 - 1] + times[n / 2]);
}

std::string hardware_note() {
    std::string cpu = "unknown cpu";
    std::ifstream info("/proc/cpuinfo");
    std::string line;
    while (std::getline(info, line)) {
        if (line.rfind("model name", 0) == 0) {
            const auto pos = line.find(':');
            if (pos != std::string::npos) {
                cpu = line.substr(pos + 1);
                while (!cpu.empty() && cpu.front() == ' ') cpu.erase(cpu.begin());
            }
            break;
        }
    }
    return cpu + ", " + std::to_string(std::thread::hardware_concurrency()) + " threads";
}

namespace {

std::string fixed2(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return buf;
}

std::string fixed4(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.4f", v);
    return buf;
}

}  // namespace

std::string render_bench_table(const BenchReport& report) {
    std::string out;
    out += "Method          Sim (s)   Time (s)    Speedup   RT Ratio\n";
    for (const auto& r : report.records) {
        char buf[160];
        std::snprintf(buf, sizeof(buf), "%-14s %8s %10s %10s %10s\n", r.method.c_str(),
                      fixed2(r.simulated_time).c_str(), fixed4(r.wall_time).c_str(),
                      fixed2(r.speedup).c_str(), fixed4(r.rt_ratio).c_str());
        out += buf;
    }
    return out;
}

void write_bench_report(const BenchReport& report, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw EnvironmentError("cannot open for writing: " + path);
    out << "mgs-bench 1\n";
    out << "config_hash " << format_hex64(report.config_hash) << '\n';
    out << "hardware " << report.hardware << '\n';
    out << "repetitions " << report.repetitions << '\n';
    out << "# method sim_s wall_s speedup rt_ratio\n";
    for (const auto& r : report.records) {
        out << r.method << ' ' << format_double(r.simulated_time) << ' '
            << format_double(r.wall_time) << ' ' << format_double(r.speedup) << ' '
            << format_double(r.rt_ratio) << '\n';
    }
    out << '\n' << render_bench_table(report);
    if (!out) throw EnvironmentError("write failed: " + path);
}

}  // namespace mgs
