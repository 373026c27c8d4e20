#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <atomic>
#include <cstdio>
#include <filesystem>

#include "mgs/bench.hpp"

using namespace mgs;

TEST_CASE("rt ratio reproduces the published comparison row") {
    // 1.00 simulated seconds over 0.89 wall seconds
    CHECK(rt_ratio(1.00, 0.89) == doctest::Approx(1.1236).epsilon(1e-4));
    CHECK(rt_ratio(1.00, 0.89) == doctest::Approx(1.12).epsilon(0.01));
}

TEST_CASE("speedup reproduces the published comparison row") {
    // 941.16 s reference over 5.09 s inference; the published 185.04 differs
    // only by rounding of the published wall times
    CHECK(speedup(941.16, 5.09) == doctest::Approx(184.904).epsilon(1e-4));
    CHECK(speedup(941.16, 5.09) == doctest::Approx(185.04).epsilon(2e-3));
    CHECK(speedup(3.7, 3.7) == doctest::Approx(1.0));
}

TEST_CASE("nonpositive denominators are rejected") {
    CHECK_THROWS_AS(speedup(1.0, 0.0), ValidationError);
    CHECK_THROWS_AS(speedup(0.0, 1.0), ValidationError);
    CHECK_THROWS_AS(rt_ratio(1.0, -2.0), ValidationError);
    CHECK_THROWS_AS(rt_ratio(0.0, 1.0), ValidationError);
}

TEST_CASE("timing runs one warm-up plus the requested repetitions") {
    std::atomic<int> calls{0};
    const double median = time_median([&] { ++calls; }, 5);
    CHECK(calls.load() == 6);
    CHECK(median >= 0.0);
    CHECK_THROWS_AS(time_median([] {}, 2), ValidationError);
}

TEST_CASE("speedup times method wall time recovers the reference") {
    const double t_ref = 0.75;
    for (const double t : {0.001, 0.02, 0.4, 3.0}) {
        CHECK(speedup(t_ref, t) * t == doctest::Approx(t_ref).epsilon(1e-9));
    }
}

TEST_CASE("repeated timing of a fixed workload is reasonably stable") {
    auto work = [] {
        double acc = 0.0;
        for (int i = 1; i < 200000; ++i) acc += 1.0 / i;
        volatile double sink = acc;
        (void)sink;
    };
    std::vector<double> medians;
    for (int i = 0; i < 3; ++i) medians.push_back(time_median(work, 5));
    const double lo = *std::min_element(medians.begin(), medians.end());
    const double hi = *std::max_element(medians.begin(), medians.end());
    CHECK(hi / lo < 2.0);
}

TEST_CASE("bench reports carry consistent records and a hardware note") {
    BenchReport report;
    report.config_hash = 0x77;
    report.hardware = hardware_note();
    report.repetitions = 5;
    CHECK(!report.hardware.empty());

    const double t_ref = 0.9;
    for (const auto& [name, wall] : std::vector<std::pair<std::string, double>>{
             {"simulator", t_ref}, {"gbm", 0.004}, {"cnn", 0.32}, {"hybrid", 0.33}}) {
        RuntimeRecord rec;
        rec.method = name;
        rec.simulated_time = 1.0;
        rec.wall_time = wall;
        rec.speedup = speedup(t_ref, wall);
        rec.rt_ratio = rt_ratio(1.0, wall);
        rec.repetitions = 5;
        rec.hardware = report.hardware;
        report.records.push_back(rec);
    }
    // ratio consistency: speedup * wall == wall(reference)
    for (const auto& rec : report.records) {
        CHECK(rec.speedup * rec.wall_time == doctest::Approx(t_ref).epsilon(1e-9));
        CHECK(rec.hardware == report.hardware);
    }
    CHECK(report.records[0].speedup == doctest::Approx(1.0));

    const std::string path =
        (std::filesystem::temp_directory_path() / "mgs_bench.txt").string();
    write_bench_report(report, path);
    const std::string table = render_bench_table(report);
    CHECK(table.find("simulator") != std::string::npos);
    CHECK(table.find("Speedup") != std::string::npos);
    std::remove(path.c_str());
}
