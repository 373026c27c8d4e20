#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "mgs/window.hpp"

using namespace mgs;

namespace {

// a tiny synthetic dataset with recognizable channel values
TimeSeriesDataset synthetic_dataset(int frames, double v_nom = 480.0 / std::sqrt(3.0)) {
    TimeSeriesDataset ds;
    ds.scenario_id = "normal";
    ds.metadata.scenario = "normal";
    ds.metadata.v_nom = v_nom;
    ds.metadata.dt_out = 1e-4;
    ds.metadata.duration = frames * 1e-4;
    Rng rng(99);
    for (int t = 0; t < frames; ++t) {
        MeasurementFrame f;
        f.time = t * 1e-4;
        for (int c = 0; c < kNumChannels; ++c) {
            f.channels[static_cast<std::size_t>(c)] = std::sin(0.01 * t + c) + 0.1 * rng.uniform();
        }
        ds.frames.push_back(f);
    }
    return ds;
}

}  // namespace

TEST_CASE("voltage magnitude is the quadrature sum") {
    MeasurementFrame f;
    f.channels[0] = 3.0;
    f.channels[1] = 4.0;
    f.channels[2] = 0.0;
    const DerivedChannels dc = derive_channels(f, 480.0);
    CHECK(dc.v_mag == doctest::Approx(5.0));
}

TEST_CASE("balanced phases give a constant magnitude") {
    const double amplitude = 392.0;
    for (int i = 0; i < 50; ++i) {
        const double wt = 0.13 * i;
        MeasurementFrame f;
        f.channels[0] = amplitude * std::cos(wt);
        f.channels[1] = amplitude * std::cos(wt - 2.0 * kPi / 3.0);
        f.channels[2] = amplitude * std::cos(wt + 2.0 * kPi / 3.0);
        const DerivedChannels dc = derive_channels(f, 480.0);
        CHECK(dc.v_mag == doctest::Approx(amplitude * std::sqrt(1.5)).epsilon(1e-12));
    }
}

TEST_CASE("totals sum the ten units") {
    MeasurementFrame f;
    for (int k = 0; k < kNumDg; ++k) {
        f.channels[static_cast<std::size_t>(6 + k)] = 1000.0;
        f.channels[static_cast<std::size_t>(16 + k)] = 50.0;
    }
    const DerivedChannels dc = derive_channels(f, 480.0);
    CHECK(dc.p_total == 10000.0);
    CHECK(dc.q_total == 500.0);
}

TEST_CASE("dip severity is the clamped relative shortfall") {
    MeasurementFrame f;
    const double v_nom = 480.0;
    // exactly nominal: zero dip
    f.channels[0] = v_nom;
    f.channels[1] = 0.0;
    f.channels[2] = 0.0;
    CHECK(derive_channels(f, v_nom).v_dip == doctest::Approx(0.0));
    // 60% of nominal: dip 0.4
    f.channels[0] = 0.6 * v_nom;
    CHECK(derive_channels(f, v_nom).v_dip == doctest::Approx(0.4));
    // above nominal clamps to zero
    f.channels[0] = 1.2 * v_nom;
    CHECK(derive_channels(f, v_nom).v_dip == 0.0);
}

TEST_CASE("window counts follow the closed formula") {
    const TimeSeriesDataset ds1000 = synthetic_dataset(1000);
    CHECK(make_windows(ds1000, WindowConfig{100, 10, 0}).size() == 91);

    const TimeSeriesDataset ds100 = synthetic_dataset(100);
    CHECK(make_windows(ds100, WindowConfig{100, 1, 0}).size() == 1);
    CHECK(make_windows(ds100, WindowConfig{100, 1, 1}).empty());
}

TEST_CASE("window counts match brute-force enumeration on random shapes") {
    Rng rng(2024);
    for (int trial = 0; trial < 20; ++trial) {
        const int n = 5 + static_cast<int>(rng.uniform_index(400));
        WindowConfig cfg;
        cfg.window = 1 + static_cast<int>(rng.uniform_index(50));
        cfg.stride = 1 + static_cast<int>(rng.uniform_index(20));
        cfg.horizon = static_cast<int>(rng.uniform_index(10));

        long brute = 0;
        for (long start = 0;; start += cfg.stride) {
            const long target = start + cfg.window - 1 + cfg.horizon;
            if (target >= n) break;
            ++brute;
        }
        CHECK(expected_window_count(n, cfg) == brute);
        const TimeSeriesDataset ds = synthetic_dataset(n);
        CHECK(static_cast<long>(make_windows(ds, cfg).size()) == brute);
    }
}

TEST_CASE("windows never cross the dataset boundary and targets sit at W-1+h") {
    const TimeSeriesDataset ds = synthetic_dataset(300);
    WindowConfig cfg{50, 7, 3};
    const auto windows = make_windows(ds, cfg);
    REQUIRE(!windows.empty());
    const double v_nom_mag = std::sqrt(3.0) * ds.metadata.v_nom;
    for (const auto& w : windows) {
        CHECK(w.start + cfg.window - 1 + cfg.horizon < static_cast<int>(ds.frames.size()));
        const auto expect =
            derive_channels(ds.frames[static_cast<std::size_t>(w.end_index + cfg.horizon)], v_nom_mag);
        CHECK(w.target[0] == expect.v_mag);
        CHECK(w.target[1] == ds.frames[static_cast<std::size_t>(w.end_index + cfg.horizon)].channels[26]);
        CHECK(w.target[2] == expect.p_total);
        CHECK(w.target[3] == expect.v_dip);
    }
}

TEST_CASE("stats follow the fixed per-channel order") {
    // single channel [1,2,3,4]
    const double seq[] = {1.0, 2.0, 3.0, 4.0};
    const auto stats = extract_stats(seq, 4, 1);
    REQUIRE(stats.size() == 5);
    CHECK(stats[0] == doctest::Approx(2.5));
    CHECK(stats[1] == doctest::Approx(1.118034).epsilon(1e-6));  // population std
    CHECK(stats[2] == 1.0);
    CHECK(stats[3] == 4.0);
    CHECK(stats[4] == 4.0);

    // constant channel c -> (c, 0, c, c, c)
    const double c = 7.25;
    const double cseq[] = {c, c, c};
    const auto cstats = extract_stats(cseq, 3, 1);
    CHECK(cstats[0] == c);
    CHECK(cstats[1] == 0.0);
    CHECK(cstats[2] == c);
    CHECK(cstats[3] == c);
    CHECK(cstats[4] == c);

    // shape: 5 entries per channel
    const double two[] = {1.0, 10.0, 2.0, 20.0};
    CHECK(extract_stats(two, 2, 2).size() == 10);
}

TEST_CASE("stored stats are recomputable bit-for-bit") {
    const TimeSeriesDataset ds = synthetic_dataset(400);
    const auto windows = make_windows(ds, WindowConfig{64, 16, 2});
    for (const auto& w : windows) {
        const auto recomputed = extract_stats(w.row(0), w.window, w.d());
        REQUIRE(recomputed.size() == w.stats.size());
        for (std::size_t i = 0; i < recomputed.size(); ++i) {
            CHECK(recomputed[i] == w.stats[i]);
        }
    }
}

TEST_CASE("the default input set hides the nowcast targets") {
    const auto channels = default_input_channels();
    CHECK(channels.size() == 38);
    CHECK(std::find(channels.begin(), channels.end(), "V_mag") == channels.end());
    CHECK(std::find(channels.begin(), channels.end(), "V_dip") == channels.end());
    CHECK(std::find(channels.begin(), channels.end(), "P_total") != channels.end());
    CHECK(std::find(channels.begin(), channels.end(), "Q_total") != channels.end());
}

TEST_CASE("window extraction is deterministic") {
    const TimeSeriesDataset ds = synthetic_dataset(500);
    const auto a = make_windows(ds, WindowConfig{100, 10, 0});
    const auto b = make_windows(ds, WindowConfig{100, 10, 0});
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].start == b[i].start);
        CHECK(a[i].stats == b[i].stats);
        CHECK(a[i].target == b[i].target);
    }
}

TEST_CASE("standard scaling centers and round-trips") {
    Rng rng(5);
    const std::size_t rows = 200;
    const std::size_t width = 7;
    std::vector<double> x(rows * width);
    for (auto& v : x) v = 10.0 * rng.gaussian() + 3.0;
    // make one column constant
    for (std::size_t r = 0; r < rows; ++r) x[r * width + 4] = 42.0;

    const Scaler sc = fit_scaler(x.data(), rows, width);
    CHECK(sc.zero_variance[4] == 1);
    CHECK(sc.std_dev[4] == 1.0);

    std::vector<double> t = x;
    for (std::size_t r = 0; r < rows; ++r) sc.transform(t.data() + r * width);

    for (std::size_t j = 0; j < width; ++j) {
        double mean = 0.0;
        for (std::size_t r = 0; r < rows; ++r) mean += t[r * width + j];
        mean /= static_cast<double>(rows);
        CHECK(std::abs(mean) < 1e-10);
        if (j != 4) {
            double var = 0.0;
            for (std::size_t r = 0; r < rows; ++r) {
                var += (t[r * width + j] - mean) * (t[r * width + j] - mean);
            }
            var /= static_cast<double>(rows);
            CHECK(std::sqrt(var) == doctest::Approx(1.0).epsilon(1e-10));
        }
    }
    // constant column maps to zero
    CHECK(t[4] == doctest::Approx(0.0));

    // round-trip to 1e-12 relative
    for (std::size_t r = 0; r < rows; ++r) sc.inverse(t.data() + r * width);
    for (std::size_t i = 0; i < x.size(); ++i) {
        CHECK(t[i] == doctest::Approx(x[i]).epsilon(1e-12));
    }
}

TEST_CASE("fitting a scaler on nothing is an error") {
    CHECK_THROWS_AS(fit_scaler(nullptr, 0, 5), DataError);
    const std::vector<std::vector<double>> empty;
    CHECK_THROWS_AS(fit_scaler(empty), DataError);
}

TEST_CASE("canonical ordering ignores the incoming permutation") {
    const TimeSeriesDataset ds = synthetic_dataset(300);
    auto windows = make_windows(ds, WindowConfig{50, 10, 0});
    auto shuffled = windows;
    Rng rng(3);
    rng.shuffle(shuffled);
    sort_canonical(windows);
    sort_canonical(shuffled);
    REQUIRE(windows.size() == shuffled.size());
    for (std::size_t i = 0; i < windows.size(); ++i) {
        CHECK(windows[i].end_index == shuffled[i].end_index);
    }
}

TEST_CASE("schema hash tracks channels and window shape") {
    const auto channels = default_input_channels();
    const WindowConfig a{100, 10, 0};
    const WindowConfig b{100, 10, 1};
    CHECK(schema_hash(channels, a) != schema_hash(channels, b));
    auto fewer = channels;
    fewer.pop_back();
    CHECK(schema_hash(channels, a) != schema_hash(fewer, a));
    CHECK(schema_hash(channels, a) == schema_hash(default_input_channels(), WindowConfig{100, 10, 0}));
}
