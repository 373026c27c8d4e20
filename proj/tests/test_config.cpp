#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "mgs/config.hpp"

using namespace mgs;

TEST_CASE("defaults carry the published values") {
    const RunConfig cfg;
    CHECK(cfg.v_nom_ll == doctest::Approx(480.0));
    CHECK(cfg.v_nom_phase() == doctest::Approx(277.128).epsilon(1e-4));
    CHECK(cfg.dt_sim == doctest::Approx(5e-5));
    CHECK(cfg.dt_out == doctest::Approx(1e-4));
    CHECK(cfg.window_cfg.window == 100);
    CHECK(cfg.window_cfg.stride == 10);
    CHECK(cfg.window_cfg.horizon == 0);
    CHECK(cfg.gbm_hp.learning_rate == doctest::Approx(0.05));
    CHECK(cfg.gbm_hp.n_estimators == 300);
    CHECK(cfg.gbm_hp.max_depth == 6);
    CHECK(cfg.gbm_hp.num_leaves == 31);
    CHECK(cfg.gbm_hp.min_child_samples == 20);
    CHECK(cfg.gbm_hp.subsample == doctest::Approx(0.8));
    CHECK(cfg.gbm_hp.colsample == doctest::Approx(0.8));
    CHECK(cfg.seed == 42);
    CHECK(cfg.cnn_filters[0] == 32);
    CHECK(cfg.cnn_filters[1] == 64);
    CHECK(cfg.cnn_filters[2] == 64);
    CHECK(cfg.cnn_dense == 64);
    CHECK(cfg.cnn_learning_rate == doctest::Approx(1e-3));
    CHECK(cfg.cnn_batch_size == 64);
    CHECK(cfg.cnn_max_epochs == 100);
    CHECK(cfg.cnn_patience == 10);
    CHECK(cfg.ambient_load == doctest::Approx(0.02));
    CHECK(cfg.validation_scenarios == "load_ramp,reactive_disturbance");
    const SplitPolicy policy = cfg.split_policy();
    REQUIRE(policy.validation_scenarios.size() == 2);
    CHECK(policy.validation_scenarios[0] == "load_ramp");
    CHECK(policy.validation_scenarios[1] == "reactive_disturbance");
    CHECK_NOTHROW(cfg.validate());
}

TEST_CASE("configs round-trip through INI text") {
    RunConfig cfg;
    cfg.seed = 777;
    cfg.window_cfg.stride = 25;
    cfg.gbm_hp.num_leaves = 15;
    cfg.duration = 0.25;
    cfg.data_dir = "elsewhere";
    const RunConfig back = config_from_ini(cfg.to_ini());
    CHECK(back.seed == 777);
    CHECK(back.window_cfg.stride == 25);
    CHECK(back.gbm_hp.num_leaves == 15);
    CHECK(back.duration == doctest::Approx(0.25));
    CHECK(back.data_dir == "elsewhere");
    CHECK(back.to_ini() == cfg.to_ini());
    CHECK(back.hash() == cfg.hash());
}

TEST_CASE("the hash ignores paths and benchmark repetitions") {
    RunConfig a;
    RunConfig b = a;
    b.data_dir = "somewhere_else";
    b.report_dir = "reports2";
    b.bench_repetitions = 9;
    CHECK(a.hash() == b.hash());

    RunConfig c = a;
    c.window_cfg.stride = 11;
    CHECK(a.hash() != c.hash());
    RunConfig d = a;
    d.seed = 43;
    CHECK(a.hash() != d.hash());
}

TEST_CASE("unknown keys and malformed lines are config errors") {
    CHECK_THROWS_AS(config_from_ini("[simulator]\nbogus_key = 1\n"), ConfigError);
    CHECK_THROWS_AS(config_from_ini("[simulator\nx = 1\n"), ConfigError);
    CHECK_THROWS_AS(config_from_ini("[simulator]\ndt_sim = abc\n"), ConfigError);
}

TEST_CASE("comments and blank lines are fine") {
    const RunConfig cfg = config_from_ini(
        "# comment\n\n[run]\nseed = 5\n; another comment\n[pipeline]\nwindow = 50\n");
    CHECK(cfg.seed == 5);
    CHECK(cfg.window_cfg.window == 50);
    CHECK(cfg.gbm_hp.seed == 5);  // the run seed feeds the engines
}

TEST_CASE("invalid values fail validation") {
    RunConfig cfg;
    cfg.validation_fraction = 0.0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = RunConfig{};
    cfg.dt_sim = -1.0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = RunConfig{};
    cfg.gbm_hp.num_leaves = 1;
    CHECK_THROWS_AS(cfg.validate(), Error);
}

TEST_CASE("configs load from disk") {
    const std::string path =
        (std::filesystem::temp_directory_path() / "mgs_config.ini").string();
    RunConfig cfg;
    cfg.seed = 31337;
    save_config(cfg, path);
    const RunConfig back = load_config(path);
    CHECK(back.seed == 31337);
    CHECK(back.hash() == cfg.hash());
    std::remove(path.c_str());

    CHECK_THROWS_AS(load_config("/definitely/not/here.ini"), EnvironmentError);
}
