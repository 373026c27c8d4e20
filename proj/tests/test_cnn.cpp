#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>

#include "mgs/cnn.hpp"

using namespace mgs;
using namespace mgs::cnn;

namespace {

Scaler identity_scaler(int d) {
    Scaler sc;
    sc.mean.assign(static_cast<std::size_t>(d), 0.0);
    sc.std_dev.assign(static_cast<std::size_t>(d), 1.0);
    sc.zero_variance.assign(static_cast<std::size_t>(d), 0);
    return sc;
}

// synthetic windows over one backing matrix; target[0] = fn(window)
std::vector<WindowSample> synth_samples(int n, int w, int d, std::uint64_t seed,
                                        const std::function<double(const double*, int, int)>& fn,
                                        bool smooth = true) {
    auto mat = std::make_shared<ChannelMatrix>();
    mat->n = n * w;
    mat->d = d;
    mat->scenario_id = "synthetic";
    mat->v_nom_mag = 480.0;
    mat->values.resize(static_cast<std::size_t>(mat->n) * d);
    mat->targets.resize(static_cast<std::size_t>(mat->n));
    Rng rng(seed);
    double phase = rng.uniform() * 2.0 * kPi;
    for (int t = 0; t < mat->n; ++t) {
        for (int j = 0; j < d; ++j) {
            const double x =
                smooth ? 1.5 + std::sin(0.11 * t + 2.0 * j + phase) + 0.05 * rng.gaussian()
                       : rng.gaussian();
            mat->values[static_cast<std::size_t>(t) * d + j] = x;
        }
    }
    std::vector<WindowSample> samples;
    for (int i = 0; i < n; ++i) {
        WindowSample s;
        s.source = mat;
        s.start = i * w;
        s.window = w;
        s.scenario_id = "synthetic";
        s.end_index = s.start + w - 1;
        s.stats = extract_stats(mat->row(s.start), w, d);
        const double y = fn(mat->row(s.start), w, d);
        s.target = {y, y, y, y};
        samples.push_back(std::move(s));
    }
    return samples;
}

double mean_channel0(const double* seq, int w, int d) {
    double sum = 0.0;
    for (int t = 0; t < w; ++t) sum += seq[static_cast<std::size_t>(t) * d];
    return sum / w;
}

Config tiny_config() {
    Config cfg;
    cfg.window = 8;
    cfg.channels = 2;
    cfg.kernel = 3;
    cfg.conv_filters = {4, 4, 4};
    cfg.dense = 4;
    cfg.seed = 2024;
    return cfg;
}

void zero_weights(Model& m) {
    auto z = [](std::vector<double>& v) { std::fill(v.begin(), v.end(), 0.0); };
    z(m.w1); z(m.b1); z(m.w2); z(m.b2); z(m.w3); z(m.b3); z(m.wd); z(m.bd); z(m.wo);
    m.bo = 0.0;
}

std::string temp_path(const std::string& name) {
    return (std::filesystem::temp_directory_path() / name).string();
}

}  // namespace

TEST_CASE("identity kernel reproduces the input") {
    const double in[] = {1.0, -2.0, 3.0, 0.5};
    const double kernel[] = {0.0, 1.0, 0.0};  // K=3, 1 in, 1 out
    const double bias[] = {0.0};
    double out[4];
    conv1d_forward(in, 4, 1, kernel, 3, 1, bias, out);
    for (int t = 0; t < 4; ++t) CHECK(out[t] == in[t]);
}

TEST_CASE("box kernel over ones shows the zero padding") {
    const double in[] = {1.0, 1.0, 1.0, 1.0};
    const double kernel[] = {1.0, 1.0, 1.0};
    const double bias[] = {0.0};
    double out[4];
    conv1d_forward(in, 4, 1, kernel, 3, 1, bias, out);
    CHECK(out[0] == 2.0);
    CHECK(out[1] == 3.0);
    CHECK(out[2] == 3.0);
    CHECK(out[3] == 2.0);
}

TEST_CASE("zero kernels leave only the bias") {
    const double in[] = {4.0, 5.0, 6.0};
    const double kernel[] = {0.0, 0.0, 0.0};
    const double bias[] = {5.0};
    double out[3];
    conv1d_forward(in, 3, 1, kernel, 3, 1, bias, out);
    for (int t = 0; t < 3; ++t) CHECK(out[t] == 5.0);
}

TEST_CASE("pooling examples") {
    const double in[] = {1.0, 3.0, 2.0, 0.0};
    double out[2];
    maxpool1d(in, 4, 1, out);
    CHECK(out[0] == 3.0);
    CHECK(out[1] == 2.0);

    double avg[1];
    global_avg_pool(in, 4, 1, avg);
    CHECK(avg[0] == doctest::Approx(1.5));

    // odd tail is dropped
    const double odd[] = {1.0, 2.0, 9.0};
    double out1[1];
    maxpool1d(odd, 3, 1, out1);
    CHECK(out1[0] == 2.0);

    // strictly increasing input pools every second element
    const double mono[] = {1.0, 2.0, 3.0, 4.0, 5.0, 6.0};
    double out3[3];
    maxpool1d(mono, 6, 1, out3);
    CHECK(out3[0] == 2.0);
    CHECK(out3[1] == 4.0);
    CHECK(out3[2] == 6.0);

    const double chan[] = {1.0, 2.0, 3.0, 4.0};  // one channel [1..4]
    double mean1[1];
    global_avg_pool(chan, 4, 1, mean1);
    CHECK(mean1[0] == 2.5);
}

TEST_CASE("all-zero weights predict zero for any input") {
    const Config cfg = tiny_config();
    Model model = init_model(cfg, 1);
    zero_weights(model);
    const auto samples = synth_samples(5, cfg.window, cfg.channels, 7, mean_channel0);
    const auto preds = forward(model, samples, identity_scaler(cfg.channels));
    for (const double p : preds) CHECK(p == 0.0);
}

TEST_CASE("predictions are per-sample independent") {
    const Config cfg = tiny_config();
    const Model model = init_model(cfg, 99);
    auto samples = synth_samples(4, cfg.window, cfg.channels, 3, mean_channel0);
    samples.push_back(samples[1]);  // duplicate
    const auto preds = forward(model, samples, identity_scaler(cfg.channels));
    CHECK(preds.size() == 5);
    CHECK(preds[4] == preds[1]);
}

TEST_CASE("the shape chain matches the published stack for W=100") {
    Config cfg;
    cfg.window = 100;
    cfg.channels = 38;
    const auto shapes = layer_shapes(cfg);
    REQUIRE(shapes.size() == 7);
    CHECK(shapes[0] == std::pair<int, int>{100, 32});
    CHECK(shapes[1] == std::pair<int, int>{100, 64});
    CHECK(shapes[2] == std::pair<int, int>{50, 64});
    CHECK(shapes[3] == std::pair<int, int>{50, 64});
    CHECK(shapes[4] == std::pair<int, int>{0, 64});
    CHECK(shapes[5] == std::pair<int, int>{0, 64});
    CHECK(shapes[6] == std::pair<int, int>{0, 1});
    CHECK(parameter_count(cfg) == 3 * 38 * 32 + 32 + 3 * 32 * 64 + 64 + 3 * 64 * 64 + 64 +
                                      64 * 64 + 64 + 64 + 1);
}

TEST_CASE("shape mismatches are contract errors") {
    const Config cfg = tiny_config();
    const Model model = init_model(cfg, 5);
    const auto wrong = synth_samples(2, cfg.window + 2, cfg.channels, 3, mean_channel0);
    CHECK_THROWS_AS(forward(model, wrong, identity_scaler(cfg.channels)), ContractError);
    const auto right = synth_samples(2, cfg.window, cfg.channels, 3, mean_channel0);
    CHECK_THROWS_AS(forward(model, right, identity_scaler(cfg.channels + 1)), ContractError);
}

TEST_CASE("perfect predictions have zero gradients") {
    const Config cfg = tiny_config();
    Model model = init_model(cfg, 11);
    zero_weights(model);
    model.target = TargetSpec{0, 0.0, 1.0};
    // targets equal to the model output (0)
    auto samples = synth_samples(6, cfg.window, cfg.channels, 13, mean_channel0);
    for (auto& s : samples) s.target = {0.0, 0.0, 0.0, 0.0};
    const Gradients g = backward(model, samples, identity_scaler(cfg.channels));
    auto all_zero = [](const std::vector<double>& v) {
        for (const double x : v) {
            if (x != 0.0) return false;
        }
        return true;
    };
    CHECK(all_zero(g.w1));
    CHECK(all_zero(g.wd));
    CHECK(all_zero(g.wo));
    CHECK(g.bo == 0.0);
}

TEST_CASE("output bias gradient is twice the mean residual") {
    const Config cfg = tiny_config();
    Model model = init_model(cfg, 17);
    model.target = TargetSpec{0, 0.0, 1.0};
    const auto samples = synth_samples(8, cfg.window, cfg.channels, 19, mean_channel0);
    const Scaler sc = identity_scaler(cfg.channels);
    const auto preds = forward(model, samples, sc);
    double mean_residual = 0.0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        mean_residual += preds[i] - samples[i].target[0];
    }
    mean_residual /= static_cast<double>(samples.size());
    const Gradients g = backward(model, samples, sc);
    CHECK(g.bo == doctest::Approx(2.0 * mean_residual).epsilon(1e-12));
}

TEST_CASE("analytic gradients match central finite differences") {
    const Config cfg = tiny_config();
    Model model = init_model(cfg, 23);
    model.target = TargetSpec{0, 0.0, 1.0};
    const auto samples = synth_samples(6, cfg.window, cfg.channels, 29, mean_channel0);
    const Scaler sc = identity_scaler(cfg.channels);
    const Gradients g = backward(model, samples, sc);

    Rng pick(31);
    const double eps = 1e-5;
    auto check_layer = [&](std::vector<double>& w, const std::vector<double>& gw) {
        const std::size_t coords = std::min<std::size_t>(100, w.size());
        for (std::size_t c = 0; c < coords; ++c) {
            const std::size_t i = pick.uniform_index(w.size());
            const double keep = w[i];
            w[i] = keep + eps;
            const double up = loss_on(model, samples, sc);
            w[i] = keep - eps;
            const double down = loss_on(model, samples, sc);
            w[i] = keep;
            const double numeric = (up - down) / (2.0 * eps);
            const double denom = std::max({std::abs(numeric), std::abs(gw[i]), 1e-6});
            CHECK(std::abs(numeric - gw[i]) / denom < 1e-4);
        }
    };
    check_layer(model.w1, g.w1);
    check_layer(model.b1, g.b1);
    check_layer(model.w2, g.w2);
    check_layer(model.b2, g.b2);
    check_layer(model.w3, g.w3);
    check_layer(model.b3, g.b3);
    check_layer(model.wd, g.wd);
    check_layer(model.bd, g.bd);
    check_layer(model.wo, g.wo);
    {
        const double keep = model.bo;
        model.bo = keep + eps;
        const double up = loss_on(model, samples, sc);
        model.bo = keep - eps;
        const double down = loss_on(model, samples, sc);
        model.bo = keep;
        const double numeric = (up - down) / (2.0 * eps);
        CHECK(std::abs(numeric - g.bo) / std::max(std::abs(numeric), 1e-6) < 1e-4);
    }
}

TEST_CASE("a perfect starting point stays stationary during training") {
    Config cfg = tiny_config();
    cfg.max_epochs = 5;
    Model model = init_model(cfg, 37);
    zero_weights(model);  // exact fit of the all-zero target
    model.target = TargetSpec{0, 0.0, 1.0};
    auto samples = synth_samples(10, cfg.window, cfg.channels, 41, mean_channel0);
    for (auto& s : samples) s.target = {0.0, 0.0, 0.0, 0.0};
    const Scaler sc = identity_scaler(cfg.channels);
    CHECK(loss_on(model, samples, sc) == 0.0);
    const Gradients g = backward(model, samples, sc);
    double norm = std::abs(g.bo);
    for (const double v : g.wo) norm += std::abs(v);
    CHECK(norm == 0.0);
}

TEST_CASE("training a representable constant converges to near zero") {
    Config cfg = tiny_config();
    cfg.max_epochs = 150;
    cfg.patience = 40;
    cfg.learning_rate = 1e-2;
    cfg.batch_size = 8;
    const auto train_set = synth_samples(48, cfg.window, cfg.channels, 43,
                                         [](const double*, int, int) { return 0.0; });
    const auto val_set = synth_samples(16, cfg.window, cfg.channels, 44,
                                       [](const double*, int, int) { return 0.0; });
    const Model model = cnn::train(cfg, train_set, val_set, identity_scaler(cfg.channels),
                                   TargetSpec{0, 0.0, 1.0});
    REQUIRE(!model.val_mse.empty());
    CHECK(model.val_mse[static_cast<std::size_t>(model.best_epoch - 1)] < 1e-3);
}

TEST_CASE("training is bit-deterministic for a fixed seed") {
    Config cfg = tiny_config();
    cfg.max_epochs = 6;
    cfg.batch_size = 8;
    const auto train_set = synth_samples(32, cfg.window, cfg.channels, 47, mean_channel0);
    const auto val_set = synth_samples(8, cfg.window, cfg.channels, 48, mean_channel0);
    const Scaler sc = identity_scaler(cfg.channels);
    const TargetSpec spec{0, 0.0, 1.0};
    const Model a = cnn::train(cfg, train_set, val_set, sc, spec);
    const Model b = cnn::train(cfg, train_set, val_set, sc, spec);
    CHECK(a.w1 == b.w1);
    CHECK(a.w2 == b.w2);
    CHECK(a.w3 == b.w3);
    CHECK(a.wd == b.wd);
    CHECK(a.wo == b.wo);
    CHECK(a.bo == b.bo);
    CHECK(a.val_mse == b.val_mse);
}

TEST_CASE("permuting the training order changes nothing") {
    Config cfg = tiny_config();
    cfg.max_epochs = 4;
    cfg.batch_size = 8;
    auto train_set = synth_samples(24, cfg.window, cfg.channels, 53, mean_channel0);
    const auto val_set = synth_samples(8, cfg.window, cfg.channels, 54, mean_channel0);
    const Scaler sc = identity_scaler(cfg.channels);
    const TargetSpec spec{0, 0.0, 1.0};
    const Model a = cnn::train(cfg, train_set, val_set, sc, spec);
    auto shuffled = train_set;
    Rng rng(55);
    rng.shuffle(shuffled);
    const Model b = cnn::train(cfg, shuffled, val_set, sc, spec);
    CHECK(a.w1 == b.w1);
    CHECK(a.wo == b.wo);
    CHECK(a.val_mse == b.val_mse);
}

TEST_CASE("early stopping returns the best validation snapshot") {
    Config cfg = tiny_config();
    cfg.max_epochs = 30;
    cfg.patience = 5;
    cfg.batch_size = 8;
    const auto train_set = synth_samples(40, cfg.window, cfg.channels, 59, mean_channel0);
    const auto val_set = synth_samples(12, cfg.window, cfg.channels, 60, mean_channel0);
    const Scaler sc = identity_scaler(cfg.channels);
    const Model model = cnn::train(cfg, train_set, val_set, sc, TargetSpec{0, 0.0, 1.0});
    REQUIRE(!model.val_mse.empty());
    double best = model.val_mse[0];
    for (const double v : model.val_mse) best = std::min(best, v);
    CHECK(model.val_mse[static_cast<std::size_t>(model.best_epoch - 1)] == doctest::Approx(best));
    // the returned weights reproduce the recorded best validation loss
    CHECK(loss_on(model, val_set, sc) == doctest::Approx(best).epsilon(1e-12));
}

TEST_CASE("a window-mean task trains to high held-out accuracy") {
    Config cfg;
    cfg.window = 16;
    cfg.channels = 2;
    cfg.kernel = 3;
    cfg.conv_filters = {8, 8, 8};
    cfg.dense = 8;
    cfg.max_epochs = 120;
    cfg.patience = 30;
    cfg.batch_size = 32;
    cfg.learning_rate = 3e-3;
    cfg.seed = 61;
    const auto train_set = synth_samples(400, cfg.window, cfg.channels, 67, mean_channel0);
    const auto val_set = synth_samples(50, cfg.window, cfg.channels, 68, mean_channel0);
    const auto test_set = synth_samples(50, cfg.window, cfg.channels, 69, mean_channel0);
    const Scaler sc = identity_scaler(cfg.channels);
    const Model model = cnn::train(cfg, train_set, val_set, sc, TargetSpec{0, 0.0, 1.0});

    const auto preds = predict(model, test_set, sc);
    double mean = 0.0;
    for (const auto& s : test_set) mean += s.target[0];
    mean /= static_cast<double>(test_set.size());
    double ss_tot = 0.0;
    double ss_res = 0.0;
    for (std::size_t i = 0; i < test_set.size(); ++i) {
        ss_tot += (test_set[i].target[0] - mean) * (test_set[i].target[0] - mean);
        ss_res += (test_set[i].target[0] - preds[i]) * (test_set[i].target[0] - preds[i]);
    }
    CHECK(1.0 - ss_res / ss_tot > 0.95);
}

TEST_CASE("non-finite loss raises a training error naming the epoch") {
    Config cfg = tiny_config();
    cfg.max_epochs = 3;
    auto train_set = synth_samples(16, cfg.window, cfg.channels, 71, mean_channel0);
    train_set[0].target = {std::nan(""), 0.0, 0.0, 0.0};  // poisons the gradients
    const auto val_set = synth_samples(8, cfg.window, cfg.channels, 72, mean_channel0);
    try {
        cnn::train(cfg, train_set, val_set, identity_scaler(cfg.channels), TargetSpec{0, 0.0, 1.0});
        FAIL("expected TrainingError");
    } catch (const TrainingError& e) {
        CHECK(std::string(e.what()).find("epoch") != std::string::npos);
    }
}

TEST_CASE("models round-trip exactly through the tensor dump") {
    Config cfg = tiny_config();
    cfg.max_epochs = 3;
    cfg.batch_size = 8;
    const auto train_set = synth_samples(16, cfg.window, cfg.channels, 73, mean_channel0);
    const auto val_set = synth_samples(8, cfg.window, cfg.channels, 74, mean_channel0);
    const Scaler sc = identity_scaler(cfg.channels);
    Model model = cnn::train(cfg, train_set, val_set, sc, TargetSpec{0, 1.5, 2.5});
    model.schema_hash = 0xabcd;
    model.config_hash = 0x1234;
    model.target_name = "vmag";

    const std::string path = temp_path("mgs_cnn_model.txt");
    save(model, path);
    const Model back = load(path);
    CHECK(back.w1 == model.w1);
    CHECK(back.b1 == model.b1);
    CHECK(back.w2 == model.w2);
    CHECK(back.w3 == model.w3);
    CHECK(back.wd == model.wd);
    CHECK(back.wo == model.wo);
    CHECK(back.bo == model.bo);
    CHECK(back.target.mean == model.target.mean);
    CHECK(back.target.std_dev == model.target.std_dev);
    CHECK(back.val_mse == model.val_mse);
    CHECK(back.schema_hash == model.schema_hash);
    CHECK(back.best_epoch == model.best_epoch);
    const auto a = predict(model, val_set, sc);
    const auto b = predict(back, val_set, sc);
    CHECK(a == b);
    std::remove(path.c_str());
}
