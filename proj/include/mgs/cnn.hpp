#pragma once

// From-scratch 1D convolutional network with manual backpropagation:
// conv(32) -> conv(64) -> maxpool/2 -> conv(64) -> global average pool ->
// dense(64) -> dense(1), rectifier on hidden layers, identity output.
// Trained with adaptive-moment mini-batch descent and validation early
// stopping. Everything is 64-bit and bit-deterministic for a fixed seed:
// per-batch gradients reduce over fixed 8-sample blocks in block order, so
// the thread count never changes a result.

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mgs/window.hpp"

namespace mgs {
namespace cnn {

struct Config {
    int window = 100;    // W
    int channels = 38;   // d
    int kernel = 3;      // K, odd (same padding)
    std::array<int, 3> conv_filters{32, 64, 64};
    int dense = 64;
    double learning_rate = 1e-3;
    int batch_size = 64;
    int max_epochs = 100;
    int patience = 10;
    std::uint64_t seed = 42;

    void validate() const;  // throws ValidationError
};

// Intermediate shapes (time, channels); channels-only stages use time = 0.
std::vector<std::pair<int, int>> layer_shapes(const Config& cfg);

// Raw-array building blocks (exposed for the oracle tests).
// Zero-padded cross-correlation plus bias; activation is applied by the
// caller. Output length equals the input length.
void conv1d_forward(const double* in, int t_len, int c_in, const double* kernels, int k,
                    int c_out, const double* bias, double* out);
// Non-overlapping pairwise max; an odd tail element is dropped.
void maxpool1d(const double* in, int t_len, int c, double* out, int* argmax = nullptr);
void global_avg_pool(const double* in, int t_len, int c, double* out);

struct TargetSpec {
    int index = 0;        // position in WindowSample::target
    double mean = 0.0;    // standard scaling of the target
    double std_dev = 1.0;
};

struct Model {
    Config cfg;
    // weights: conv kernels are [k][c_in][c_out], dense is [in][out]
    std::vector<double> w1, b1, w2, b2, w3, b3, wd, bd, wo;
    double bo = 0.0;

    // adaptive-moment accumulators (training state, not persisted)
    std::vector<double> m_state, v_state;
    long adam_steps = 0;

    TargetSpec target;
    std::uint64_t schema_hash = 0;
    std::uint64_t config_hash = 0;
    std::string target_name;

    std::vector<double> train_mse;  // per epoch, scaled space
    std::vector<double> val_mse;
    int best_epoch = 0;
};

Model init_model(const Config& cfg, std::uint64_t seed);

struct Gradients {
    std::vector<double> w1, b1, w2, b2, w3, b3, wd, bd, wo;
    double bo = 0.0;
};

// Forward pass over a batch; returns predictions in scaled-target space.
std::vector<double> forward(const Model& model, std::span<const WindowSample> batch,
                            const Scaler& seq_scaler);

// Batch-mean squared error in scaled space (the training loss).
double loss_on(const Model& model, std::span<const WindowSample> batch, const Scaler& seq_scaler);

// Exact analytic gradients of the batch-mean squared error.
Gradients backward(const Model& model, std::span<const WindowSample> batch, const Scaler& seq_scaler);

// Mini-batch training with seeded shuffling and early stopping (returns the
// best-validation snapshot). Samples are reordered canonically first, so
// the incoming order is irrelevant. Throws TrainingError on divergence.
Model train(const Config& cfg, std::span<const WindowSample> train_samples,
            std::span<const WindowSample> val_samples, const Scaler& seq_scaler,
            const TargetSpec& target);

// Inference in raw target units (inverse of the target scaling).
std::vector<double> predict(const Model& model, std::span<const WindowSample> samples,
                            const Scaler& seq_scaler);

long parameter_count(const Config& cfg);

void save(const Model& model, const std::string& path);
Model load(const std::string& path);

}  // namespace cnn
}  // namespace mgs
