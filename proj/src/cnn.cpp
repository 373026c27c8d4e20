#include "mgs/cnn.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace mgs {
namespace cnn {

void Config::validate() const {
    if (window < 2) throw ValidationError("cnn: window must be >= 2");
    if (channels < 1) throw ValidationError("cnn: channels must be >= 1");
    if (kernel < 1 || kernel % 2 == 0) throw ValidationError("cnn: kernel must be odd for same padding");
    for (int f : conv_filters) {
        if (f < 1) throw ValidationError("cnn: conv filter counts must be >= 1");
    }
    if (dense < 1) throw ValidationError("cnn: dense width must be >= 1");
    if (!(learning_rate > 0.0)) throw ValidationError("cnn: learning_rate must be > 0");
    if (batch_size < 1) throw ValidationError("cnn: batch_size must be >= 1");
    if (max_epochs < 1) throw ValidationError("cnn: max_epochs must be >= 1");
    if (patience < 1) throw ValidationError("cnn: patience must be >= 1");
}

std::vector<std::pair<int, int>> layer_shapes(const Config& cfg) {
    const int t_pooled = cfg.window / 2;
    return {
        {cfg.window, cfg.conv_filters[0]},
        {cfg.window, cfg.conv_filters[1]},
        {t_pooled, cfg.conv_filters[1]},
        {t_pooled, cfg.conv_filters[2]},
        {0, cfg.conv_filters[2]},
        {0, cfg.dense},
        {0, 1},
    };
}

long parameter_count(const Config& cfg) {
    const long k = cfg.kernel;
    const long f1 = cfg.conv_filters[0];
    const long f2 = cfg.conv_filters[1];
    const long f3 = cfg.conv_filters[2];
    return k * cfg.channels * f1 + f1 + k * f1 * f2 + f2 + k * f2 * f3 + f3 +
           f3 * cfg.dense + cfg.dense + cfg.dense + 1;
}

void conv1d_forward(const double* in, int t_len, int c_in, const double* kernels, int k,
                    int c_out, const double* bias, double* out) {
    const int off = (k - 1) / 2;
    std::vector<double> acc(static_cast<std::size_t>(c_out));
    for (int t = 0; t < t_len; ++t) {
        for (int co = 0; co < c_out; ++co) acc[static_cast<std::size_t>(co)] = bias[co];
        const int k_lo = std::max(0, off - t);
        const int k_hi = std::min(k, t_len + off - t);
        for (int kk = k_lo; kk < k_hi; ++kk) {
            const double* x = in + static_cast<std::size_t>(t + kk - off) * c_in;
            const double* w = kernels + static_cast<std::size_t>(kk) * c_in * c_out;
            for (int ci = 0; ci < c_in; ++ci) {
                const double xv = x[ci];
                const double* wrow = w + static_cast<std::size_t>(ci) * c_out;
                for (int co = 0; co < c_out; ++co) {
                    acc[static_cast<std::size_t>(co)] += xv * wrow[co];
                }
            }
        }
        double* o = out + static_cast<std::size_t>(t) * c_out;
        for (int co = 0; co < c_out; ++co) o[co] = acc[static_cast<std::size_t>(co)];
    }
}

void maxpool1d(const double* in, int t_len, int c, double* out, int* argmax) {
    const int pairs = t_len / 2;
    for (int p = 0; p < pairs; ++p) {
        const double* a = in + static_cast<std::size_t>(2 * p) * c;
        const double* b = a + c;
        double* o = out + static_cast<std::size_t>(p) * c;
        for (int j = 0; j < c; ++j) {
            const bool second = b[j] > a[j];
            o[j] = second ? b[j] : a[j];
            if (argmax) argmax[static_cast<std::size_t>(p) * c + j] = second ? 1 : 0;
        }
    }
}

void global_avg_pool(const double* in, int t_len, int c, double* out) {
    for (int j = 0; j < c; ++j) out[j] = 0.0;
    for (int t = 0; t < t_len; ++t) {
        const double* row = in + static_cast<std::size_t>(t) * c;
        for (int j = 0; j < c; ++j) out[j] += row[j];
    }
    const double inv = 1.0 / t_len;
    for (int j = 0; j < c; ++j) out[j] *= inv;
}

namespace {

void conv1d_backward(const double* in, int t_len, int c_in, const double* kernels, int k,
                     int c_out, const double* d_out, double* d_in, double* d_kernels,
                     double* d_bias) {
    const int off = (k - 1) / 2;
    for (int t = 0; t < t_len; ++t) {
        const double* dz = d_out + static_cast<std::size_t>(t) * c_out;
        for (int co = 0; co < c_out; ++co) d_bias[co] += dz[co];
        const int k_lo = std::max(0, off - t);
        const int k_hi = std::min(k, t_len + off - t);
        for (int kk = k_lo; kk < k_hi; ++kk) {
            const std::size_t ti = static_cast<std::size_t>(t + kk - off);
            const double* x = in + ti * c_in;
            double* dx = d_in + ti * c_in;
            const double* w = kernels + static_cast<std::size_t>(kk) * c_in * c_out;
            double* dw = d_kernels + static_cast<std::size_t>(kk) * c_in * c_out;
            for (int ci = 0; ci < c_in; ++ci) {
                const double xv = x[ci];
                const double* wrow = w + static_cast<std::size_t>(ci) * c_out;
                double* dwrow = dw + static_cast<std::size_t>(ci) * c_out;
                double acc = 0.0;
                for (int co = 0; co < c_out; ++co) {
                    dwrow[co] += xv * dz[co];
                    acc += wrow[co] * dz[co];
                }
                dx[ci] += acc;
            }
        }
    }
}

inline void relu_forward(const double* z, double* a, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) a[i] = z[i] > 0.0 ? z[i] : 0.0;
}

inline void relu_backward(const double* z, const double* da, double* dz, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) dz[i] = z[i] > 0.0 ? da[i] : 0.0;
}

struct Workspace {
    std::vector<double> a0;        // scaled input, W x d
    std::vector<double> z1, a1;    // W x f1
    std::vector<double> z2, a2;    // W x f2
    std::vector<double> p2;        // W/2 x f2
    std::vector<int> arg2;
    std::vector<double> z3, a3;    // W/2 x f3
    std::vector<double> g;         // f3
    std::vector<double> zd, ad;    // dense
    // backward scratch
    std::vector<double> da0, dz1, dz2, dz3, da1, da2, dp2, da3, dg, dzd, dad;

    void resize(const Config& cfg) {
        const std::size_t w = static_cast<std::size_t>(cfg.window);
        const std::size_t d = static_cast<std::size_t>(cfg.channels);
        const std::size_t f1 = static_cast<std::size_t>(cfg.conv_filters[0]);
        const std::size_t f2 = static_cast<std::size_t>(cfg.conv_filters[1]);
        const std::size_t f3 = static_cast<std::size_t>(cfg.conv_filters[2]);
        const std::size_t w2 = w / 2;
        a0.resize(w * d);
        z1.resize(w * f1); a1.resize(w * f1);
        z2.resize(w * f2); a2.resize(w * f2);
        p2.resize(w2 * f2); arg2.resize(w2 * f2);
        z3.resize(w2 * f3); a3.resize(w2 * f3);
        g.resize(f3);
        zd.resize(static_cast<std::size_t>(cfg.dense));
        ad.resize(static_cast<std::size_t>(cfg.dense));
        da0.resize(w * d);
        dz1.resize(w * f1); da1.resize(w * f1);
        dz2.resize(w * f2); da2.resize(w * f2);
        dp2.resize(w2 * f2);
        dz3.resize(w2 * f3); da3.resize(w2 * f3);
        dg.resize(f3);
        dzd.resize(static_cast<std::size_t>(cfg.dense));
        dad.resize(static_cast<std::size_t>(cfg.dense));
    }
};

void load_scaled_input(const Model& model, const WindowSample& s, const Scaler& seq_scaler,
                       double* a0) {
    const int w = model.cfg.window;
    const int d = model.cfg.channels;
    for (int t = 0; t < w; ++t) {
        const double* row = s.row(t);
        double* out = a0 + static_cast<std::size_t>(t) * d;
        for (int j = 0; j < d; ++j) {
            out[j] = (row[j] - seq_scaler.mean[static_cast<std::size_t>(j)]) /
                     seq_scaler.std_dev[static_cast<std::size_t>(j)];
        }
    }
}

// Forward through the stack; returns the scaled-space prediction.
double forward_one(const Model& model, Workspace& ws) {
    const auto& cfg = model.cfg;
    const int w = cfg.window;
    const int d = cfg.channels;
    const int f1 = cfg.conv_filters[0];
    const int f2 = cfg.conv_filters[1];
    const int f3 = cfg.conv_filters[2];
    const int w2 = w / 2;

    conv1d_forward(ws.a0.data(), w, d, model.w1.data(), cfg.kernel, f1, model.b1.data(), ws.z1.data());
    relu_forward(ws.z1.data(), ws.a1.data(), ws.z1.size());
    conv1d_forward(ws.a1.data(), w, f1, model.w2.data(), cfg.kernel, f2, model.b2.data(), ws.z2.data());
    relu_forward(ws.z2.data(), ws.a2.data(), ws.z2.size());
    maxpool1d(ws.a2.data(), w, f2, ws.p2.data(), ws.arg2.data());
    conv1d_forward(ws.p2.data(), w2, f2, model.w3.data(), cfg.kernel, f3, model.b3.data(), ws.z3.data());
    relu_forward(ws.z3.data(), ws.a3.data(), ws.z3.size());
    global_avg_pool(ws.a3.data(), w2, f3, ws.g.data());

    for (int o = 0; o < cfg.dense; ++o) ws.zd[static_cast<std::size_t>(o)] = model.bd[static_cast<std::size_t>(o)];
    for (int i = 0; i < f3; ++i) {
        const double gi = ws.g[static_cast<std::size_t>(i)];
        const double* wrow = model.wd.data() + static_cast<std::size_t>(i) * cfg.dense;
        for (int o = 0; o < cfg.dense; ++o) ws.zd[static_cast<std::size_t>(o)] += gi * wrow[o];
    }
    relu_forward(ws.zd.data(), ws.ad.data(), ws.zd.size());

    double y = model.bo;
    for (int i = 0; i < cfg.dense; ++i) y += ws.ad[static_cast<std::size_t>(i)] * model.wo[static_cast<std::size_t>(i)];
    return y;
}

// Backward for one sample given d_loss/d_y; accumulates into grads.
void backward_one(const Model& model, Workspace& ws, double dy, Gradients& g) {
    const auto& cfg = model.cfg;
    const int w = cfg.window;
    const int d = cfg.channels;
    const int f1 = cfg.conv_filters[0];
    const int f2 = cfg.conv_filters[1];
    const int f3 = cfg.conv_filters[2];
    const int w2 = w / 2;

    g.bo += dy;
    for (int i = 0; i < cfg.dense; ++i) {
        g.wo[static_cast<std::size_t>(i)] += dy * ws.ad[static_cast<std::size_t>(i)];
        ws.dad[static_cast<std::size_t>(i)] = dy * model.wo[static_cast<std::size_t>(i)];
    }
    relu_backward(ws.zd.data(), ws.dad.data(), ws.dzd.data(), ws.zd.size());

    std::fill(ws.dg.begin(), ws.dg.end(), 0.0);
    for (int i = 0; i < f3; ++i) {
        const double gi = ws.g[static_cast<std::size_t>(i)];
        const double* wrow = model.wd.data() + static_cast<std::size_t>(i) * cfg.dense;
        double* dwrow = g.wd.data() + static_cast<std::size_t>(i) * cfg.dense;
        double acc = 0.0;
        for (int o = 0; o < cfg.dense; ++o) {
            dwrow[o] += gi * ws.dzd[static_cast<std::size_t>(o)];
            acc += wrow[o] * ws.dzd[static_cast<std::size_t>(o)];
        }
        ws.dg[static_cast<std::size_t>(i)] = acc;
    }
    for (int o = 0; o < cfg.dense; ++o) g.bd[static_cast<std::size_t>(o)] += ws.dzd[static_cast<std::size_t>(o)];

    // GAP spreads the gradient uniformly over time
    const double inv_t = 1.0 / w2;
    for (int t = 0; t < w2; ++t) {
        double* row = ws.da3.data() + static_cast<std::size_t>(t) * f3;
        for (int j = 0; j < f3; ++j) row[j] = ws.dg[static_cast<std::size_t>(j)] * inv_t;
    }
    relu_backward(ws.z3.data(), ws.da3.data(), ws.dz3.data(), ws.z3.size());

    std::fill(ws.dp2.begin(), ws.dp2.end(), 0.0);
    conv1d_backward(ws.p2.data(), w2, f2, model.w3.data(), cfg.kernel, f3, ws.dz3.data(),
                    ws.dp2.data(), g.w3.data(), g.b3.data());

    std::fill(ws.da2.begin(), ws.da2.end(), 0.0);
    for (int p = 0; p < w2; ++p) {
        const double* dp = ws.dp2.data() + static_cast<std::size_t>(p) * f2;
        const int* arg = ws.arg2.data() + static_cast<std::size_t>(p) * f2;
        for (int j = 0; j < f2; ++j) {
            ws.da2[static_cast<std::size_t>(2 * p + arg[j]) * f2 + static_cast<std::size_t>(j)] = dp[j];
        }
    }
    relu_backward(ws.z2.data(), ws.da2.data(), ws.dz2.data(), ws.z2.size());

    std::fill(ws.da1.begin(), ws.da1.end(), 0.0);
    conv1d_backward(ws.a1.data(), w, f1, model.w2.data(), cfg.kernel, f2, ws.dz2.data(),
                    ws.da1.data(), g.w2.data(), g.b2.data());
    relu_backward(ws.z1.data(), ws.da1.data(), ws.dz1.data(), ws.z1.size());

    // input gradients land in da0 and are discarded
    std::fill(ws.da0.begin(), ws.da0.end(), 0.0);
    conv1d_backward(ws.a0.data(), w, d, model.w1.data(), cfg.kernel, f1, ws.dz1.data(),
                    ws.da0.data(), g.w1.data(), g.b1.data());
}

Gradients make_gradients(const Config& cfg) {
    Gradients g;
    g.w1.assign(static_cast<std::size_t>(cfg.kernel) * cfg.channels * cfg.conv_filters[0], 0.0);
    g.b1.assign(static_cast<std::size_t>(cfg.conv_filters[0]), 0.0);
    g.w2.assign(static_cast<std::size_t>(cfg.kernel) * cfg.conv_filters[0] * cfg.conv_filters[1], 0.0);
    g.b2.assign(static_cast<std::size_t>(cfg.conv_filters[1]), 0.0);
    g.w3.assign(static_cast<std::size_t>(cfg.kernel) * cfg.conv_filters[1] * cfg.conv_filters[2], 0.0);
    g.b3.assign(static_cast<std::size_t>(cfg.conv_filters[2]), 0.0);
    g.wd.assign(static_cast<std::size_t>(cfg.conv_filters[2]) * cfg.dense, 0.0);
    g.bd.assign(static_cast<std::size_t>(cfg.dense), 0.0);
    g.wo.assign(static_cast<std::size_t>(cfg.dense), 0.0);
    g.bo = 0.0;
    return g;
}

void add_gradients(Gradients& into, const Gradients& from) {
    auto add = [](std::vector<double>& a, const std::vector<double>& b) {
        for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
    };
    add(into.w1, from.w1); add(into.b1, from.b1);
    add(into.w2, from.w2); add(into.b2, from.b2);
    add(into.w3, from.w3); add(into.b3, from.b3);
    add(into.wd, from.wd); add(into.bd, from.bd);
    add(into.wo, from.wo);
    into.bo += from.bo;
}

double scaled_target(const WindowSample& s, const TargetSpec& t) {
    return (s.target[static_cast<std::size_t>(t.index)] - t.mean) / t.std_dev;
}

constexpr std::size_t kBlock = 8;  // fixed reduction granularity

}  // namespace

Model init_model(const Config& cfg, std::uint64_t seed) {
    cfg.validate();
    Model m;
    m.cfg = cfg;
    Rng rng(hash_mix(seed, 0x636e6e696e6974ull));
    auto init = [&](std::vector<double>& w, std::size_t n, int fan_in) {
        // fan-in scaled uniform, rectifier gain
        const double limit = std::sqrt(6.0 / fan_in);
        w.resize(n);
        for (auto& v : w) v = (2.0 * rng.uniform() - 1.0) * limit;
    };
    const int k = cfg.kernel;
    init(m.w1, static_cast<std::size_t>(k) * cfg.channels * cfg.conv_filters[0], k * cfg.channels);
    m.b1.assign(static_cast<std::size_t>(cfg.conv_filters[0]), 0.0);
    init(m.w2, static_cast<std::size_t>(k) * cfg.conv_filters[0] * cfg.conv_filters[1],
         k * cfg.conv_filters[0]);
    m.b2.assign(static_cast<std::size_t>(cfg.conv_filters[1]), 0.0);
    init(m.w3, static_cast<std::size_t>(k) * cfg.conv_filters[1] * cfg.conv_filters[2],
         k * cfg.conv_filters[1]);
    m.b3.assign(static_cast<std::size_t>(cfg.conv_filters[2]), 0.0);
    init(m.wd, static_cast<std::size_t>(cfg.conv_filters[2]) * cfg.dense, cfg.conv_filters[2]);
    m.bd.assign(static_cast<std::size_t>(cfg.dense), 0.0);
    init(m.wo, static_cast<std::size_t>(cfg.dense), cfg.dense);
    m.bo = 0.0;
    return m;
}

namespace {

// shape errors surface here; nothing may throw inside a parallel region
void check_batch_shapes(const Model& model, std::span<const WindowSample> batch,
                        const Scaler& seq_scaler) {
    if (seq_scaler.size() != static_cast<std::size_t>(model.cfg.channels)) {
        throw ContractError("cnn: sequence scaler width mismatch");
    }
    for (const auto& s : batch) {
        if (s.window != model.cfg.window || s.d() != model.cfg.channels) {
            throw ContractError("cnn: window shape " + std::to_string(s.window) + "x" +
                                std::to_string(s.d()) + " does not match the architecture " +
                                std::to_string(model.cfg.window) + "x" +
                                std::to_string(model.cfg.channels));
        }
    }
}

}  // namespace

std::vector<double> forward(const Model& model, std::span<const WindowSample> batch,
                            const Scaler& seq_scaler) {
    check_batch_shapes(model, batch, seq_scaler);
    std::vector<double> preds(batch.size());
    const std::size_t n = batch.size();
#ifdef _OPENMP
#pragma omp parallel
    {
        Workspace ws;
        ws.resize(model.cfg);
#pragma omp for schedule(static)
        for (long i = 0; i < static_cast<long>(n); ++i) {
            load_scaled_input(model, batch[static_cast<std::size_t>(i)], seq_scaler, ws.a0.data());
            preds[static_cast<std::size_t>(i)] = forward_one(model, ws);
        }
    }
#else
    Workspace ws;
    ws.resize(model.cfg);
    for (std::size_t i = 0; i < n; ++i) {
        load_scaled_input(model, batch[i], seq_scaler, ws.a0.data());
        preds[i] = forward_one(model, ws);
    }
#endif
    return preds;
}

double loss_on(const Model& model, std::span<const WindowSample> batch, const Scaler& seq_scaler) {
    if (batch.empty()) return 0.0;
    const std::vector<double> preds = forward(model, batch, seq_scaler);
    // fixed-order accumulation keeps the value thread-count independent
    double sum = 0.0;
    for (std::size_t i = 0; i < batch.size(); ++i) {
        const double e = preds[i] - scaled_target(batch[i], model.target);
        sum += e * e;
    }
    return sum / static_cast<double>(batch.size());
}

Gradients backward(const Model& model, std::span<const WindowSample> batch, const Scaler& seq_scaler) {
    const std::size_t n = batch.size();
    if (n == 0) return make_gradients(model.cfg);
    check_batch_shapes(model, batch, seq_scaler);
    const double inv_n = 1.0 / static_cast<double>(n);
    const std::size_t n_blocks = (n + kBlock - 1) / kBlock;
    std::vector<Gradients> partials(n_blocks);

#ifdef _OPENMP
#pragma omp parallel
    {
        Workspace ws;
        ws.resize(model.cfg);
#pragma omp for schedule(static)
        for (long b = 0; b < static_cast<long>(n_blocks); ++b) {
            Gradients& g = partials[static_cast<std::size_t>(b)];
            g = make_gradients(model.cfg);
            const std::size_t lo = static_cast<std::size_t>(b) * kBlock;
            const std::size_t hi = std::min(n, lo + kBlock);
            for (std::size_t i = lo; i < hi; ++i) {
                load_scaled_input(model, batch[i], seq_scaler, ws.a0.data());
                const double y_hat = forward_one(model, ws);
                const double dy = 2.0 * (y_hat - scaled_target(batch[i], model.target)) * inv_n;
                backward_one(model, ws, dy, g);
            }
        }
    }
#else
    {
        Workspace ws;
        ws.resize(model.cfg);
        for (std::size_t b = 0; b < n_blocks; ++b) {
            Gradients& g = partials[b];
            g = make_gradients(model.cfg);
            const std::size_t lo = b * kBlock;
            const std::size_t hi = std::min(n, lo + kBlock);
            for (std::size_t i = lo; i < hi; ++i) {
                load_scaled_input(model, batch[i], seq_scaler, ws.a0.data());
                const double y_hat = forward_one(model, ws);
                const double dy = 2.0 * (y_hat - scaled_target(batch[i], model.target)) * inv_n;
                backward_one(model, ws, dy, g);
            }
        }
    }
#endif

    Gradients total = std::move(partials[0]);
    for (std::size_t b = 1; b < n_blocks; ++b) add_gradients(total, partials[b]);
    return total;
}

namespace {

struct ParamView {
    double* value;
    const double* grad;
    std::size_t size;
};

std::vector<ParamView> param_views(Model& m, const Gradients& g) {
    return {
        {m.w1.data(), g.w1.data(), m.w1.size()}, {m.b1.data(), g.b1.data(), m.b1.size()},
        {m.w2.data(), g.w2.data(), m.w2.size()}, {m.b2.data(), g.b2.data(), m.b2.size()},
        {m.w3.data(), g.w3.data(), m.w3.size()}, {m.b3.data(), g.b3.data(), m.b3.size()},
        {m.wd.data(), g.wd.data(), m.wd.size()}, {m.bd.data(), g.bd.data(), m.bd.size()},
        {m.wo.data(), g.wo.data(), m.wo.size()}, {&m.bo, &g.bo, 1},
    };
}

void adam_step(Model& m, const Gradients& g) {
    constexpr double kBeta1 = 0.9;
    constexpr double kBeta2 = 0.999;
    constexpr double kEps = 1e-8;
    auto views = param_views(m, g);
    std::size_t total = 0;
    for (const auto& v : views) total += v.size;
    if (m.m_state.size() != total) {
        m.m_state.assign(total, 0.0);
        m.v_state.assign(total, 0.0);
        m.adam_steps = 0;
    }
    ++m.adam_steps;
    const double c1 = 1.0 - std::pow(kBeta1, static_cast<double>(m.adam_steps));
    const double c2 = 1.0 - std::pow(kBeta2, static_cast<double>(m.adam_steps));
    std::size_t base = 0;
    for (const auto& view : views) {
        for (std::size_t i = 0; i < view.size; ++i) {
            const double gr = view.grad[i];
            double& mm = m.m_state[base + i];
            double& vv = m.v_state[base + i];
            mm = kBeta1 * mm + (1.0 - kBeta1) * gr;
            vv = kBeta2 * vv + (1.0 - kBeta2) * gr * gr;
            view.value[i] -= m.cfg.learning_rate * (mm / c1) / (std::sqrt(vv / c2) + kEps);
        }
        base += view.size;
    }
}

struct WeightSnapshot {
    std::vector<double> w1, b1, w2, b2, w3, b3, wd, bd, wo;
    double bo = 0.0;

    static WeightSnapshot of(const Model& m) {
        return {m.w1, m.b1, m.w2, m.b2, m.w3, m.b3, m.wd, m.bd, m.wo, m.bo};
    }
    void restore(Model& m) const {
        m.w1 = w1; m.b1 = b1; m.w2 = w2; m.b2 = b2; m.w3 = w3; m.b3 = b3;
        m.wd = wd; m.bd = bd; m.wo = wo; m.bo = bo;
    }
};

}  // namespace

Model train(const Config& cfg, std::span<const WindowSample> train_samples,
            std::span<const WindowSample> val_samples, const Scaler& seq_scaler,
            const TargetSpec& target) {
    cfg.validate();
    if (train_samples.empty()) throw DataError("cnn::train: empty training set");

    // canonical order makes the fit independent of the incoming sample order
    std::vector<WindowSample> train(train_samples.begin(), train_samples.end());
    sort_canonical(train);
    std::vector<WindowSample> val(val_samples.begin(), val_samples.end());
    sort_canonical(val);

    Model model = init_model(cfg, cfg.seed);
    model.target = target;

    Rng shuffle_rng(hash_mix(cfg.seed, 0x7368756666ull));
    std::vector<std::size_t> order(train.size());
    std::iota(order.begin(), order.end(), std::size_t{0});

    const bool have_val = !val.empty();
    double best_val = std::numeric_limits<double>::infinity();
    int best_epoch = 0;
    WeightSnapshot best = WeightSnapshot::of(model);

    std::vector<WindowSample> batch;
    batch.reserve(static_cast<std::size_t>(cfg.batch_size));

    for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        shuffle_rng.shuffle(order);
        for (std::size_t start = 0; start < order.size();
             start += static_cast<std::size_t>(cfg.batch_size)) {
            const std::size_t stop =
                std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
            batch.clear();
            for (std::size_t i = start; i < stop; ++i) batch.push_back(train[order[i]]);
            const Gradients g = backward(model, batch, seq_scaler);
            adam_step(model, g);
        }

        const double train_loss = loss_on(model, train, seq_scaler);
        if (!std::isfinite(train_loss)) {
            throw TrainingError("cnn::train: loss diverged at epoch " + std::to_string(epoch));
        }
        model.train_mse.push_back(train_loss);

        if (have_val) {
            const double val_loss = loss_on(model, val, seq_scaler);
            if (!std::isfinite(val_loss)) {
                throw TrainingError("cnn::train: validation loss diverged at epoch " +
                                    std::to_string(epoch));
            }
            model.val_mse.push_back(val_loss);
            if (val_loss < best_val) {
                best_val = val_loss;
                best_epoch = epoch;
                best = WeightSnapshot::of(model);
            } else if (epoch - best_epoch >= cfg.patience) {
                break;
            }
        } else {
            best_epoch = epoch;
            best = WeightSnapshot::of(model);
        }
    }

    best.restore(model);
    model.best_epoch = best_epoch;
    return model;
}

std::vector<double> predict(const Model& model, std::span<const WindowSample> samples,
                            const Scaler& seq_scaler) {
    std::vector<double> preds = forward(model, samples, seq_scaler);
    for (double& p : preds) p = p * model.target.std_dev + model.target.mean;
    return preds;
}

namespace {

void write_tensor(std::ofstream& out, const char* name, const std::vector<double>& v) {
    out << "tensor " << name << ' ' << v.size() << '\n';
    std::string line;
    for (std::size_t i = 0; i < v.size(); ++i) {
        line += format_double(v[i]);
        if ((i + 1) % 8 == 0 || i + 1 == v.size()) {
            out << line << '\n';
            line.clear();
        } else {
            line += ' ';
        }
    }
}

std::vector<double> read_tensor(std::ifstream& in, const std::string& path, const char* name,
                                std::string& line) {
    if (!std::getline(in, line)) throw FormatError(path + ": truncated tensor section");
    std::vector<std::string> head;
    {
        std::size_t i = 0;
        while (i < line.size()) {
            while (i < line.size() && line[i] == ' ') ++i;
            std::size_t j = i;
            while (j < line.size() && line[j] != ' ') ++j;
            if (j > i) head.push_back(line.substr(i, j - i));
            i = j;
        }
    }
    if (head.size() != 3 || head[0] != "tensor" || head[1] != name) {
        throw FormatError(path + ": expected tensor " + name);
    }
    const std::size_t n = std::stoull(head[2]);
    std::vector<double> v;
    v.reserve(n);
    while (v.size() < n) {
        if (!std::getline(in, line)) throw FormatError(path + ": truncated tensor " + name);
        std::size_t i = 0;
        while (i < line.size()) {
            while (i < line.size() && line[i] == ' ') ++i;
            std::size_t j = i;
            while (j < line.size() && line[j] != ' ') ++j;
            if (j > i) v.push_back(parse_double(std::string_view(line).substr(i, j - i)));
            i = j;
        }
    }
    if (v.size() != n) throw FormatError(path + ": tensor " + name + " has extra values");
    return v;
}

}  // namespace

void save(const Model& model, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw EnvironmentError("cannot open for writing: " + path);
    const auto& cfg = model.cfg;
    out << "mgs-cnn 1\n";
    out << "schema_hash " << format_hex64(model.schema_hash) << '\n';
    out << "config_hash " << format_hex64(model.config_hash) << '\n';
    out << "target " << (model.target_name.empty() ? "-" : model.target_name) << '\n';
    out << "arch " << cfg.window << ' ' << cfg.channels << ' ' << cfg.kernel << ' '
        << cfg.conv_filters[0] << ' ' << cfg.conv_filters[1] << ' ' << cfg.conv_filters[2] << ' '
        << cfg.dense << '\n';
    out << "optimizer " << format_double(cfg.learning_rate) << ' ' << cfg.batch_size << ' '
        << cfg.max_epochs << ' ' << cfg.patience << ' ' << cfg.seed << '\n';
    out << "target_scale " << model.target.index << ' ' << format_double(model.target.mean) << ' '
        << format_double(model.target.std_dev) << '\n';
    out << "best_epoch " << model.best_epoch << '\n';
    out << "history " << model.train_mse.size() << '\n';
    for (std::size_t i = 0; i < model.train_mse.size(); ++i) {
        out << format_double(model.train_mse[i]);
        if (i < model.val_mse.size()) out << ' ' << format_double(model.val_mse[i]);
        out << '\n';
    }
    write_tensor(out, "w1", model.w1);
    write_tensor(out, "b1", model.b1);
    write_tensor(out, "w2", model.w2);
    write_tensor(out, "b2", model.b2);
    write_tensor(out, "w3", model.w3);
    write_tensor(out, "b3", model.b3);
    write_tensor(out, "wd", model.wd);
    write_tensor(out, "bd", model.bd);
    write_tensor(out, "wo", model.wo);
    out << "bo " << format_double(model.bo) << '\n';
    out << "end\n";
    if (!out) throw EnvironmentError("write failed: " + path);
}

Model load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw EnvironmentError("cannot open for reading: " + path);
    std::string line;
    auto tokens = [&](const std::string& l) {
        std::vector<std::string> out;
        std::size_t i = 0;
        while (i < l.size()) {
            while (i < l.size() && l[i] == ' ') ++i;
            std::size_t j = i;
            while (j < l.size() && l[j] != ' ') ++j;
            if (j > i) out.push_back(l.substr(i, j - i));
            i = j;
        }
        return out;
    };
    auto next = [&]() {
        if (!std::getline(in, line)) throw FormatError(path + ": truncated model file");
        if (!line.empty() && line.back() == '\r') line.pop_back();
        return tokens(line);
    };

    auto head = next();
    if (head.size() != 2 || head[0] != "mgs-cnn" || head[1] != "1") {
        throw FormatError(path + ": not a cnn model file");
    }
    Model m;
    auto t = next();
    m.schema_hash = parse_hex64(t.at(1));
    t = next();
    m.config_hash = parse_hex64(t.at(1));
    t = next();
    m.target_name = t.at(1) == "-" ? "" : t.at(1);
    t = next();
    if (t.at(0) != "arch") throw FormatError(path + ": missing arch line");
    m.cfg.window = std::stoi(t.at(1));
    m.cfg.channels = std::stoi(t.at(2));
    m.cfg.kernel = std::stoi(t.at(3));
    m.cfg.conv_filters = {std::stoi(t.at(4)), std::stoi(t.at(5)), std::stoi(t.at(6))};
    m.cfg.dense = std::stoi(t.at(7));
    t = next();
    if (t.at(0) != "optimizer") throw FormatError(path + ": missing optimizer line");
    m.cfg.learning_rate = parse_double(t.at(1));
    m.cfg.batch_size = std::stoi(t.at(2));
    m.cfg.max_epochs = std::stoi(t.at(3));
    m.cfg.patience = std::stoi(t.at(4));
    m.cfg.seed = std::stoull(t.at(5));
    t = next();
    if (t.at(0) != "target_scale") throw FormatError(path + ": missing target_scale line");
    m.target.index = std::stoi(t.at(1));
    m.target.mean = parse_double(t.at(2));
    m.target.std_dev = parse_double(t.at(3));
    t = next();
    m.best_epoch = std::stoi(t.at(1));
    t = next();
    if (t.at(0) != "history") throw FormatError(path + ": missing history line");
    const std::size_t n_hist = std::stoull(t.at(1));
    for (std::size_t i = 0; i < n_hist; ++i) {
        t = next();
        m.train_mse.push_back(parse_double(t.at(0)));
        if (t.size() > 1) m.val_mse.push_back(parse_double(t.at(1)));
    }
    m.w1 = read_tensor(in, path, "w1", line);
    m.b1 = read_tensor(in, path, "b1", line);
    m.w2 = read_tensor(in, path, "w2", line);
    m.b2 = read_tensor(in, path, "b2", line);
    m.w3 = read_tensor(in, path, "w3", line);
    m.b3 = read_tensor(in, path, "b3", line);
    m.wd = read_tensor(in, path, "wd", line);
    m.bd = read_tensor(in, path, "bd", line);
    m.wo = read_tensor(in, path, "wo", line);
    t = next();
    if (t.at(0) != "bo") throw FormatError(path + ": missing bo line");
    m.bo = parse_double(t.at(1));
    t = next();
    if (t.empty() || t[0] != "end") throw FormatError(path + ": missing end marker");
    m.cfg.validate();
    return m;
}

}  // namespace cnn
}  // namespace mgs
