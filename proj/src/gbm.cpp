#include "mgs/gbm.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <memory>
#include <queue>

namespace mgs {
namespace gbm {

void Hyperparams::validate() const {
    if (!(learning_rate > 0.0 && learning_rate <= 1.0)) {
        throw ValidationError("learning_rate must be in (0, 1], got " + format_double(learning_rate));
    }
    if (n_estimators < 1) throw ValidationError("n_estimators must be >= 1");
    if (max_depth < 1) throw ValidationError("max_depth must be >= 1");
    if (num_leaves < 2) throw ValidationError("num_leaves must be >= 2");
    if (min_child_samples < 1) throw ValidationError("min_child_samples must be >= 1");
    if (!(subsample > 0.0 && subsample <= 1.0)) throw ValidationError("subsample must be in (0, 1]");
    if (!(colsample > 0.0 && colsample <= 1.0)) throw ValidationError("colsample must be in (0, 1]");
    if (n_bins < 2 || n_bins > 256) throw ValidationError("n_bins must be in [2, 256]");
    if (early_stopping_rounds < 1) throw ValidationError("early_stopping_rounds must be >= 1");
}

FeatureBins build_histograms(const double* x, std::size_t rows, std::size_t features, int n_bins) {
    if (rows == 0) throw ValidationError("build_histograms: empty matrix");
    if (n_bins < 2) throw ValidationError("build_histograms: n_bins must be >= 2");
    FeatureBins fb;
    fb.rows = rows;
    fb.edges.resize(features);
    fb.binned.assign(features * rows, 0);

    std::vector<double> sorted(rows);
    for (std::size_t f = 0; f < features; ++f) {
        for (std::size_t r = 0; r < rows; ++r) sorted[r] = x[r * features + f];
        std::sort(sorted.begin(), sorted.end());

        // distinct values with multiplicities
        std::vector<std::pair<double, std::size_t>> distinct;
        for (std::size_t r = 0; r < rows; ++r) {
            if (distinct.empty() || sorted[r] != distinct.back().first) {
                distinct.emplace_back(sorted[r], 1);
            } else {
                ++distinct.back().second;
            }
        }

        auto& edges = fb.edges[f];
        if (distinct.size() <= static_cast<std::size_t>(n_bins)) {
            // exact: one bin per distinct value
            for (std::size_t i = 0; i + 1 < distinct.size(); ++i) {
                edges.push_back(0.5 * (distinct[i].first + distinct[i + 1].first));
            }
        } else {
            // greedy quantile packing over distinct values
            const double per_bin = static_cast<double>(rows) / n_bins;
            double filled = 0.0;
            int closed = 0;
            for (std::size_t i = 0; i + 1 < distinct.size() && closed < n_bins - 1; ++i) {
                filled += static_cast<double>(distinct[i].second);
                if (filled >= per_bin * (closed + 1)) {
                    edges.push_back(0.5 * (distinct[i].first + distinct[i + 1].first));
                    ++closed;
                }
            }
        }

        std::uint8_t* col = fb.binned.data() + f * rows;
        for (std::size_t r = 0; r < rows; ++r) {
            const double v = x[r * features + f];
            const auto it = std::lower_bound(edges.begin(), edges.end(), v);
            col[r] = static_cast<std::uint8_t>(it - edges.begin());
        }
    }
    return fb;
}

namespace {

struct BinStats {
    double sum = 0.0;
    int count = 0;
};

// Residual histogram of one node over the candidate features.
struct NodeHist {
    std::vector<BinStats> bins;  // concatenated per candidate feature
    std::vector<int> offsets;    // per candidate feature into bins
    double sum = 0.0;
    int count = 0;
};

void scan_histogram(const FeatureBins& fb, const std::vector<std::size_t>& rows,
                    const double* residuals, const std::vector<std::size_t>& features,
                    NodeHist& hist) {
    hist.offsets.assign(features.size() + 1, 0);
    for (std::size_t i = 0; i < features.size(); ++i) {
        hist.offsets[i + 1] = hist.offsets[i] + fb.bin_count(features[i]);
    }
    hist.bins.assign(static_cast<std::size_t>(hist.offsets.back()), BinStats{});
    hist.sum = 0.0;
    hist.count = static_cast<int>(rows.size());
    for (std::size_t i = 0; i < features.size(); ++i) {
        const std::uint8_t* col = fb.column(features[i]);
        BinStats* base = hist.bins.data() + hist.offsets[i];
        for (const std::size_t r : rows) {
            BinStats& b = base[col[r]];
            b.sum += residuals[r];
            ++b.count;
        }
    }
    for (const std::size_t r : rows) hist.sum += residuals[r];
}

void subtract_histogram(const NodeHist& parent, const NodeHist& child, NodeHist& out) {
    out.offsets = parent.offsets;
    out.bins.resize(parent.bins.size());
    for (std::size_t i = 0; i < parent.bins.size(); ++i) {
        out.bins[i].sum = parent.bins[i].sum - child.bins[i].sum;
        out.bins[i].count = parent.bins[i].count - child.bins[i].count;
    }
    out.sum = parent.sum - child.sum;
    out.count = parent.count - child.count;
}

SplitCandidate best_split_of_hist(const FeatureBins& fb, const NodeHist& hist,
                                  const std::vector<std::size_t>& features, int min_child_samples) {
    SplitCandidate best;
    if (hist.count < 2 * min_child_samples) return best;
    const double parent_mean = hist.sum / hist.count;
    // floating-point guard so a constant-residual node never splits
    const double min_gain = 1e-14 * std::max(1.0, parent_mean * parent_mean);
    const double parent_term = hist.sum * parent_mean;

    for (std::size_t i = 0; i < features.size(); ++i) {
        const std::size_t f = features[i];
        const int nb = fb.bin_count(f);
        if (nb < 2) continue;  // constant feature, unsplittable
        const BinStats* base = hist.bins.data() + hist.offsets[i];
        double left_sum = 0.0;
        int left_count = 0;
        for (int b = 0; b + 1 < nb; ++b) {
            left_sum += base[b].sum;
            left_count += base[b].count;
            const int right_count = hist.count - left_count;
            if (left_count < min_child_samples) continue;
            if (right_count < min_child_samples) break;
            const double right_sum = hist.sum - left_sum;
            const double gain = left_sum * left_sum / left_count +
                                right_sum * right_sum / right_count - parent_term;
            if (gain > min_gain && gain > best.gain) {
                best.found = true;
                best.feature = static_cast<int>(f);
                best.bin = b;
                best.threshold = fb.edges[f][static_cast<std::size_t>(b)];
                best.gain = gain;
            }
        }
    }
    return best;
}

}  // namespace

SplitCandidate find_best_split(const FeatureBins& bins, const std::vector<std::size_t>& node_rows,
                               const double* residuals, const std::vector<std::size_t>& features,
                               int min_child_samples) {
    NodeHist hist;
    scan_histogram(bins, node_rows, residuals, features, hist);
    return best_split_of_hist(bins, hist, features, min_child_samples);
}

int RegressionTree::leaf_count() const {
    int leaves = 0;
    for (const auto& n : nodes) {
        if (n.is_leaf()) ++leaves;
    }
    return leaves;
}

int RegressionTree::depth() const {
    // iterative depth over the explicit child links
    int max_depth = 0;
    std::vector<std::pair<int, int>> stack{{0, 0}};
    while (!stack.empty()) {
        auto [i, d] = stack.back();
        stack.pop_back();
        const auto& n = nodes[static_cast<std::size_t>(i)];
        if (n.is_leaf()) {
            max_depth = std::max(max_depth, d);
        } else {
            stack.push_back({n.left, d + 1});
            stack.push_back({n.right, d + 1});
        }
    }
    return max_depth;
}

RegressionTree grow_tree(const FeatureBins& bins, const std::vector<std::size_t>& rows,
                         const double* residuals, const std::vector<std::size_t>& features,
                         const Hyperparams& hp) {
    RegressionTree tree;

    struct Frontier {
        int node = 0;
        int depth = 0;
        long seq = 0;  // creation order, breaks gain ties deterministically
        std::vector<std::size_t> rows;
        NodeHist hist;
        SplitCandidate split;
    };
    struct FrontierOrder {
        bool operator()(const Frontier* a, const Frontier* b) const {
            if (a->split.gain != b->split.gain) return a->split.gain < b->split.gain;
            return a->seq > b->seq;
        }
    };

    auto make_leaf_value = [&](const NodeHist& h) { return h.count > 0 ? h.sum / h.count : 0.0; };

    std::vector<std::unique_ptr<Frontier>> arena;
    long seq = 0;

    auto make_frontier = [&](std::vector<std::size_t>&& node_rows, int node, int depth) {
        auto f = std::make_unique<Frontier>();
        f->node = node;
        f->depth = depth;
        f->seq = seq++;
        f->rows = std::move(node_rows);
        return f;
    };

    tree.nodes.push_back(TreeNode{});
    auto root = make_frontier(std::vector<std::size_t>(rows), 0, 0);
    scan_histogram(bins, root->rows, residuals, features, root->hist);
    tree.nodes[0].value = make_leaf_value(root->hist);
    tree.nodes[0].count = root->hist.count;
    if (root->depth < hp.max_depth) {
        root->split = best_split_of_hist(bins, root->hist, features, hp.min_child_samples);
    }

    std::priority_queue<Frontier*, std::vector<Frontier*>, FrontierOrder> queue;
    if (root->split.found) queue.push(root.get());
    arena.push_back(std::move(root));

    int leaves = 1;
    while (leaves < hp.num_leaves && !queue.empty()) {
        Frontier* node = queue.top();
        queue.pop();

        const auto& split = node->split;
        const std::uint8_t* col = bins.column(static_cast<std::size_t>(split.feature));
        std::vector<std::size_t> left_rows;
        std::vector<std::size_t> right_rows;
        left_rows.reserve(node->rows.size());
        right_rows.reserve(node->rows.size());
        for (const std::size_t r : node->rows) {
            (col[r] <= split.bin ? left_rows : right_rows).push_back(r);
        }

        const int left_idx = static_cast<int>(tree.nodes.size());
        const int right_idx = left_idx + 1;
        auto& parent_node = tree.nodes[static_cast<std::size_t>(node->node)];
        parent_node.feature = split.feature;
        parent_node.threshold = split.threshold;
        parent_node.left = left_idx;
        parent_node.right = right_idx;
        tree.nodes.push_back(TreeNode{});
        tree.nodes.push_back(TreeNode{});
        ++leaves;

        auto left = make_frontier(std::move(left_rows), left_idx, node->depth + 1);
        auto right = make_frontier(std::move(right_rows), right_idx, node->depth + 1);

        // scan the smaller child, derive the larger by subtraction
        if (left->rows.size() <= right->rows.size()) {
            scan_histogram(bins, left->rows, residuals, features, left->hist);
            subtract_histogram(node->hist, left->hist, right->hist);
        } else {
            scan_histogram(bins, right->rows, residuals, features, right->hist);
            subtract_histogram(node->hist, right->hist, left->hist);
        }
        node->hist = NodeHist{};  // release parent histogram storage
        node->rows.clear();
        node->rows.shrink_to_fit();

        for (auto* child : {left.get(), right.get()}) {
            auto& tn = tree.nodes[static_cast<std::size_t>(child->node)];
            tn.value = make_leaf_value(child->hist);
            tn.count = child->hist.count;
            if (leaves < hp.num_leaves && child->depth < hp.max_depth) {
                child->split = best_split_of_hist(bins, child->hist, features, hp.min_child_samples);
                if (child->split.found) queue.push(child);
            }
        }
        arena.push_back(std::move(left));
        arena.push_back(std::move(right));
    }
    return tree;
}

Model fit(const double* x_train, const double* y_train, std::size_t n_train,
          const double* x_val, const double* y_val, std::size_t n_val,
          std::size_t features, const Hyperparams& hp, std::uint64_t schema_hash) {
    hp.validate();
    if (n_train == 0 || features == 0) throw DataError("gbm::fit: empty training set");
    for (std::size_t r = 0; r < n_train; ++r) {
        if (!std::isfinite(y_train[r])) {
            throw DataError("gbm::fit: non-finite target at row " + std::to_string(r));
        }
        for (std::size_t f = 0; f < features; ++f) {
            if (!std::isfinite(x_train[r * features + f])) {
                throw DataError("gbm::fit: non-finite feature at row " + std::to_string(r) +
                                ", column " + std::to_string(f));
            }
        }
    }

    Model model;
    model.hp = hp;
    model.schema_hash = schema_hash;

    double mean = 0.0;
    for (std::size_t r = 0; r < n_train; ++r) mean += y_train[r];
    mean /= static_cast<double>(n_train);
    model.init_value = mean;

    const FeatureBins bins = build_histograms(x_train, n_train, features, hp.n_bins);

    std::vector<double> pred_train(n_train, mean);
    std::vector<double> pred_val(n_val, mean);
    std::vector<double> residual(n_train);

    Rng rng(hp.seed);
    const auto n_rows_stage =
        std::max<std::size_t>(1, static_cast<std::size_t>(hp.subsample * static_cast<double>(n_train)));
    const auto n_cols_stage =
        std::max<std::size_t>(1, static_cast<std::size_t>(hp.colsample * static_cast<double>(features)));

    double best_val = std::numeric_limits<double>::infinity();
    int best_stage = 0;

    for (int stage = 0; stage < hp.n_estimators; ++stage) {
        for (std::size_t r = 0; r < n_train; ++r) residual[r] = y_train[r] - pred_train[r];

        const std::vector<std::size_t> rows =
            n_rows_stage == n_train ? [&] {
                std::vector<std::size_t> all(n_train);
                for (std::size_t r = 0; r < n_train; ++r) all[r] = r;
                return all;
            }() : rng.sample_indices(n_train, n_rows_stage);
        const std::vector<std::size_t> cols =
            n_cols_stage == features ? [&] {
                std::vector<std::size_t> all(features);
                for (std::size_t f = 0; f < features; ++f) all[f] = f;
                return all;
            }() : rng.sample_indices(features, n_cols_stage);

        RegressionTree tree = grow_tree(bins, rows, residual.data(), cols, hp);

        for (std::size_t r = 0; r < n_train; ++r) {
            pred_train[r] += hp.learning_rate * tree.predict_row(x_train + r * features);
        }
        for (std::size_t r = 0; r < n_val; ++r) {
            pred_val[r] += hp.learning_rate * tree.predict_row(x_val + r * features);
        }
        model.trees.push_back(std::move(tree));

        double mse = 0.0;
        for (std::size_t r = 0; r < n_train; ++r) {
            const double e = y_train[r] - pred_train[r];
            mse += e * e;
        }
        model.train_mse.push_back(mse / static_cast<double>(n_train));

        if (n_val > 0) {
            double vmse = 0.0;
            for (std::size_t r = 0; r < n_val; ++r) {
                const double e = y_val[r] - pred_val[r];
                vmse += e * e;
            }
            vmse /= static_cast<double>(n_val);
            model.val_mse.push_back(vmse);
            if (vmse < best_val) {
                best_val = vmse;
                best_stage = stage + 1;
            } else if (stage + 1 - best_stage >= hp.early_stopping_rounds) {
                break;
            }
        } else {
            best_stage = stage + 1;
        }
    }

    model.best_stage = best_stage;
    model.trees.resize(static_cast<std::size_t>(best_stage));  // keep the best stage
    return model;
}

std::vector<double> predict(const Model& model, const double* x, std::size_t rows,
                            std::size_t features, std::uint64_t schema_hash) {
    if (schema_hash != 0 && model.schema_hash != 0 && schema_hash != model.schema_hash) {
        throw ContractError("gbm::predict: feature schema hash mismatch");
    }
    std::vector<double> out(rows, model.init_value);
    for (std::size_t r = 0; r < rows; ++r) {
        const double* xr = x + r * features;
        double acc = model.init_value;
        for (const auto& tree : model.trees) {
            acc += model.hp.learning_rate * tree.predict_row(xr);
        }
        out[r] = acc;
    }
    return out;
}

void save(const Model& model, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw EnvironmentError("cannot open for writing: " + path);
    out << "mgs-gbm 1\n";
    out << "schema_hash " << format_hex64(model.schema_hash) << '\n';
    out << "config_hash " << format_hex64(model.config_hash) << '\n';
    out << "target " << (model.target_name.empty() ? "-" : model.target_name) << '\n';
    out << "learning_rate " << format_double(model.hp.learning_rate) << '\n';
    out << "n_estimators " << model.hp.n_estimators << '\n';
    out << "max_depth " << model.hp.max_depth << '\n';
    out << "num_leaves " << model.hp.num_leaves << '\n';
    out << "min_child_samples " << model.hp.min_child_samples << '\n';
    out << "subsample " << format_double(model.hp.subsample) << '\n';
    out << "colsample " << format_double(model.hp.colsample) << '\n';
    out << "n_bins " << model.hp.n_bins << '\n';
    out << "seed " << model.hp.seed << '\n';
    out << "early_stopping_rounds " << model.hp.early_stopping_rounds << '\n';
    out << "init_value " << format_double(model.init_value) << '\n';
    out << "best_stage " << model.best_stage << '\n';
    out << "n_trees " << model.trees.size() << '\n';
    for (std::size_t t = 0; t < model.trees.size(); ++t) {
        const auto& tree = model.trees[t];
        out << "tree " << t << ' ' << tree.nodes.size() << '\n';
        for (const auto& n : tree.nodes) {
            if (n.is_leaf()) {
                out << "L " << format_double(n.value) << ' ' << n.count << '\n';
            } else {
                out << "S " << n.feature << ' ' << format_double(n.threshold) << ' ' << n.left
                    << ' ' << n.right << '\n';
            }
        }
    }
    out << "end\n";
    if (!out) throw EnvironmentError("write failed: " + path);
}

namespace {

std::vector<std::string> split_ws(const std::string& line) {
    std::vector<std::string> out;
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && line[i] == ' ') ++i;
        std::size_t j = i;
        while (j < line.size() && line[j] != ' ') ++j;
        if (j > i) out.push_back(line.substr(i, j - i));
        i = j;
    }
    return out;
}

}  // namespace

Model load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw EnvironmentError("cannot open for reading: " + path);
    std::string line;
    auto next = [&]() -> std::vector<std::string> {
        if (!std::getline(in, line)) throw FormatError(path + ": truncated model file");
        if (!line.empty() && line.back() == '\r') line.pop_back();
        return split_ws(line);
    };

    auto header = next();
    if (header.size() != 2 || header[0] != "mgs-gbm" || header[1] != "1") {
        throw FormatError(path + ": not a gbm model file");
    }
    Model model;
    std::size_t n_trees = 0;
    while (true) {
        auto tok = next();
        if (tok.empty()) continue;
        const std::string& key = tok[0];
        if (key == "schema_hash") model.schema_hash = parse_hex64(tok.at(1));
        else if (key == "config_hash") model.config_hash = parse_hex64(tok.at(1));
        else if (key == "target") model.target_name = tok.at(1) == "-" ? "" : tok.at(1);
        else if (key == "learning_rate") model.hp.learning_rate = parse_double(tok.at(1));
        else if (key == "n_estimators") model.hp.n_estimators = std::stoi(tok.at(1));
        else if (key == "max_depth") model.hp.max_depth = std::stoi(tok.at(1));
        else if (key == "num_leaves") model.hp.num_leaves = std::stoi(tok.at(1));
        else if (key == "min_child_samples") model.hp.min_child_samples = std::stoi(tok.at(1));
        else if (key == "subsample") model.hp.subsample = parse_double(tok.at(1));
        else if (key == "colsample") model.hp.colsample = parse_double(tok.at(1));
        else if (key == "n_bins") model.hp.n_bins = std::stoi(tok.at(1));
        else if (key == "seed") model.hp.seed = std::stoull(tok.at(1));
        else if (key == "early_stopping_rounds") model.hp.early_stopping_rounds = std::stoi(tok.at(1));
        else if (key == "init_value") model.init_value = parse_double(tok.at(1));
        else if (key == "best_stage") model.best_stage = std::stoi(tok.at(1));
        else if (key == "n_trees") { n_trees = std::stoull(tok.at(1)); break; }
        else throw FormatError(path + ": unknown key: " + key);
    }
    model.trees.reserve(n_trees);
    for (std::size_t t = 0; t < n_trees; ++t) {
        auto tok = next();
        if (tok.size() != 3 || tok[0] != "tree" || std::stoull(tok[1]) != t) {
            throw FormatError(path + ": malformed tree header");
        }
        const std::size_t n_nodes = std::stoull(tok[2]);
        RegressionTree tree;
        tree.nodes.reserve(n_nodes);
        for (std::size_t i = 0; i < n_nodes; ++i) {
            auto nt = next();
            TreeNode node;
            if (nt.at(0) == "L") {
                node.value = parse_double(nt.at(1));
                node.count = std::stoi(nt.at(2));
            } else if (nt.at(0) == "S") {
                node.feature = std::stoi(nt.at(1));
                node.threshold = parse_double(nt.at(2));
                node.left = std::stoi(nt.at(3));
                node.right = std::stoi(nt.at(4));
            } else {
                throw FormatError(path + ": malformed node line");
            }
            tree.nodes.push_back(node);
        }
        model.trees.push_back(std::move(tree));
    }
    auto tail = next();
    if (tail.empty() || tail[0] != "end") throw FormatError(path + ": missing end marker");
    return model;
}

}  // namespace gbm
}  // namespace mgs
