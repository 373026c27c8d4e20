#pragma once

// From-scratch gradient-boosted regression trees under squared loss:
// quantile histogram binning, leaf-wise (best-first) growth with
// variance-reduction gain, constant shrinkage, row/column subsampling, and
// validation early stopping. Gradients equal residuals and leaf values are
// residual means; regularization is purely structural (leaf count, depth,
// leaf support).

#include <cstdint>
#include <string>
#include <vector>

#include "mgs/common.hpp"

namespace mgs {
namespace gbm {

struct Hyperparams {
    double learning_rate = 0.05;
    int n_estimators = 300;
    int max_depth = 6;
    int num_leaves = 31;
    int min_child_samples = 20;
    double subsample = 0.8;
    double colsample = 0.8;
    int n_bins = 255;
    std::uint64_t seed = 42;
    int early_stopping_rounds = 25;

    void validate() const;  // throws ValidationError
};

// Quantile bin edges per feature plus the binned copy of the matrix
// (feature-major). A constant feature has no edges and is unsplittable.
struct FeatureBins {
    std::size_t rows = 0;
    std::vector<std::vector<double>> edges;   // per feature, ascending upper bounds
    std::vector<std::uint8_t> binned;         // feature-major rows entries each

    int bin_count(std::size_t feature) const {
        return static_cast<int>(edges[feature].size()) + 1;
    }
    const std::uint8_t* column(std::size_t feature) const {
        return binned.data() + feature * rows;
    }
};

FeatureBins build_histograms(const double* x, std::size_t rows, std::size_t features, int n_bins);

struct SplitCandidate {
    bool found = false;
    int feature = -1;
    int bin = -1;          // rightmost bin of the left child
    double threshold = 0;  // raw-value threshold (bin upper edge)
    double gain = 0.0;     // SSE(parent) - SSE(left) - SSE(right)
};

// Best positive-gain split over histogram boundaries; ties break toward
// the lowest feature index, then the lowest threshold.
SplitCandidate find_best_split(const FeatureBins& bins, const std::vector<std::size_t>& node_rows,
                               const double* residuals, const std::vector<std::size_t>& features,
                               int min_child_samples);

struct TreeNode {
    int feature = -1;      // -1 marks a leaf
    double threshold = 0;  // go left when x[feature] <= threshold
    int left = -1;
    int right = -1;
    double value = 0.0;    // leaf prediction (mean residual)
    int count = 0;

    bool is_leaf() const { return feature < 0; }
};

struct RegressionTree {
    std::vector<TreeNode> nodes;  // nodes[0] is the root

    double predict_row(const double* x) const {
        int i = 0;
        while (!nodes[static_cast<std::size_t>(i)].is_leaf()) {
            const auto& n = nodes[static_cast<std::size_t>(i)];
            i = x[n.feature] <= n.threshold ? n.left : n.right;
        }
        return nodes[static_cast<std::size_t>(i)].value;
    }
    int leaf_count() const;
    int depth() const;
};

RegressionTree grow_tree(const FeatureBins& bins, const std::vector<std::size_t>& rows,
                         const double* residuals, const std::vector<std::size_t>& features,
                         const Hyperparams& hp);

struct Model {
    double init_value = 0.0;  // training-target mean
    std::vector<RegressionTree> trees;
    Hyperparams hp;
    std::uint64_t schema_hash = 0;
    std::uint64_t config_hash = 0;
    std::string target_name;
    std::vector<double> train_mse;  // per stage
    std::vector<double> val_mse;    // per stage (empty without validation)
    int best_stage = 0;             // trees kept after early stopping
};

// Stage-wise fit on residuals. An empty validation set disables early
// stopping. Throws DataError naming the row/column of any non-finite input.
Model fit(const double* x_train, const double* y_train, std::size_t n_train,
          const double* x_val, const double* y_val, std::size_t n_val,
          std::size_t features, const Hyperparams& hp, std::uint64_t schema_hash = 0);

// init + learning_rate * sum of tree outputs, accumulated in stage order.
// Throws ContractError when the feature count or schema hash mismatches.
std::vector<double> predict(const Model& model, const double* x, std::size_t rows,
                            std::size_t features, std::uint64_t schema_hash = 0);

void save(const Model& model, const std::string& path);
Model load(const std::string& path);

}  // namespace gbm
}  // namespace mgs
