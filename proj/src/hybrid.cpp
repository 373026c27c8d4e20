#include "mgs/hybrid.hpp"

#include <algorithm>
#include <fstream>

namespace mgs {

double fit_hybrid_alpha(std::span<const double> cnn_pred, std::span<const double> gbm_pred,
                        std::span<const double> y_val) {
    if (cnn_pred.size() != gbm_pred.size() || cnn_pred.size() != y_val.size() || y_val.empty()) {
        throw ValidationError("fit_hybrid: prediction vectors must align");
    }
    // minimize || alpha*c + (1-alpha)*g - y ||^2 over alpha
    double num = 0.0;
    double den = 0.0;
    for (std::size_t i = 0; i < y_val.size(); ++i) {
        const double d = gbm_pred[i] - cnn_pred[i];
        num += (gbm_pred[i] - y_val[i]) * d;
        den += d * d;
    }
    if (den == 0.0) return 0.5;  // identical predictors
    return std::clamp(num / den, 0.0, 1.0);
}

std::vector<double> hybrid_combine(double alpha, std::span<const double> cnn_pred,
                                   std::span<const double> gbm_pred) {
    if (cnn_pred.size() != gbm_pred.size()) {
        throw ValidationError("hybrid_combine: prediction vectors must align");
    }
    std::vector<double> out(cnn_pred.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = alpha * cnn_pred[i] + (1.0 - alpha) * gbm_pred[i];
    }
    return out;
}

void save_hybrid(const HybridModel& model, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw EnvironmentError("cannot open for writing: " + path);
    out << "mgs-hybrid 1\n";
    out << "config_hash " << format_hex64(model.config_hash) << '\n';
    for (int t = 0; t < kNumTargets; ++t) {
        out << "alpha " << target_names()[static_cast<std::size_t>(t)] << ' '
            << format_double(model.alpha[static_cast<std::size_t>(t)]) << '\n';
    }
    if (!out) throw EnvironmentError("write failed: " + path);
}

HybridModel load_hybrid(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw EnvironmentError("cannot open for reading: " + path);
    std::string line;
    if (!std::getline(in, line) || line != "mgs-hybrid 1") {
        throw FormatError(path + ": not a hybrid model file");
    }
    HybridModel model;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string> tok;
        std::size_t i = 0;
        while (i < line.size()) {
            while (i < line.size() && line[i] == ' ') ++i;
            std::size_t j = i;
            while (j < line.size() && line[j] != ' ') ++j;
            if (j > i) tok.push_back(line.substr(i, j - i));
            i = j;
        }
        if (tok.size() == 2 && tok[0] == "config_hash") {
            model.config_hash = parse_hex64(tok[1]);
        } else if (tok.size() == 3 && tok[0] == "alpha") {
            model.alpha[static_cast<std::size_t>(target_index(tok[1]))] = parse_double(tok[2]);
        } else {
            throw FormatError(path + ": malformed line: " + line);
        }
    }
    return model;
}

}  // namespace mgs
