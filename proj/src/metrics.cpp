#include "mgs/metrics.hpp"

#include <cmath>
#include <fstream>

namespace mgs {

namespace {

void check_lengths(std::span<const double> y, std::span<const double> y_hat) {
    if (y.empty() || y.size() != y_hat.size()) {
        throw ValidationError("metrics: inputs must be equal-length and non-empty");
    }
}

}  // namespace

double rmse(std::span<const double> y, std::span<const double> y_hat) {
    check_lengths(y, y_hat);
    double ss = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        const double e = y[i] - y_hat[i];
        ss += e * e;
    }
    return std::sqrt(ss / static_cast<double>(y.size()));
}

double mae(std::span<const double> y, std::span<const double> y_hat) {
    check_lengths(y, y_hat);
    double s = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) s += std::abs(y[i] - y_hat[i]);
    return s / static_cast<double>(y.size());
}

R2 r2(std::span<const double> y, std::span<const double> y_hat) {
    check_lengths(y, y_hat);
    double mean = 0.0;
    for (const double v : y) mean += v;
    mean /= static_cast<double>(y.size());
    double ss_tot = 0.0;
    double ss_res = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        ss_tot += (y[i] - mean) * (y[i] - mean);
        ss_res += (y[i] - y_hat[i]) * (y[i] - y_hat[i]);
    }
    if (ss_tot <= 0.0) {
        return R2{0.0, false};  // undefined, reported rather than thrown
    }
    return R2{1.0 - ss_res / ss_tot, true};
}

const MetricsRecord* MetricsReport::find(const std::string& partition, const std::string& model,
                                         const std::string& target) const {
    for (const auto& r : records) {
        if (r.partition == partition && r.model == model && r.target == target) return &r;
    }
    return nullptr;
}

void write_report(const MetricsReport& report, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw EnvironmentError("cannot open for writing: " + path);
    out << "mgs-report 1\n";
    out << "config_hash " << format_hex64(report.config_hash) << '\n';
    out << "# partition model target samples rmse mae r2 r2_defined\n";
    for (const auto& r : report.records) {
        out << r.partition << ' ' << r.model << ' ' << r.target << ' ' << r.samples << ' '
            << format_double(r.rmse) << ' ' << format_double(r.mae) << ' '
            << (r.r2_defined ? format_double(r.r2) : std::string("undefined")) << ' '
            << (r.r2_defined ? 1 : 0) << '\n';
    }
    if (!out) throw EnvironmentError("write failed: " + path);
}

MetricsReport read_report(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw EnvironmentError("cannot open for reading: " + path);
    std::string line;
    if (!std::getline(in, line) || line != "mgs-report 1") {
        throw FormatError(path + ": not a metrics report");
    }
    MetricsReport report;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
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
            report.config_hash = parse_hex64(tok[1]);
            continue;
        }
        if (tok.size() != 8) throw FormatError(path + ": malformed record: " + line);
        MetricsRecord r;
        r.partition = tok[0];
        r.model = tok[1];
        r.target = tok[2];
        r.samples = std::stoull(tok[3]);
        r.rmse = parse_double(tok[4]);
        r.mae = parse_double(tok[5]);
        r.r2_defined = tok[7] == "1";
        r.r2 = r.r2_defined ? parse_double(tok[6]) : 0.0;
        report.records.push_back(std::move(r));
    }
    return report;
}

}  // namespace mgs
