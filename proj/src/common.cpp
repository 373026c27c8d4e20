#include "mgs/common.hpp"

#include <algorithm>
#include <array>
#include <numeric>

namespace mgs {

std::vector<std::size_t> Rng::sample_indices(std::size_t n, std::size_t k) {
    if (k > n) k = n;
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    for (std::size_t i = 0; i < k; ++i) {
        std::size_t j = i + uniform_index(n - i);
        std::swap(idx[i], idx[j]);
    }
    idx.resize(k);
    std::sort(idx.begin(), idx.end());
    return idx;
}

std::string format_double(double v) {
    std::array<char, 40> buf{};
    auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    return std::string(buf.data(), res.ptr);
}

bool try_parse_double(std::string_view text, double& out) {
    const char* first = text.data();
    const char* last = text.data() + text.size();
    auto res = std::from_chars(first, last, out);
    return res.ec == std::errc{} && res.ptr == last;
}

double parse_double(std::string_view text) {
    double v = 0.0;
    if (!try_parse_double(text, v)) {
        throw FormatError("not a number: '" + std::string(text) + "'");
    }
    return v;
}

std::string format_hex64(std::uint64_t v) {
    static const char* digits = "0123456789abcdef";
    std::string s(16, '0');
    for (int i = 15; i >= 0; --i) {
        s[static_cast<std::size_t>(i)] = digits[v & 0xf];
        v >>= 4;
    }
    return s;
}

std::uint64_t parse_hex64(std::string_view text) {
    std::uint64_t v = 0;
    auto res = std::from_chars(text.data(), text.data() + text.size(), v, 16);
    if (res.ec != std::errc{} || res.ptr != text.data() + text.size()) {
        throw FormatError("not a hex64: '" + std::string(text) + "'");
    }
    return v;
}

}  // namespace mgs
