#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace mgs {

inline constexpr double kPi = 3.141592653589793238462643383279502884;

// Error taxonomy shared across modules. The CLI maps these onto exit codes.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct ValidationError : Error { using Error::Error; };   // bad parameter values
struct TopologyError : Error { using Error::Error; };     // disconnected network
struct SolverError : Error { using Error::Error; };       // singular/diverging solve
struct FormatError : Error { using Error::Error; };       // file does not match schema
struct ContractError : Error { using Error::Error; };     // schema/shape mismatch between artifacts
struct DataError : Error { using Error::Error; };         // non-finite training data
struct ConfigError : Error { using Error::Error; };       // invalid run configuration
struct TrainingError : Error { using Error::Error; };     // divergence during training
struct DependencyError : Error { using Error::Error; };   // required artifact missing
struct EnvironmentError : Error { using Error::Error; };  // unusable paths / IO failure

// FNV-1a, used for config and feature-schema hashes.
inline std::uint64_t fnv1a(std::string_view s, std::uint64_t h = 0xcbf29ce484222325ull) {
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

inline std::uint64_t hash_mix(std::uint64_t a, std::uint64_t b) {
    // splitmix64 finalizer over the xor; enough for derived seeds
    std::uint64_t z = a ^ (b + 0x9e3779b97f4a7c15ull + (a << 6) + (a >> 2));
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

// Deterministic RNG. Uses an explicit xoshiro-free core (splitmix64 stream) and
// hand-rolled distributions so the stream does not depend on the standard
// library implementation.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    // uniform in [0, 1)
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // uniform integer in [0, n)
    std::size_t uniform_index(std::size_t n) {
        // modulo bias is irrelevant at 64 bits for any practical n
        return static_cast<std::size_t>(next_u64() % n);
    }

    // standard normal via Box-Muller (pair cached)
    double gaussian() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = 0.0;
        do {
            u1 = uniform();
        } while (u1 <= 0.0);
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        spare_ = r * std::sin(2.0 * kPi * u2);
        has_spare_ = true;
        return r * std::cos(2.0 * kPi * u2);
    }

    // k distinct indices from [0, n), returned sorted ascending
    std::vector<std::size_t> sample_indices(std::size_t n, std::size_t k);

    // in-place Fisher-Yates
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = uniform_index(i);
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    std::uint64_t state_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

// Shortest round-trip decimal formatting; parse is its exact inverse.
std::string format_double(double v);
double parse_double(std::string_view text);           // throws FormatError
bool try_parse_double(std::string_view text, double& out);

std::string format_hex64(std::uint64_t v);
std::uint64_t parse_hex64(std::string_view text);     // throws FormatError

}  // namespace mgs
