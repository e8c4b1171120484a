#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace locans {

// Error taxonomy shared by every module. All of them carry a plain message;
// callers discriminate by type.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct ArgumentError : Error {
    using Error::Error;
};
struct ValidationError : Error {
    using Error::Error;
};
struct ParseError : Error {
    using Error::Error;
};
struct ConfigError : Error {
    using Error::Error;
};
struct IoError : Error {
    using Error::Error;
};
struct UnsupportedError : Error {
    using Error::Error;
};

uint64_t fnv1a64(std::string_view s);
uint64_t splitmix64(uint64_t x);
uint64_t mix_seed(uint64_t a, uint64_t b);

// Deterministic RNG wrapper. mt19937_64 has a fully specified sequence, and
// all value transforms below are hand-rolled so no implementation-defined
// std distribution sneaks in.
class Rng {
public:
    explicit Rng(uint64_t seed) : gen_(seed) {}

    uint64_t bits() { return gen_(); }

    // uniform in [0, 1)
    double unit() { return static_cast<double>(bits() >> 11) * 0x1.0p-53; }

    double range(double lo, double hi) { return lo + (hi - lo) * unit(); }

    // uniform in [0, n), rejection-sampled so the result is unbiased
    uint64_t below(uint64_t n);

    int below_int(int n) { return static_cast<int>(below(static_cast<uint64_t>(n))); }

    // standard normal via Box–Muller (two fresh uniforms per call)
    double gauss();

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (size_t i = v.size(); i > 1; --i) {
            size_t j = below(i);
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    std::mt19937_64 gen_;
};

// Distinct draw of k values from [0, n), in draw order.
std::vector<int> sample_distinct(Rng& rng, int n, int k);

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view content);

std::vector<std::string> tokenize_words(std::string_view text);

std::string hex64(uint64_t v);

}  // namespace locans
