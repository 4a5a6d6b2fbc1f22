#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string_view>
#include <utility>

namespace dkfair {

// The engine is bit-exact across standard libraries; the std distributions are
// not, so draws are derived here to keep outputs identical between toolchains.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next() { return engine_(); }

    /// Uniform in [0, 1) with 53 bits of resolution.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    /// Uniform integer in [0, bound). bound must be nonzero.
    std::uint64_t below(std::uint64_t bound);

    /// Standard normal via the Marsaglia polar method.
    double normal();

    bool bernoulli(double p) { return uniform() < p; }

    template <typename T>
    void shuffle(std::span<T> values) {
        for (std::size_t i = values.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(below(i));
            std::swap(values[i - 1], values[j]);
        }
    }

private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

/// Derives a sub-seed from the top-level seed and a purpose tag (FNV-1a over the
/// tag, mixed with the seed through splitmix64).
std::uint64_t derive_seed(std::uint64_t seed, std::string_view purpose);

}  // namespace dkfair
