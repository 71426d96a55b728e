#pragma once

#include <cstdint>
#include <cstddef>
#include <vector>

namespace shiftnorm {

// Counter-based pseudo random generator: the i-th output is a strong 64-bit
// mix of (seed, i), so streams are reproducible across platforms and carry no
// hidden global state. Substreams for parallel work are derived with
// Rng::derive rather than by sharing a generator.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : seed_(seed) {}

    std::uint64_t next_u64() {
        std::uint64_t z = seed_ + (++counter_) * 0x9E3779B97F4A7C15ULL;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    // Uniform in [0,1), 53-bit resolution.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Uniform in (0,1], safe as a log argument.
    double uniform_pos() { return 1.0 - uniform(); }

    // Standard normal via Box-Muller; the second deviate of each pair is cached.
    double normal();

    // Gamma(shape, scale) via Marsaglia-Tsang squeeze, shape boosted when < 1.
    double gamma(double shape, double scale);

    // Chi-square with df degrees of freedom, df > 0 (not necessarily integer).
    double chi_square(double df) { return gamma(0.5 * df, 2.0); }

    // Unbiased integer in [0, bound), bound >= 1.
    std::uint64_t uniform_int(std::uint64_t bound);

    // In-place Fisher-Yates shuffle of an index permutation.
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(uniform_int(i));
            std::swap(v[i - 1], v[j]);
        }
    }

    // Decorrelated seed for a named substream of a master seed.
    static std::uint64_t derive(std::uint64_t seed, std::uint64_t stream);

private:
    std::uint64_t seed_;
    std::uint64_t counter_ = 0;
    bool has_cached_normal_ = false;
    double cached_normal_ = 0.0;
};

} // namespace shiftnorm
