#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "shiftnorm/matrix.hpp"

namespace shiftnorm {

// Per-feature first and second order statistics with the sample count they
// summarize. Values are immutable once constructed; all operations below
// return new values.
struct FeatureStats {
    std::vector<double> mean;
    std::vector<double> variance;
    double count = 0.0;

    std::size_t dim() const { return mean.size(); }
    bool empty() const { return count == 0.0; }

    static FeatureStats make(std::vector<double> mean, std::vector<double> variance, double count);

    std::string to_json() const;
    static FeatureStats from_json(const std::string& text);
};

// Mixing weights for the prior-weighted combination of source and target
// statistics: source weight N/(N+n), target weight n/(N+n).
struct CombineConfig {
    double pseudo_count_N = 0.0;
    std::size_t target_count_n = 1;

    double source_weight() const {
        return pseudo_count_N / (pseudo_count_N + static_cast<double>(target_count_n));
    }
    // Defined as the exact complement so the two weights sum to 1 exactly.
    double target_weight() const { return 1.0 - source_weight(); }
};

// Per-feature mean and biased (1/n) variance of a batch; count = batch rows.
// Column sums run over sorted copies so the result is invariant under sample
// permutation bit for bit.
FeatureStats estimate_stats(const Matrix& batch);

// Convex combination of source and target statistics with pseudo sample size
// N and target sample size n. N = +inf returns the source stats exactly.
FeatureStats combine_stats(const FeatureStats& source, const FeatureStats& target,
                           const CombineConfig& cfg);

// Exponential moving average update, elementwise on mean and variance.
// The accumulated count is capped at the effective window length 2/(1-decay).
FeatureStats ema_update(const FeatureStats& running, const FeatureStats& batch_stats,
                        double decay);

// Exact pooling of two disjoint-sample summaries; equals estimate_stats on
// the concatenation of the underlying samples up to rounding.
FeatureStats merge_stats(const FeatureStats& a, const FeatureStats& b);

} // namespace shiftnorm
