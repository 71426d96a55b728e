#pragma once

#include <string>
#include <vector>

#include "shiftnorm/stats.hpp"

namespace shiftnorm {

// Distances between the diagonal Gaussians parametrized by two FeatureStats.
// Values are sums over coordinates and are >= 0 everywhere.

// Squared 2-Wasserstein distance: sum_i (mu_a - mu_b)^2 + (sigma_a - sigma_b)^2.
// Zero variances are permitted, the closed form stays finite.
double w2_squared(const FeatureStats& a, const FeatureStats& b);

// Squared Wasserstein distance after whitening both statistics with the
// source: sum_i [1 + vt/vs - 2*sqrt(vt/vs) + (mu_t-mu_s)^2/vs]. Asymmetric;
// requires strictly positive source variances.
double w2_normalized(const FeatureStats& source, const FeatureStats& target);

// KL(p || q) between diagonal Gaussians; all variances must be positive.
double kl_gauss_diag(const FeatureStats& p, const FeatureStats& q);

// Symmetrized KL: (KL(a||b) + KL(b||a)) / 2.
double jeffrey(const FeatureStats& a, const FeatureStats& b);

enum class ShiftMetric { W2, W2Normalized, KL, Jeffrey };

ShiftMetric shift_metric_from_name(const std::string& name); // w2 | w2n | kl | jeffrey
std::string shift_metric_name(ShiftMetric metric);

double eval_shift_metric(ShiftMetric metric, const FeatureStats& source,
                         const FeatureStats& target);

// Per-layer metric values plus the unweighted arithmetic mean across layers.
struct ShiftReport {
    ShiftMetric metric;
    std::vector<std::pair<std::string, double>> per_layer;
    double aggregate = 0.0;

    std::string to_csv() const; // layer,metric,value rows + final aggregate row
};

struct LabeledStats {
    std::string label;
    FeatureStats stats;
};

ShiftReport shift_report(const std::vector<LabeledStats>& source,
                         const std::vector<LabeledStats>& target, ShiftMetric metric);

// Per-layer statistics container persisted by the CLI.
std::string labeled_stats_to_json(const std::vector<LabeledStats>& layers);
std::vector<LabeledStats> labeled_stats_from_json(const std::string& text);

} // namespace shiftnorm
