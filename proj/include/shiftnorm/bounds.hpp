#pragma once

#include <cstdint>
#include <vector>

#include "shiftnorm/stats.hpp"

namespace shiftnorm {

// Parameters of the univariate error model: source and target moments, the
// number n of target samples behind the estimates, the pseudo sample size N
// of the source prior, and the confidence parameter of the variance interval.
struct BoundInput {
    double mu_s = 0.0;
    double var_s = 1.0;
    double mu_t = 0.0;
    double var_t = 1.0;
    long long n = 2;       // >= 2
    double pseudo_n = 0.0; // N >= 0
    double alpha = 0.05;   // in (0,1)

    void validate() const;
};

// Closed-form lower/upper bounds on E[W2^2] between the true target
// statistics and the prior-weighted combination of source and estimated
// target statistics, plus the quantities the upper bound is built from:
// the confidence interval [a,b] of the combined variance and the curvature
// constant M = a^{-3/2}/4 of the square-root defect.
struct BoundResult {
    double lower_L = 0.0;
    double upper_U = 0.0;
    double interval_a = 0.0;
    double interval_b = 0.0;
    double holder_M = 0.0;
    double defect = 0.0; // upper_U - lower_L, stored before the addition rounds
};

BoundResult bound_range(const BoundInput& inp);
double bound_L(const BoundInput& inp);
double bound_U(const BoundInput& inp);

// Monte-Carlo estimate of E[W2^2] under the sampling model: sample mean
// normal with variance var_t/n, sample variance var_t/n times chi-square with
// n-1 degrees of freedom. Deterministic for a fixed seed.
struct McEstimate {
    double estimate = 0.0;
    double std_error = 0.0;
};

McEstimate mc_expected_w2(const BoundInput& inp, long long trials, std::uint64_t seed);

// Coordinate-wise sums of the univariate bounds for diagonal statistics.
struct TotalBounds {
    double lower = 0.0;
    double upper = 0.0;
};

TotalBounds bounds_multivariate(const FeatureStats& src, const FeatureStats& tgt, long long n,
                                double pseudo_n, double alpha);

// Grid minimization of L or U over candidate pseudo sample sizes. Ties break
// toward the smaller N.
enum class BoundObjective { Lower, Upper };

struct OptimalN {
    double best_n = 0.0;
    std::vector<double> objective_values; // aligned with the ascending grid
    std::vector<double> grid;             // the grid, sorted ascending
};

OptimalN optimal_N(const BoundInput& inp_without_N, const std::vector<double>& n_grid,
                   BoundObjective objective);

// ---------------------------------------------------------------------------
// Monte-Carlo verification over a parameter grid. The base source statistics
// are mu_s = 0, var_s = 1; each cell sets mu_t = shift and sigma_t =
// ratio * sigma_s. A cell counts as contained when the estimate lies in
// [L - 3 se, U + 3 se]. Cell seeds are derived as seed xor cell index, so
// the result is independent of the worker count.
// ---------------------------------------------------------------------------

struct GridCell {
    double mu_shift = 0.0;
    double sigma_ratio = 1.0;
    long long n = 2;
    double pseudo_n = 0.0;
    BoundResult bounds;
    McEstimate mc;
    bool contained = false;
};

struct GridResult {
    std::vector<GridCell> cells;
    std::size_t contained_count = 0;
    double alpha = 0.05;

    double containment_rate() const {
        return cells.empty() ? 0.0
                             : static_cast<double>(contained_count) /
                                   static_cast<double>(cells.size());
    }
    std::string csv() const; // mu_shift,var_ratio,n,N,alpha,L,U,mc_estimate,mc_se,contained
};

GridResult verify_bounds_grid(const std::vector<double>& mu_shifts,
                              const std::vector<double>& sigma_ratios,
                              const std::vector<long long>& ns,
                              const std::vector<double>& pseudo_ns, double alpha, long long trials,
                              std::uint64_t seed, std::size_t threads = 1);

} // namespace shiftnorm
