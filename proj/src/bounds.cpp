#include "shiftnorm/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "shiftnorm/csv.hpp"
#include "shiftnorm/parallel.hpp"
#include "shiftnorm/rng.hpp"
#include "shiftnorm/special.hpp"

namespace shiftnorm {

void BoundInput::validate() const {
    if (!(var_s > 0.0) || !(var_t > 0.0))
        throw std::invalid_argument("BoundInput: variances must be positive");
    if (n < 2) throw std::invalid_argument("BoundInput: n must be >= 2");
    if (!(pseudo_n >= 0.0)) throw std::invalid_argument("BoundInput: N must be >= 0");
    if (!(alpha > 0.0) || !(alpha < 1.0))
        throw std::invalid_argument("BoundInput: alpha must lie in (0,1)");
}

BoundResult bound_range(const BoundInput& inp) {
    inp.validate();
    const double n = static_cast<double>(inp.n);
    const double big_n = inp.pseudo_n;
    const double total = big_n + n;
    const double w_src = big_n / total;
    const double sigma_t = std::sqrt(inp.var_t);

    // Confidence interval of the combined variance: the sample variance times
    // n/var_t is chi-square with n-1 degrees of freedom, so at level 1-alpha
    // it lies between the two tail quantiles.
    const int df = static_cast<int>(inp.n) - 1;
    const double chi_left = chi2_quantile(0.5 * inp.alpha, df);
    const double chi_right = chi2_quantile(1.0 - 0.5 * inp.alpha, df);

    BoundResult out;
    out.interval_a = w_src * inp.var_s + chi_left * inp.var_t / total;
    out.interval_b = w_src * inp.var_s + chi_right * inp.var_t / total;
    out.holder_M = 0.25 * std::pow(out.interval_a, -1.5);

    const double mean_combined_var = w_src * inp.var_s + (n - 1.0) / total * inp.var_t;
    const double dsig = sigma_t - std::sqrt(mean_combined_var);
    const double dmu = inp.mu_t - inp.mu_s;
    out.lower_L = dsig * dsig + w_src * w_src * dmu * dmu + n / (total * total) * inp.var_t;

    // Square-root defect: sigma_t * M * Var[combined variance].
    const double var_combined = 2.0 * (n - 1.0) / (total * total) * inp.var_t * inp.var_t;
    out.defect = sigma_t * out.holder_M * var_combined;
    out.upper_U = out.lower_L + out.defect;
    return out;
}

double bound_L(const BoundInput& inp) { return bound_range(inp).lower_L; }
double bound_U(const BoundInput& inp) { return bound_range(inp).upper_U; }

McEstimate mc_expected_w2(const BoundInput& inp, long long trials, std::uint64_t seed) {
    inp.validate();
    if (trials < 10000) throw std::invalid_argument("mc_expected_w2: trials must be >= 10^4");

    const double n = static_cast<double>(inp.n);
    const double big_n = inp.pseudo_n;
    const double w_src = big_n / (big_n + n);
    const double w_tgt = 1.0 - w_src;
    const double sigma_t = std::sqrt(inp.var_t);
    const double mean_sd = sigma_t / std::sqrt(n);
    const double df = n - 1.0;

    Rng rng(seed);
    double sum = 0.0, sum_sq = 0.0;
    for (long long t = 0; t < trials; ++t) {
        const double mu_hat = inp.mu_t + mean_sd * rng.normal();
        const double var_hat = inp.var_t / n * rng.chi_square(df);
        const double mu_bar = w_src * inp.mu_s + w_tgt * mu_hat;
        const double var_bar = w_src * inp.var_s + w_tgt * var_hat;
        const double dmu = mu_bar - inp.mu_t;
        const double dsig = std::sqrt(var_bar) - sigma_t;
        const double w2 = dmu * dmu + dsig * dsig;
        sum += w2;
        sum_sq += w2 * w2;
    }
    const double k = static_cast<double>(trials);
    McEstimate out;
    out.estimate = sum / k;
    const double var = std::max(0.0, sum_sq / k - out.estimate * out.estimate);
    out.std_error = std::sqrt(var / k);
    return out;
}

TotalBounds bounds_multivariate(const FeatureStats& src, const FeatureStats& tgt, long long n,
                                double pseudo_n, double alpha) {
    if (src.dim() != tgt.dim() || src.empty())
        throw std::invalid_argument("bounds_multivariate: dimension mismatch");
    TotalBounds total;
    for (std::size_t i = 0; i < src.dim(); ++i) {
        BoundInput inp;
        inp.mu_s = src.mean[i];
        inp.var_s = src.variance[i];
        inp.mu_t = tgt.mean[i];
        inp.var_t = tgt.variance[i];
        inp.n = n;
        inp.pseudo_n = pseudo_n;
        inp.alpha = alpha;
        const BoundResult r = bound_range(inp);
        total.lower += r.lower_L;
        total.upper += r.upper_U;
    }
    return total;
}

GridResult verify_bounds_grid(const std::vector<double>& mu_shifts,
                              const std::vector<double>& sigma_ratios,
                              const std::vector<long long>& ns,
                              const std::vector<double>& pseudo_ns, double alpha, long long trials,
                              std::uint64_t seed, std::size_t threads) {
    if (mu_shifts.empty() || sigma_ratios.empty() || ns.empty() || pseudo_ns.empty())
        throw std::invalid_argument("verify_bounds_grid: empty grid axis");

    GridResult result;
    result.alpha = alpha;
    for (double shift : mu_shifts)
        for (double ratio : sigma_ratios)
            for (long long n : ns)
                for (double pseudo_n : pseudo_ns) {
                    GridCell cell;
                    cell.mu_shift = shift;
                    cell.sigma_ratio = ratio;
                    cell.n = n;
                    cell.pseudo_n = pseudo_n;
                    result.cells.push_back(cell);
                }

    parallel_for(result.cells.size(), threads, [&](std::size_t i) {
        GridCell& cell = result.cells[i];
        BoundInput inp;
        inp.mu_s = 0.0;
        inp.var_s = 1.0;
        inp.mu_t = cell.mu_shift;
        inp.var_t = cell.sigma_ratio * cell.sigma_ratio;
        inp.n = cell.n;
        inp.pseudo_n = cell.pseudo_n;
        inp.alpha = alpha;
        cell.bounds = bound_range(inp);
        cell.mc = mc_expected_w2(inp, trials, seed ^ static_cast<std::uint64_t>(i));
        cell.contained = cell.mc.estimate >= cell.bounds.lower_L - 3.0 * cell.mc.std_error &&
                         cell.mc.estimate <= cell.bounds.upper_U + 3.0 * cell.mc.std_error;
    });

    for (const GridCell& cell : result.cells)
        if (cell.contained) ++result.contained_count;
    return result;
}

std::string GridResult::csv() const {
    std::ostringstream out;
    out << "mu_shift,var_ratio,n,N,alpha,L,U,mc_estimate,mc_se,contained\n";
    for (const GridCell& cell : cells) {
        out << format_double(cell.mu_shift) << ','
            << format_double(cell.sigma_ratio * cell.sigma_ratio) << ',' << cell.n << ','
            << format_double(cell.pseudo_n) << ',' << format_double(alpha) << ','
            << format_double(cell.bounds.lower_L) << ',' << format_double(cell.bounds.upper_U)
            << ',' << format_double(cell.mc.estimate) << ',' << format_double(cell.mc.std_error)
            << ',' << (cell.contained ? 1 : 0) << '\n';
    }
    return out.str();
}

OptimalN optimal_N(const BoundInput& inp_without_N, const std::vector<double>& n_grid,
                   BoundObjective objective) {
    if (n_grid.empty()) throw std::invalid_argument("optimal_N: empty grid");
    OptimalN out;
    out.grid = n_grid;
    std::sort(out.grid.begin(), out.grid.end());
    out.objective_values.reserve(out.grid.size());

    double best_value = 0.0;
    bool first = true;
    for (double candidate : out.grid) {
        BoundInput inp = inp_without_N;
        inp.pseudo_n = candidate;
        const BoundResult r = bound_range(inp);
        const double value = objective == BoundObjective::Lower ? r.lower_L : r.upper_U;
        out.objective_values.push_back(value);
        if (first || value < best_value) {
            best_value = value;
            out.best_n = candidate;
            first = false;
        }
    }
    return out;
}

} // namespace shiftnorm
