#include "shiftnorm/stats.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>
#include <stdexcept>

#include <json.hpp>

namespace shiftnorm {

namespace {

// Neumaier-compensated sum of a small buffer.
double compensated_sum(const std::vector<double>& v) {
    double sum = 0.0, comp = 0.0;
    for (double x : v) {
        const double t = sum + x;
        if (std::abs(sum) >= std::abs(x))
            comp += (sum - t) + x;
        else
            comp += (x - t) + sum;
        sum = t;
    }
    return sum + comp;
}

void check_same_dim(const FeatureStats& a, const FeatureStats& b, const char* what) {
    if (a.dim() != b.dim())
        throw std::invalid_argument(std::string(what) + ": dimension mismatch");
}

} // namespace

FeatureStats FeatureStats::make(std::vector<double> mean, std::vector<double> variance,
                                double count) {
    if (mean.size() != variance.size())
        throw std::invalid_argument("FeatureStats: mean/variance length mismatch");
    if (mean.empty()) throw std::invalid_argument("FeatureStats: dimension must be >= 1");
    if (!(count >= 0.0)) throw std::invalid_argument("FeatureStats: count must be >= 0");
    for (double v : variance)
        if (!(v >= 0.0)) throw std::invalid_argument("FeatureStats: negative variance");
    FeatureStats s;
    s.mean = std::move(mean);
    s.variance = std::move(variance);
    s.count = count;
    return s;
}

FeatureStats estimate_stats(const Matrix& batch) {
    const std::size_t n = batch.rows();
    const std::size_t d = batch.cols();
    if (n == 0 || d == 0) throw std::invalid_argument("estimate_stats: empty batch");
    for (double x : batch.data())
        if (!std::isfinite(x)) throw std::invalid_argument("estimate_stats: non-finite input");

    FeatureStats s;
    s.mean.resize(d);
    s.variance.resize(d);
    s.count = static_cast<double>(n);

    std::vector<double> col(n);
    for (std::size_t j = 0; j < d; ++j) {
        for (std::size_t i = 0; i < n; ++i) col[i] = batch(i, j);
        // Sorting canonicalizes the summation order across permutations of
        // the rows.
        std::sort(col.begin(), col.end());
        const double mean = compensated_sum(col) / static_cast<double>(n);
        std::vector<double> sq(n);
        for (std::size_t i = 0; i < n; ++i) {
            const double dlt = col[i] - mean;
            sq[i] = dlt * dlt;
        }
        s.mean[j] = mean;
        s.variance[j] = compensated_sum(sq) / static_cast<double>(n);
    }
    return s;
}

FeatureStats combine_stats(const FeatureStats& source, const FeatureStats& target,
                           const CombineConfig& cfg) {
    check_same_dim(source, target, "combine_stats");
    if (!(cfg.pseudo_count_N >= 0.0))
        throw std::invalid_argument("combine_stats: pseudo_count_N must be >= 0");
    if (cfg.target_count_n < 1)
        throw std::invalid_argument("combine_stats: target_count_n must be >= 1");
    if (target.count != static_cast<double>(cfg.target_count_n))
        std::cerr << "combine_stats: target_count_n (" << cfg.target_count_n
                  << ") differs from target.count (" << target.count << ")\n";

    const double big_n = cfg.pseudo_count_N;
    const double n = static_cast<double>(cfg.target_count_n);
    FeatureStats out;
    if (std::isinf(big_n)) {
        out = source;
        out.count = std::numeric_limits<double>::infinity();
        return out;
    }
    const double w_src = cfg.source_weight();
    const double w_tgt = cfg.target_weight();
    const std::size_t d = source.dim();
    out.mean.resize(d);
    out.variance.resize(d);
    out.count = big_n + n;
    for (std::size_t j = 0; j < d; ++j) {
        out.mean[j] = w_src * source.mean[j] + w_tgt * target.mean[j];
        out.variance[j] = w_src * source.variance[j] + w_tgt * target.variance[j];
    }
    return out;
}

FeatureStats ema_update(const FeatureStats& running, const FeatureStats& batch_stats,
                        double decay) {
    check_same_dim(running, batch_stats, "ema_update");
    if (!(decay > 0.0) || !(decay < 1.0))
        throw std::invalid_argument("ema_update: decay must lie in (0,1)");

    const double step = 1.0 - decay;
    const std::size_t d = running.dim();
    FeatureStats out;
    out.mean.resize(d);
    out.variance.resize(d);
    for (std::size_t j = 0; j < d; ++j) {
        // running + step*(batch - running) keeps the fixed point exact.
        out.mean[j] = running.mean[j] + step * (batch_stats.mean[j] - running.mean[j]);
        out.variance[j] = running.variance[j] + step * (batch_stats.variance[j] - running.variance[j]);
    }
    out.count = std::min(running.count + batch_stats.count, 2.0 / step);
    return out;
}

FeatureStats merge_stats(const FeatureStats& a, const FeatureStats& b) {
    check_same_dim(a, b, "merge_stats");
    if (!(a.count >= 1.0) || !(b.count >= 1.0))
        throw std::invalid_argument("merge_stats: both counts must be >= 1");

    const double na = a.count, nb = b.count, n = na + nb;
    const std::size_t d = a.dim();
    FeatureStats out;
    out.mean.resize(d);
    out.variance.resize(d);
    out.count = n;
    for (std::size_t j = 0; j < d; ++j) {
        const double delta = b.mean[j] - a.mean[j];
        out.mean[j] = (na * a.mean[j] + nb * b.mean[j]) / n;
        const double m2 = na * a.variance[j] + nb * b.variance[j] + na * nb / n * delta * delta;
        out.variance[j] = m2 / n;
    }
    return out;
}

std::string FeatureStats::to_json() const {
    nlohmann::ordered_json j;
    j["dim"] = dim();
    j["count"] = count;
    j["mean"] = mean;
    j["variance"] = variance;
    j["format_version"] = 1;
    return j.dump();
}

FeatureStats FeatureStats::from_json(const std::string& text) {
    const auto j = nlohmann::json::parse(text);
    if (j.at("format_version").get<int>() != 1)
        throw std::invalid_argument("FeatureStats: unsupported format_version");
    FeatureStats s = make(j.at("mean").get<std::vector<double>>(),
                          j.at("variance").get<std::vector<double>>(),
                          j.at("count").get<double>());
    if (s.dim() != j.at("dim").get<std::size_t>())
        throw std::invalid_argument("FeatureStats: dim field disagrees with arrays");
    return s;
}

} // namespace shiftnorm
