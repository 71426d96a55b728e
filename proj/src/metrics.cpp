#include "shiftnorm/metrics.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "shiftnorm/csv.hpp"

namespace shiftnorm {

namespace {

void check_dims(const FeatureStats& a, const FeatureStats& b, const char* what) {
    if (a.dim() != b.dim())
        throw std::invalid_argument(std::string(what) + ": dimension mismatch");
    if (a.empty() || b.empty())
        throw std::invalid_argument(std::string(what) + ": empty statistics");
}

} // namespace

double w2_squared(const FeatureStats& a, const FeatureStats& b) {
    check_dims(a, b, "w2_squared");
    double total = 0.0;
    for (std::size_t i = 0; i < a.dim(); ++i) {
        const double dmu = a.mean[i] - b.mean[i];
        const double dsig = std::sqrt(a.variance[i]) - std::sqrt(b.variance[i]);
        total += dmu * dmu + dsig * dsig;
    }
    return total;
}

double w2_normalized(const FeatureStats& source, const FeatureStats& target) {
    check_dims(source, target, "w2_normalized");
    double total = 0.0;
    for (std::size_t i = 0; i < source.dim(); ++i) {
        const double vs = source.variance[i];
        if (!(vs > 0.0)) throw std::invalid_argument("w2_normalized: degenerate source");
        const double ratio = target.variance[i] / vs;
        const double dmu = target.mean[i] - source.mean[i];
        total += 1.0 + ratio - 2.0 * std::sqrt(ratio) + dmu * dmu / vs;
    }
    return total;
}

double kl_gauss_diag(const FeatureStats& p, const FeatureStats& q) {
    check_dims(p, q, "kl_gauss_diag");
    double total = 0.0;
    for (std::size_t i = 0; i < p.dim(); ++i) {
        const double vp = p.variance[i];
        const double vq = q.variance[i];
        if (!(vp > 0.0) || !(vq > 0.0))
            throw std::invalid_argument("kl_gauss_diag: zero variance");
        const double dmu = q.mean[i] - p.mean[i];
        total += vp / vq + dmu * dmu / vq - 1.0 + std::log(vq / vp);
    }
    return 0.5 * total;
}

double jeffrey(const FeatureStats& a, const FeatureStats& b) {
    return 0.5 * (kl_gauss_diag(a, b) + kl_gauss_diag(b, a));
}

ShiftMetric shift_metric_from_name(const std::string& name) {
    if (name == "w2") return ShiftMetric::W2;
    if (name == "w2n") return ShiftMetric::W2Normalized;
    if (name == "kl") return ShiftMetric::KL;
    if (name == "jeffrey") return ShiftMetric::Jeffrey;
    throw std::invalid_argument("unknown metric '" + name + "' (use w2 | w2n | kl | jeffrey)");
}

std::string shift_metric_name(ShiftMetric metric) {
    switch (metric) {
        case ShiftMetric::W2: return "w2";
        case ShiftMetric::W2Normalized: return "w2n";
        case ShiftMetric::KL: return "kl";
        case ShiftMetric::Jeffrey: return "jeffrey";
    }
    throw std::invalid_argument("shift_metric_name: bad enum");
}

double eval_shift_metric(ShiftMetric metric, const FeatureStats& source,
                         const FeatureStats& target) {
    switch (metric) {
        case ShiftMetric::W2: return w2_squared(source, target);
        case ShiftMetric::W2Normalized: return w2_normalized(source, target);
        case ShiftMetric::KL: return kl_gauss_diag(target, source);
        case ShiftMetric::Jeffrey: return jeffrey(source, target);
    }
    throw std::invalid_argument("eval_shift_metric: bad enum");
}

ShiftReport shift_report(const std::vector<LabeledStats>& source,
                         const std::vector<LabeledStats>& target, ShiftMetric metric) {
    if (source.size() != target.size() || source.empty())
        throw std::invalid_argument("shift_report: mismatched layer sets");
    ShiftReport report;
    report.metric = metric;
    double sum = 0.0;
    for (std::size_t i = 0; i < source.size(); ++i) {
        if (source[i].label != target[i].label)
            throw std::invalid_argument("shift_report: layer label mismatch at '" +
                                        source[i].label + "' vs '" + target[i].label + "'");
        const double value = eval_shift_metric(metric, source[i].stats, target[i].stats);
        report.per_layer.emplace_back(source[i].label, value);
        sum += value;
    }
    report.aggregate = sum / static_cast<double>(source.size());
    return report;
}

std::string labeled_stats_to_json(const std::vector<LabeledStats>& layers) {
    nlohmann::ordered_json j;
    j["format_version"] = 1;
    j["layers"] = nlohmann::ordered_json::array();
    for (const auto& layer : layers) {
        nlohmann::ordered_json lj;
        lj["label"] = layer.label;
        lj["stats"] = nlohmann::ordered_json::parse(layer.stats.to_json());
        j["layers"].push_back(std::move(lj));
    }
    return j.dump(2) + "\n";
}

std::vector<LabeledStats> labeled_stats_from_json(const std::string& text) {
    const auto j = nlohmann::json::parse(text);
    if (j.at("format_version").get<int>() != 1)
        throw std::invalid_argument("labeled stats: unsupported format_version");
    std::vector<LabeledStats> out;
    for (const auto& lj : j.at("layers"))
        out.push_back({lj.at("label").get<std::string>(),
                       FeatureStats::from_json(lj.at("stats").dump())});
    return out;
}

std::string ShiftReport::to_csv() const {
    std::ostringstream out;
    out << "layer,metric,value\n";
    const std::string name = shift_metric_name(metric);
    for (const auto& [label, value] : per_layer)
        out << label << ',' << name << ',' << format_double(value) << '\n';
    out << "aggregate," << name << ',' << format_double(aggregate) << '\n';
    return out.str();
}

} // namespace shiftnorm
