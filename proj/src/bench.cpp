#include "shiftnorm/bench.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "shiftnorm/csv.hpp"
#include "shiftnorm/rng.hpp"

namespace shiftnorm {

// ---------------------------------------------------------------------------
// ErrorTable.
// ---------------------------------------------------------------------------

double ErrorTable::at(const std::string& corruption, int severity) const {
    const auto it = entries.find({corruption, severity});
    if (it == entries.end())
        throw std::invalid_argument("ErrorTable: missing entry " + corruption + "/" +
                                    std::to_string(severity));
    return it->second;
}

void ErrorTable::set(const std::string& corruption, int severity, double error) {
    if (std::find(corruption_set.begin(), corruption_set.end(), corruption) ==
        corruption_set.end())
        corruption_set.push_back(corruption);
    if (std::find(severities.begin(), severities.end(), severity) == severities.end())
        severities.push_back(severity);
    entries[{corruption, severity}] = error;
}

void ErrorTable::validate() const {
    for (const auto& corruption : corruption_set)
        for (int severity : severities) {
            const double e = at(corruption, severity);
            if (!(e >= 0.0) || !(e <= 1.0))
                throw std::invalid_argument("ErrorTable: error out of [0,1] at " + corruption +
                                            "/" + std::to_string(severity));
        }
}

std::string ErrorTable::to_csv() const {
    std::ostringstream out;
    out << "corruption,severity,error\n";
    for (const auto& corruption : corruption_set)
        for (int severity : severities)
            out << corruption << ',' << severity << ',' << format_double(at(corruption, severity))
                << '\n';
    return out.str();
}

ErrorTable ErrorTable::from_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || line != "corruption,severity,error")
        throw std::invalid_argument("ErrorTable: bad header");
    ErrorTable table;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto fields = split_line(line, ',');
        if (fields.size() != 3) throw std::invalid_argument("ErrorTable: bad row '" + line + "'");
        table.set(fields[0], static_cast<int>(std::stol(fields[1])), parse_double(fields[2]));
    }
    table.validate();
    return table;
}

double mce(const ErrorTable& model, const ErrorTable& baseline) {
    if (model.corruption_set != baseline.corruption_set || model.severities != baseline.severities)
        throw std::invalid_argument("mce: corruption sets or severities differ");
    model.validate();
    baseline.validate();
    double total = 0.0;
    for (const auto& corruption : model.corruption_set) {
        double model_sum = 0.0, baseline_sum = 0.0;
        for (int severity : model.severities) {
            model_sum += model.at(corruption, severity);
            baseline_sum += baseline.at(corruption, severity);
        }
        if (!(baseline_sum > 0.0))
            throw std::invalid_argument("mce: zero baseline error for " + corruption);
        total += model_sum / baseline_sum;
    }
    return total / static_cast<double>(model.corruption_set.size()) * 100.0;
}

// ---------------------------------------------------------------------------
// Sweep.
// ---------------------------------------------------------------------------

namespace {

std::uint64_t cell_tag(std::size_t c, int s, std::size_t n) {
    return (static_cast<std::uint64_t>(c) << 40) ^ (static_cast<std::uint64_t>(s) << 32) ^
           static_cast<std::uint64_t>(n);
}

} // namespace

double SweepResult::cell_error(const std::string& corruption, int severity,
                               std::size_t batch_size, double pseudo_n) const {
    for (const auto& cell : cells)
        if (cell.corruption == corruption && cell.severity == severity &&
            cell.batch_size == batch_size &&
            (cell.pseudo_n == pseudo_n || (std::isinf(cell.pseudo_n) && std::isinf(pseudo_n))))
            return cell.error;
    throw std::invalid_argument("SweepResult: no such cell");
}

SweepResult sweep(const Network& net, const Dataset& clean_data,
                  const std::vector<CorruptionSpec>& grid, const std::vector<std::size_t>& n_grid,
                  const std::vector<double>& big_n_grid, std::uint64_t seed,
                  const SeverityTables& tables) {
    if (grid.empty() || n_grid.empty() || big_n_grid.empty())
        throw std::invalid_argument("sweep: empty grid");

    SweepResult result;
    result.big_n_grid = big_n_grid;
    for (std::size_t n : n_grid) {
        const std::size_t resolved = n == 0 ? clean_data.size() : n;
        if (resolved > clean_data.size())
            throw std::invalid_argument("sweep: batch size exceeds dataset size");
        result.n_grid.push_back(resolved);
    }

    for (std::size_t ci = 0; ci < grid.size(); ++ci) {
        const CorruptionSpec& spec = grid[ci];
        const Dataset corrupted = apply_corruption(
            clean_data, spec, Rng::derive(seed, cell_tag(ci, spec.severity, 0xC0)), tables);
        result.baseline.set(spec.label(), spec.severity,
                            evaluate_error(net, corrupted, SourceStatsMode{}));

        for (std::size_t n : result.n_grid) {
            const Dataset shuffled =
                corrupted.shuffled(Rng::derive(seed, cell_tag(ci, spec.severity, n)));
            const std::size_t batches = shuffled.size() / n;

            std::vector<double> wrong_weighted(big_n_grid.size(), 0.0);
            std::vector<bool> defined(big_n_grid.size(), true);
            for (std::size_t k = 0; k < big_n_grid.size(); ++k)
                if (n == 1 && big_n_grid[k] == 0.0) defined[k] = false;

            for (std::size_t b = 0; b < batches; ++b) {
                std::vector<std::size_t> idx(n);
                for (std::size_t i = 0; i < n; ++i) idx[i] = b * n + i;
                const Dataset batch = shuffled.subset(idx);
                const auto target_stats = collect_stats(net, batch.x, TrainStatsMode{});
                for (std::size_t k = 0; k < big_n_grid.size(); ++k) {
                    if (!defined[k]) continue;
                    AdaptedStatsMode mode;
                    mode.target_stats = target_stats;
                    mode.combine = CombineConfig{big_n_grid[k], n};
                    wrong_weighted[k] += evaluate_error(net, batch, mode);
                }
            }
            for (std::size_t k = 0; k < big_n_grid.size(); ++k) {
                SweepCell cell;
                cell.corruption = spec.label();
                cell.severity = spec.severity;
                cell.batch_size = n;
                cell.pseudo_n = big_n_grid[k];
                cell.error = defined[k] ? wrong_weighted[k] / static_cast<double>(batches)
                                        : std::numeric_limits<double>::quiet_NaN();
                result.cells.push_back(std::move(cell));
            }
        }
    }
    return result;
}

std::string SweepResult::mce_table_tsv() const {
    std::ostringstream out;
    out << "batchsize";
    for (double big_n : big_n_grid) out << '\t' << format_double(big_n);
    out << '\n';
    for (std::size_t n : n_grid) {
        out << n;
        for (double big_n : big_n_grid) {
            // Mean-corruption-error style normalization of this (n, N) slice
            // against the non-adapted baseline.
            ErrorTable slice;
            bool defined = true;
            for (const auto& cell : cells) {
                if (cell.batch_size != n) continue;
                if (!(cell.pseudo_n == big_n ||
                      (std::isinf(cell.pseudo_n) && std::isinf(big_n))))
                    continue;
                if (std::isnan(cell.error)) {
                    defined = false;
                    break;
                }
                slice.set(cell.corruption, cell.severity, cell.error);
            }
            out << '\t' << (defined ? format_double(mce(slice, baseline)) : "n/a");
        }
        out << '\n';
    }
    return out.str();
}

std::string SweepResult::cells_tsv() const {
    std::ostringstream out;
    out << "corruption\tseverity\tbatchsize\tpseudo_batchsize\terror\tbaseline_error\n";
    for (const auto& cell : cells) {
        out << cell.corruption << '\t' << cell.severity << '\t' << cell.batch_size << '\t'
            << format_double(cell.pseudo_n) << '\t'
            << (std::isnan(cell.error) ? "n/a" : format_double(cell.error)) << '\t'
            << format_double(baseline.at(cell.corruption, cell.severity)) << '\n';
    }
    return out.str();
}

// ---------------------------------------------------------------------------
// Shift vs error scan.
// ---------------------------------------------------------------------------

double pearson_correlation(const std::vector<double>& xs, const std::vector<double>& ys) {
    if (xs.size() != ys.size() || xs.size() < 2)
        throw std::invalid_argument("pearson_correlation: need >= 2 paired points");
    const double n = static_cast<double>(xs.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        mx += xs[i];
        my += ys[i];
    }
    mx /= n;
    my /= n;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double dx = xs[i] - mx, dy = ys[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (!(sxx > 0.0) || !(syy > 0.0))
        throw std::invalid_argument("pearson_correlation: degenerate variance");
    return sxy / std::sqrt(sxx * syy);
}

namespace {

std::vector<LabeledStats> stored_bn_stats(const Network& net) {
    std::vector<LabeledStats> out;
    const auto bn_idx = net.bn_layer_indices();
    for (std::size_t k = 0; k < bn_idx.size(); ++k) {
        const auto& bn = std::get<BatchNormLayer>(net.layers[bn_idx[k]]);
        out.push_back({"bn" + std::to_string(k), bn.source_stats});
    }
    return out;
}

std::vector<LabeledStats> label_stats(const std::vector<FeatureStats>& stats) {
    std::vector<LabeledStats> out;
    for (std::size_t k = 0; k < stats.size(); ++k)
        out.push_back({"bn" + std::to_string(k), stats[k]});
    return out;
}

// The scan plots distances, so the squared Wasserstein metrics enter through
// their per-layer square roots; divergences have no natural root and are
// averaged as they are.
double scan_aggregate(const ShiftReport& report) {
    const bool take_root =
        report.metric == ShiftMetric::W2 || report.metric == ShiftMetric::W2Normalized;
    double sum = 0.0;
    for (const auto& [label, value] : report.per_layer)
        sum += take_root ? std::sqrt(value) : value;
    return sum / static_cast<double>(report.per_layer.size());
}

} // namespace

ScanResult shift_error_scan(const Network& net, const Dataset& clean_data,
                            const std::vector<CorruptionSpec>& grid, ShiftMetric metric,
                            std::uint64_t seed, const SeverityTables& tables) {
    ScanResult result;
    result.metric = metric;
    const auto source = stored_bn_stats(net);

    const auto clean_collected = label_stats(collect_stats(net, clean_data.x, SourceStatsMode{}));
    result.clean.corruption = "clean";
    result.clean.severity = 0;
    result.clean.shift = scan_aggregate(shift_report(source, clean_collected, metric));
    result.clean.error = evaluate_error(net, clean_data, SourceStatsMode{});

    std::vector<double> shifts, errors;
    for (std::size_t ci = 0; ci < grid.size(); ++ci) {
        const CorruptionSpec& spec = grid[ci];
        const Dataset corrupted = apply_corruption(
            clean_data, spec, Rng::derive(seed, cell_tag(ci, spec.severity, 0x5C)), tables);
        ScanPoint point;
        point.corruption = spec.label();
        point.severity = spec.severity;
        const auto target = label_stats(collect_stats(net, corrupted.x, SourceStatsMode{}));
        point.shift = scan_aggregate(shift_report(source, target, metric));
        point.error = evaluate_error(net, corrupted, SourceStatsMode{});
        shifts.push_back(point.shift);
        errors.push_back(point.error);
        result.points.push_back(std::move(point));
    }
    result.pearson_r = pearson_correlation(shifts, errors);
    return result;
}

std::string ScanResult::tsv() const {
    std::ostringstream out;
    out << "corruption\tseverity\twasserstein\terror\n";
    out << clean.corruption << '\t' << clean.severity << '\t' << format_double(clean.shift) << '\t'
        << format_double(clean.error) << '\n';
    for (const auto& point : points)
        out << point.corruption << '\t' << point.severity << '\t' << format_double(point.shift)
            << '\t' << format_double(point.error) << '\n';
    return out.str();
}

// ---------------------------------------------------------------------------
// Error prediction.
// ---------------------------------------------------------------------------

LinearErrorModel fit_error_predictor(const std::vector<std::pair<double, double>>& holdout_points,
                                     const std::string& fit_domain) {
    if (holdout_points.size() < 2)
        throw std::invalid_argument("fit_error_predictor: need >= 2 points");
    double mx = 0.0, my = 0.0;
    for (const auto& [x, y] : holdout_points) {
        mx += x;
        my += y;
    }
    const double n = static_cast<double>(holdout_points.size());
    mx /= n;
    my /= n;
    double sxy = 0.0, sxx = 0.0;
    for (const auto& [x, y] : holdout_points) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
    }
    if (!(sxx > 0.0))
        throw std::invalid_argument("fit_error_predictor: degenerate (all shifts equal)");
    LinearErrorModel model;
    model.slope = sxy / sxx;
    model.intercept = my - model.slope * mx;
    model.fit_domain = fit_domain;
    return model;
}

double predict_error(const LinearErrorModel& model, double shift) {
    return std::clamp(model.slope * shift + model.intercept, 0.0, 1.0);
}

PredictionRow evaluate_prediction(const LinearErrorModel& model, const std::string& family,
                                  const std::vector<std::pair<double, double>>& test_points) {
    if (test_points.empty())
        throw std::invalid_argument("evaluate_prediction: no test points");
    PredictionRow row;
    row.family = family;
    row.coef = model.slope;
    row.intercept = model.intercept;
    for (const auto& [shift, error] : test_points) {
        const double pred = predict_error(model, shift);
        row.true_mean += error;
        row.pred_mean += pred;
        row.mean_abs_delta += std::abs(error - pred);
    }
    const double n = static_cast<double>(test_points.size());
    row.true_mean /= n;
    row.pred_mean /= n;
    row.mean_abs_delta /= n;
    return row;
}

std::vector<PredictionRow> error_prediction_report(const ScanResult& scan,
                                                   const std::string& holdout_family) {
    std::vector<std::pair<double, double>> holdout;
    std::map<std::string, std::vector<std::pair<double, double>>> by_family;
    for (const auto& point : scan.points) {
        if (point.corruption == holdout_family)
            holdout.emplace_back(point.shift, point.error);
        else
            by_family[point.corruption].emplace_back(point.shift, point.error);
    }
    if (holdout.empty())
        throw std::invalid_argument("error_prediction_report: holdout family '" + holdout_family +
                                    "' not in scan");
    const LinearErrorModel model = fit_error_predictor(holdout, holdout_family);
    std::vector<PredictionRow> rows;
    for (const auto& [family, points] : by_family)
        rows.push_back(evaluate_prediction(model, family, points));
    return rows;
}

std::string prediction_report_tsv(const std::vector<PredictionRow>& rows) {
    std::ostringstream out;
    out << "family\ttrue\tpred\tabs_delta\tcoef\tintercept\n";
    for (const auto& row : rows)
        out << row.family << '\t' << format_double(row.true_mean) << '\t'
            << format_double(row.pred_mean) << '\t' << format_double(row.mean_abs_delta) << '\t'
            << format_double(row.coef) << '\t' << format_double(row.intercept) << '\n';
    return out.str();
}

} // namespace shiftnorm
