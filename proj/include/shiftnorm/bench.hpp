#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "shiftnorm/corrupt.hpp"
#include "shiftnorm/dataset.hpp"
#include "shiftnorm/metrics.hpp"
#include "shiftnorm/nn.hpp"

namespace shiftnorm {

// ---------------------------------------------------------------------------
// Error tables and the mean corruption error.
// ---------------------------------------------------------------------------

// Top-1 error indexed by (corruption label, severity). Every declared label
// must carry every declared severity.
struct ErrorTable {
    std::vector<std::string> corruption_set; // ordered
    std::vector<int> severities;             // ordered
    std::map<std::pair<std::string, int>, double> entries;

    double at(const std::string& corruption, int severity) const;
    void set(const std::string& corruption, int severity, double error);
    void validate() const;

    std::string to_csv() const; // corruption,severity,error
    static ErrorTable from_csv(const std::string& text);
};

// Per-corruption error sums of `model` normalized by those of `baseline`,
// averaged over corruptions, as a percentage.
double mce(const ErrorTable& model, const ErrorTable& baseline);

// ---------------------------------------------------------------------------
// Batch-size x pseudo-batch-size sweep.
// ---------------------------------------------------------------------------

struct SweepCell {
    std::string corruption;
    int severity = 0;
    std::size_t batch_size = 0;
    double pseudo_n = 0.0;
    double error = 0.0; // NaN when undefined (n = 1 with N = 0)
};

struct SweepResult {
    std::vector<SweepCell> cells;
    std::vector<std::size_t> n_grid; // resolved batch sizes
    std::vector<double> big_n_grid;
    ErrorTable baseline; // non-adapted (source statistics) errors

    double cell_error(const std::string& corruption, int severity, std::size_t batch_size,
                      double pseudo_n) const;

    std::string mce_table_tsv() const; // batchsize rows, one column per N
    std::string cells_tsv() const;     // long form, one row per cell
};

// For every (corruption, severity, n, N): shuffle, split into batches of n
// (remainder dropped), estimate per-batch target statistics, combine with the
// source prior, evaluate, and average the top-1 error. A batch size of 0
// selects the full dataset. N may be +inf, which reproduces the non-adapted
// baseline.
SweepResult sweep(const Network& net, const Dataset& clean_data,
                  const std::vector<CorruptionSpec>& grid, const std::vector<std::size_t>& n_grid,
                  const std::vector<double>& big_n_grid, std::uint64_t seed,
                  const SeverityTables& tables = SeverityTables{});

// ---------------------------------------------------------------------------
// Covariate-shift vs error scan.
// ---------------------------------------------------------------------------

struct ScanPoint {
    std::string corruption;
    int severity = 0;
    // Layer-averaged shift: for the Wasserstein metrics this is the mean of
    // the per-layer distances (square roots of the squared metric values).
    double shift = 0.0;
    double error = 0.0; // non-adapted top-1 error
};

struct ScanResult {
    std::vector<ScanPoint> points; // corrupted grid cells
    ScanPoint clean;               // anchor, severity 0
    double pearson_r = 0.0;        // over the corrupted points
    ShiftMetric metric = ShiftMetric::W2Normalized;

    std::string tsv() const; // corruption,severity,wasserstein,error
};

ScanResult shift_error_scan(const Network& net, const Dataset& clean_data,
                            const std::vector<CorruptionSpec>& grid, ShiftMetric metric,
                            std::uint64_t seed, const SeverityTables& tables = SeverityTables{});

double pearson_correlation(const std::vector<double>& xs, const std::vector<double>& ys);

// ---------------------------------------------------------------------------
// Linear error prediction from a holdout corruption family.
// ---------------------------------------------------------------------------

struct LinearErrorModel {
    double slope = 0.0;     // error per unit shift
    double intercept = 0.0; // error
    std::string fit_domain; // corruption family the model was fitted on
};

// Ordinary least squares over (shift, error) points; at least two points
// with distinct shifts are required.
LinearErrorModel fit_error_predictor(const std::vector<std::pair<double, double>>& holdout_points,
                                     const std::string& fit_domain);

// Model evaluation, clamped to [0,1].
double predict_error(const LinearErrorModel& model, double shift);

struct PredictionRow {
    std::string family;
    double true_mean = 0.0;
    double pred_mean = 0.0;
    double mean_abs_delta = 0.0;
    double coef = 0.0;
    double intercept = 0.0;
};

PredictionRow evaluate_prediction(const LinearErrorModel& model,
                                  const std::string& family,
                                  const std::vector<std::pair<double, double>>& test_points);

// One row per test family fitted against the holdout family of the scan.
std::vector<PredictionRow> error_prediction_report(const ScanResult& scan,
                                                   const std::string& holdout_family);

std::string prediction_report_tsv(const std::vector<PredictionRow>& rows);

} // namespace shiftnorm
