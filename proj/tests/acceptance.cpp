// Acceptance suite: one criterion per run() call, one PASS/FAIL line each,
// nonzero exit if anything fails. The experiment-dependent criteria share a
// single default-config network trained up front.

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <limits>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "shiftnorm/bench.hpp"
#include "shiftnorm/bounds.hpp"
#include "shiftnorm/csv.hpp"
#include "shiftnorm/experiment.hpp"
#include "shiftnorm/metrics.hpp"
#include "shiftnorm/nn.hpp"
#include "shiftnorm/parallel.hpp"
#include "shiftnorm/rng.hpp"
#include "shiftnorm/special.hpp"

namespace fs = std::filesystem;
using namespace shiftnorm;

namespace {

int failures = 0;

void run(int id, const std::string& name, const std::function<bool(std::string&)>& body) {
    std::string detail;
    bool ok = false;
    try {
        ok = body(detail);
    } catch (const std::exception& e) {
        detail = std::string("exception: ") + e.what();
    }
    std::cout << "criterion " << id << " [" << name << "]: " << (ok ? "PASS" : "FAIL");
    if (!detail.empty()) std::cout << "  (" << detail << ")";
    std::cout << std::endl;
    if (!ok) ++failures;
}

struct Shared {
    ExperimentSetup setup;
    Dataset train_data;
    Dataset eval_data;
    Network net;
};

Shared make_shared_experiment() {
    Shared s;
    Config cfg = Config::parse(""); // built-in defaults
    s.setup = read_setup(cfg);
    auto [train_split, eval_split] = setup_data(s.setup);
    s.train_data = std::move(train_split);
    s.eval_data = std::move(eval_split);
    s.net = train_default_network(s.setup, s.train_data);
    return s;
}

FeatureStats uni(double mean, double variance) { return FeatureStats::make({mean}, {variance}, 1); }

double elapsed_seconds(const std::chrono::steady_clock::time_point& start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

int run_cli(const std::string& args) {
    const std::string cmd = std::string(SHIFTNORM_CLI_PATH) + " " + args;
    return WEXITSTATUS(std::system(cmd.c_str()));
}

// ---------------------------------------------------------------------------

bool criterion_sandwich(std::string& detail) {
    const auto start = std::chrono::steady_clock::now();
    const GridResult grid = verify_bounds_grid({0, 0.5, 1, 2, 4}, {0.5, 0.8, 1, 1.25, 2},
                                               {2, 8, 32, 128, 512}, {0, 8, 64, 512}, 0.05,
                                               100000, Rng::derive(44, seed_stream::kBounds),
                                               /*threads=*/1);
    const double seconds = elapsed_seconds(start);
    std::ostringstream out;
    out << grid.contained_count << "/" << grid.cells.size() << " contained, "
        << format_double(seconds) << " s single-threaded";
    detail = out.str();
    return grid.cells.size() == 500 && grid.containment_rate() >= 0.99 && seconds < 300.0;
}

bool criterion_limits(std::string& detail) {
    // n -> infinity: both bounds below 1e-4 var_t across the parameter grid.
    for (double shift : {0.0, 0.5, 1.0, 2.0, 4.0})
        for (double ratio : {0.5, 0.8, 1.0, 1.25, 2.0})
            for (double pseudo : {0.0, 8.0, 64.0, 512.0}) {
                BoundInput inp;
                inp.mu_s = 0.0;
                inp.var_s = 1.0;
                inp.mu_t = shift;
                inp.var_t = ratio * ratio;
                inp.n = 100000000LL;
                inp.pseudo_n = pseudo;
                const BoundResult r = bound_range(inp);
                if (!(std::abs(r.lower_L) < 1e-4 * inp.var_t) ||
                    !(std::abs(r.upper_U) < 1e-4 * inp.var_t)) {
                    detail = "n->inf limit violated";
                    return false;
                }
            }

    // N -> infinity: the lower bound reduces to the source-target distance.
    Rng rng(777);
    for (int i = 0; i < 20; ++i) {
        BoundInput inp;
        inp.mu_s = rng.normal();
        inp.var_s = std::exp(rng.normal());
        inp.mu_t = inp.mu_s + 0.5 + rng.uniform() * 3.0;
        inp.var_t = std::exp(rng.normal());
        inp.n = 2 + static_cast<long long>(rng.uniform_int(500));
        inp.pseudo_n = 1e12 * static_cast<double>(inp.n);
        const double w2 = w2_squared(uni(inp.mu_s, inp.var_s), uni(inp.mu_t, inp.var_t));
        if (!(std::abs(bound_L(inp) - w2) < 1e-6 * w2)) {
            detail = "N->inf limit violated";
            return false;
        }
    }

    // Matching statistics: the dedicated closed form agrees with the general
    // bound at 20 seeded points.
    Rng rng2(778);
    for (int i = 0; i < 20; ++i) {
        const double mu = 2.0 * rng2.normal();
        const double var = std::exp(rng2.normal());
        const double n = 2.0 + static_cast<double>(rng2.uniform_int(300));
        const double pseudo = static_cast<double>(rng2.uniform_int(200));
        BoundInput inp;
        inp.mu_s = inp.mu_t = mu;
        inp.var_s = inp.var_t = var;
        inp.n = static_cast<long long>(n);
        inp.pseudo_n = pseudo;
        const BoundResult r = bound_range(inp);
        const double total = pseudo + n;
        const double closed =
            var * ((2 * pseudo * pseudo + 4 * pseudo * n - pseudo + 2 * n * n) / (total * total) -
                   2.0 * std::sqrt(1.0 - 1.0 / total));
        if (!(std::abs(r.lower_L - closed) <=
              1e-10 * std::max({std::abs(closed), std::abs(r.lower_L), 1e-300}))) {
            detail = "matching-statistics closed form diverges from the general bound";
            return false;
        }
    }
    return true;
}

bool criterion_metric_identities(std::string& detail) {
    Rng rng(9090);
    for (int i = 0; i < 1000; ++i) {
        const auto s = uni(3.0 * rng.normal(), std::exp(rng.normal()));
        const auto t = uni(3.0 * rng.normal(), std::exp(rng.normal()));
        const double lhs = w2_normalized(s, t) * s.variance[0];
        const double rhs = w2_squared(s, t);
        if (!(std::abs(lhs - rhs) <= 1e-10 * std::max(1.0, std::abs(rhs)))) {
            detail = "ratio identity failed";
            return false;
        }
        if (jeffrey(s, t) != jeffrey(t, s)) {
            detail = "jeffrey symmetry not bit-exact";
            return false;
        }
        const double kl = kl_gauss_diag(s, t);
        if (!(kl >= 0.0)) {
            detail = "negative KL";
            return false;
        }
        if (kl < 1e-12 && (std::abs(s.mean[0] - t.mean[0]) > 1e-5 ||
                           std::abs(s.variance[0] - t.variance[0]) > 1e-5)) {
            detail = "KL zero on unequal inputs";
            return false;
        }
    }
    if (kl_gauss_diag(uni(0.5, 2.0), uni(0.5, 2.0)) != 0.0) {
        detail = "KL nonzero on equal inputs";
        return false;
    }
    for (int i = 0; i < 1000; ++i) {
        const auto a = uni(3.0 * rng.normal(), std::exp(rng.normal()));
        const auto b = uni(3.0 * rng.normal(), std::exp(rng.normal()));
        const auto c = uni(3.0 * rng.normal(), std::exp(rng.normal()));
        if (!(std::sqrt(w2_squared(a, c)) <=
              std::sqrt(w2_squared(a, b)) + std::sqrt(w2_squared(b, c)) + 1e-9)) {
            detail = "triangle inequality failed";
            return false;
        }
    }
    return true;
}

bool criterion_chi2(std::string& detail) {
    if (!(std::abs(chi2_quantile(0.5, 2) - 2.0 * std::numbers::ln2) < 1e-10)) {
        detail = "median of chi2(2) off";
        return false;
    }
    Rng rng(5555);
    double worst = 0.0;
    for (int i = 0; i < 100; ++i) {
        const double p = 0.001 + 0.998 * rng.uniform();
        const long long df = 1 + static_cast<long long>(rng.uniform_int(200));
        const double err = std::abs(chi2_cdf(chi2_quantile(p, df), df) - p);
        worst = std::max(worst, err);
    }
    detail = "worst CDF roundtrip " + format_double(worst);
    return worst < 1e-9;
}

bool criterion_bn(std::string& detail) {
    // Pre-affine normalized activations of a bare BN layer.
    BatchNormLayer bn;
    bn.gamma.assign(3, 1.0);
    bn.beta.assign(3, 0.0);
    bn.source_stats = FeatureStats::make({0, 0, 0}, {1, 1, 1}, 1);
    bn.epsilon = 1e-5;
    Network bare;
    bare.layers.emplace_back(bn);
    bare.class_count = 3;
    Rng rng(31);
    Matrix batch(96, 3);
    for (double& v : batch.data()) v = 2.0 + 3.0 * rng.normal();
    const Matrix out = forward(bare, batch, TrainStatsMode{});
    const auto in_stats = estimate_stats(batch);
    const auto out_stats = estimate_stats(out);
    for (std::size_t j = 0; j < 3; ++j) {
        const double expected_var = in_stats.variance[j] / (in_stats.variance[j] + bn.epsilon);
        if (!(std::abs(out_stats.mean[j]) < 1e-9) ||
            !(std::abs(out_stats.variance[j] - expected_var) < 1e-9)) {
            detail = "train-mode normalization off";
            return false;
        }
    }

    double worst = 0.0;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const Network net = make_mlp(3, {6, 5}, 3, 4000 + seed);
        Rng grng(5000 + seed);
        Dataset b;
        b.x = Matrix(12, 3);
        for (double& v : b.x.data()) v = grng.normal();
        b.y.resize(12);
        for (auto& label : b.y) label = static_cast<int>(grng.uniform_int(3));
        const auto report = gradient_check(net, b, 1e-6);
        worst = std::max(worst, report.max_rel_error);
        if (!report.pass) break;
    }
    detail = "worst gradient error " + format_double(worst);
    return worst < 1e-6;
}

bool criterion_mce(std::string& detail) {
    ErrorTable table;
    for (const auto& name : {"a", "b", "c"})
        for (int severity = 1; severity <= 5; ++severity)
            table.set(name, severity, 0.1 + 0.13 * severity);
    if (mce(table, table) != 100.0) {
        detail = "self-normalization not exactly 100";
        return false;
    }
    ErrorTable halved = table;
    for (auto& [key, value] : halved.entries) value *= 0.5;
    if (mce(halved, table) != 50.0) {
        detail = "0.5 scaling not exactly 50";
        return false;
    }

    const std::string path = std::string(SHIFTNORM_SOURCE_DIR) + "/data/alexnet_baseline.csv";
    const std::string original = read_text_file(path);
    const ErrorTable fixture = ErrorTable::from_csv(original);
    const std::vector<std::pair<std::string, double>> frozen{
        {"gaussian-noise", 0.886428}, {"shot-noise", 0.894468},  {"impulse-noise", 0.922640},
        {"defocus-blur", 0.819880},   {"glass-blur", 0.826268},  {"motion-blur", 0.785948},
        {"zoom-blur", 0.798360},      {"snow", 0.866816},        {"frost", 0.826572},
        {"fog", 0.819324},            {"brightness", 0.564592},  {"contrast", 0.853204},
        {"elastic-transform", 0.646056}, {"pixelate", 0.717840}, {"jpeg", 0.606500}};
    if (fixture.corruption_set.size() != frozen.size()) {
        detail = "fixture corruption count off";
        return false;
    }
    for (const auto& [name, value] : frozen)
        for (int severity = 1; severity <= 5; ++severity)
            if (fixture.at(name, severity) != value) {
                detail = "fixture value differs at " + name;
                return false;
            }
    if (fixture.to_csv() != original) {
        detail = "fixture round trip not byte-identical";
        return false;
    }
    return true;
}

bool criterion_adaptation(const Shared& s, std::string& detail) {
    const auto start = std::chrono::steady_clock::now();
    const CorruptionSpec spec{CorruptionFamily::Shift, 4};
    const std::vector<std::size_t> n_grid{2, 8, 32, 128, 0};
    const std::vector<double> big_n_grid{0.0, std::numeric_limits<double>::infinity()};
    const SweepResult result = sweep(s.net, s.eval_data, {spec}, n_grid, big_n_grid,
                                     Rng::derive(s.setup.seed, seed_stream::kSweep),
                                     s.setup.tables);

    const double baseline = result.baseline.at("shift", 4);
    const double full_adapted = result.cell_error("shift", 4, s.eval_data.size(), 0.0);
    const double gain = baseline - full_adapted;

    bool monotone = true;
    double prev = 1e300;
    for (std::size_t n : result.n_grid) {
        const double err = result.cell_error("shift", 4, n, 0.0);
        if (err > prev + 0.02) monotone = false;
        prev = err;
    }

    bool inf_matches = true;
    for (std::size_t n : result.n_grid) {
        const double err =
            result.cell_error("shift", 4, n, std::numeric_limits<double>::infinity());
        if (std::abs(err - baseline) > 1e-9) inf_matches = false;
    }

    const double seconds = elapsed_seconds(start);
    std::ostringstream out;
    out << "gain " << format_double(gain) << ", monotone " << (monotone ? "yes" : "no")
        << ", inf-N matches " << (inf_matches ? "yes" : "no") << ", " << format_double(seconds)
        << " s";
    detail = out.str();
    return gain >= 0.10 && monotone && inf_matches && seconds < 180.0;
}

bool criterion_controls(const Shared& s, std::string& detail) {
    // Clean-source adaptation at n = 256 moves accuracy by at most one point.
    const double clean_err = evaluate_error(s.net, s.eval_data, SourceStatsMode{});
    const Dataset shuffled =
        s.eval_data.shuffled(Rng::derive(s.setup.seed, seed_stream::kSweep ^ 0xF));
    const std::size_t n = 256;
    const std::size_t batches = shuffled.size() / n;
    double adapted_err = 0.0;
    for (std::size_t b = 0; b < batches; ++b) {
        std::vector<std::size_t> idx(n);
        for (std::size_t i = 0; i < n; ++i) idx[i] = b * n + i;
        const Dataset batch = shuffled.subset(idx);
        AdaptedStatsMode mode;
        mode.target_stats = collect_stats(s.net, batch.x, TrainStatsMode{});
        mode.combine = CombineConfig{0.0, n};
        adapted_err += evaluate_error(s.net, batch, mode);
    }
    adapted_err /= static_cast<double>(batches);
    const double clean_delta = std::abs(adapted_err - clean_err);

    // Mixed corruptions: adaptation must not help.
    std::vector<CorruptionSpec> specs;
    for (auto family : all_corruption_families())
        for (int severity = 1; severity <= 5; ++severity) specs.push_back({family, severity});
    const Dataset mixed = mixed_corruptions(
        s.eval_data, specs, Rng::derive(s.setup.seed, seed_stream::kCorrupt ^ 0x31), s.setup.tables);
    const double mixed_baseline = evaluate_error(s.net, mixed, SourceStatsMode{});
    const double mixed_full =
        evaluate_error(s.net, mixed, adapt_full(s.net, mixed.x, CombineConfig{0.0, 0}));
    const Dataset mixed_shuffled =
        mixed.shuffled(Rng::derive(s.setup.seed, seed_stream::kSweep ^ 0x32));
    const std::size_t bn = 64;
    double mixed_batched = 0.0;
    const std::size_t mixed_batches = mixed_shuffled.size() / bn;
    for (std::size_t b = 0; b < mixed_batches; ++b) {
        std::vector<std::size_t> idx(bn);
        for (std::size_t i = 0; i < bn; ++i) idx[i] = b * bn + i;
        const Dataset batch = mixed_shuffled.subset(idx);
        AdaptedStatsMode mode;
        mode.target_stats = collect_stats(s.net, batch.x, TrainStatsMode{});
        mode.combine = CombineConfig{0.0, bn};
        mixed_batched += evaluate_error(s.net, batch, mode);
    }
    mixed_batched /= static_cast<double>(mixed_batches);

    std::ostringstream out;
    out << "clean-adapt delta " << format_double(clean_delta) << ", mixed baseline "
        << format_double(mixed_baseline) << " vs adapted full " << format_double(mixed_full)
        << " / batched " << format_double(mixed_batched);
    detail = out.str();
    return clean_delta <= 0.01 && mixed_full >= mixed_baseline - 0.01 &&
           mixed_batched >= mixed_baseline - 0.01;
}

bool criterion_correlation(const Shared& s, std::string& detail) {
    std::vector<CorruptionSpec> grid;
    for (auto family : all_corruption_families())
        for (int severity = 1; severity <= 5; ++severity) grid.push_back({family, severity});
    const ScanResult scan =
        shift_error_scan(s.net, s.eval_data, grid, ShiftMetric::W2Normalized,
                         Rng::derive(s.setup.seed, seed_stream::kScan), s.setup.tables);

    std::vector<double> errors, shifts;
    for (const auto& point : scan.points) {
        errors.push_back(point.error);
        shifts.push_back(point.shift);
    }

    Rng rng(Rng::derive(s.setup.seed, seed_stream::kScan ^ 0xFACE));
    int destroyed = 0;
    const int rounds = 100;
    for (int round = 0; round < rounds; ++round) {
        std::vector<double> permuted = errors;
        rng.shuffle(permuted);
        if (std::abs(pearson_correlation(shifts, permuted)) < 0.5) ++destroyed;
    }
    std::ostringstream out;
    out << "r = " << format_double(scan.pearson_r) << ", " << destroyed << "/" << rounds
        << " permutations below 0.5";
    detail = out.str();
    return scan.pearson_r >= 0.8 && destroyed >= 95;
}

bool criterion_prediction(const Shared& s, std::string& detail) {
    std::vector<CorruptionSpec> grid;
    for (auto family : all_corruption_families())
        for (int severity = 1; severity <= 5; ++severity) grid.push_back({family, severity});
    const ScanResult scan =
        shift_error_scan(s.net, s.eval_data, grid, ShiftMetric::W2Normalized,
                         Rng::derive(s.setup.seed, seed_stream::kScan), s.setup.tables);
    const auto rows = error_prediction_report(scan, s.setup.holdout_family);
    if (rows.size() != 3) {
        detail = "expected one row per non-holdout family";
        return false;
    }
    double mean_delta = 0.0;
    for (const auto& row : rows) {
        if (!std::isfinite(row.true_mean) || !std::isfinite(row.pred_mean) ||
            !std::isfinite(row.coef) || !std::isfinite(row.intercept)) {
            detail = "non-finite report entry";
            return false;
        }
        mean_delta += row.mean_abs_delta;
    }
    mean_delta /= static_cast<double>(rows.size());

    const std::string tsv = prediction_report_tsv(rows);
    const bool header_ok = tsv.rfind("family\ttrue\tpred\tabs_delta\tcoef\tintercept\n", 0) == 0;
    detail = "mean |delta| " + format_double(mean_delta);
    return header_ok && mean_delta <= 0.15;
}

bool criterion_cli_determinism(std::string& detail) {
    const fs::path dir = fs::temp_directory_path() / "shiftnorm_acceptance";
    fs::remove_all(dir);
    fs::create_directories(dir);
    const std::string cfg_path = (dir / "config.toml").string();
    write_text_file(cfg_path, R"(seed = 42

[net]
epochs = 6

[bounds]
trials = 10000
mu_shift = [0.0, 1.0]
sigma_ratio = [1.0]
n = [8, 32]
pseudo_n = [0.0, 8.0]
)");

    const auto rerun_identical = [&](const std::string& command,
                                     const std::vector<std::string>& files) {
        const std::string out_a = (dir / (command + "_a")).string();
        const std::string out_b = (dir / (command + "_b")).string();
        std::string extra;
        if (command != "train" && command != "bounds")
            extra = " --checkpoint " + (dir / "train_a" / "checkpoint.json").string();
        if (run_cli(command + " --config " + cfg_path + extra + " --out " + out_a +
                    " > /dev/null 2>&1") != 0)
            return false;
        if (run_cli(command + " --config " + cfg_path + extra + " --out " + out_b +
                    " > /dev/null 2>&1") != 0)
            return false;
        for (const auto& file : files)
            if (read_text_file(out_a + "/" + file) != read_text_file(out_b + "/" + file))
                return false;
        return true;
    };

    if (!rerun_identical("train", {"checkpoint.json", "train_log.csv", "train_data.csv",
                                   "eval_data.csv", "resolved.toml"})) {
        detail = "train outputs differ between reruns";
        return false;
    }
    if (!rerun_identical("bounds", {"bounds.csv", "resolved.toml"})) {
        detail = "bounds outputs differ between reruns";
        return false;
    }
    if (!rerun_identical("sweep", {"sweep_mce.tsv", "sweep_cells.tsv", "resolved.toml"})) {
        detail = "sweep outputs differ between reruns";
        return false;
    }
    if (!rerun_identical("scan", {"scan.tsv", "resolved.toml"})) {
        detail = "scan outputs differ between reruns";
        return false;
    }
    if (!rerun_identical("predict", {"prediction.tsv", "resolved.toml"})) {
        detail = "predict outputs differ between reruns";
        return false;
    }
    if (!rerun_identical("adapt", {"source_stats.json", "target_stats.json",
                                   "adapted_stats.json", "resolved.toml"})) {
        detail = "adapt outputs differ between reruns";
        return false;
    }
    if (!rerun_identical("eval", {"error.txt", "resolved.toml"})) {
        detail = "eval outputs differ between reruns";
        return false;
    }
    return true;
}

} // namespace

int main() {
    std::cout << "training the default network for the experiment criteria..." << std::endl;
    const Shared shared = make_shared_experiment();
    std::cout << "default net ready (clean eval error "
              << format_double(evaluate_error(shared.net, shared.eval_data, SourceStatsMode{}))
              << ")" << std::endl;

    run(1, "proposition-1 sandwich", criterion_sandwich);
    run(2, "limit identities", criterion_limits);
    run(3, "metric identities", criterion_metric_identities);
    run(4, "chi-square quantile", criterion_chi2);
    run(5, "batch-norm correctness", criterion_bn);
    run(6, "mean corruption error", criterion_mce);
    run(7, "adaptation effect", [&](std::string& d) { return criterion_adaptation(shared, d); });
    run(8, "controls", [&](std::string& d) { return criterion_controls(shared, d); });
    run(9, "shift-error correlation",
        [&](std::string& d) { return criterion_correlation(shared, d); });
    run(10, "error prediction", [&](std::string& d) { return criterion_prediction(shared, d); });
    run(11, "cli determinism", criterion_cli_determinism);

    if (failures == 0) {
        std::cout << "all criteria passed" << std::endl;
        return 0;
    }
    std::cout << failures << " criteria failed" << std::endl;
    return 1;
}
