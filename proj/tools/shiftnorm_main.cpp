// Command-line front end: train | adapt | eval | sweep | scan | predict |
// bounds | mce | metrics. All randomness flows from a single seed; every
// command that writes files also drops a resolved-config snapshot next to
// them, so runs can be reproduced byte for byte.

#include <cmath>
#include <filesystem>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "shiftnorm/bench.hpp"
#include "shiftnorm/bounds.hpp"
#include "shiftnorm/config.hpp"
#include "shiftnorm/corrupt.hpp"
#include "shiftnorm/csv.hpp"
#include "shiftnorm/metrics.hpp"
#include "shiftnorm/experiment.hpp"
#include "shiftnorm/nn.hpp"
#include "shiftnorm/parallel.hpp"
#include "shiftnorm/rng.hpp"

namespace fs = std::filesystem;
using namespace shiftnorm;

namespace {

struct CommonOptions {
    std::string config_path;
    std::string out_dir;
    std::optional<std::int64_t> seed;
};

void add_common(CLI::App* cmd, CommonOptions& opts, const std::string& default_out) {
    cmd->add_option("--config", opts.config_path, "TOML config file");
    cmd->add_option("--out", opts.out_dir, "output directory")->default_val(default_out);
    cmd->add_option("--seed", opts.seed, "master seed (overrides the config)");
}

// Every key any command understands; one config file can drive a whole
// experiment, and typos fail on load no matter which command runs.
const std::set<std::string> kKnownKeys{
    "seed",
    "data.classes", "data.dim", "data.per_class_train", "data.per_class_eval",
    "net.hidden", "net.epochs", "net.learning_rate", "net.batch_size", "net.bn_epsilon",
    "corrupt.shift", "corrupt.scale", "corrupt.gauss_noise", "corrupt.impulse",
    "corrupt.holdout_family",
    "adapt.family", "adapt.severity", "adapt.pseudo_n",
    "eval.family", "eval.severity", "eval.mode", "eval.pseudo_n",
    "sweep.families", "sweep.severities", "sweep.n_grid", "sweep.pseudo_n_grid",
    "scan.families", "scan.severities", "scan.metric",
    "metrics.metric",
    "bounds.alpha", "bounds.trials", "bounds.mu_shift", "bounds.sigma_ratio", "bounds.n",
    "bounds.pseudo_n",
};

Config load_config(const CommonOptions& opts) {
    Config cfg = opts.config_path.empty() ? Config::parse("") : Config::parse_file(opts.config_path);
    cfg.validate_keys(kKnownKeys);
    if (opts.seed) cfg.set("seed", *opts.seed);
    return cfg;
}

Network load_checkpoint(const std::string& path) { return Network::from_json(read_text_file(path)); }

std::vector<CorruptionSpec> full_grid(const std::vector<std::string>& families,
                                      const std::vector<double>& severities) {
    std::vector<CorruptionSpec> grid;
    for (const auto& name : families)
        for (double s : severities)
            grid.push_back({corruption_family_from_name(name), static_cast<int>(s)});
    return grid;
}

void finish_outputs(Config& cfg, const std::string& out_dir) {
    write_text_file(out_dir + "/resolved.toml", cfg.resolved_toml());
}

std::vector<LabeledStats> label_all(const std::vector<FeatureStats>& stats) {
    std::vector<LabeledStats> out;
    for (std::size_t k = 0; k < stats.size(); ++k)
        out.push_back({"bn" + std::to_string(k), stats[k]});
    return out;
}

std::vector<LabeledStats> source_layer_stats(const Network& net) {
    std::vector<LabeledStats> out;
    const auto bn_idx = net.bn_layer_indices();
    for (std::size_t k = 0; k < bn_idx.size(); ++k)
        out.push_back(
            {"bn" + std::to_string(k), std::get<BatchNormLayer>(net.layers[bn_idx[k]]).source_stats});
    return out;
}

// ---------------------------------------------------------------------------
// Commands.
// ---------------------------------------------------------------------------

int cmd_train(const CommonOptions& opts) {
    Config cfg = load_config(opts);
    const ExperimentSetup s = read_setup(cfg);
    fs::create_directories(opts.out_dir);

    const auto [train_data, eval_data] = setup_data(s);
    std::vector<EpochLog> log;
    const Network net = train_default_network(s, train_data, &log);

    write_text_file(opts.out_dir + "/checkpoint.json", net.to_json());
    std::ostringstream log_csv;
    log_csv << "epoch,loss,accuracy\n";
    for (const auto& e : log)
        log_csv << e.epoch << ',' << format_double(e.loss) << ',' << format_double(e.accuracy)
                << '\n';
    write_text_file(opts.out_dir + "/train_log.csv", log_csv.str());
    write_text_file(opts.out_dir + "/train_data.csv", train_data.to_csv());
    write_text_file(opts.out_dir + "/eval_data.csv", eval_data.to_csv());
    finish_outputs(cfg, opts.out_dir);

    const double train_acc = 1.0 - evaluate_error(net, train_data, SourceStatsMode{});
    const double eval_acc = 1.0 - evaluate_error(net, eval_data, SourceStatsMode{});
    std::cout << "checkpoint: " << opts.out_dir << "/checkpoint.json\n"
              << "train accuracy: " << format_double(train_acc) << '\n'
              << "eval accuracy: " << format_double(eval_acc) << '\n';
    return 0;
}

int cmd_adapt(const CommonOptions& opts, const std::string& checkpoint) {
    Config cfg = load_config(opts);
    const ExperimentSetup s = read_setup(cfg);
    const std::string family = cfg.get_string("adapt.family", "shift");
    const int severity = static_cast<int>(cfg.get_int("adapt.severity", 4));
    const double pseudo_n = cfg.get_double("adapt.pseudo_n", 0.0);
    fs::create_directories(opts.out_dir);

    const Network net = load_checkpoint(checkpoint);
    const auto [train_data, eval_data] = setup_data(s);
    Dataset target = eval_data;
    if (family != "clean") {
        const CorruptionSpec spec{corruption_family_from_name(family), severity};
        target = apply_corruption(eval_data, spec,
                                  Rng::derive(s.seed, seed_stream::kCorrupt ^ severity), s.tables);
        write_text_file(opts.out_dir + "/target_data.csv", target.to_csv());
        write_text_file(opts.out_dir + "/target_data.csv.meta.json",
                        corruption_sidecar_json(spec, Rng::derive(s.seed, seed_stream::kCorrupt ^ severity),
                                                s.tables));
    }

    const AdaptedStatsMode adapted = adapt_full(net, target.x, CombineConfig{pseudo_n, 0});
    std::vector<FeatureStats> combined;
    const auto bn_idx = net.bn_layer_indices();
    for (std::size_t k = 0; k < bn_idx.size(); ++k)
        combined.push_back(combine_stats(std::get<BatchNormLayer>(net.layers[bn_idx[k]]).source_stats,
                                         adapted.target_stats[k], adapted.combine));

    write_text_file(opts.out_dir + "/source_stats.json",
                    labeled_stats_to_json(source_layer_stats(net)));
    write_text_file(opts.out_dir + "/target_stats.json",
                    labeled_stats_to_json(label_all(adapted.target_stats)));
    write_text_file(opts.out_dir + "/adapted_stats.json",
                    labeled_stats_to_json(label_all(combined)));
    finish_outputs(cfg, opts.out_dir);
    std::cout << "adapted statistics written to " << opts.out_dir << '\n';
    return 0;
}

int cmd_eval(const CommonOptions& opts, const std::string& checkpoint) {
    Config cfg = load_config(opts);
    const ExperimentSetup s = read_setup(cfg);
    const std::string family = cfg.get_string("eval.family", "clean");
    const int severity = static_cast<int>(cfg.get_int("eval.severity", 4));
    const std::string mode_name = cfg.get_string("eval.mode", "source");
    const double pseudo_n = cfg.get_double("eval.pseudo_n", 0.0);
    fs::create_directories(opts.out_dir);

    const Network net = load_checkpoint(checkpoint);
    const auto [train_data, eval_data] = setup_data(s);
    Dataset target = eval_data;
    if (family != "clean")
        target = apply_corruption(eval_data, {corruption_family_from_name(family), severity},
                                  Rng::derive(s.seed, seed_stream::kCorrupt ^ severity), s.tables);

    double error = 0.0;
    if (mode_name == "source") {
        error = evaluate_error(net, target, SourceStatsMode{});
    } else if (mode_name == "train") {
        error = evaluate_error(net, target, TrainStatsMode{});
    } else if (mode_name == "adapted") {
        error = evaluate_error(net, target, adapt_full(net, target.x, CombineConfig{pseudo_n, 0}));
    } else {
        throw std::invalid_argument("config: eval.mode must be source | train | adapted");
    }

    write_text_file(opts.out_dir + "/error.txt", format_double(error) + "\n");
    finish_outputs(cfg, opts.out_dir);
    std::cout << "top1 error: " << format_double(error) << '\n';
    return 0;
}

int cmd_sweep(const CommonOptions& opts, const std::string& checkpoint) {
    Config cfg = load_config(opts);
    const ExperimentSetup s = read_setup(cfg);
    const auto families =
        cfg.get_string_list("sweep.families", {"shift", "scale", "gauss_noise", "impulse"});
    const auto severities = cfg.get_double_list("sweep.severities", {1, 2, 3, 4, 5});
    const auto n_grid_raw = cfg.get_double_list("sweep.n_grid", {2, 8, 32, 128, 0});
    const auto big_n_grid = cfg.get_double_list("sweep.pseudo_n_grid",
                                                {0, 1, 8, 64, std::numeric_limits<double>::infinity()});
    fs::create_directories(opts.out_dir);

    const Network net = load_checkpoint(checkpoint);
    const auto [train_data, eval_data] = setup_data(s);
    std::vector<std::size_t> n_grid;
    for (double n : n_grid_raw) n_grid.push_back(static_cast<std::size_t>(n));

    const SweepResult result = sweep(net, eval_data, full_grid(families, severities), n_grid,
                                     big_n_grid, Rng::derive(s.seed, seed_stream::kSweep), s.tables);
    write_text_file(opts.out_dir + "/sweep_mce.tsv", result.mce_table_tsv());
    write_text_file(opts.out_dir + "/sweep_cells.tsv", result.cells_tsv());
    finish_outputs(cfg, opts.out_dir);
    std::cout << "sweep tables written to " << opts.out_dir << '\n';
    return 0;
}

int cmd_scan(const CommonOptions& opts, const std::string& checkpoint,
             const std::string& metric_flag) {
    Config cfg = load_config(opts);
    const ExperimentSetup s = read_setup(cfg);
    std::string metric_name = cfg.get_string("scan.metric", "w2n");
    if (!metric_flag.empty()) metric_name = metric_flag;
    const auto families =
        cfg.get_string_list("scan.families", {"shift", "scale", "gauss_noise", "impulse"});
    const auto severities = cfg.get_double_list("scan.severities", {1, 2, 3, 4, 5});
    fs::create_directories(opts.out_dir);

    const Network net = load_checkpoint(checkpoint);
    const auto [train_data, eval_data] = setup_data(s);
    const ScanResult result =
        shift_error_scan(net, eval_data, full_grid(families, severities),
                         shift_metric_from_name(metric_name), Rng::derive(s.seed, seed_stream::kScan),
                         s.tables);
    write_text_file(opts.out_dir + "/scan.tsv", result.tsv());
    finish_outputs(cfg, opts.out_dir);
    std::cout << "pearson r: " << format_double(result.pearson_r) << '\n';
    return 0;
}

int cmd_predict(const CommonOptions& opts, const std::string& checkpoint) {
    Config cfg = load_config(opts);
    const ExperimentSetup s = read_setup(cfg);
    const std::string metric_name = cfg.get_string("scan.metric", "w2n");
    const auto families =
        cfg.get_string_list("scan.families", {"shift", "scale", "gauss_noise", "impulse"});
    const auto severities = cfg.get_double_list("scan.severities", {1, 2, 3, 4, 5});
    fs::create_directories(opts.out_dir);

    const Network net = load_checkpoint(checkpoint);
    const auto [train_data, eval_data] = setup_data(s);
    const ScanResult scan =
        shift_error_scan(net, eval_data, full_grid(families, severities),
                         shift_metric_from_name(metric_name), Rng::derive(s.seed, seed_stream::kScan),
                         s.tables);
    const auto rows = error_prediction_report(scan, s.holdout_family);
    write_text_file(opts.out_dir + "/prediction.tsv", prediction_report_tsv(rows));
    finish_outputs(cfg, opts.out_dir);

    double mean_delta = 0.0;
    for (const auto& row : rows) mean_delta += row.mean_abs_delta;
    mean_delta /= static_cast<double>(rows.size());
    std::cout << "holdout: " << s.holdout_family
              << "  mean abs delta: " << format_double(mean_delta) << '\n';
    return 0;
}

int cmd_bounds(const CommonOptions& opts, std::optional<double> alpha_flag,
               std::optional<std::int64_t> trials_flag) {
    Config cfg = load_config(opts);
    const std::uint64_t seed = static_cast<std::uint64_t>(cfg.get_int("seed", 44));
    if (alpha_flag) cfg.set("bounds.alpha", *alpha_flag);
    if (trials_flag) cfg.set("bounds.trials", *trials_flag);
    const double alpha = cfg.get_double("bounds.alpha", 0.05);
    const auto trials = cfg.get_int("bounds.trials", 100000);
    const auto mu_shifts = cfg.get_double_list("bounds.mu_shift", {0, 0.5, 1, 2, 4});
    const auto sigma_ratios = cfg.get_double_list("bounds.sigma_ratio", {0.5, 0.8, 1, 1.25, 2});
    const auto ns_raw = cfg.get_double_list("bounds.n", {2, 8, 32, 128, 512});
    const auto pseudo_ns = cfg.get_double_list("bounds.pseudo_n", {0, 8, 64, 512});
    if (trials < 10000) throw std::invalid_argument("config: bounds.trials must be >= 10000");
    fs::create_directories(opts.out_dir);

    std::vector<long long> ns;
    for (double n : ns_raw) ns.push_back(static_cast<long long>(n));
    const GridResult result =
        verify_bounds_grid(mu_shifts, sigma_ratios, ns, pseudo_ns, alpha, trials,
                           Rng::derive(seed, seed_stream::kBounds), thread_budget());
    write_text_file(opts.out_dir + "/bounds.csv", result.csv());
    finish_outputs(cfg, opts.out_dir);
    std::cout << "contained " << result.contained_count << '/' << result.cells.size() << " cells ("
              << format_double(100.0 * result.containment_rate()) << "%)\n";
    return 0;
}

int cmd_mce(const std::string& model_path, const std::string& baseline_path) {
    const ErrorTable model = ErrorTable::from_csv(read_text_file(model_path));
    const ErrorTable baseline = ErrorTable::from_csv(read_text_file(baseline_path));
    const double value = mce(model, baseline);
    std::ostringstream out;
    out.setf(std::ios::fixed);
    out.precision(1);
    out << value;
    std::cout << out.str() << '\n';
    return 0;
}

int cmd_metrics(const CommonOptions& opts, const std::string& source_path,
                const std::string& target_path, const std::string& metric_flag) {
    Config cfg = load_config(opts);
    std::string metric_name = cfg.get_string("metrics.metric", "w2n");
    if (!metric_flag.empty()) metric_name = metric_flag;
    cfg.get_int("seed", 44); // metrics is deterministic, consumed for the snapshot only

    const auto source = labeled_stats_from_json(read_text_file(source_path));
    const auto target = labeled_stats_from_json(read_text_file(target_path));
    const ShiftReport report = shift_report(source, target, shift_metric_from_name(metric_name));
    if (!opts.out_dir.empty()) {
        fs::create_directories(opts.out_dir);
        write_text_file(opts.out_dir + "/metrics.csv", report.to_csv());
        finish_outputs(cfg, opts.out_dir);
    }
    std::cout << report.to_csv();
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"batch-normalization statistics adaptation toolkit"};
    app.require_subcommand(1);

    CommonOptions train_opts, adapt_opts, eval_opts, sweep_opts, scan_opts, predict_opts,
        bounds_opts, metrics_opts;
    std::string adapt_ckpt, eval_ckpt, sweep_ckpt, scan_ckpt, predict_ckpt;
    std::string scan_metric, metrics_metric;
    std::string mce_model, mce_baseline, metrics_source, metrics_target;
    std::optional<double> bounds_alpha;
    std::optional<std::int64_t> bounds_trials;

    auto* train_cmd = app.add_subcommand("train", "train the default network");
    add_common(train_cmd, train_opts, "out/train");

    auto* adapt_cmd = app.add_subcommand("adapt", "collect and combine target statistics");
    add_common(adapt_cmd, adapt_opts, "out/adapt");
    adapt_cmd->add_option("--checkpoint", adapt_ckpt, "network checkpoint")->required();

    auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint");
    add_common(eval_cmd, eval_opts, "out/eval");
    eval_cmd->add_option("--checkpoint", eval_ckpt, "network checkpoint")->required();

    auto* sweep_cmd = app.add_subcommand("sweep", "batch-size x pseudo-batch-size sweep");
    add_common(sweep_cmd, sweep_opts, "out/sweep");
    sweep_cmd->add_option("--checkpoint", sweep_ckpt, "network checkpoint")->required();

    auto* scan_cmd = app.add_subcommand("scan", "covariate-shift vs error scan");
    add_common(scan_cmd, scan_opts, "out/scan");
    scan_cmd->add_option("--checkpoint", scan_ckpt, "network checkpoint")->required();
    scan_cmd->add_option("--metric", scan_metric, "w2 | w2n | kl | jeffrey");

    auto* predict_cmd = app.add_subcommand("predict", "holdout-family error prediction");
    add_common(predict_cmd, predict_opts, "out/predict");
    predict_cmd->add_option("--checkpoint", predict_ckpt, "network checkpoint")->required();

    auto* bounds_cmd = app.add_subcommand("bounds", "verify the analytical bounds grid");
    add_common(bounds_cmd, bounds_opts, "out/bounds");
    bounds_cmd->add_option("--alpha", bounds_alpha, "confidence parameter");
    bounds_cmd->add_option("--trials", bounds_trials, "Monte-Carlo trials per cell");

    auto* mce_cmd = app.add_subcommand("mce", "mean corruption error of a model table");
    mce_cmd->add_option("model", mce_model, "model error table CSV")->required();
    mce_cmd->add_option("baseline", mce_baseline, "baseline error table CSV")->required();

    auto* metrics_cmd = app.add_subcommand("metrics", "shift report between two stats files");
    add_common(metrics_cmd, metrics_opts, "out/metrics");
    metrics_cmd->add_option("--source", metrics_source, "source layer stats JSON")->required();
    metrics_cmd->add_option("--target", metrics_target, "target layer stats JSON")->required();
    metrics_cmd->add_option("--metric", metrics_metric, "w2 | w2n | kl | jeffrey");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (train_cmd->parsed()) return cmd_train(train_opts);
        if (adapt_cmd->parsed()) return cmd_adapt(adapt_opts, adapt_ckpt);
        if (eval_cmd->parsed()) return cmd_eval(eval_opts, eval_ckpt);
        if (sweep_cmd->parsed()) return cmd_sweep(sweep_opts, sweep_ckpt);
        if (scan_cmd->parsed()) return cmd_scan(scan_opts, scan_ckpt, scan_metric);
        if (predict_cmd->parsed()) return cmd_predict(predict_opts, predict_ckpt);
        if (bounds_cmd->parsed()) return cmd_bounds(bounds_opts, bounds_alpha, bounds_trials);
        if (mce_cmd->parsed()) return cmd_mce(mce_model, mce_baseline);
        if (metrics_cmd->parsed())
            return cmd_metrics(metrics_opts, metrics_source, metrics_target, metrics_metric);
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 2;
}
