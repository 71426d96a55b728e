#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "shiftnorm/csv.hpp"

namespace fs = std::filesystem;
using shiftnorm::read_text_file;
using shiftnorm::write_text_file;

namespace {

struct CmdResult {
    int exit_code = -1;
    std::string out;
    std::string err;
};

const fs::path& work_dir() {
    static const fs::path dir = [] {
        const fs::path d = fs::temp_directory_path() / "shiftnorm_cli_test";
        fs::remove_all(d);
        fs::create_directories(d);
        return d;
    }();
    return dir;
}

CmdResult run_cli(const std::string& args) {
    const fs::path out_file = work_dir() / "stdout.txt";
    const fs::path err_file = work_dir() / "stderr.txt";
    const std::string cmd = std::string(SHIFTNORM_CLI_PATH) + " " + args + " > " +
                            out_file.string() + " 2> " + err_file.string();
    const int raw = std::system(cmd.c_str());
    CmdResult result;
    result.exit_code = WEXITSTATUS(raw);
    result.out = read_text_file(out_file.string());
    result.err = read_text_file(err_file.string());
    return result;
}

std::string fixture_path() {
    return std::string(SHIFTNORM_SOURCE_DIR) + "/data/alexnet_baseline.csv";
}

// Small training setup so CLI round trips stay fast.
std::string small_config() {
    static const std::string path = [] {
        const fs::path p = work_dir() / "small.toml";
        write_text_file(p.string(), R"(seed = 42

[data]
classes = 3
dim = 4
per_class_train = 128
per_class_eval = 128

[net]
hidden = [16, 16]
epochs = 8
learning_rate = 0.05
batch_size = 64
)");
        return p.string();
    }();
    return path;
}

} // namespace

TEST_CASE("mce of a table against itself prints 100.0") {
    const auto result = run_cli("mce " + fixture_path() + " " + fixture_path());
    CHECK(result.exit_code == 0);
    CHECK(result.out == "100.0\n");
}

TEST_CASE("mce reports the offending key on a missing row") {
    const std::string truncated = (work_dir() / "truncated.csv").string();
    std::istringstream full(read_text_file(fixture_path()));
    std::ostringstream kept;
    std::string line;
    while (std::getline(full, line))
        if (line.find("jpeg,3") != 0) kept << line << '\n';
    write_text_file(truncated, kept.str());

    const auto result = run_cli("mce " + fixture_path() + " " + truncated);
    CHECK(result.exit_code == 2);
    CHECK(result.err.find("jpeg") != std::string::npos);
}

TEST_CASE("unknown config keys exit with code 2 and the key name") {
    const std::string bad = (work_dir() / "bad.toml").string();
    write_text_file(bad, "[bounds]\ntirals = 20000\n");
    const auto result =
        run_cli("bounds --config " + bad + " --out " + (work_dir() / "bounds_bad").string());
    CHECK(result.exit_code == 2);
    CHECK(result.err.find("bounds.tirals") != std::string::npos);
}

TEST_CASE("bounds rejects too few trials") {
    const auto result =
        run_cli("bounds --trials 500 --out " + (work_dir() / "bounds_small").string());
    CHECK(result.exit_code == 2);
    CHECK(result.err.find("trials") != std::string::npos);
}

TEST_CASE("bounds emits the grid CSV and is byte-reproducible") {
    const std::string cfg = (work_dir() / "bounds.toml").string();
    write_text_file(cfg, R"(seed = 7

[bounds]
trials = 10000
mu_shift = [0.0, 1.0]
sigma_ratio = [1.0]
n = [8]
pseudo_n = [0.0, 8.0]
)");
    const std::string out_a = (work_dir() / "bounds_a").string();
    const std::string out_b = (work_dir() / "bounds_b").string();
    const auto first = run_cli("bounds --config " + cfg + " --out " + out_a);
    CHECK(first.exit_code == 0);
    CHECK(first.out.find("contained") != std::string::npos);
    const auto second = run_cli("bounds --config " + cfg + " --out " + out_b);
    CHECK(second.exit_code == 0);
    CHECK(read_text_file(out_a + "/bounds.csv") == read_text_file(out_b + "/bounds.csv"));
    CHECK(read_text_file(out_a + "/resolved.toml") == read_text_file(out_b + "/resolved.toml"));

    const std::string csv = read_text_file(out_a + "/bounds.csv");
    CHECK(csv.rfind("mu_shift,var_ratio,n,N,alpha,L,U,mc_estimate,mc_se,contained\n", 0) == 0);
}

TEST_CASE("alpha moves the upper bound but not the lower") {
    const std::string cfg = (work_dir() / "bounds_alpha.toml").string();
    write_text_file(cfg, R"(seed = 7

[bounds]
trials = 10000
mu_shift = [1.0]
sigma_ratio = [1.0]
n = [8]
pseudo_n = [8.0]
)");
    const std::string out_a = (work_dir() / "alpha_a").string();
    const std::string out_b = (work_dir() / "alpha_b").string();
    REQUIRE(run_cli("bounds --config " + cfg + " --out " + out_a).exit_code == 0);
    REQUIRE(run_cli("bounds --config " + cfg + " --alpha 0.2 --out " + out_b).exit_code == 0);

    const auto row = [](const std::string& text) {
        return shiftnorm::split_line(
            shiftnorm::split_line(text, '\n').at(1), ',');
    };
    const auto a = row(read_text_file(out_a + "/bounds.csv"));
    const auto b = row(read_text_file(out_b + "/bounds.csv"));
    CHECK(a.at(5) == b.at(5)); // L unchanged
    CHECK(a.at(6) != b.at(6)); // U moves with alpha
}

TEST_CASE("train writes a reproducible checkpoint and log") {
    const std::string out_a = (work_dir() / "train_a").string();
    const std::string out_b = (work_dir() / "train_b").string();
    const auto first = run_cli("train --config " + small_config() + " --out " + out_a);
    CHECK(first.exit_code == 0);
    CHECK(fs::exists(out_a + "/checkpoint.json"));
    CHECK(fs::exists(out_a + "/train_log.csv"));
    CHECK(fs::exists(out_a + "/resolved.toml"));

    const auto second = run_cli("train --config " + small_config() + " --out " + out_b);
    CHECK(second.exit_code == 0);
    CHECK(read_text_file(out_a + "/checkpoint.json") == read_text_file(out_b + "/checkpoint.json"));
    CHECK(read_text_file(out_a + "/train_log.csv") == read_text_file(out_b + "/train_log.csv"));
    // Identical except for the output paths echoed on the first line.
    CHECK(first.out.substr(first.out.find('\n')) == second.out.substr(second.out.find('\n')));
}

TEST_CASE("scan metric flag switches the metric") {
    const std::string train_out = (work_dir() / "train_a").string();
    if (!fs::exists(train_out + "/checkpoint.json")) {
        REQUIRE(run_cli("train --config " + small_config() + " --out " + train_out).exit_code ==
                0);
    }
    const std::string ckpt = train_out + "/checkpoint.json";
    const std::string out_w2n = (work_dir() / "scan_w2n").string();
    const std::string out_kl = (work_dir() / "scan_kl").string();
    const auto w2n = run_cli("scan --config " + small_config() + " --checkpoint " + ckpt +
                             " --out " + out_w2n);
    CHECK(w2n.exit_code == 0);
    const auto kl = run_cli("scan --config " + small_config() + " --checkpoint " + ckpt +
                            " --metric kl --out " + out_kl);
    CHECK(kl.exit_code == 0);
    CHECK(read_text_file(out_w2n + "/scan.tsv") != read_text_file(out_kl + "/scan.tsv"));
}

TEST_CASE("adapt then metrics produces a shift report") {
    const std::string train_out = (work_dir() / "train_a").string();
    if (!fs::exists(train_out + "/checkpoint.json")) {
        REQUIRE(run_cli("train --config " + small_config() + " --out " + train_out).exit_code ==
                0);
    }
    const std::string ckpt = train_out + "/checkpoint.json";
    const std::string adapt_out = (work_dir() / "adapt").string();
    const auto adapt = run_cli("adapt --config " + small_config() + " --checkpoint " + ckpt +
                               " --out " + adapt_out);
    CHECK(adapt.exit_code == 0);
    CHECK(fs::exists(adapt_out + "/source_stats.json"));
    CHECK(fs::exists(adapt_out + "/target_stats.json"));
    CHECK(fs::exists(adapt_out + "/adapted_stats.json"));

    const auto metrics = run_cli("metrics --source " + adapt_out + "/source_stats.json" +
                                 " --target " + adapt_out + "/target_stats.json --metric w2n" +
                                 " --out " + (work_dir() / "metrics").string());
    CHECK(metrics.exit_code == 0);
    CHECK(metrics.out.rfind("layer,metric,value\n", 0) == 0);
    CHECK(metrics.out.find("aggregate,w2n,") != std::string::npos);
}

TEST_CASE("eval prints the error and honors the mode") {
    const std::string train_out = (work_dir() / "train_a").string();
    if (!fs::exists(train_out + "/checkpoint.json")) {
        REQUIRE(run_cli("train --config " + small_config() + " --out " + train_out).exit_code ==
                0);
    }
    const std::string ckpt = train_out + "/checkpoint.json";
    const auto source = run_cli("eval --config " + small_config() + " --checkpoint " + ckpt +
                                " --out " + (work_dir() / "eval_src").string());
    CHECK(source.exit_code == 0);
    CHECK(source.out.rfind("top1 error:", 0) == 0);

    const std::string cfg_adapted = (work_dir() / "eval_adapted.toml").string();
    write_text_file(cfg_adapted, read_text_file(small_config()) +
                                     "\n[eval]\nmode = \"adapted\"\nfamily = \"shift\"\n"
                                     "severity = 4\n");
    const auto adapted = run_cli("eval --config " + cfg_adapted + " --checkpoint " + ckpt +
                                 " --out " + (work_dir() / "eval_adp").string());
    CHECK(adapted.exit_code == 0);
}

TEST_CASE("missing subcommand is a usage error") {
    const auto result = run_cli("");
    CHECK(result.exit_code == 2);
}
