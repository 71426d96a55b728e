#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "shiftnorm/config.hpp"

using namespace shiftnorm;

namespace {

const char* kSample = R"(# sample configuration
seed = 42

[data]
classes = 4
per_class = 512   # with a trailing comment
ratio = 1.5
name = "mixture"
grid = [1, 2, 4.5]
families = ["shift", "scale"]
streaming = true
limit = inf
)";

} // namespace

TEST_CASE("parsing covers the value kinds") {
    Config cfg = Config::parse(kSample);
    CHECK(cfg.get_int("seed", 0) == 42);
    CHECK(cfg.get_int("data.classes", 0) == 4);
    CHECK(cfg.get_double("data.ratio", 0) == 1.5);
    CHECK(cfg.get_string("data.name", "") == "mixture");
    CHECK(cfg.get_double_list("data.grid", {}) == std::vector<double>{1, 2, 4.5});
    CHECK(cfg.get_string_list("data.families", {}) ==
          std::vector<std::string>{"shift", "scale"});
    CHECK(cfg.get_bool("data.streaming", false));
    CHECK(std::isinf(cfg.get_double("data.limit", 0)));
    CHECK(cfg.get_int("data.per_class", 0) == 512);
    cfg.ensure_all_consumed();
}

TEST_CASE("defaults apply when keys are absent") {
    Config cfg = Config::parse("");
    CHECK(cfg.get_int("seed", 7) == 7);
    CHECK(cfg.get_string("data.name", "fallback") == "fallback");
    cfg.ensure_all_consumed();
}

TEST_CASE("unknown keys are rejected by name") {
    Config cfg = Config::parse("[data]\nclasses = 3\ntypo_key = 1\n");
    CHECK(cfg.get_int("data.classes", 0) == 3);
    CHECK_THROWS_WITH_AS(cfg.ensure_all_consumed(), "config: unknown key 'data.typo_key'",
                         std::invalid_argument);
}

TEST_CASE("type mismatches are rejected") {
    Config cfg = Config::parse("[a]\nx = \"text\"\ny = 3\n");
    CHECK_THROWS_AS(cfg.get_int("a.x", 0), std::invalid_argument);
    CHECK_THROWS_AS(cfg.get_string("a.y", ""), std::invalid_argument);
    CHECK_THROWS_AS(Config::parse("v = [1, \"two\"]\n"), std::invalid_argument);
}

TEST_CASE("syntax errors carry line context") {
    CHECK_THROWS_AS(Config::parse("[broken\n"), std::invalid_argument);
    CHECK_THROWS_AS(Config::parse("novalue\n"), std::invalid_argument);
    CHECK_THROWS_AS(Config::parse("a = 1\na = 2\n"), std::invalid_argument);
    CHECK_THROWS_AS(Config::parse("k = \"open\n"), std::invalid_argument);
}

TEST_CASE("overrides and the resolved snapshot") {
    Config cfg = Config::parse("seed = 1\n[run]\ntrials = 500\n");
    cfg.set("seed", std::int64_t{9});
    CHECK(cfg.get_int("seed", 0) == 9);
    CHECK(cfg.get_int("run.trials", 0) == 500);
    CHECK(cfg.get_double("run.alpha", 0.05) == 0.05); // default, still recorded
    cfg.ensure_all_consumed();

    const std::string toml = cfg.resolved_toml();
    CHECK(toml.find("seed = 9") != std::string::npos);
    CHECK(toml.find("[run]") != std::string::npos);
    CHECK(toml.find("trials = 500") != std::string::npos);
    CHECK(toml.find("alpha = 0.05") != std::string::npos);

    // The snapshot parses back and yields the same values.
    Config back = Config::parse(toml);
    CHECK(back.get_int("seed", 0) == 9);
    CHECK(back.get_double("run.alpha", 0) == 0.05);
    CHECK(back.get_int("run.trials", 0) == 500);
    back.ensure_all_consumed();
}
