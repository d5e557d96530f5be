#include <doctest.h>

#include <cstdlib>

#include "gridrl/config.hpp"
#include "gridrl/errors.hpp"
#include "gridrl/serialize.hpp"
#include "helpers.hpp"

using namespace gridrl;

TEST_CASE("defaults validate and round-trip through file") {
    RunConfig cfg;
    CHECK_NOTHROW(cfg.validate());
    const std::string path = test::temp_path("config.json");
    save_config_file(cfg, path);
    const RunConfig loaded = load_config_file(path);
    CHECK(loaded.digest() == cfg.digest());
    CHECK(loaded.grpo.group_size == 7);
    CHECK(loaded.grpo.clip_epsilon == doctest::Approx(0.2));
    CHECK(loaded.optimizer.beta1 == doctest::Approx(0.9));
    CHECK(loaded.optimizer.beta2 == doctest::Approx(0.95));
    CHECK(loaded.optimizer.eps == doctest::Approx(1e-6));
    CHECK(loaded.optimizer.lr.convert_step == 300);
}

TEST_CASE("partial config files merge over defaults") {
    const std::string path = test::temp_path("partial.json");
    write_text_file(path, R"({"seed": 7, "grpo": {"group_size": 3}})");
    const RunConfig cfg = load_config_file(path);
    CHECK(cfg.seed == 7);
    CHECK(cfg.grpo.group_size == 3);
    CHECK(cfg.grpo.clip_epsilon == doctest::Approx(0.2));  // untouched default
}

TEST_CASE("dotted overrides parse by leaf type") {
    RunConfig cfg;
    apply_override(cfg, "grpo.group_size", "5");
    CHECK(cfg.grpo.group_size == 5);
    apply_override(cfg, "optimizer.lr.peak", "0.5");
    CHECK(cfg.optimizer.lr.peak == doctest::Approx(0.5));
    apply_override(cfg, "grpo.mode", "vanilla_grpo");
    CHECK(cfg.grpo.mode == TrainMode::vanilla_grpo);
    apply_override(cfg, "metrics.include_wall_ms", "true");
    CHECK(cfg.metrics.include_wall_ms);
    apply_override(cfg, "world.categories", R"(["color","counting"])");
    CHECK(cfg.world.categories.size() == 2);
    CHECK(query_config(cfg, "grpo.group_size") == "5");
    CHECK(query_config(cfg, "grpo.mode") == "vanilla_grpo");

    CHECK_THROWS_AS(apply_override(cfg, "grpo.nonexistent", "1"), ConfigError);
    CHECK_THROWS_AS(apply_override(cfg, "grpo.clip_epsilon", "2.0"), ConfigError);  // invariant
    CHECK_THROWS_AS(apply_override(cfg, "grpo.mode", "bogus"), ConfigError);
}

TEST_CASE("environment overrides map GRIDRL_A__B to a.b") {
    RunConfig cfg;
    ::setenv("GRIDRLTEST_GRPO__GROUP_SIZE", "9", 1);
    ::setenv("GRIDRLTEST_SEED", "77", 1);
    apply_env_overrides(cfg, "GRIDRLTEST_");
    CHECK(cfg.grpo.group_size == 9);
    CHECK(cfg.seed == 77);
    ::unsetenv("GRIDRLTEST_GRPO__GROUP_SIZE");
    ::unsetenv("GRIDRLTEST_SEED");
}

TEST_CASE("invariant violations are config errors") {
    RunConfig cfg;
    cfg.grpo.clip_epsilon = 1.5;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = RunConfig{};
    cfg.sampler.top_k = 17;  // > vocab
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = RunConfig{};
    cfg.grpo.adv_std_floor = 0.0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = RunConfig{};
    cfg.world.category_weights = {0.5, 0.5, 0.5, 0.5};
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = RunConfig{};
    cfg.world.theta_neg = 0.995;  // >= theta_pos
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = RunConfig{};
    cfg.optimizer.lr.convert_step = 50;  // <= warmup
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("digest is sensitive to values and stable otherwise") {
    RunConfig a, b;
    CHECK(a.digest() == b.digest());
    b.grpo.group_size = 9;
    CHECK(a.digest() != b.digest());
}

TEST_CASE("missing config file is a config error") {
    CHECK_THROWS_AS(load_config_file("/nonexistent/path.json"), ConfigError);
}
