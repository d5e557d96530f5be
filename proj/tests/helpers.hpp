#pragma once

#include <string>

#include "gridrl/config.hpp"
#include "gridrl/rng.hpp"
#include "gridrl/types.hpp"
#include "gridrl/world.hpp"

namespace gridrl::test {

inline RunConfig tiny_config() {
    RunConfig cfg;
    cfg.seed = 42;
    return cfg;
}

inline Category random_category(Rng& rng) {
    return static_cast<Category>(rng.uniform_int(0, kNumCategories - 1));
}

// random valid scene via the production sampler, uniform over categories
inline PromptSpec random_spec(const WorldConfig& world, Rng& rng) {
    const SceneSampler sampler(world);
    return sampler.sample_scene(random_category(rng), rng);
}

inline std::string temp_path(const std::string& name) {
    return std::string(::getenv("TMPDIR") != nullptr ? ::getenv("TMPDIR") : "/tmp") + "/gridrl_test_" +
           name;
}

}  // namespace gridrl::test
