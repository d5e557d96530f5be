#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "gridrl/types.hpp"

namespace gridrl {

enum class TrainMode : int { pair_grpo = 0, no_group_expanding = 1, no_gt_image = 2, vanilla_grpo = 3, sft = 4 };
enum class ScheduleKind : int { linear = 0, cosine = 1, step = 2 };
enum class LrKind : int { linear_cosine = 0, cosine = 1 };

const char* to_string(TrainMode m);
TrainMode train_mode_from_string(const std::string& s);
const char* to_string(ScheduleKind k);
ScheduleKind schedule_kind_from_string(const std::string& s);
const char* to_string(LrKind k);
LrKind lr_kind_from_string(const std::string& s);

struct WorldConfig {
    VocabSpec vocab;
    double theta_pos = 0.99;
    double theta_neg = 0.90;
    std::array<double, kNumCategories> category_weights{0.25, 0.25, 0.25, 0.25};
    std::vector<std::string> categories{"overall_appearance", "color", "counting", "position"};
    int pairs = 5000;
    double free_rerand_prob = 0.3;
    double distractor_density = 0.25;
    int max_retries = 20;
    double eval_fraction = 0.25;  // content-hash share of prompts reserved for evaluation
};

struct RewardConfig {
    double noise_delta = 0.0;
    std::string endpoint;  // empty = local oracle
    int timeout_ms = 2000;
    int retries = 3;
    int max_inflight = 8;
};

struct PolicyConfig {
    int embed_dim = 8;
    int hidden_dim = 32;
    int context_window = 8;
    double init_std = 0.08;
};

struct SamplerConfig {
    double temperature = 1.0;
    int top_k = 16;
    double cfg_scale = 1.0;
};

struct LrScheduleConfig {
    double peak = 1.0e-5;
    double convert_lr = 2.0e-6;
    int convert_step = 300;
    double min_lr = 2.0e-7;
    int warmup_steps = 100;
    int total_steps = 2200;
    LrKind kind = LrKind::linear_cosine;
};

struct OptimizerConfig {
    double beta1 = 0.9;
    double beta2 = 0.95;
    double eps = 1.0e-6;
    double weight_decay = 0.05;
    double grad_clip = 1.0;
    LrScheduleConfig lr;
};

struct SftConfig {
    int steps = 360;
    int batch_examples = 32;
    double prompt_dropout = 0.1;
    OptimizerConfig optimizer;

    SftConfig() {
        optimizer.lr.kind = LrKind::cosine;
        optimizer.lr.peak = 4.0e-2;
        optimizer.lr.convert_lr = 4.0e-2;
        optimizer.lr.convert_step = 0;
        optimizer.lr.min_lr = 4.0e-4;
        optimizer.lr.warmup_steps = 20;
        optimizer.lr.total_steps = 360;
    }
};

struct RefreshConfig {
    bool auto_enabled = true;
    int window = 100;
    double drop = 0.05;
};

struct GrpoConfig {
    TrainMode mode = TrainMode::pair_grpo;
    int group_size = 7;  // G
    double clip_epsilon = 0.2;
    double kl_coeff = 0.01;
    ScheduleKind p_kind = ScheduleKind::linear;
    int p_steps = 4;  // plateaus for the step schedule
    int total_iterations = 2200;
    int batch_prompt_pairs = 8;
    double adv_std_floor = 1.0e-6;
    bool gt_in_loss = true;
    int checkpoint_every = 100;
    RefreshConfig refresh;
};

struct EvalConfig {
    int n_per_category = 50;
    SamplerConfig sampler;  // mirrors training inference settings by default
};

struct MetricsConfig {
    bool include_wall_ms = false;
};

struct RuntimeConfig {
    int threads = 0;  // 0 = hardware concurrency
};

struct RunConfig {
    uint64_t seed = 1234;
    WorldConfig world;
    RewardConfig reward;
    PolicyConfig policy;
    SamplerConfig sampler;
    SftConfig sft;
    GrpoConfig grpo;
    OptimizerConfig optimizer;  // reinforcement-learning stage
    EvalConfig eval;
    MetricsConfig metrics;
    RuntimeConfig runtime;

    void validate() const;  // throws ConfigError
    std::string digest() const;
};

void to_json(nlohmann::json& j, const RunConfig& c);
void from_json(const nlohmann::json& j, RunConfig& c);

RunConfig load_config_file(const std::string& path);
void save_config_file(const RunConfig& c, const std::string& path);

// Dotted-path overrides ("grpo.group_size", "optimizer.lr.peak", ...); the
// value string is parsed according to the field's JSON type.
void apply_override(RunConfig& c, const std::string& dotted_key, const std::string& value);
std::string query_config(const RunConfig& c, const std::string& dotted_key);

// Environment overrides: GRIDRL_GRPO__GROUP_SIZE=5 -> grpo.group_size=5.
void apply_env_overrides(RunConfig& c, const char* prefix = "GRIDRL_");

}  // namespace gridrl
