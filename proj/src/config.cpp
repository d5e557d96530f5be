#include "gridrl/config.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>

#include "gridrl/errors.hpp"
#include "gridrl/rng.hpp"
#include "gridrl/serialize.hpp"

extern "C" char** environ;

namespace gridrl {

using nlohmann::json;

namespace {
constexpr const char* kModeNames[] = {"pair_grpo", "no_group_expanding", "no_gt_image",
                                      "vanilla_grpo", "sft"};
constexpr const char* kScheduleNames[] = {"linear", "cosine", "step"};
constexpr const char* kLrKindNames[] = {"linear_cosine", "cosine"};
}  // namespace

const char* to_string(TrainMode m) { return kModeNames[static_cast<int>(m)]; }
TrainMode train_mode_from_string(const std::string& s) {
    for (int i = 0; i < 5; ++i) {
        if (s == kModeNames[i]) return static_cast<TrainMode>(i);
    }
    throw ConfigError("unknown mode: " + s);
}

const char* to_string(ScheduleKind k) { return kScheduleNames[static_cast<int>(k)]; }
ScheduleKind schedule_kind_from_string(const std::string& s) {
    for (int i = 0; i < 3; ++i) {
        if (s == kScheduleNames[i]) return static_cast<ScheduleKind>(i);
    }
    throw ConfigError("unknown schedule kind: " + s);
}

const char* to_string(LrKind k) { return kLrKindNames[static_cast<int>(k)]; }
LrKind lr_kind_from_string(const std::string& s) {
    for (int i = 0; i < 2; ++i) {
        if (s == kLrKindNames[i]) return static_cast<LrKind>(i);
    }
    throw ConfigError("unknown lr schedule kind: " + s);
}

void RunConfig::validate() const {
    try {
        world.vocab.validate();
    } catch (const ValidationError& e) {
        throw ConfigError(e.what());
    }
    if (!(world.theta_neg >= 0.0 && world.theta_neg < world.theta_pos && world.theta_pos <= 1.0)) {
        throw ConfigError("thresholds must satisfy 0 <= theta_neg < theta_pos <= 1");
    }
    double wsum = 0.0;
    for (double w : world.category_weights) {
        if (w < 0.0) throw ConfigError("category weight must be non-negative");
        wsum += w;
    }
    if (std::abs(wsum - 1.0) > 1e-9) throw ConfigError("category weights must sum to 1");
    if (world.pairs < 1) throw ConfigError("world.pairs must be positive");
    if (!(grpo.clip_epsilon > 0.0 && grpo.clip_epsilon < 1.0)) {
        throw ConfigError("clip epsilon must be in (0, 1)");
    }
    if (grpo.kl_coeff < 0.0) throw ConfigError("kl coefficient must be non-negative");
    if (grpo.adv_std_floor <= 0.0) throw ConfigError("advantage std floor must be positive");
    if (grpo.group_size < 1) throw ConfigError("group size must be positive");
    if (grpo.total_iterations < 1) throw ConfigError("total iterations must be positive");
    if (grpo.batch_prompt_pairs < 1) throw ConfigError("batch prompt pairs must be positive");
    auto check_sampler = [&](const SamplerConfig& s, const char* where) {
        if (s.temperature <= 0.0) throw ConfigError(std::string(where) + ": temperature must be positive");
        if (s.top_k < 1 || s.top_k > world.vocab.vocab_size()) {
            throw ConfigError(std::string(where) + ": top_k must be in [1, vocab_size]");
        }
    };
    check_sampler(sampler, "sampler");
    check_sampler(eval.sampler, "eval.sampler");
    auto check_lr = [](const LrScheduleConfig& lr, const char* where) {
        if (!(lr.min_lr <= lr.convert_lr && lr.convert_lr <= lr.peak)) {
            throw ConfigError(std::string(where) + ": need min_lr <= convert_lr <= peak");
        }
        if (lr.kind == LrKind::linear_cosine &&
            !(lr.warmup_steps < lr.convert_step && lr.convert_step < lr.total_steps)) {
            throw ConfigError(std::string(where) + ": need warmup < convert_step < total_steps");
        }
        if (lr.warmup_steps < 0 || lr.total_steps < 1) {
            throw ConfigError(std::string(where) + ": invalid step counts");
        }
    };
    check_lr(optimizer.lr, "optimizer.lr");
    check_lr(sft.optimizer.lr, "sft.optimizer.lr");
    if (eval.n_per_category < 1) throw ConfigError("eval.n_per_category must be positive");
    if (world.eval_fraction <= 0.0 || world.eval_fraction >= 1.0) {
        throw ConfigError("world.eval_fraction must be in (0, 1)");
    }
    for (const auto& c : world.categories) category_from_string(c);  // throws on bad name
    if (world.categories.empty()) throw ConfigError("at least one category required");
}

namespace {

void to_json(json& j, const LrScheduleConfig& c) {
    j = json{{"peak", c.peak},
             {"convert_lr", c.convert_lr},
             {"convert_step", c.convert_step},
             {"min_lr", c.min_lr},
             {"warmup_steps", c.warmup_steps},
             {"total_steps", c.total_steps},
             {"kind", to_string(c.kind)}};
}

void from_json(const json& j, LrScheduleConfig& c) {
    c.peak = j.at("peak").get<double>();
    c.convert_lr = j.at("convert_lr").get<double>();
    c.convert_step = j.at("convert_step").get<int>();
    c.min_lr = j.at("min_lr").get<double>();
    c.warmup_steps = j.at("warmup_steps").get<int>();
    c.total_steps = j.at("total_steps").get<int>();
    c.kind = lr_kind_from_string(j.at("kind").get<std::string>());
}

void to_json(json& j, const OptimizerConfig& c) {
    json lr;
    to_json(lr, c.lr);
    j = json{{"beta1", c.beta1},       {"beta2", c.beta2},
             {"eps", c.eps},           {"weight_decay", c.weight_decay},
             {"grad_clip", c.grad_clip}, {"lr", lr}};
}

void from_json(const json& j, OptimizerConfig& c) {
    c.beta1 = j.at("beta1").get<double>();
    c.beta2 = j.at("beta2").get<double>();
    c.eps = j.at("eps").get<double>();
    c.weight_decay = j.at("weight_decay").get<double>();
    c.grad_clip = j.at("grad_clip").get<double>();
    from_json(j.at("lr"), c.lr);
}

void to_json(json& j, const SamplerConfig& c) {
    j = json{{"temperature", c.temperature}, {"top_k", c.top_k}, {"cfg_scale", c.cfg_scale}};
}

void from_json(const json& j, SamplerConfig& c) {
    c.temperature = j.at("temperature").get<double>();
    c.top_k = j.at("top_k").get<int>();
    c.cfg_scale = j.at("cfg_scale").get<double>();
}

}  // namespace

void to_json(json& j, const RunConfig& c) {
    json world{{"vocab", c.world.vocab},
               {"theta_pos", c.world.theta_pos},
               {"theta_neg", c.world.theta_neg},
               {"category_weights", c.world.category_weights},
               {"categories", c.world.categories},
               {"pairs", c.world.pairs},
               {"free_rerand_prob", c.world.free_rerand_prob},
               {"distractor_density", c.world.distractor_density},
               {"max_retries", c.world.max_retries},
               {"eval_fraction", c.world.eval_fraction}};
    json reward{{"noise_delta", c.reward.noise_delta},
                {"endpoint", c.reward.endpoint},
                {"timeout_ms", c.reward.timeout_ms},
                {"retries", c.reward.retries},
                {"max_inflight", c.reward.max_inflight}};
    json policy{{"embed_dim", c.policy.embed_dim},
                {"hidden_dim", c.policy.hidden_dim},
                {"context_window", c.policy.context_window},
                {"init_std", c.policy.init_std}};
    json sampler;
    to_json(sampler, c.sampler);
    json sft_opt;
    to_json(sft_opt, c.sft.optimizer);
    json sft{{"steps", c.sft.steps},
             {"batch_examples", c.sft.batch_examples},
             {"prompt_dropout", c.sft.prompt_dropout},
             {"optimizer", sft_opt}};
    json grpo{{"mode", to_string(c.grpo.mode)},
              {"group_size", c.grpo.group_size},
              {"clip_epsilon", c.grpo.clip_epsilon},
              {"kl_coeff", c.grpo.kl_coeff},
              {"p_kind", to_string(c.grpo.p_kind)},
              {"p_steps", c.grpo.p_steps},
              {"total_iterations", c.grpo.total_iterations},
              {"batch_prompt_pairs", c.grpo.batch_prompt_pairs},
              {"adv_std_floor", c.grpo.adv_std_floor},
              {"gt_in_loss", c.grpo.gt_in_loss},
              {"checkpoint_every", c.grpo.checkpoint_every},
              {"refresh", json{{"auto_enabled", c.grpo.refresh.auto_enabled},
                               {"window", c.grpo.refresh.window},
                               {"drop", c.grpo.refresh.drop}}}};
    json optimizer;
    to_json(optimizer, c.optimizer);
    json eval_sampler;
    to_json(eval_sampler, c.eval.sampler);
    json eval{{"n_per_category", c.eval.n_per_category}, {"sampler", eval_sampler}};
    j = json{{"seed", c.seed},
             {"world", world},
             {"reward", reward},
             {"policy", policy},
             {"sampler", sampler},
             {"sft", sft},
             {"grpo", grpo},
             {"optimizer", optimizer},
             {"eval", eval},
             {"metrics", json{{"include_wall_ms", c.metrics.include_wall_ms}}},
             {"runtime", json{{"threads", c.runtime.threads}}}};
}

void from_json(const json& j, RunConfig& c) {
    c.seed = j.at("seed").get<uint64_t>();
    const auto& w = j.at("world");
    c.world.vocab = w.at("vocab").get<VocabSpec>();
    c.world.theta_pos = w.at("theta_pos").get<double>();
    c.world.theta_neg = w.at("theta_neg").get<double>();
    c.world.category_weights = w.at("category_weights").get<std::array<double, kNumCategories>>();
    c.world.categories = w.at("categories").get<std::vector<std::string>>();
    c.world.pairs = w.at("pairs").get<int>();
    c.world.free_rerand_prob = w.at("free_rerand_prob").get<double>();
    c.world.distractor_density = w.at("distractor_density").get<double>();
    c.world.max_retries = w.at("max_retries").get<int>();
    c.world.eval_fraction = w.at("eval_fraction").get<double>();
    const auto& r = j.at("reward");
    c.reward.noise_delta = r.at("noise_delta").get<double>();
    c.reward.endpoint = r.at("endpoint").get<std::string>();
    c.reward.timeout_ms = r.at("timeout_ms").get<int>();
    c.reward.retries = r.at("retries").get<int>();
    c.reward.max_inflight = r.at("max_inflight").get<int>();
    const auto& p = j.at("policy");
    c.policy.embed_dim = p.at("embed_dim").get<int>();
    c.policy.hidden_dim = p.at("hidden_dim").get<int>();
    c.policy.context_window = p.at("context_window").get<int>();
    c.policy.init_std = p.at("init_std").get<double>();
    from_json(j.at("sampler"), c.sampler);
    const auto& s = j.at("sft");
    c.sft.steps = s.at("steps").get<int>();
    c.sft.batch_examples = s.at("batch_examples").get<int>();
    c.sft.prompt_dropout = s.at("prompt_dropout").get<double>();
    from_json(s.at("optimizer"), c.sft.optimizer);
    const auto& g = j.at("grpo");
    c.grpo.mode = train_mode_from_string(g.at("mode").get<std::string>());
    c.grpo.group_size = g.at("group_size").get<int>();
    c.grpo.clip_epsilon = g.at("clip_epsilon").get<double>();
    c.grpo.kl_coeff = g.at("kl_coeff").get<double>();
    c.grpo.p_kind = schedule_kind_from_string(g.at("p_kind").get<std::string>());
    c.grpo.p_steps = g.at("p_steps").get<int>();
    c.grpo.total_iterations = g.at("total_iterations").get<int>();
    c.grpo.batch_prompt_pairs = g.at("batch_prompt_pairs").get<int>();
    c.grpo.adv_std_floor = g.at("adv_std_floor").get<double>();
    c.grpo.gt_in_loss = g.at("gt_in_loss").get<bool>();
    c.grpo.checkpoint_every = g.at("checkpoint_every").get<int>();
    c.grpo.refresh.auto_enabled = g.at("refresh").at("auto_enabled").get<bool>();
    c.grpo.refresh.window = g.at("refresh").at("window").get<int>();
    c.grpo.refresh.drop = g.at("refresh").at("drop").get<double>();
    from_json(j.at("optimizer"), c.optimizer);
    const auto& e = j.at("eval");
    c.eval.n_per_category = e.at("n_per_category").get<int>();
    from_json(e.at("sampler"), c.eval.sampler);
    c.metrics.include_wall_ms = j.at("metrics").at("include_wall_ms").get<bool>();
    c.runtime.threads = j.at("runtime").at("threads").get<int>();
}

std::string RunConfig::digest() const {
    json j;
    to_json(j, *this);
    return digest_hex(fnv1a64(j.dump()));
}

RunConfig load_config_file(const std::string& path) {
    json j;
    try {
        j = json::parse(read_text_file(path));
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config parse error: ") + e.what());
    } catch (const IoError& e) {
        throw ConfigError(e.what());
    }
    RunConfig c;
    json defaults;
    to_json(defaults, c);
    defaults.merge_patch(j);  // file values override defaults, section by section
    try {
        from_json(defaults, c);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config field error: ") + e.what());
    }
    c.validate();
    return c;
}

void save_config_file(const RunConfig& c, const std::string& path) {
    json j;
    to_json(j, c);
    write_text_file(path, j.dump(2) + "\n");
}

void apply_override(RunConfig& c, const std::string& dotted_key, const std::string& value) {
    json j;
    to_json(j, c);
    json* node = &j;
    std::string key = dotted_key;
    size_t pos;
    while ((pos = key.find('.')) != std::string::npos) {
        const std::string head = key.substr(0, pos);
        if (!node->contains(head)) throw ConfigError("unknown config key: " + dotted_key);
        node = &(*node)[head];
        key = key.substr(pos + 1);
    }
    if (!node->contains(key)) throw ConfigError("unknown config key: " + dotted_key);
    json& leaf = (*node)[key];
    try {
        if (leaf.is_string()) {
            leaf = value;
        } else if (leaf.is_boolean()) {
            if (value == "true" || value == "1") {
                leaf = true;
            } else if (value == "false" || value == "0") {
                leaf = false;
            } else {
                throw ConfigError("expected boolean for " + dotted_key);
            }
        } else if (leaf.is_number_integer() || leaf.is_number_unsigned()) {
            leaf = json::parse(value);
            if (!leaf.is_number()) throw ConfigError("expected number for " + dotted_key);
        } else if (leaf.is_number_float()) {
            leaf = std::stod(value);
        } else if (leaf.is_array()) {
            leaf = json::parse(value);
            if (!leaf.is_array()) throw ConfigError("expected array for " + dotted_key);
        } else {
            throw ConfigError("cannot override structured key: " + dotted_key);
        }
    } catch (const std::exception& e) {
        throw ConfigError("bad value for " + dotted_key + ": " + e.what());
    }
    try {
        from_json(j, c);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config field error: ") + e.what());
    }
    c.validate();
}

std::string query_config(const RunConfig& c, const std::string& dotted_key) {
    json j;
    to_json(j, c);
    const json* node = &j;
    std::string key = dotted_key;
    size_t pos;
    while ((pos = key.find('.')) != std::string::npos) {
        const std::string head = key.substr(0, pos);
        if (!node->contains(head)) throw ConfigError("unknown config key: " + dotted_key);
        node = &(*node).at(head);
        key = key.substr(pos + 1);
    }
    if (!node->contains(key)) throw ConfigError("unknown config key: " + dotted_key);
    const json& leaf = node->at(key);
    if (leaf.is_string()) return leaf.get<std::string>();
    return leaf.dump();
}

void apply_env_overrides(RunConfig& c, const char* prefix) {
    const std::string pre(prefix);
    for (char** env = environ; *env != nullptr; ++env) {
        const std::string entry(*env);
        if (entry.rfind(pre, 0) != 0) continue;
        const size_t eq = entry.find('=');
        if (eq == std::string::npos) continue;
        std::string key = entry.substr(pre.size(), eq - pre.size());
        const std::string value = entry.substr(eq + 1);
        std::transform(key.begin(), key.end(), key.begin(),
                       [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
        size_t sep;
        while ((sep = key.find("__")) != std::string::npos) key.replace(sep, 2, ".");
        apply_override(c, key, value);
    }
}

}  // namespace gridrl
