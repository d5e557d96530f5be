#pragma once

#include <atomic>
#include <optional>
#include <string>
#include <vector>

#include "gridrl/config.hpp"
#include "gridrl/grpo.hpp"
#include "gridrl/optim.hpp"
#include "gridrl/policy.hpp"
#include "gridrl/world.hpp"

namespace gridrl {

inline constexpr const char* kCodeVersion = "gridrl 0.1.0";

struct Checkpoint {
    std::string stage;  // "sft" or "rl"
    PolicyArch arch;
    std::vector<double> theta;
    OptState opt;
    int64_t iteration = 0;  // next iteration to execute
    std::vector<double> ref_theta;
    std::vector<double> reward_history;  // refresh-monitor tail
    std::string config_digest;
    uint64_t seed = 0;
};

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

struct TrainIterMetrics {
    int64_t iter = 0;
    double mean_reward = 0.0;  // sampled members only
    double p = 0.0;
    double lr = 0.0;
    double clip_frac = 0.0;
    double mean_kl = 0.0;
    double wall_ms = 0.0;
    double mean_group_size = 0.0;
    bool ref_refreshed = false;
};

void run_sft(const RunConfig& cfg, const std::string& data_path, const std::string& ckpt_out,
             const std::string& metrics_out, std::atomic<int>* abort_flag = nullptr);

struct TrainOptions {
    std::string data_path;
    std::string init_checkpoint;    // SFT output; empty = fresh random init
    std::string resume_checkpoint;  // continues an interrupted run
    std::string checkpoint_out;
    std::string metrics_out;
    double lr_scale = 1.0;  // manual mid-run intervention, applied on top of the schedule
    bool refresh_reference_now = false;
    std::atomic<int>* abort_flag = nullptr;
    std::function<void(const TrainIterMetrics&)> on_metrics;  // optional observer
};

// Full RL loop: snapshot -> group construction -> rewards -> advantages ->
// capped-ratio update, with scheduled ground-truth injection, periodic
// checkpoints and reference refresh. Numerical failures flush a checkpoint
// before propagating.
void run_rl(const RunConfig& cfg, const TrainOptions& opts);

void run_eval_stage(const RunConfig& cfg, const std::string& ckpt_path,
                    const std::string& suite_path, const std::string& report_out);

struct StageInfo {
    std::string name;
    std::string status;  // "done", "failed", "skipped"
    std::vector<std::pair<std::string, std::string>> artifacts;  // path, digest
};

struct Manifest {
    std::string config_digest;
    std::string code_version;
    uint64_t seed = 0;
    std::string started_at;
    std::string finished_at;
    std::vector<StageInfo> stages;
};

// gen-data -> sft -> eval(sft) -> train -> eval(final) -> report, resumable
// stage by stage through the manifest. Holds an exclusive lock on out_dir.
Manifest run_pipeline(const RunConfig& cfg, const std::string& out_dir,
                      std::atomic<int>* abort_flag = nullptr);

void write_manifest(const std::string& path, const Manifest& m);
Manifest read_manifest(const std::string& path);

}  // namespace gridrl
