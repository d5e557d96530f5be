#include "gridrl/trainer.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <memory>

#include "gridrl/errors.hpp"
#include "gridrl/eval.hpp"
#include "gridrl/parallel.hpp"
#include "gridrl/remote_reward.hpp"
#include "gridrl/reward.hpp"
#include "gridrl/serialize.hpp"

namespace gridrl {

namespace {

using nlohmann::json;

json arch_to_json(const PolicyArch& a) {
    return json{{"grid_height", a.grid_height},
                {"grid_width", a.grid_width},
                {"vocab_size", a.vocab_size},
                {"prompt_len", a.prompt_len},
                {"prompt_vocab_size", a.prompt_vocab_size},
                {"context_window", a.context_window},
                {"embed_dim", a.embed_dim},
                {"hidden_dim", a.hidden_dim}};
}

PolicyArch arch_from_json(const json& j) {
    PolicyArch a;
    a.grid_height = j.at("grid_height").get<int>();
    a.grid_width = j.at("grid_width").get<int>();
    a.vocab_size = j.at("vocab_size").get<int>();
    a.prompt_len = j.at("prompt_len").get<int>();
    a.prompt_vocab_size = j.at("prompt_vocab_size").get<int>();
    a.context_window = j.at("context_window").get<int>();
    a.embed_dim = j.at("embed_dim").get<int>();
    a.hidden_dim = j.at("hidden_dim").get<int>();
    return a;
}

std::string vector_digest(const std::vector<double>& v) {
    return digest_hex(fnv1a64(json(v).dump()));
}

std::string now_iso8601() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

// Scores one (prompt, grid) pair; local oracle with optional seeded noise, or
// the remote judge when an endpoint is configured.
class RewardScorer {
public:
    RewardScorer(const RunConfig& cfg)
        : cfg_(cfg) {
        if (!cfg.reward.endpoint.empty()) {
            json vj = cfg.world.vocab;
            remote_ = std::make_unique<RemoteRewardClient>(cfg.reward, digest_hex(fnv1a64(vj.dump())));
        }
    }

    double score(const PromptSpec& prompt, const TokenGrid& grid, uint64_t noise_seed) const {
        if (remote_ != nullptr) {
            return remote_->score(prompt.surface_text, grid.tokens);
        }
        Rng rng(noise_seed);
        return noisy_reward_total(prompt, grid, cfg_.world.vocab, cfg_.reward.noise_delta, rng);
    }

private:
    const RunConfig& cfg_;
    std::unique_ptr<RemoteRewardClient> remote_;
};

void write_metrics_line(RecordWriter& writer, const TrainIterMetrics& m, bool include_wall) {
    json payload{{"iter", m.iter},          {"mean_reward", m.mean_reward}, {"p", m.p},
                 {"lr", m.lr},              {"clip_frac", m.clip_frac},     {"mean_kl", m.mean_kl}};
    if (include_wall) payload["wall_ms"] = m.wall_ms;
    writer.write("train_metrics", payload);
}

bool aborted(std::atomic<int>* flag) { return flag != nullptr && flag->load() != 0; }

}  // namespace

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
    RecordWriter writer(path);
    writer.write("checkpoint_meta", json{{"stage", ckpt.stage},
                                         {"seed", ckpt.seed},
                                         {"iteration", ckpt.iteration},
                                         {"config_digest", ckpt.config_digest},
                                         {"arch", arch_to_json(ckpt.arch)},
                                         {"theta_digest", vector_digest(ckpt.theta)},
                                         {"ref_digest", vector_digest(ckpt.ref_theta)},
                                         {"rng", json{{"seed", ckpt.seed}, {"iteration", ckpt.iteration}}}});
    writer.write("checkpoint_theta", json{{"values", ckpt.theta}});
    writer.write("checkpoint_opt",
                 json{{"m", ckpt.opt.m}, {"v", ckpt.opt.v}, {"step", ckpt.opt.step}});
    writer.write("checkpoint_ref_theta", json{{"values", ckpt.ref_theta}});
    writer.write("checkpoint_reward_history", json{{"values", ckpt.reward_history}});
    writer.close();
}

Checkpoint load_checkpoint(const std::string& path) {
    Checkpoint ckpt;
    bool meta = false, theta = false, opt = false;
    read_records(path, [&](const Record& r) {
        if (r.type == "checkpoint_meta") {
            ckpt.stage = r.payload.at("stage").get<std::string>();
            ckpt.seed = r.payload.at("seed").get<uint64_t>();
            ckpt.iteration = r.payload.at("iteration").get<int64_t>();
            ckpt.config_digest = r.payload.at("config_digest").get<std::string>();
            ckpt.arch = arch_from_json(r.payload.at("arch"));
            meta = true;
        } else if (r.type == "checkpoint_theta") {
            ckpt.theta = r.payload.at("values").get<std::vector<double>>();
            theta = true;
        } else if (r.type == "checkpoint_opt") {
            ckpt.opt.m = r.payload.at("m").get<std::vector<double>>();
            ckpt.opt.v = r.payload.at("v").get<std::vector<double>>();
            ckpt.opt.step = r.payload.at("step").get<int64_t>();
            opt = true;
        } else if (r.type == "checkpoint_ref_theta") {
            ckpt.ref_theta = r.payload.at("values").get<std::vector<double>>();
        } else if (r.type == "checkpoint_reward_history") {
            ckpt.reward_history = r.payload.at("values").get<std::vector<double>>();
        }
    });
    if (!meta || !theta || !opt) throw ValidationError("incomplete checkpoint: " + path);
    return ckpt;
}

void run_sft(const RunConfig& cfg, const std::string& data_path, const std::string& ckpt_out,
             const std::string& metrics_out, std::atomic<int>* abort_flag) {
    const auto records = read_dataset_file(data_path, cfg.world.vocab);
    struct Example {
        const PromptSpec* prompt;
        const TokenGrid* grid;
    };
    std::vector<Example> examples;
    examples.reserve(records.size() * 2);
    for (const auto& r : records) {
        examples.push_back({&r.prompt_1, &r.grid_1});
        examples.push_back({&r.prompt_2, &r.grid_2});
    }

    const PolicyArch arch = PolicyArch::from_config(cfg.world.vocab, cfg.policy);
    PolicyParams params = init_params(arch, cfg.policy.init_std, derive_seed(cfg.seed, "sft_init"));
    OptState opt = OptState::zeros(params.theta.size());
    const auto null_tokens = null_prompt_tokens();

    RecordWriter metrics(metrics_out);
    const int batch = std::min<int>(cfg.sft.batch_examples, static_cast<int>(examples.size()));
    std::vector<std::vector<double>> member_grads(static_cast<size_t>(batch));
    std::vector<double> losses(static_cast<size_t>(batch));
    std::vector<int> picks(static_cast<size_t>(batch));
    std::vector<char> dropped(static_cast<size_t>(batch));
    std::vector<double> grad(params.theta.size());

    for (int t = 0; t < cfg.sft.steps; ++t) {
        if (aborted(abort_flag)) break;
        Rng batch_rng(derive_seed(cfg.seed, "sft_batch", static_cast<uint64_t>(t)));
        for (int b = 0; b < batch; ++b) {
            picks[static_cast<size_t>(b)] = batch_rng.uniform_int(0, static_cast<int>(examples.size()) - 1);
            dropped[static_cast<size_t>(b)] = batch_rng.bernoulli(cfg.sft.prompt_dropout) ? 1 : 0;
        }
        parallel_for(batch, cfg.runtime.threads, [&](int b) {
            auto& g = member_grads[static_cast<size_t>(b)];
            g.assign(params.theta.size(), 0.0);
            const Example& ex = examples[static_cast<size_t>(picks[static_cast<size_t>(b)])];
            const std::vector<int>& tokens =
                dropped[static_cast<size_t>(b)] ? null_tokens : ex.prompt->prompt_tokens;
            losses[static_cast<size_t>(b)] = sft_loss_backward(
                arch, params.theta, tokens, *ex.grid, 1.0 / static_cast<double>(batch), g);
        });
        std::fill(grad.begin(), grad.end(), 0.0);
        double loss = 0.0;
        for (int b = 0; b < batch; ++b) {
            loss += losses[static_cast<size_t>(b)] / static_cast<double>(batch);
            const auto& g = member_grads[static_cast<size_t>(b)];
            for (size_t i = 0; i < grad.size(); ++i) grad[i] += g[i];
        }
        clip_global_norm(grad, cfg.sft.optimizer.grad_clip);
        const double lr = lr_at(cfg.sft.optimizer.lr, t);
        adamw_update(params.theta, grad, opt, lr, cfg.sft.optimizer);
        metrics.write("sft_metrics", json{{"iter", t}, {"loss", loss}, {"lr", lr}});
    }
    metrics.close();

    Checkpoint ckpt;
    ckpt.stage = "sft";
    ckpt.arch = arch;
    ckpt.theta = params.theta;
    ckpt.opt = opt;
    ckpt.iteration = cfg.sft.steps;
    ckpt.config_digest = cfg.digest();
    ckpt.seed = cfg.seed;
    save_checkpoint(ckpt_out, ckpt);
}

void run_rl(const RunConfig& cfg, const TrainOptions& opts) {
    const auto records = read_dataset_file(opts.data_path, cfg.world.vocab);
    const PolicyArch arch = PolicyArch::from_config(cfg.world.vocab, cfg.policy);

    PolicyParams params;
    params.arch = arch;
    OptState opt;
    std::vector<double> ref_theta;
    int64_t start_iter = 0;
    RefreshMonitor monitor(cfg.grpo.refresh.window, cfg.grpo.refresh.drop);

    if (!opts.resume_checkpoint.empty()) {
        Checkpoint ckpt = load_checkpoint(opts.resume_checkpoint);
        if (ckpt.stage != "rl") throw ResumeMismatchError("resume checkpoint is not an rl checkpoint");
        if (ckpt.config_digest != cfg.digest()) {
            throw ResumeMismatchError("config digest does not match resume checkpoint");
        }
        if (!(ckpt.arch == arch)) throw ResumeMismatchError("architecture mismatch on resume");
        params.theta = std::move(ckpt.theta);
        opt = std::move(ckpt.opt);
        ref_theta = std::move(ckpt.ref_theta);
        start_iter = ckpt.iteration;
        monitor.restore(ckpt.reward_history);
    } else if (!opts.init_checkpoint.empty()) {
        Checkpoint ckpt = load_checkpoint(opts.init_checkpoint);
        if (!(ckpt.arch == arch)) throw ResumeMismatchError("architecture mismatch in init checkpoint");
        params.theta = std::move(ckpt.theta);
        opt = OptState::zeros(params.theta.size());
        ref_theta = params.theta;
    } else {
        params = init_params(arch, cfg.policy.init_std, derive_seed(cfg.seed, "rl_init"));
        opt = OptState::zeros(params.theta.size());
        ref_theta = params.theta;
    }
    params.validate();
    if (opts.refresh_reference_now) ref_theta = params.theta;

    PolicySnapshot ref{arch, ref_theta, SnapshotRole::reference};

    auto flush_checkpoint = [&](int64_t next_iter) {
        Checkpoint ckpt;
        ckpt.stage = "rl";
        ckpt.arch = arch;
        ckpt.theta = params.theta;
        ckpt.opt = opt;
        ckpt.iteration = next_iter;
        ckpt.ref_theta = ref.theta;
        ckpt.reward_history = monitor.history();
        ckpt.config_digest = cfg.digest();
        ckpt.seed = cfg.seed;
        save_checkpoint(opts.checkpoint_out, ckpt);
    };

    const RewardScorer scorer(cfg);
    RecordWriter metrics(opts.metrics_out);
    const int64_t total = cfg.grpo.total_iterations;
    const int64_t p_horizon = total - 1;  // the last executed step runs with p = 0
    const int B = cfg.grpo.batch_prompt_pairs;

    std::vector<double> grad(params.theta.size());

    for (int64_t t = start_iter; t < total; ++t) {
        if (aborted(opts.abort_flag)) {
            flush_checkpoint(t);
            metrics.close();
            std::fprintf(stderr, "aborted at iteration %lld, checkpoint flushed\n",
                         static_cast<long long>(t));
            return;
        }
        const auto wall_start = std::chrono::steady_clock::now();
        const PolicySnapshot old_snap = make_snapshot(params, SnapshotRole::old_policy);
        const double p = p_schedule(cfg.grpo.p_kind, cfg.grpo.p_steps, t, p_horizon);

        Rng batch_rng(derive_seed(cfg.seed, "rl_batch", static_cast<uint64_t>(t)));
        std::vector<int> pair_idx(static_cast<size_t>(B));
        for (int b = 0; b < B; ++b) {
            pair_idx[static_cast<size_t>(b)] = batch_rng.uniform_int(0, static_cast<int>(records.size()) - 1);
        }

        // group construction (sampling under the frozen old policy)
        std::vector<std::vector<Group>> groups_by_pair(static_cast<size_t>(B));
        try {
            parallel_for(B, cfg.runtime.threads, [&](int b) {
                groups_by_pair[static_cast<size_t>(b)] = build_group(
                    cfg.grpo.mode, records[static_cast<size_t>(pair_idx[static_cast<size_t>(b)])],
                    old_snap, p, cfg.sampler, cfg.grpo.group_size,
                    derive_seed(cfg.seed, "rollout", static_cast<uint64_t>(t), static_cast<uint64_t>(b)));
            });
        } catch (const NumericalError&) {
            flush_checkpoint(t);
            metrics.close();
            throw;
        }
        std::vector<Group*> groups;
        for (auto& gs : groups_by_pair) {
            for (auto& g : gs) groups.push_back(&g);
        }

        // rewards (own prompt only), then advantages
        struct MemberRef {
            Group* group;
            GroupMember* member;
        };
        std::vector<MemberRef> all_members;
        for (Group* g : groups) {
            for (auto& m : g->members) all_members.push_back({g, &m});
        }
        parallel_for(static_cast<int>(all_members.size()), cfg.runtime.threads, [&](int i) {
            auto& ref_m = all_members[static_cast<size_t>(i)];
            ref_m.member->reward =
                scorer.score(ref_m.group->prompt_of(*ref_m.member), ref_m.member->grid,
                             derive_seed(cfg.seed, "reward_noise", static_cast<uint64_t>(t),
                                         static_cast<uint64_t>(i)));
            ref_m.member->reward_set = true;
        });
        for (Group* g : groups) compute_advantages(*g, cfg.grpo.adv_std_floor);

        double reward_sum = 0.0;
        int64_t sampled_count = 0;
        for (const auto& mr : all_members) {
            if (mr.member->source == MemberSource::sampled) {
                reward_sum += mr.member->reward;
                ++sampled_count;
            }
        }
        const double mean_reward = sampled_count > 0 ? reward_sum / static_cast<double>(sampled_count) : 0.0;

        // loss: per-group normalized objective, averaged over groups
        struct IncludedMember {
            Group* group;
            GroupMember* member;
            int group_index;
        };
        std::vector<IncludedMember> included;
        std::vector<std::vector<int>> group_members(groups.size());
        for (size_t gi = 0; gi < groups.size(); ++gi) {
            for (auto& m : groups[gi]->members) {
                if (!cfg.grpo.gt_in_loss && m.source == MemberSource::ground_truth) continue;
                group_members[gi].push_back(static_cast<int>(included.size()));
                included.push_back({groups[gi], &m, static_cast<int>(gi)});
            }
        }
        std::vector<MemberLogps> logps(included.size());
        try {
            parallel_for(static_cast<int>(included.size()), cfg.runtime.threads, [&](int i) {
                const auto& im = included[static_cast<size_t>(i)];
                auto& ml = logps[static_cast<size_t>(i)];
                ml.advantage = im.member->advantage;
                ml.logp_old = im.member->logp_old;
                ml.logp_cur = sequence_logprob(arch, params.theta,
                                               im.group->prompt_of(*im.member).prompt_tokens,
                                               im.member->grid, cfg.sampler)
                                  .per_token;
                ml.logp_ref = sequence_logprob(arch, ref.theta,
                                               im.group->prompt_of(*im.member).prompt_tokens,
                                               im.member->grid, cfg.sampler)
                                  .per_token;
            });

            const double inv_groups = 1.0 / static_cast<double>(groups.size());
            std::vector<std::vector<double>> token_weights(included.size());
            GrpoStats stats;
            int64_t total_tokens = 0;
            double ratio_sum = 0.0, kl_sum = 0.0, clip_sum = 0.0;
            for (size_t gi = 0; gi < groups.size(); ++gi) {
                std::vector<MemberLogps> group_logps;
                for (int idx : group_members[gi]) group_logps.push_back(logps[static_cast<size_t>(idx)]);
                std::vector<std::vector<double>> dlogp;
                const GrpoLossResult res = grpo_loss_from_logps(
                    group_logps, cfg.grpo.clip_epsilon, cfg.grpo.kl_coeff, &dlogp);
                for (size_t k = 0; k < group_members[gi].size(); ++k) {
                    auto& w = token_weights[static_cast<size_t>(group_members[gi][k])];
                    w = std::move(dlogp[k]);
                    for (double& x : w) x *= inv_groups;
                }
                ratio_sum += res.stats.mean_ratio * static_cast<double>(res.stats.tokens);
                kl_sum += res.stats.mean_kl * static_cast<double>(res.stats.tokens);
                clip_sum += res.stats.clip_fraction * static_cast<double>(res.stats.tokens);
                total_tokens += res.stats.tokens;
            }
            stats.tokens = total_tokens;
            stats.mean_ratio = ratio_sum / static_cast<double>(total_tokens);
            stats.mean_kl = kl_sum / static_cast<double>(total_tokens);
            stats.clip_fraction = clip_sum / static_cast<double>(total_tokens);

            std::vector<std::vector<double>> member_grads(included.size());
            parallel_for(static_cast<int>(included.size()), cfg.runtime.threads, [&](int i) {
                auto& g = member_grads[static_cast<size_t>(i)];
                g.assign(params.theta.size(), 0.0);
                const auto& im = included[static_cast<size_t>(i)];
                sequence_logprob_backward(arch, params.theta,
                                          im.group->prompt_of(*im.member).prompt_tokens,
                                          im.member->grid, cfg.sampler,
                                          token_weights[static_cast<size_t>(i)], g);
            });
            std::fill(grad.begin(), grad.end(), 0.0);
            for (const auto& g : member_grads) {
                for (size_t i = 0; i < grad.size(); ++i) grad[i] += g[i];
            }

            clip_global_norm(grad, cfg.optimizer.grad_clip);
            const double lr = lr_at(cfg.optimizer.lr, t) * opts.lr_scale;
            adamw_update(params.theta, grad, opt, lr, cfg.optimizer);

            TrainIterMetrics m;
            m.iter = t;
            m.mean_reward = mean_reward;
            m.p = p;
            m.lr = lr;
            m.clip_frac = stats.clip_fraction;
            m.mean_kl = stats.mean_kl;
            m.mean_group_size = static_cast<double>(all_members.size()) /
                                static_cast<double>(groups.size());
            m.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() -
                                                                  wall_start)
                            .count();
            if (cfg.grpo.refresh.auto_enabled && monitor.observe(mean_reward)) {
                ref.theta = params.theta;
                m.ref_refreshed = true;
            }
            write_metrics_line(metrics, m, cfg.metrics.include_wall_ms);
            if (opts.on_metrics) opts.on_metrics(m);
        } catch (const NumericalError&) {
            flush_checkpoint(t);
            metrics.close();
            throw;
        }

        if (cfg.grpo.checkpoint_every > 0 && (t + 1) % cfg.grpo.checkpoint_every == 0) {
            flush_checkpoint(t + 1);
        }
    }
    metrics.close();
    flush_checkpoint(total);
}

void run_eval_stage(const RunConfig& cfg, const std::string& ckpt_path,
                    const std::string& suite_path, const std::string& report_out) {
    const Checkpoint ckpt = load_checkpoint(ckpt_path);
    const EvalSuite suite = read_suite_file(suite_path, cfg.world.vocab);
    const PolicySnapshot snap{ckpt.arch, ckpt.theta, SnapshotRole::old_policy};
    const GridGenerator gen = policy_generator(snap, cfg.eval.sampler);
    EvalReport report = evaluate_suite(suite, gen, cfg.world.vocab,
                                       derive_seed(cfg.seed, "eval_images"), cfg.runtime.threads);
    report.suite_digest = file_digest(suite_path);
    report.checkpoint_digest = file_digest(ckpt_path);
    write_report_file(report_out, report);
}

void write_manifest(const std::string& path, const Manifest& m) {
    json stages = json::array();
    for (const auto& s : m.stages) {
        json artifacts = json::array();
        for (const auto& [p, d] : s.artifacts) {
            artifacts.push_back(json{{"path", p}, {"digest", d}});
        }
        stages.push_back(json{{"name", s.name}, {"status", s.status}, {"artifacts", artifacts}});
    }
    json j{{"config_digest", m.config_digest}, {"code_version", m.code_version},
           {"seed", m.seed},                   {"started_at", m.started_at},
           {"finished_at", m.finished_at},     {"stages", stages}};
    write_text_file(path, j.dump(2) + "\n");
}

Manifest read_manifest(const std::string& path) {
    json j;
    try {
        j = json::parse(read_text_file(path));
    } catch (const json::exception& e) {
        throw ValidationError(std::string("malformed manifest: ") + e.what());
    }
    Manifest m;
    m.config_digest = j.at("config_digest").get<std::string>();
    m.code_version = j.at("code_version").get<std::string>();
    m.seed = j.at("seed").get<uint64_t>();
    m.started_at = j.at("started_at").get<std::string>();
    m.finished_at = j.at("finished_at").get<std::string>();
    for (const auto& s : j.at("stages")) {
        StageInfo info;
        info.name = s.at("name").get<std::string>();
        info.status = s.at("status").get<std::string>();
        for (const auto& a : s.at("artifacts")) {
            info.artifacts.emplace_back(a.at("path").get<std::string>(),
                                        a.at("digest").get<std::string>());
        }
        m.stages.push_back(std::move(info));
    }
    return m;
}

namespace {

class DirLock {
public:
    explicit DirLock(const std::filesystem::path& dir) : path_(dir / ".gridrl.lock") {
        if (std::filesystem::exists(path_)) {
            throw ConfigError("output directory is locked by another run: " + path_.string());
        }
        write_text_file(path_.string(), "locked\n");
    }
    ~DirLock() {
        std::error_code ec;
        std::filesystem::remove(path_, ec);
    }

private:
    std::filesystem::path path_;
};

bool artifacts_intact(const StageInfo& s) {
    for (const auto& [path, digest] : s.artifacts) {
        try {
            if (file_digest(path) != digest) return false;
        } catch (const IoError&) {
            return false;
        }
    }
    return !s.artifacts.empty();
}

}  // namespace

Manifest run_pipeline(const RunConfig& cfg, const std::string& out_dir,
                      std::atomic<int>* abort_flag) {
    namespace fs = std::filesystem;
    const fs::path dir(out_dir);
    fs::create_directories(dir);
    DirLock lock(dir);

    const std::string manifest_path = (dir / "manifest.json").string();
    Manifest manifest;
    manifest.config_digest = cfg.digest();
    manifest.code_version = kCodeVersion;
    manifest.seed = cfg.seed;
    manifest.started_at = now_iso8601();

    std::vector<StageInfo> previous;
    if (fs::exists(manifest_path)) {
        const Manifest old = read_manifest(manifest_path);
        if (old.config_digest != manifest.config_digest) {
            throw ResumeMismatchError("existing manifest was produced with a different config");
        }
        previous = old.stages;
    }
    auto previously_done = [&](const std::string& name) -> const StageInfo* {
        for (const auto& s : previous) {
            if (s.name == name && s.status == "done" && artifacts_intact(s)) return &s;
        }
        return nullptr;
    };

    const std::string data_path = (dir / "train.records").string();
    const std::string suite_path = (dir / "eval_suite.records").string();
    const std::string sft_ckpt = (dir / "sft.ckpt").string();
    const std::string sft_metrics = (dir / "sft_metrics.records").string();
    const std::string sft_report = (dir / "report_sft.records").string();
    const std::string rl_ckpt = (dir / "rl.ckpt").string();
    const std::string rl_metrics = (dir / "train_metrics.records").string();
    const std::string final_report = (dir / "report_final.records").string();
    const std::string metrics_csv = (dir / "train_metrics.csv").string();
    const std::string report_txt = (dir / "report.txt").string();
    const std::string config_copy = (dir / "config.json").string();

    save_config_file(cfg, config_copy);

    auto run_stage = [&](const std::string& name, const std::vector<std::string>& artifacts,
                         const std::function<void()>& fn) {
        if (const StageInfo* done = previously_done(name)) {
            StageInfo s = *done;
            s.status = "skipped";
            manifest.stages.push_back(s);
            return;
        }
        StageInfo s;
        s.name = name;
        try {
            fn();
            s.status = "done";
            for (const auto& a : artifacts) s.artifacts.emplace_back(a, file_digest(a));
        } catch (...) {
            s.status = "failed";
            manifest.stages.push_back(s);
            manifest.finished_at = now_iso8601();
            write_manifest(manifest_path, manifest);
            throw;
        }
        manifest.stages.push_back(s);
        write_manifest(manifest_path, manifest);
    };

    run_stage("gen_data", {data_path, suite_path}, [&] {
        write_dataset_file(data_path, cfg.world, cfg.seed, cfg.world.pairs);
        const EvalSuite suite =
            build_eval_suite(cfg.world, derive_seed(cfg.seed, "eval_suite"), cfg.eval.n_per_category);
        write_suite_file(suite_path, suite);
    });
    run_stage("sft", {sft_ckpt, sft_metrics},
              [&] { run_sft(cfg, data_path, sft_ckpt, sft_metrics, abort_flag); });
    run_stage("eval_sft", {sft_report}, [&] { run_eval_stage(cfg, sft_ckpt, suite_path, sft_report); });
    run_stage("train", {rl_ckpt, rl_metrics}, [&] {
        TrainOptions opts;
        opts.data_path = data_path;
        opts.init_checkpoint = sft_ckpt;
        opts.checkpoint_out = rl_ckpt;
        opts.metrics_out = rl_metrics;
        opts.abort_flag = abort_flag;
        run_rl(cfg, opts);
    });
    run_stage("eval_final", {final_report},
              [&] { run_eval_stage(cfg, rl_ckpt, suite_path, final_report); });
    run_stage("report", {metrics_csv, report_txt}, [&] {
        metrics_to_csv(rl_metrics, metrics_csv);
        const EvalReport rep = read_report_file(final_report);
        write_text_file(report_txt, render_report_table(rep));
    });

    manifest.finished_at = now_iso8601();
    write_manifest(manifest_path, manifest);
    return manifest;
}

}  // namespace gridrl
