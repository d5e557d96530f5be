#include "gridrl/grpo.hpp"

#include <algorithm>
#include <cmath>

#include "gridrl/errors.hpp"

namespace gridrl {

namespace {
constexpr double kPi = 3.14159265358979323846;

GroupMember sampled_member(int slot, const PromptSpec& prompt, const PolicySnapshot& old_snap,
                           const SamplerConfig& sampler, uint64_t seed) {
    Rng rng(seed);
    SampledSequence seq = sample_sequence(old_snap, prompt.prompt_tokens, sampler, rng);
    GroupMember m;
    m.prompt_slot = slot;
    m.source = MemberSource::sampled;
    m.grid = std::move(seq.grid);
    m.logp_old = std::move(seq.per_token_logprob);
    return m;
}

GroupMember gt_member(int slot, const PromptSpec& prompt, const TokenGrid& grid,
                      const PolicySnapshot& old_snap, const SamplerConfig& sampler) {
    GroupMember m;
    m.prompt_slot = slot;
    m.source = MemberSource::ground_truth;
    m.grid = grid;
    m.logp_old =
        sequence_logprob(old_snap.arch, old_snap.theta, prompt.prompt_tokens, grid, sampler)
            .per_token;
    return m;
}

}  // namespace

std::vector<Group> build_group(TrainMode mode, const PairedRecord& rec,
                               const PolicySnapshot& snapshot_old, double p,
                               const SamplerConfig& sampler, int group_size,
                               uint64_t stream_seed) {
    if (!rec.verified) throw ValidationError("build_group requires a verified paired record");
    if (p < 0.0 || p > 1.0) throw ValidationError("p must be in [0, 1]");
    const int G = group_size;
    std::vector<Group> out;

    auto sample_side = [&](Group& g, int slot, const PromptSpec& prompt) {
        for (int m = 0; m < G; ++m) {
            g.members.push_back(sampled_member(
                slot, prompt, snapshot_old, sampler,
                derive_seed(stream_seed, "member", static_cast<uint64_t>(slot),
                            static_cast<uint64_t>(m))));
        }
    };

    switch (mode) {
        case TrainMode::pair_grpo:
        case TrainMode::no_gt_image: {
            Group g;
            g.provenance = GroupProvenance::pair;
            g.prompts = {&rec.prompt_1, &rec.prompt_2};
            sample_side(g, 0, rec.prompt_1);
            sample_side(g, 1, rec.prompt_2);
            if (mode == TrainMode::pair_grpo) {
                Rng gt_rng(derive_seed(stream_seed, "gt_draw"));
                if (gt_rng.bernoulli(p)) {
                    g.provenance = GroupProvenance::pair_with_gt;
                    g.members.push_back(gt_member(0, rec.prompt_1, rec.grid_1, snapshot_old, sampler));
                    g.members.push_back(gt_member(0, rec.prompt_1, rec.grid_2, snapshot_old, sampler));
                    g.members.push_back(gt_member(1, rec.prompt_2, rec.grid_1, snapshot_old, sampler));
                    g.members.push_back(gt_member(1, rec.prompt_2, rec.grid_2, snapshot_old, sampler));
                }
            }
            out.push_back(std::move(g));
            break;
        }
        case TrainMode::no_group_expanding: {
            for (int slot = 0; slot < 2; ++slot) {
                Group g;
                g.provenance = GroupProvenance::vanilla;
                g.prompts = {&rec.prompt_1, &rec.prompt_2};
                sample_side(g, slot, slot == 0 ? rec.prompt_1 : rec.prompt_2);
                out.push_back(std::move(g));
            }
            break;
        }
        case TrainMode::vanilla_grpo: {
            Rng side_rng(derive_seed(stream_seed, "side"));
            const int slot = side_rng.bernoulli(0.5) ? 1 : 0;
            Group g;
            g.provenance = GroupProvenance::vanilla;
            g.prompts = {&rec.prompt_1, &rec.prompt_2};
            sample_side(g, slot, slot == 0 ? rec.prompt_1 : rec.prompt_2);
            out.push_back(std::move(g));
            break;
        }
        case TrainMode::sft:
            throw ValidationError("sft mode does not build groups");
    }
    return out;
}

void compute_advantages(Group& group, double std_floor) {
    if (group.members.empty()) throw ValidationError("cannot compute advantages of empty group");
    double mean = 0.0;
    for (const auto& m : group.members) {
        if (!m.reward_set) throw ValidationError("advantage requested before rewards were set");
        mean += m.reward;
    }
    const double n = static_cast<double>(group.members.size());
    mean /= n;
    double var = 0.0;
    for (const auto& m : group.members) var += (m.reward - mean) * (m.reward - mean);
    const double std = std::sqrt(var / n);
    for (auto& m : group.members) {
        m.advantage = std < std_floor ? 0.0 : (m.reward - mean) / std;
        m.advantage_set = true;
    }
}

double kl_term(double logp_ref, double logp_cur) {
    const double log_ratio = std::clamp(logp_ref - logp_cur, -kKlLogRatioClamp, kKlLogRatioClamp);
    const double r = std::exp(log_ratio);
    return r - log_ratio - 1.0;
}

GrpoLossResult grpo_loss_from_logps(std::span<const MemberLogps> members, double eps, double beta,
                                    std::vector<std::vector<double>>* dloss_dlogp_cur) {
    if (members.empty()) throw ValidationError("grpo loss over empty member set");
    int64_t total_tokens = 0;
    for (const auto& m : members) {
        if (m.logp_cur.size() != m.logp_old.size() || m.logp_cur.size() != m.logp_ref.size()) {
            throw ValidationError("per-token log-probability length mismatch");
        }
        total_tokens += static_cast<int64_t>(m.logp_cur.size());
    }
    if (total_tokens == 0) throw ValidationError("grpo loss over zero tokens");

    const double inv_n = 1.0 / static_cast<double>(total_tokens);
    if (dloss_dlogp_cur != nullptr) {
        dloss_dlogp_cur->assign(members.size(), {});
    }

    GrpoLossResult out;
    double ratio_sum = 0.0;
    double kl_sum = 0.0;
    int64_t clipped = 0;
    double acc = 0.0;
    for (size_t mi = 0; mi < members.size(); ++mi) {
        const auto& m = members[mi];
        std::vector<double>* dvec = nullptr;
        if (dloss_dlogp_cur != nullptr) {
            (*dloss_dlogp_cur)[mi].assign(m.logp_cur.size(), 0.0);
            dvec = &(*dloss_dlogp_cur)[mi];
        }
        for (size_t j = 0; j < m.logp_cur.size(); ++j) {
            const double log_ratio =
                std::clamp(m.logp_cur[j] - m.logp_old[j], -kKlLogRatioClamp, kKlLogRatioClamp);
            const double rho = std::exp(log_ratio);
            const bool capped = rho > 1.0 + eps;
            const double surrogate = m.advantage * std::min(rho, 1.0 + eps);
            const double ref_log_ratio =
                std::clamp(m.logp_ref[j] - m.logp_cur[j], -kKlLogRatioClamp, kKlLogRatioClamp);
            const double r = std::exp(ref_log_ratio);
            const double kl = r - ref_log_ratio - 1.0;
            acc += surrogate - beta * kl;
            ratio_sum += rho;
            kl_sum += kl;
            clipped += capped ? 1 : 0;
            if (dvec != nullptr) {
                const double dsurr = capped ? 0.0 : m.advantage * rho;
                const double dkl = 1.0 - r;  // d(r - log r - 1)/d logp_cur
                (*dvec)[j] = -inv_n * (dsurr - beta * dkl);
            }
        }
    }
    out.loss = -inv_n * acc;
    out.stats.tokens = total_tokens;
    out.stats.mean_ratio = ratio_sum * inv_n;
    out.stats.mean_kl = kl_sum * inv_n;
    out.stats.clip_fraction = static_cast<double>(clipped) * inv_n;
    return out;
}

GrpoLossResult grpo_loss(const Group& group, const PolicyParams& params,
                         const PolicySnapshot& snapshot_ref, const SamplerConfig& sampler,
                         double eps, double beta, bool gt_in_loss, std::span<double> grad) {
    std::vector<MemberLogps> logps;
    std::vector<const GroupMember*> included;
    for (const auto& m : group.members) {
        if (!m.advantage_set) throw ValidationError("grpo loss requires advantages");
        if (!gt_in_loss && m.source == MemberSource::ground_truth) continue;
        included.push_back(&m);
        MemberLogps ml;
        ml.advantage = m.advantage;
        ml.logp_old = m.logp_old;
        ml.logp_cur = sequence_logprob(params.arch, params.theta,
                                       group.prompt_of(m).prompt_tokens, m.grid, sampler)
                          .per_token;
        ml.logp_ref = sequence_logprob(snapshot_ref.arch, snapshot_ref.theta,
                                       group.prompt_of(m).prompt_tokens, m.grid, sampler)
                          .per_token;
        logps.push_back(std::move(ml));
    }
    std::vector<std::vector<double>> dlogp;
    const GrpoLossResult result =
        grpo_loss_from_logps(logps, eps, beta, grad.empty() ? nullptr : &dlogp);
    if (!grad.empty()) {
        for (size_t mi = 0; mi < included.size(); ++mi) {
            sequence_logprob_backward(params.arch, params.theta,
                                      group.prompt_of(*included[mi]).prompt_tokens,
                                      included[mi]->grid, sampler, dlogp[mi], grad);
        }
    }
    return result;
}

double p_schedule(ScheduleKind kind, int plateaus, int64_t t, int64_t horizon) {
    if (horizon <= 0) return 0.0;
    if (t <= 0) return 1.0;
    if (t >= horizon) return 0.0;
    const double u = static_cast<double>(t) / static_cast<double>(horizon);
    switch (kind) {
        case ScheduleKind::linear: return 1.0 - u;
        case ScheduleKind::cosine: return 0.5 * (1.0 + std::cos(kPi * u));
        case ScheduleKind::step: {
            const int k = std::max(1, plateaus);
            return std::ceil((1.0 - u) * k) / static_cast<double>(k);
        }
    }
    return 0.0;
}

bool RefreshMonitor::observe(double reward) {
    history_.push_back(reward);
    const size_t need = static_cast<size_t>(2 * window_);
    if (history_.size() > need) history_.pop_front();
    if (history_.size() < need) return false;
    double prev = 0.0, cur = 0.0;
    for (int i = 0; i < window_; ++i) {
        prev += history_[static_cast<size_t>(i)];
        cur += history_[static_cast<size_t>(window_ + i)];
    }
    prev /= window_;
    cur /= window_;
    if (prev > 0.0 && (prev - cur) / prev >= drop_) {
        history_.clear();
        return true;
    }
    return false;
}

}  // namespace gridrl
