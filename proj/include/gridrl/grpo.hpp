#pragma once

#include <array>
#include <cstdint>
#include <deque>
#include <optional>
#include <span>
#include <vector>

#include "gridrl/config.hpp"
#include "gridrl/policy.hpp"
#include "gridrl/types.hpp"

namespace gridrl {

enum class MemberSource : int { sampled = 0, ground_truth = 1 };
enum class GroupProvenance : int { vanilla = 0, pair = 1, pair_with_gt = 2 };

struct GroupMember {
    int prompt_slot = 0;  // 0 -> first prompt of the record, 1 -> second
    MemberSource source = MemberSource::sampled;
    TokenGrid grid;
    std::vector<double> logp_old;  // per token, under the sampling-time policy
    double reward = 0.0;
    bool reward_set = false;
    double advantage = 0.0;
    bool advantage_set = false;
};

struct Group {
    GroupProvenance provenance = GroupProvenance::vanilla;
    std::array<const PromptSpec*, 2> prompts{nullptr, nullptr};
    std::vector<GroupMember> members;

    const PromptSpec& prompt_of(const GroupMember& m) const { return *prompts[static_cast<size_t>(m.prompt_slot)]; }
};

// Group construction per mode:
//   pair_grpo:          one merged group of 2G samples, plus the four
//                       ground-truth pairings with probability p (a single
//                       Bernoulli draw per group)
//   no_gt_image:        merged 2G group, never expanded
//   no_group_expanding: two per-prompt groups of G samples
//   vanilla_grpo:       one per-prompt group of G samples from a single
//                       (rng-chosen) side of the record
// Member sampling uses rng streams derived from stream_seed, so groups are
// reproducible regardless of scheduling. Throws ValidationError for
// unverified records. The returned groups alias rec's prompts.
std::vector<Group> build_group(TrainMode mode, const PairedRecord& rec,
                               const PolicySnapshot& snapshot_old, double p,
                               const SamplerConfig& sampler, int group_size, uint64_t stream_seed);

// Whole-group standardization: A_i = (R_i - mean) / population std; a group
// whose reward std falls below std_floor contributes no gradient (all zeros).
void compute_advantages(Group& group, double std_floor);

// r - log r - 1 with r = exp(logp_ref - logp_cur); log-ratio clamped to +/-30.
double kl_term(double logp_ref, double logp_cur);
inline constexpr double kKlLogRatioClamp = 30.0;

struct GrpoStats {
    double mean_ratio = 0.0;
    double clip_fraction = 0.0;  // tokens with ratio above 1 + eps
    double mean_kl = 0.0;
    int64_t tokens = 0;
};

struct MemberLogps {
    double advantage = 0.0;
    std::vector<double> logp_cur;
    std::vector<double> logp_old;
    std::vector<double> logp_ref;
};

struct GrpoLossResult {
    double loss = 0.0;
    GrpoStats stats;
};

// Token-level surrogate with the importance ratio capped at 1 + eps:
//   loss = -(1/sum|y_i|) * sum_ij [ A_i * min(rho_ij, 1 + eps) - beta * KL_ij ]
// The cap coincides with the clipped objective for non-negative advantages
// and reproduces the pinned reference arithmetic for negative ones.
GrpoLossResult grpo_loss_from_logps(std::span<const MemberLogps> members, double eps, double beta,
                                    std::vector<std::vector<double>>* dloss_dlogp_cur = nullptr);

// Full objective against live parameters; accumulates gradient when grad is
// non-empty. Members excluded by gt_in_loss=false still shape the advantage
// statistics but contribute no loss terms.
GrpoLossResult grpo_loss(const Group& group, const PolicyParams& params,
                         const PolicySnapshot& snapshot_ref, const SamplerConfig& sampler,
                         double eps, double beta, bool gt_in_loss, std::span<double> grad);

// Dynamic ground-truth injection probability: p(0) = 1, p(horizon) = 0,
// monotone non-increasing.
double p_schedule(ScheduleKind kind, int plateaus, int64_t t, int64_t horizon);

// Reference refresh trigger: fires when the reward moving average over the
// last `window` iterations drops by at least `drop` (relative) below the mean
// of the window before it.
class RefreshMonitor {
public:
    RefreshMonitor(int window, double drop) : window_(window), drop_(drop) {}

    // returns true when a refresh should fire; history resets on fire
    bool observe(double reward);
    void reset() { history_.clear(); }
    std::vector<double> history() const { return {history_.begin(), history_.end()}; }
    void restore(const std::vector<double>& h) { history_.assign(h.begin(), h.end()); }

private:
    int window_;
    double drop_;
    std::deque<double> history_;
};

}  // namespace gridrl
