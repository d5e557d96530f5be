#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "gridrl/config.hpp"
#include "gridrl/rng.hpp"
#include "gridrl/types.hpp"

namespace gridrl {

// Conditional next-token network: prompt tokens and the last `context_window`
// grid tokens are embedded, concatenated with a one-hot of the generation
// position, and passed through one tanh hidden layer to vocab logits. Small
// enough for coordinate-wise finite-difference checks.
struct PolicyArch {
    int grid_height = 4;
    int grid_width = 4;
    int vocab_size = 16;
    int prompt_len = prompt_vocab::kEncodedLength;
    int prompt_vocab_size = prompt_vocab::kSize;
    int context_window = 8;
    int embed_dim = 8;
    int hidden_dim = 32;

    bool operator==(const PolicyArch&) const = default;

    int seq_len() const { return grid_height * grid_width; }
    int input_dim() const { return (prompt_len + context_window) * embed_dim + seq_len(); }
    int pad_embed_row() const { return vocab_size; }  // image-embedding row for "before start"

    int64_t off_prompt_embed() const { return 0; }
    int64_t off_image_embed() const { return off_prompt_embed() + int64_t(prompt_vocab_size) * embed_dim; }
    int64_t off_w1() const { return off_image_embed() + int64_t(vocab_size + 1) * embed_dim; }
    int64_t off_b1() const { return off_w1() + int64_t(hidden_dim) * input_dim(); }
    int64_t off_w2() const { return off_b1() + hidden_dim; }
    int64_t off_b2() const { return off_w2() + int64_t(vocab_size) * hidden_dim; }
    int64_t param_count() const { return off_b2() + vocab_size; }

    static PolicyArch from_config(const VocabSpec& vocab, const PolicyConfig& cfg);
};

struct PolicyParams {
    PolicyArch arch;
    std::vector<double> theta;

    void validate() const;  // throws ValidationError on shape mismatch / non-finite entries
};

enum class SnapshotRole : int { old_policy = 0, reference = 1 };

// Frozen copy of the parameters; never aliases the live vector.
struct PolicySnapshot {
    PolicyArch arch;
    std::vector<double> theta;
    SnapshotRole role = SnapshotRole::old_policy;
};

PolicySnapshot make_snapshot(const PolicyParams& params, SnapshotRole role);
PolicyParams init_params(const PolicyArch& arch, double init_std, uint64_t seed);

// Raw conditional logits (no guidance, no temperature).
std::vector<double> logits(const PolicyArch& arch, std::span<const double> theta,
                           std::span<const int> prompt_tokens, std::span<const int> prefix);

// l_uncond + scale * (l_cond - l_uncond); scale == 1 short-circuits to l_cond.
std::vector<double> cfg_logits(const PolicyArch& arch, std::span<const double> theta,
                               std::span<const int> prompt_tokens, std::span<const int> prefix,
                               double scale);

// Per-step sampling distribution after guidance, temperature and top-k.
// `support` holds the token ids with nonzero probability in ascending order.
struct StepDistribution {
    std::vector<int> support;
    std::vector<double> logp;  // aligned with support
};

StepDistribution step_distribution(const PolicyArch& arch, std::span<const double> theta,
                                   std::span<const int> prompt_tokens, std::span<const int> prefix,
                                   const SamplerConfig& sampler);

struct SampledSequence {
    TokenGrid grid;
    std::vector<double> per_token_logprob;  // under the sampling-time distribution
    double total_logprob = 0.0;
};

SampledSequence sample_sequence(const PolicySnapshot& snapshot, std::span<const int> prompt_tokens,
                                const SamplerConfig& sampler, Rng& rng);

struct SequenceLogprob {
    double total = 0.0;
    std::vector<double> per_token;
};

// log-probability of a full grid under the sampler transform. Tokens that
// fall outside the step's top-k support are scored under the untruncated
// temperature/guidance softmax so importance ratios stay finite; this is the
// convention used for injected ground-truth sequences.
SequenceLogprob sequence_logprob(const PolicyArch& arch, std::span<const double> theta,
                                 std::span<const int> prompt_tokens, const TokenGrid& grid,
                                 const SamplerConfig& sampler);

// Accumulates d(sum_j weight[j] * logp_j)/dtheta into grad (same length as
// theta); returns the per-token log-probabilities as a by-product.
SequenceLogprob sequence_logprob_backward(const PolicyArch& arch, std::span<const double> theta,
                                          std::span<const int> prompt_tokens, const TokenGrid& grid,
                                          const SamplerConfig& sampler,
                                          std::span<const double> token_weights,
                                          std::span<double> grad);

// Supervised objective: mean per-token negative log-likelihood under the
// plain (untruncated, unguided) conditional softmax.
double sft_loss(const PolicyArch& arch, std::span<const double> theta,
                std::span<const int> prompt_tokens, const TokenGrid& grid);
double sft_loss_backward(const PolicyArch& arch, std::span<const double> theta,
                         std::span<const int> prompt_tokens, const TokenGrid& grid,
                         double weight, std::span<double> grad);

// Central finite differences; the independent oracle for gradient tests.
std::vector<double> finite_difference_gradient(
    const std::function<double(std::span<const double>)>& f, std::span<const double> theta,
    double h);

// Throws NumericalError naming the first offending coordinate.
void check_finite(std::span<const double> values, const char* what);

}  // namespace gridrl
