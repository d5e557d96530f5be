#include "gridrl/policy.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "gridrl/errors.hpp"

namespace gridrl {

PolicyArch PolicyArch::from_config(const VocabSpec& vocab, const PolicyConfig& cfg) {
    PolicyArch a;
    a.grid_height = vocab.grid_height;
    a.grid_width = vocab.grid_width;
    a.vocab_size = vocab.vocab_size();
    a.context_window = cfg.context_window;
    a.embed_dim = cfg.embed_dim;
    a.hidden_dim = cfg.hidden_dim;
    return a;
}

void PolicyParams::validate() const {
    if (static_cast<int64_t>(theta.size()) != arch.param_count()) {
        throw ValidationError("parameter vector length does not match architecture");
    }
    check_finite(theta, "theta");
}

PolicySnapshot make_snapshot(const PolicyParams& params, SnapshotRole role) {
    return PolicySnapshot{params.arch, params.theta, role};
}

PolicyParams init_params(const PolicyArch& arch, double init_std, uint64_t seed) {
    PolicyParams p;
    p.arch = arch;
    p.theta.resize(static_cast<size_t>(arch.param_count()));
    Rng rng(derive_seed(seed, "policy_init"));
    for (double& v : p.theta) v = rng.gaussian(0.0, init_std);
    return p;
}

void check_finite(std::span<const double> values, const char* what) {
    for (size_t i = 0; i < values.size(); ++i) {
        if (!std::isfinite(values[i])) {
            throw NumericalError(std::string(what) + " has non-finite entry at coordinate " +
                                 std::to_string(i));
        }
    }
}

namespace {

// Activations of one forward pass, kept for the backward sweep.
struct Forward {
    std::vector<double> x;
    std::vector<double> hidden;  // post-tanh
    std::vector<double> logits;
    std::vector<int> prompt_ids;
    std::vector<int> window_rows;  // image-embedding rows feeding the context slots
    int pos = 0;
};

void forward_pass(const PolicyArch& a, std::span<const double> theta,
                  std::span<const int> prompt_tokens, std::span<const int> prefix, Forward& f) {
    if (static_cast<int>(prompt_tokens.size()) != a.prompt_len) {
        throw ValidationError("prompt token length does not match architecture");
    }
    const int pos = static_cast<int>(prefix.size());
    if (pos >= a.seq_len()) throw ValidationError("prefix too long");
    const int d = a.embed_dim;
    const int n_in = a.input_dim();

    f.x.assign(static_cast<size_t>(n_in), 0.0);
    f.prompt_ids.assign(prompt_tokens.begin(), prompt_tokens.end());
    f.window_rows.assign(static_cast<size_t>(a.context_window), a.pad_embed_row());
    f.pos = pos;

    const double* prompt_embed = theta.data() + a.off_prompt_embed();
    const double* image_embed = theta.data() + a.off_image_embed();
    for (int i = 0; i < a.prompt_len; ++i) {
        const int id = prompt_tokens[static_cast<size_t>(i)];
        if (id < 0 || id >= a.prompt_vocab_size) throw ValidationError("prompt token id out of range");
        const double* row = prompt_embed + static_cast<int64_t>(id) * d;
        std::copy(row, row + d, f.x.begin() + static_cast<int64_t>(i) * d);
    }
    for (int j = 0; j < a.context_window; ++j) {
        const int src = pos - a.context_window + j;
        int row_id = a.pad_embed_row();
        if (src >= 0) {
            row_id = prefix[static_cast<size_t>(src)];
            if (row_id < 0 || row_id >= a.vocab_size) throw ValidationError("grid token id out of range");
        }
        f.window_rows[static_cast<size_t>(j)] = row_id;
        const double* row = image_embed + static_cast<int64_t>(row_id) * d;
        std::copy(row, row + d, f.x.begin() + static_cast<int64_t>(a.prompt_len + j) * d);
    }
    f.x[static_cast<size_t>((a.prompt_len + a.context_window) * d + pos)] = 1.0;

    const double* w1 = theta.data() + a.off_w1();
    const double* b1 = theta.data() + a.off_b1();
    f.hidden.resize(static_cast<size_t>(a.hidden_dim));
    for (int h = 0; h < a.hidden_dim; ++h) {
        const double* row = w1 + static_cast<int64_t>(h) * n_in;
        double acc = b1[h];
        for (int i = 0; i < n_in; ++i) acc += row[i] * f.x[static_cast<size_t>(i)];
        f.hidden[static_cast<size_t>(h)] = std::tanh(acc);
    }

    const double* w2 = theta.data() + a.off_w2();
    const double* b2 = theta.data() + a.off_b2();
    f.logits.resize(static_cast<size_t>(a.vocab_size));
    for (int v = 0; v < a.vocab_size; ++v) {
        const double* row = w2 + static_cast<int64_t>(v) * a.hidden_dim;
        double acc = b2[v];
        for (int h = 0; h < a.hidden_dim; ++h) acc += row[h] * f.hidden[static_cast<size_t>(h)];
        f.logits[static_cast<size_t>(v)] = acc;
    }
}

void backward_pass(const PolicyArch& a, std::span<const double> theta, const Forward& f,
                   std::span<const double> dlogits, std::span<double> grad) {
    const int d = a.embed_dim;
    const int n_in = a.input_dim();
    const double* w1 = theta.data() + a.off_w1();
    const double* w2 = theta.data() + a.off_w2();
    double* g_w2 = grad.data() + a.off_w2();
    double* g_b2 = grad.data() + a.off_b2();

    std::vector<double> dhidden(static_cast<size_t>(a.hidden_dim), 0.0);
    for (int v = 0; v < a.vocab_size; ++v) {
        const double dv = dlogits[static_cast<size_t>(v)];
        if (dv == 0.0) continue;
        g_b2[v] += dv;
        const double* row = w2 + static_cast<int64_t>(v) * a.hidden_dim;
        double* grow = g_w2 + static_cast<int64_t>(v) * a.hidden_dim;
        for (int h = 0; h < a.hidden_dim; ++h) {
            grow[h] += dv * f.hidden[static_cast<size_t>(h)];
            dhidden[static_cast<size_t>(h)] += dv * row[h];
        }
    }

    double* g_w1 = grad.data() + a.off_w1();
    double* g_b1 = grad.data() + a.off_b1();
    std::vector<double> dx(static_cast<size_t>(n_in), 0.0);
    for (int h = 0; h < a.hidden_dim; ++h) {
        const double th = f.hidden[static_cast<size_t>(h)];
        const double dpre = dhidden[static_cast<size_t>(h)] * (1.0 - th * th);
        if (dpre == 0.0) continue;
        g_b1[h] += dpre;
        const double* row = w1 + static_cast<int64_t>(h) * n_in;
        double* grow = g_w1 + static_cast<int64_t>(h) * n_in;
        for (int i = 0; i < n_in; ++i) {
            grow[i] += dpre * f.x[static_cast<size_t>(i)];
            dx[static_cast<size_t>(i)] += dpre * row[i];
        }
    }

    double* g_prompt = grad.data() + a.off_prompt_embed();
    double* g_image = grad.data() + a.off_image_embed();
    for (int i = 0; i < a.prompt_len; ++i) {
        double* row = g_prompt + static_cast<int64_t>(f.prompt_ids[static_cast<size_t>(i)]) * d;
        const double* src = dx.data() + static_cast<int64_t>(i) * d;
        for (int k = 0; k < d; ++k) row[k] += src[k];
    }
    for (int j = 0; j < a.context_window; ++j) {
        double* row = g_image + static_cast<int64_t>(f.window_rows[static_cast<size_t>(j)]) * d;
        const double* src = dx.data() + static_cast<int64_t>(a.prompt_len + j) * d;
        for (int k = 0; k < d; ++k) row[k] += src[k];
    }
}

std::vector<int> null_tokens_cache() { return null_prompt_tokens(); }

// Guided step logits before temperature; fills cond (and uncond when used).
void guided_logits(const PolicyArch& a, std::span<const double> theta,
                   std::span<const int> prompt_tokens, std::span<const int> prefix, double scale,
                   Forward& cond, Forward& uncond, bool& used_uncond,
                   std::vector<double>& out) {
    forward_pass(a, theta, prompt_tokens, prefix, cond);
    used_uncond = scale != 1.0;
    if (!used_uncond) {
        out = cond.logits;
        return;
    }
    const auto null_tokens = null_tokens_cache();
    forward_pass(a, theta, null_tokens, prefix, uncond);
    out.resize(cond.logits.size());
    for (size_t i = 0; i < out.size(); ++i) {
        out[i] = uncond.logits[i] + scale * (cond.logits[i] - uncond.logits[i]);
    }
}

struct StepDist {
    std::vector<int> support;  // ascending token ids
    std::vector<double> logp;  // over support
    std::vector<double> z;     // logits / temperature, full vocab
};

StepDist make_step_dist(std::span<const double> guided, const SamplerConfig& s, int vocab_size) {
    StepDist out;
    out.z.resize(static_cast<size_t>(vocab_size));
    for (int v = 0; v < vocab_size; ++v) out.z[static_cast<size_t>(v)] = guided[static_cast<size_t>(v)] / s.temperature;

    const int k = std::min(s.top_k, vocab_size);
    std::vector<int> order(static_cast<size_t>(vocab_size));
    std::iota(order.begin(), order.end(), 0);
    std::partial_sort(order.begin(), order.begin() + k, order.end(), [&](int a, int b) {
        if (out.z[static_cast<size_t>(a)] != out.z[static_cast<size_t>(b)]) {
            return out.z[static_cast<size_t>(a)] > out.z[static_cast<size_t>(b)];
        }
        return a < b;  // deterministic tie-break
    });
    out.support.assign(order.begin(), order.begin() + k);
    std::sort(out.support.begin(), out.support.end());

    double m = -1e300;
    for (int v : out.support) m = std::max(m, out.z[static_cast<size_t>(v)]);
    double lse = 0.0;
    for (int v : out.support) lse += std::exp(out.z[static_cast<size_t>(v)] - m);
    lse = m + std::log(lse);
    out.logp.resize(out.support.size());
    for (size_t i = 0; i < out.support.size(); ++i) {
        out.logp[i] = out.z[static_cast<size_t>(out.support[i])] - lse;
    }
    return out;
}

// log-probability of `token` under the step's distribution; falls back to the
// untruncated softmax when top-k masked the token out, so that importance
// ratios and KL terms stay finite for injected ground-truth sequences.
double step_logp_of(const StepDist& dist, int token, int vocab_size, bool* out_in_support) {
    const auto it = std::lower_bound(dist.support.begin(), dist.support.end(), token);
    const bool in_support = it != dist.support.end() && *it == token;
    if (out_in_support != nullptr) *out_in_support = in_support;
    if (in_support) {
        return dist.logp[static_cast<size_t>(it - dist.support.begin())];
    }
    double m = -1e300;
    for (int v = 0; v < vocab_size; ++v) m = std::max(m, dist.z[static_cast<size_t>(v)]);
    double lse = 0.0;
    for (int v = 0; v < vocab_size; ++v) lse += std::exp(dist.z[static_cast<size_t>(v)] - m);
    return dist.z[static_cast<size_t>(token)] - (m + std::log(lse));
}

}  // namespace

std::vector<double> logits(const PolicyArch& arch, std::span<const double> theta,
                           std::span<const int> prompt_tokens, std::span<const int> prefix) {
    Forward f;
    forward_pass(arch, theta, prompt_tokens, prefix, f);
    return f.logits;
}

std::vector<double> cfg_logits(const PolicyArch& arch, std::span<const double> theta,
                               std::span<const int> prompt_tokens, std::span<const int> prefix,
                               double scale) {
    Forward cond, uncond;
    bool used_uncond;
    std::vector<double> out;
    guided_logits(arch, theta, prompt_tokens, prefix, scale, cond, uncond, used_uncond, out);
    return out;
}

StepDistribution step_distribution(const PolicyArch& arch, std::span<const double> theta,
                                   std::span<const int> prompt_tokens, std::span<const int> prefix,
                                   const SamplerConfig& sampler) {
    Forward cond, uncond;
    bool used_uncond;
    std::vector<double> guided;
    guided_logits(arch, theta, prompt_tokens, prefix, sampler.cfg_scale, cond, uncond, used_uncond,
                  guided);
    const StepDist d = make_step_dist(guided, sampler, arch.vocab_size);
    return StepDistribution{d.support, d.logp};
}

SampledSequence sample_sequence(const PolicySnapshot& snapshot, std::span<const int> prompt_tokens,
                                const SamplerConfig& sampler, Rng& rng) {
    const PolicyArch& a = snapshot.arch;
    SampledSequence out;
    out.grid.height = a.grid_height;
    out.grid.width = a.grid_width;
    out.grid.tokens.reserve(static_cast<size_t>(a.seq_len()));
    out.per_token_logprob.reserve(static_cast<size_t>(a.seq_len()));

    Forward cond, uncond;
    bool used_uncond;
    std::vector<double> guided;
    for (int pos = 0; pos < a.seq_len(); ++pos) {
        guided_logits(a, snapshot.theta, prompt_tokens, out.grid.tokens, sampler.cfg_scale, cond,
                      uncond, used_uncond, guided);
        const StepDist d = make_step_dist(guided, sampler, a.vocab_size);
        int chosen = d.support.back();
        const double u = rng.uniform01();
        double acc = 0.0;
        for (size_t i = 0; i < d.support.size(); ++i) {
            acc += std::exp(d.logp[i]);
            if (u < acc) {
                chosen = d.support[i];
                break;
            }
        }
        bool in_support = false;
        const double lp = step_logp_of(d, chosen, a.vocab_size, &in_support);
        out.grid.tokens.push_back(chosen);
        out.per_token_logprob.push_back(lp);
        out.total_logprob += lp;
    }
    return out;
}

SequenceLogprob sequence_logprob(const PolicyArch& arch, std::span<const double> theta,
                                 std::span<const int> prompt_tokens, const TokenGrid& grid,
                                 const SamplerConfig& sampler) {
    SequenceLogprob out;
    out.per_token.reserve(grid.tokens.size());
    Forward cond, uncond;
    bool used_uncond;
    std::vector<double> guided;
    for (size_t pos = 0; pos < grid.tokens.size(); ++pos) {
        const std::span<const int> prefix(grid.tokens.data(), pos);
        guided_logits(arch, theta, prompt_tokens, prefix, sampler.cfg_scale, cond, uncond,
                      used_uncond, guided);
        const StepDist d = make_step_dist(guided, sampler, arch.vocab_size);
        const double lp = step_logp_of(d, grid.tokens[pos], arch.vocab_size, nullptr);
        out.per_token.push_back(lp);
        out.total += lp;
    }
    return out;
}

SequenceLogprob sequence_logprob_backward(const PolicyArch& arch, std::span<const double> theta,
                                          std::span<const int> prompt_tokens, const TokenGrid& grid,
                                          const SamplerConfig& sampler,
                                          std::span<const double> token_weights,
                                          std::span<double> grad) {
    if (token_weights.size() != grid.tokens.size()) {
        throw ValidationError("token weight length mismatch");
    }
    SequenceLogprob out;
    out.per_token.reserve(grid.tokens.size());
    Forward cond, uncond;
    bool used_uncond;
    std::vector<double> guided;
    std::vector<double> dguided(static_cast<size_t>(arch.vocab_size));
    std::vector<double> dlogits(static_cast<size_t>(arch.vocab_size));
    const double scale = sampler.cfg_scale;

    for (size_t pos = 0; pos < grid.tokens.size(); ++pos) {
        const std::span<const int> prefix(grid.tokens.data(), pos);
        guided_logits(arch, theta, prompt_tokens, prefix, scale, cond, uncond, used_uncond, guided);
        const StepDist d = make_step_dist(guided, sampler, arch.vocab_size);
        const int y = grid.tokens[pos];
        bool in_support = false;
        const double lp = step_logp_of(d, y, arch.vocab_size, &in_support);
        out.per_token.push_back(lp);
        out.total += lp;

        const double w = token_weights[pos];
        if (w == 0.0) continue;

        // d logp(y)/d z_v = delta(v==y) - p_v over the active support
        std::fill(dguided.begin(), dguided.end(), 0.0);
        if (in_support) {
            for (size_t i = 0; i < d.support.size(); ++i) {
                const int v = d.support[i];
                dguided[static_cast<size_t>(v)] = -std::exp(d.logp[i]);
            }
        } else {
            double m = -1e300;
            for (int v = 0; v < arch.vocab_size; ++v) m = std::max(m, d.z[static_cast<size_t>(v)]);
            double lse = 0.0;
            for (int v = 0; v < arch.vocab_size; ++v) lse += std::exp(d.z[static_cast<size_t>(v)] - m);
            for (int v = 0; v < arch.vocab_size; ++v) {
                dguided[static_cast<size_t>(v)] = -std::exp(d.z[static_cast<size_t>(v)] - m) / lse;
            }
        }
        dguided[static_cast<size_t>(y)] += 1.0;
        const double inv_temp = 1.0 / sampler.temperature;
        for (double& v : dguided) v *= w * inv_temp;

        if (!used_uncond) {
            backward_pass(arch, theta, cond, dguided, grad);
        } else {
            for (size_t v = 0; v < dguided.size(); ++v) dlogits[v] = dguided[v] * scale;
            backward_pass(arch, theta, cond, dlogits, grad);
            for (size_t v = 0; v < dguided.size(); ++v) dlogits[v] = dguided[v] * (1.0 - scale);
            backward_pass(arch, theta, uncond, dlogits, grad);
        }
    }
    return out;
}

double sft_loss(const PolicyArch& arch, std::span<const double> theta,
                std::span<const int> prompt_tokens, const TokenGrid& grid) {
    SamplerConfig plain;
    plain.temperature = 1.0;
    plain.top_k = arch.vocab_size;
    plain.cfg_scale = 1.0;
    const SequenceLogprob lp = sequence_logprob(arch, theta, prompt_tokens, grid, plain);
    return -lp.total / static_cast<double>(grid.tokens.size());
}

double sft_loss_backward(const PolicyArch& arch, std::span<const double> theta,
                         std::span<const int> prompt_tokens, const TokenGrid& grid, double weight,
                         std::span<double> grad) {
    SamplerConfig plain;
    plain.temperature = 1.0;
    plain.top_k = arch.vocab_size;
    plain.cfg_scale = 1.0;
    const double per_token_w = -weight / static_cast<double>(grid.tokens.size());
    const std::vector<double> weights(grid.tokens.size(), per_token_w);
    const SequenceLogprob lp =
        sequence_logprob_backward(arch, theta, prompt_tokens, grid, plain, weights, grad);
    return -lp.total / static_cast<double>(grid.tokens.size());
}

std::vector<double> finite_difference_gradient(
    const std::function<double(std::span<const double>)>& f, std::span<const double> theta,
    double h) {
    std::vector<double> point(theta.begin(), theta.end());
    std::vector<double> grad(theta.size());
    for (size_t i = 0; i < point.size(); ++i) {
        const double saved = point[i];
        point[i] = saved + h;
        const double up = f(point);
        point[i] = saved - h;
        const double down = f(point);
        point[i] = saved;
        grad[i] = (up - down) / (2.0 * h);
    }
    return grad;
}

}  // namespace gridrl
