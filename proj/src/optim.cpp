#include "gridrl/optim.hpp"

#include <cmath>

#include "gridrl/errors.hpp"
#include "gridrl/policy.hpp"

namespace gridrl {

namespace {
constexpr double kPi = 3.14159265358979323846;

double lerp(double a, double b, double u) { return a * (1.0 - u) + b * u; }
}  // namespace

double lr_at(const LrScheduleConfig& sched, int64_t step) {
    if (step < 0 || step > sched.total_steps) {
        throw ValidationError("schedule step out of range");
    }
    if (step <= sched.warmup_steps) {
        if (sched.warmup_steps == 0) return sched.peak;
        return sched.peak * (static_cast<double>(step) / static_cast<double>(sched.warmup_steps));
    }
    if (sched.kind == LrKind::cosine) {
        if (step >= sched.total_steps) return sched.min_lr;
        const double u = static_cast<double>(step - sched.warmup_steps) /
                         static_cast<double>(sched.total_steps - sched.warmup_steps);
        return sched.min_lr + (sched.peak - sched.min_lr) * 0.5 * (1.0 + std::cos(kPi * u));
    }
    if (step <= sched.convert_step) {
        const double u = static_cast<double>(step - sched.warmup_steps) /
                         static_cast<double>(sched.convert_step - sched.warmup_steps);
        return lerp(sched.peak, sched.convert_lr, u);
    }
    if (step >= sched.total_steps) return sched.min_lr;
    const double u = static_cast<double>(step - sched.convert_step) /
                     static_cast<double>(sched.total_steps - sched.convert_step);
    return sched.min_lr + (sched.convert_lr - sched.min_lr) * 0.5 * (1.0 + std::cos(kPi * u));
}

double clip_global_norm(std::span<double> grad, double clip_norm) {
    double sq = 0.0;
    for (double g : grad) sq += g * g;
    const double norm = std::sqrt(sq);
    if (clip_norm > 0.0 && norm > clip_norm) {
        const double scale = clip_norm / norm;
        for (double& g : grad) g *= scale;
    }
    return norm;
}

void adamw_update(std::span<double> theta, std::span<const double> grad, OptState& state,
                  double lr, const OptimizerConfig& cfg) {
    if (theta.size() != grad.size() || theta.size() != state.m.size() ||
        theta.size() != state.v.size()) {
        throw ValidationError("optimizer shape mismatch");
    }
    check_finite(grad, "gradient");
    state.step += 1;
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
    for (size_t i = 0; i < theta.size(); ++i) {
        state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * grad[i];
        state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * grad[i] * grad[i];
        const double mhat = state.m[i] / bc1;
        const double vhat = state.v[i] / bc2;
        theta[i] -= lr * (mhat / (std::sqrt(vhat) + cfg.eps) + cfg.weight_decay * theta[i]);
    }
}

}  // namespace gridrl
