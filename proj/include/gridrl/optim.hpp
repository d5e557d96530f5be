#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "gridrl/config.hpp"

namespace gridrl {

struct OptState {
    std::vector<double> m;  // first moments
    std::vector<double> v;  // second moments
    int64_t step = 0;

    static OptState zeros(size_t n) { return OptState{std::vector<double>(n, 0.0), std::vector<double>(n, 0.0), 0}; }
};

// Piecewise schedule: linear warmup 0 -> peak, then (linear_cosine) linear
// peak -> convert_lr at convert_step followed by cosine convert_lr -> min_lr
// at total_steps; the plain cosine kind anneals peak -> min_lr directly.
// Boundary steps return the anchor values exactly.
double lr_at(const LrScheduleConfig& sched, int64_t step);

// Scales the gradient in place to the clip norm when exceeded; returns the
// pre-clip global L2 norm.
double clip_global_norm(std::span<double> grad, double clip_norm);

// Decoupled weight decay, bias-corrected moments. Throws NumericalError on
// non-finite gradients (with the offending coordinate).
void adamw_update(std::span<double> theta, std::span<const double> grad, OptState& state,
                  double lr, const OptimizerConfig& cfg);

}  // namespace gridrl
