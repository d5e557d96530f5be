#include <doctest.h>

#include <cmath>

#include "gridrl/errors.hpp"
#include "gridrl/optim.hpp"

using namespace gridrl;

namespace {

LrScheduleConfig table_schedule() {
    LrScheduleConfig s;
    s.peak = 1.0e-5;
    s.convert_lr = 2.0e-6;
    s.convert_step = 300;
    s.min_lr = 2.0e-7;
    s.warmup_steps = 100;
    s.total_steps = 2200;
    s.kind = LrKind::linear_cosine;
    return s;
}

}  // namespace

TEST_CASE("lr anchors are exact at warmup end, convert step and final step") {
    const LrScheduleConfig s = table_schedule();
    CHECK(lr_at(s, 0) == 0.0);
    CHECK(lr_at(s, s.warmup_steps) == 1.0e-5);
    CHECK(lr_at(s, s.convert_step) == 2.0e-6);
    CHECK(lr_at(s, s.total_steps) == 2.0e-7);
    CHECK_THROWS_AS(lr_at(s, -1), ValidationError);
    CHECK_THROWS_AS(lr_at(s, s.total_steps + 1), ValidationError);
}

TEST_CASE("lr is continuous at the piece boundaries") {
    const LrScheduleConfig s = table_schedule();
    // one-step jumps around each junction stay within the local slope
    const double warmup_slope = s.peak / s.warmup_steps;
    CHECK(std::abs(lr_at(s, s.warmup_steps + 1) - lr_at(s, s.warmup_steps)) <= warmup_slope);
    const double convert_slope = (s.peak - s.convert_lr) / (s.convert_step - s.warmup_steps);
    CHECK(std::abs(lr_at(s, s.convert_step + 1) - lr_at(s, s.convert_step)) <= convert_slope + 1e-12);
    // monotone decreasing after the peak
    double prev = lr_at(s, s.warmup_steps);
    for (int64_t t = s.warmup_steps + 1; t <= s.total_steps; t += 7) {
        const double cur = lr_at(s, t);
        CHECK(cur <= prev + 1e-18);
        prev = cur;
    }
}

TEST_CASE("plain cosine schedule anneals peak to min") {
    LrScheduleConfig s;
    s.kind = LrKind::cosine;
    s.peak = 2.0e-5;
    s.min_lr = 2.0e-7;
    s.warmup_steps = 100;
    s.total_steps = 5000;
    CHECK(lr_at(s, 100) == 2.0e-5);
    CHECK(lr_at(s, 5000) == 2.0e-7);
    CHECK(lr_at(s, 2550) > 2.0e-7);
    CHECK(lr_at(s, 2550) < 2.0e-5);
}

TEST_CASE("zero gradient with zero weight decay leaves parameters unchanged") {
    OptimizerConfig cfg;
    cfg.weight_decay = 0.0;
    std::vector<double> theta{1.0, -2.0, 3.5};
    const std::vector<double> grad(3, 0.0);
    OptState state = OptState::zeros(3);
    adamw_update(theta, grad, state, 0.1, cfg);
    CHECK(theta[0] == 1.0);
    CHECK(theta[1] == -2.0);
    CHECK(theta[2] == 3.5);
}

TEST_CASE("global clip rescales to the clip norm") {
    std::vector<double> grad{6.0, 8.0};  // norm 10
    const double before = clip_global_norm(grad, 1.0);
    CHECK(before == doctest::Approx(10.0));
    const double after = std::sqrt(grad[0] * grad[0] + grad[1] * grad[1]);
    CHECK(after == doctest::Approx(1.0).epsilon(1e-12));
    std::vector<double> small{0.3, 0.4};
    clip_global_norm(small, 1.0);
    CHECK(small[0] == doctest::Approx(0.3));  // untouched below the clip
}

TEST_CASE("adamw converges on a single-parameter quadratic") {
    // loss = (theta - 3)^2, minimizer 3
    OptimizerConfig cfg;
    cfg.weight_decay = 0.0;
    std::vector<double> theta{0.0};
    OptState state = OptState::zeros(1);
    for (int t = 0; t < 200; ++t) {
        const std::vector<double> grad{2.0 * (theta[0] - 3.0)};
        adamw_update(theta, grad, state, 0.1, cfg);
    }
    CHECK(std::abs(theta[0] - 3.0) < 1e-4);
}

TEST_CASE("update is equivariant to parameter permutation") {
    OptimizerConfig cfg;
    std::vector<double> theta{0.5, -1.0, 2.0};
    std::vector<double> grad{0.1, -0.2, 0.05};
    OptState state = OptState::zeros(3);
    std::vector<double> theta_p{2.0, 0.5, -1.0};
    std::vector<double> grad_p{0.05, 0.1, -0.2};
    OptState state_p = OptState::zeros(3);
    for (int t = 0; t < 5; ++t) {
        adamw_update(theta, grad, state, 0.01, cfg);
        adamw_update(theta_p, grad_p, state_p, 0.01, cfg);
    }
    CHECK(theta_p[0] == doctest::Approx(theta[2]).epsilon(1e-15));
    CHECK(theta_p[1] == doctest::Approx(theta[0]).epsilon(1e-15));
    CHECK(theta_p[2] == doctest::Approx(theta[1]).epsilon(1e-15));
}

TEST_CASE("non-finite gradients abort with diagnostics") {
    OptimizerConfig cfg;
    std::vector<double> theta{1.0, 2.0};
    std::vector<double> grad{0.0, std::nan("")};
    OptState state = OptState::zeros(2);
    CHECK_THROWS_WITH_AS(adamw_update(theta, grad, state, 0.1, cfg),
                         doctest::Contains("coordinate 1"), NumericalError);
}
