#include <doctest.h>

#include <algorithm>

#include "gridrl/reward.hpp"
#include "gridrl/world.hpp"
#include "helpers.hpp"

using namespace gridrl;

namespace {

const VocabSpec kVocab;

TokenGrid grid_with(std::initializer_list<std::pair<int, int>> cells) {
    TokenGrid g = TokenGrid::background(kVocab);
    for (const auto& [pos, tok] : cells) g.tokens[static_cast<size_t>(pos)] = tok;
    return g;
}

int tok(Shape s, Color c) { return VocabSpec::object_token(s, c); }

}  // namespace

TEST_CASE("decomposition of a single object") {
    const PromptSpec spec = make_prompt({{Shape::circle, Color::red, 1}}, {}, Category::color, kVocab);
    const auto qs = decompose(spec);
    REQUIRE(qs.size() == 2);
    CHECK(qs[0].kind == QuestionKind::existence);
    CHECK(qs[0].subject_shape == Shape::circle);
    CHECK(qs[1].kind == QuestionKind::color_of);
    CHECK(qs[1].subject_color == Color::red);
}

TEST_CASE("decomposition table: counted object with relation scene gives 5 questions") {
    const PromptSpec spec = make_prompt(
        {{Shape::triangle, Color::green, 2}, {Shape::square, Color::blue, 1}},
        {{0, RelationKind::left_of, 1}}, Category::counting, kVocab);
    const auto qs = decompose(spec);
    REQUIRE(qs.size() == 5);
    CHECK(qs[0].kind == QuestionKind::existence);
    CHECK(qs[1].kind == QuestionKind::count_of);
    CHECK(qs[1].expected_count == 2);
    CHECK(qs[2].kind == QuestionKind::existence);
    CHECK(qs[3].kind == QuestionKind::color_of);
    CHECK(qs[3].subject_color == Color::blue);
    CHECK(qs[4].kind == QuestionKind::relation);
    CHECK(qs[4].rel == RelationKind::left_of);
}

TEST_CASE("count_of partial credit is linear in relative error") {
    Question q;
    q.kind = QuestionKind::count_of;
    q.subject_shape = Shape::triangle;
    q.subject_color = Color::green;
    q.expected_count = 2;
    const int t = tok(Shape::triangle, Color::green);
    CHECK(answer(q, grid_with({{0, t}, {5, t}}), kVocab) == doctest::Approx(1.0));
    CHECK(answer(q, grid_with({{0, t}}), kVocab) == doctest::Approx(0.5));
    CHECK(answer(q, grid_with({{0, t}, {5, t}, {9, t}}), kVocab) == doctest::Approx(0.5));
    CHECK(answer(q, grid_with({}), kVocab) == doctest::Approx(0.0));
}

TEST_CASE("count monotonicity: moving actual toward expected never decreases the score") {
    Question q;
    q.kind = QuestionKind::count_of;
    q.subject_shape = Shape::circle;
    q.subject_color = Color::purple;
    const int t = tok(Shape::circle, Color::purple);
    for (int expected = 1; expected <= 4; ++expected) {
        q.expected_count = expected;
        double prev = -1.0;
        for (int actual = 0; actual <= expected; ++actual) {
            TokenGrid g = TokenGrid::background(kVocab);
            for (int i = 0; i < actual; ++i) g.tokens[static_cast<size_t>(i)] = t;
            const double s = answer(q, g, kVocab);
            CHECK(s >= prev);
            prev = s;
        }
    }
}

TEST_CASE("relation scoring: satisfied, violated, ambiguous, missing") {
    Question q;
    q.kind = QuestionKind::relation;
    q.subject_shape = Shape::circle;
    q.subject_color = Color::red;
    q.object_shape = Shape::square;
    q.object_color = Color::blue;
    q.rel = RelationKind::left_of;
    const int rc = tok(Shape::circle, Color::red);
    const int bs = tok(Shape::square, Color::blue);
    // subject at column 1, object at column 3
    CHECK(answer(q, grid_with({{1, rc}, {3, bs}}), kVocab) == doctest::Approx(1.0));
    // subject right of object
    CHECK(answer(q, grid_with({{3, rc}, {1, bs}}), kVocab) == doctest::Approx(0.0));
    // two candidate subjects -> ambiguous
    CHECK(answer(q, grid_with({{1, rc}, {4, rc}, {3, bs}}), kVocab) == doctest::Approx(0.5));
    // missing object
    CHECK(answer(q, grid_with({{1, rc}}), kVocab) == doctest::Approx(0.0));
}

TEST_CASE("color_of requires a unique shape match") {
    Question q;
    q.kind = QuestionKind::color_of;
    q.subject_shape = Shape::circle;
    q.subject_color = Color::red;
    CHECK(answer(q, grid_with({{0, tok(Shape::circle, Color::red)}}), kVocab) == doctest::Approx(1.0));
    CHECK(answer(q, grid_with({{0, tok(Shape::circle, Color::green)}}), kVocab) == doctest::Approx(0.0));
    // two circles, even both red, make the reference non-unique
    CHECK(answer(q, grid_with({{0, tok(Shape::circle, Color::red)},
                               {1, tok(Shape::circle, Color::red)}}),
                 kVocab) == doctest::Approx(0.0));
}

TEST_CASE("ground-truth render of its own spec scores exactly 1") {
    Rng rng(5);
    WorldConfig world;
    for (int i = 0; i < 50; ++i) {
        const PromptSpec spec = test::random_spec(world, rng);
        const TokenGrid g = render_ground_truth(spec, kVocab, rng);
        CHECK(reward(spec, g, kVocab).total == doctest::Approx(1.0));
    }
}

TEST_CASE("all-background grid scores below 0.5 on any object spec") {
    Rng rng(6);
    WorldConfig world;
    const TokenGrid empty = TokenGrid::background(kVocab);
    for (int i = 0; i < 50; ++i) {
        const PromptSpec spec = test::random_spec(world, rng);
        CHECK(reward(spec, empty, kVocab).total < 0.5);
    }
}

TEST_CASE("reward is the arithmetic mean of per-question scores") {
    const PromptSpec spec = make_prompt(
        {{Shape::triangle, Color::green, 2}, {Shape::square, Color::blue, 1}},
        {{0, RelationKind::left_of, 1}}, Category::counting, kVocab);
    Rng rng(11);
    const TokenGrid g = render_ground_truth(spec, kVocab, rng);
    const RewardBreakdown br = reward(spec, g, kVocab);
    double mean = 0.0;
    for (const auto& [q, s] : br.per_question) mean += s;
    mean /= static_cast<double>(br.per_question.size());
    CHECK(br.total == doctest::Approx(mean).epsilon(1e-12));
}

TEST_CASE("reward is invariant under question order (pure function of grid)") {
    // the mean does not depend on decomposition order; check by shuffling a copy
    const PromptSpec spec = make_prompt(
        {{Shape::circle, Color::red, 1}, {Shape::square, Color::blue, 1}},
        {{0, RelationKind::above, 1}}, Category::position, kVocab);
    Rng rng(12);
    const TokenGrid g = render_ground_truth(spec, kVocab, rng);
    auto qs = decompose(spec);
    double sum = 0.0;
    for (const auto& q : qs) sum += answer(q, g, kVocab);
    Rng shuffle_rng(13);
    shuffle_rng.shuffle(qs);
    double sum_shuffled = 0.0;
    for (const auto& q : qs) sum_shuffled += answer(q, g, kVocab);
    CHECK(sum == doctest::Approx(sum_shuffled).epsilon(1e-15));
}

TEST_CASE("reward equals 1 iff every question is exactly satisfied") {
    Rng rng(21);
    WorldConfig world;
    for (int i = 0; i < 100; ++i) {
        const PromptSpec spec = test::random_spec(world, rng);
        TokenGrid g = render_ground_truth(spec, kVocab, rng);
        REQUIRE(reward(spec, g, kVocab).total == doctest::Approx(1.0));
        // break one object cell
        for (size_t p = 0; p < g.tokens.size(); ++p) {
            if (g.tokens[p] != VocabSpec::background_token()) {
                g.tokens[p] = VocabSpec::background_token();
                break;
            }
        }
        const RewardBreakdown br = reward(spec, g, kVocab);
        bool all_perfect = true;
        for (const auto& [q, s] : br.per_question) all_perfect = all_perfect && s == 1.0;
        CHECK(br.total < 1.0);
        CHECK_FALSE(all_perfect);
    }
}

TEST_CASE("noise mode perturbs within +/- delta and clamps") {
    const PromptSpec spec = make_prompt({{Shape::circle, Color::red, 1}}, {}, Category::color, kVocab);
    Rng render_rng(3);
    const TokenGrid g = render_ground_truth(spec, kVocab, render_rng);
    Rng noise_rng(4);
    for (int i = 0; i < 200; ++i) {
        const double s = noisy_reward_total(spec, g, kVocab, 0.1, noise_rng);
        CHECK(s <= 1.0);
        CHECK(s >= 0.9 - 1e-12);
    }
    Rng zero_rng(5);
    CHECK(noisy_reward_total(spec, g, kVocab, 0.0, zero_rng) == doctest::Approx(1.0));
}
