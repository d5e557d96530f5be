#include <doctest.h>

#include <set>

#include "gridrl/errors.hpp"
#include "gridrl/reward.hpp"
#include "gridrl/serialize.hpp"
#include "gridrl/world.hpp"
#include "helpers.hpp"

using namespace gridrl;

namespace {
const VocabSpec kVocab;
}

TEST_CASE("render: one red circle means exactly one object token, rest background") {
    const PromptSpec spec = make_prompt({{Shape::circle, Color::red, 1}}, {}, Category::color, kVocab);
    Rng rng(2);
    const TokenGrid g = render_ground_truth(spec, kVocab, rng);
    int objects = 0;
    for (int t : g.tokens) {
        if (t != VocabSpec::background_token()) {
            ++objects;
            CHECK(t == VocabSpec::object_token(Shape::circle, Color::red));
        }
    }
    CHECK(objects == 1);
    CHECK(reward(spec, g, kVocab).total == doctest::Approx(1.0));
}

TEST_CASE("render: left_of places subject strictly left of object") {
    const PromptSpec spec = make_prompt(
        {{Shape::circle, Color::red, 1}, {Shape::square, Color::blue, 1}},
        {{0, RelationKind::left_of, 1}}, Category::position, kVocab);
    Rng rng(3);
    for (int i = 0; i < 30; ++i) {
        const TokenGrid g = render_ground_truth(spec, kVocab, rng);
        int subj_col = -1, obj_col = -1;
        for (int r = 0; r < 4; ++r) {
            for (int c = 0; c < 4; ++c) {
                if (g.at(r, c) == VocabSpec::object_token(Shape::circle, Color::red)) subj_col = c;
                if (g.at(r, c) == VocabSpec::object_token(Shape::square, Color::blue)) obj_col = c;
            }
        }
        REQUIRE(subj_col >= 0);
        REQUIRE(obj_col >= 0);
        CHECK(subj_col < obj_col);
    }
}

TEST_CASE("render: 500 random satisfiable specs all score exactly 1.0") {
    WorldConfig world;
    Rng rng(17);
    const SceneSampler sampler(world);
    for (int i = 0; i < 500; ++i) {
        const Category cat = static_cast<Category>(rng.uniform_int(0, kNumCategories - 1));
        const PromptSpec spec = sampler.sample_scene(cat, rng);
        const TokenGrid g = render_ground_truth(spec, kVocab, rng);
        REQUIRE(reward(spec, g, kVocab).total == 1.0);
    }
}

TEST_CASE("render: unsatisfiable spec raises a generation error naming the constraint") {
    // two objects of the same shape can never satisfy the unique-reference rule
    PromptSpec spec;
    spec.objects = {{Shape::circle, Color::red, 1}, {Shape::circle, Color::blue, 1}};
    spec.category = Category::color;
    spec.finalize(kVocab);
    Rng rng(4);
    CHECK_THROWS_WITH_AS(render_ground_truth(spec, kVocab, rng),
                         doctest::Contains("violated constraint"), GenerationError);
}

TEST_CASE("make_pair: counting edit changes the count by one and the grid minimally") {
    WorldConfig world;
    world.free_rerand_prob = 0.0;  // isolate the minimal-diff contract
    const PromptSpec base =
        make_prompt({{Shape::triangle, Color::green, 2}}, {}, Category::counting, kVocab);
    Rng rng(8);
    const PairedRecord rec = make_pair(base, Category::counting, world, rng);
    CHECK(rec.verified);
    const int c1 = rec.prompt_1.objects[0].count;
    const int c2 = rec.prompt_2.objects[0].count;
    CHECK(std::abs(c1 - c2) == 1);
    int diff_cells = 0;
    for (size_t p = 0; p < rec.grid_1.tokens.size(); ++p) {
        diff_cells += rec.grid_1.tokens[p] != rec.grid_2.tokens[p];
    }
    CHECK(diff_cells == 1);
    // count tokens of the edited object in grid_2
    int count2 = 0;
    const int t = VocabSpec::object_token(rec.prompt_2.objects[0].shape, rec.prompt_2.objects[0].color);
    for (int tk : rec.grid_2.tokens) count2 += tk == t;
    CHECK(count2 == c2);
}

TEST_CASE("make_pair: position edit flips the relation and swaps the columns") {
    WorldConfig world;
    world.free_rerand_prob = 0.0;
    const PromptSpec base = make_prompt(
        {{Shape::circle, Color::red, 1}, {Shape::square, Color::blue, 1}},
        {{0, RelationKind::left_of, 1}}, Category::position, kVocab);
    Rng rng(9);
    const PairedRecord rec = make_pair(base, Category::position, world, rng);
    CHECK(rec.verified);
    CHECK(rec.prompt_2.relations[0].kind == RelationKind::right_of);
    auto col_of = [&](const TokenGrid& g, int token) {
        for (int r = 0; r < 4; ++r) {
            for (int c = 0; c < 4; ++c) {
                if (g.at(r, c) == token) return c;
            }
        }
        return -1;
    };
    const int subj = VocabSpec::object_token(Shape::circle, Color::red);
    const int obj = VocabSpec::object_token(Shape::square, Color::blue);
    CHECK(col_of(rec.grid_1, subj) < col_of(rec.grid_1, obj));
    CHECK(col_of(rec.grid_2, subj) > col_of(rec.grid_2, obj));
}

TEST_CASE("make_pair: grid diff is bounded by edited cells plus re-randomized free cells") {
    WorldConfig world;
    Rng rng(10);
    const SceneSampler sampler(world);
    for (int i = 0; i < 200; ++i) {
        const Category cat = static_cast<Category>(rng.uniform_int(0, kNumCategories - 1));
        const PromptSpec base = sampler.sample_scene(cat, rng);
        PairedRecord rec;
        try {
            rec = make_pair(base, cat, world, rng);
        } catch (const GenerationError&) {
            continue;
        }
        // cells that belong to an object in either grid, or changed free cells
        int diff = 0;
        for (size_t p = 0; p < rec.grid_1.tokens.size(); ++p) {
            diff += rec.grid_1.tokens[p] != rec.grid_2.tokens[p];
        }
        int edited_budget = 0;
        for (size_t oi = 0; oi < rec.prompt_1.objects.size(); ++oi) {
            if (!(rec.prompt_1.objects[oi] == rec.prompt_2.objects[oi])) {
                edited_budget += std::max(rec.prompt_1.objects[oi].count,
                                          rec.prompt_2.objects[oi].count);
            }
        }
        if (rec.category == Category::position) edited_budget += 2;  // both participants move
        int free_changed = 0;
        for (size_t p = 0; p < rec.grid_1.tokens.size(); ++p) {
            if (rec.grid_1.tokens[p] == VocabSpec::background_token() &&
                rec.grid_2.tokens[p] != VocabSpec::background_token()) {
                ++free_changed;
            }
        }
        CHECK(diff <= edited_budget + free_changed);
    }
}

TEST_CASE("verify_pair: identical grids fail the cross condition") {
    WorldConfig world;
    const PromptSpec base = make_prompt({{Shape::circle, Color::red, 1}}, {}, Category::color, kVocab);
    Rng rng(11);
    PairedRecord rec = make_pair(base, Category::color, world, rng);
    rec.grid_2 = rec.grid_1;
    VerifyDetail d;
    CHECK_FALSE(verify_pair(rec, kVocab, world.theta_pos, world.theta_neg, &d));
    CHECK(d.skeleton_ok);
    CHECK_FALSE(d.cross_ok);  // grid_2 is now aligned with both prompts
    CHECK_FALSE(rec.verified);
}

TEST_CASE("verify_pair: unrelated skeleton fails condition 1") {
    WorldConfig world;
    Rng rng(12);
    const PromptSpec base = make_prompt(
        {{Shape::circle, Color::red, 1}, {Shape::square, Color::blue, 1}}, {}, Category::color,
        kVocab);
    PairedRecord rec = make_pair(base, Category::color, world, rng);
    rec.prompt_2 = make_prompt({{Shape::triangle, Color::purple, 3}}, {}, Category::color, kVocab);
    VerifyDetail d;
    CHECK_FALSE(verify_pair(rec, kVocab, world.theta_pos, world.theta_neg, &d));
    CHECK_FALSE(d.skeleton_ok);
}

TEST_CASE("verify_pair: make_pair output verifies at theta_pos=0.99, theta_neg=0.8") {
    // color edits lose a full question cross-wise, detectable even at the
    // stricter threshold
    WorldConfig world;
    world.theta_neg = 0.8;
    const PromptSpec base = make_prompt(
        {{Shape::circle, Color::red, 1}, {Shape::square, Color::blue, 1}}, {}, Category::color,
        kVocab);
    Rng rng(13);
    PairedRecord rec = make_pair(base, Category::color, world, rng);
    CHECK(verify_pair(rec, kVocab, 0.99, 0.8));
}

TEST_CASE("eval bucket partition is deterministic and roughly proportional") {
    int in_bucket = 0;
    for (int i = 0; i < 10000; ++i) {
        const std::string text = "prompt number " + std::to_string(i);
        const bool a = in_eval_bucket(text, 0.25);
        const bool b = in_eval_bucket(text, 0.25);
        CHECK(a == b);
        in_bucket += a;
    }
    CHECK(in_bucket > 2200);
    CHECK(in_bucket < 2800);
}

TEST_CASE("generated records all pass verification and reproduce byte-identically") {
    WorldConfig world;
    world.pairs = 60;
    const std::string path_a = test::temp_path("data_a.records");
    const std::string path_b = test::temp_path("data_b.records");
    GenStats stats;
    write_dataset_file(path_a, world, 555, 60, &stats);
    CHECK(stats.emitted == 60);
    write_dataset_file(path_b, world, 555, 60);
    CHECK(file_digest(path_a) == file_digest(path_b));

    const auto records = read_dataset_file(path_a, kVocab);
    REQUIRE(records.size() == 60);
    std::set<Category> cats;
    for (PairedRecord rec : records) {
        cats.insert(rec.category);
        CHECK(rec.verified);
        VerifyDetail d;
        CHECK(verify_pair(rec, kVocab, world.theta_pos, world.theta_neg, &d));
        CHECK(d.r11 >= world.theta_pos);
        CHECK(d.r21 <= world.theta_neg);
        CHECK(d.r12 <= world.theta_neg);
    }
    CHECK(cats.size() == 4);  // all categories present at 60 records
}

TEST_CASE("eval suite: size, category-local differences, zero train overlap") {
    WorldConfig world;
    world.pairs = 150;
    const EvalSuite suite = build_eval_suite(world, 777, 10);
    CHECK(suite.cases.size() == 40);  // 10 per category x 4

    for (const auto& c : suite.cases) {
        REQUIRE(same_skeleton(c.prompt_1, c.prompt_2));
        const int diffs = field_diff_count(c.prompt_1, c.prompt_2);
        CHECK(diffs >= 1);
        CHECK(diffs <= 3);
        // the difference touches only fields of the case's category
        for (size_t oi = 0; oi < c.prompt_1.objects.size(); ++oi) {
            const auto& a = c.prompt_1.objects[oi];
            const auto& b = c.prompt_2.objects[oi];
            if (c.category != Category::overall_appearance) CHECK(a.shape == b.shape);
            if (c.category != Category::color) CHECK(a.color == b.color);
            if (c.category != Category::counting) CHECK(a.count == b.count);
        }
        for (size_t ri = 0; ri < c.prompt_1.relations.size(); ++ri) {
            if (c.category != Category::position) {
                CHECK(c.prompt_1.relations[ri].kind == c.prompt_2.relations[ri].kind);
            }
        }
    }

    const std::string train_path = test::temp_path("overlap_train.records");
    write_dataset_file(train_path, world, 555, 150);
    std::set<std::string> train_texts;
    for (const auto& r : read_dataset_file(train_path, kVocab)) {
        train_texts.insert(r.prompt_1.surface_text);
        train_texts.insert(r.prompt_2.surface_text);
    }
    int overlap = 0, total = 0;
    for (const auto& c : suite.cases) {
        overlap += train_texts.contains(c.prompt_1.surface_text);
        overlap += train_texts.contains(c.prompt_2.surface_text);
        total += 2;
    }
    CHECK(overlap == 0);  // partitioned by content hash; < 5% required
    CHECK(total > 0);
}

TEST_CASE("suite files round-trip") {
    WorldConfig world;
    const EvalSuite suite = build_eval_suite(world, 99, 3);
    const std::string path = test::temp_path("suite.records");
    write_suite_file(path, suite);
    const EvalSuite loaded = read_suite_file(path, kVocab);
    REQUIRE(loaded.cases.size() == suite.cases.size());
    for (size_t i = 0; i < suite.cases.size(); ++i) {
        CHECK(loaded.cases[i].prompt_1 == suite.cases[i].prompt_1);
        CHECK(loaded.cases[i].prompt_2 == suite.cases[i].prompt_2);
        CHECK(loaded.cases[i].category == suite.cases[i].category);
    }
}

TEST_CASE("free-cell re-randomization only ever adds oracle-invisible shapes") {
    WorldConfig world;
    world.free_rerand_prob = 1.0;
    world.distractor_density = 0.5;
    Rng rng(31);
    const SceneSampler sampler(world);
    int with_distractors = 0;
    for (int i = 0; i < 100; ++i) {
        const PromptSpec base = sampler.sample_scene(Category::color, rng);
        if (base.objects.size() > 2) continue;  // no spare shape to use
        PairedRecord rec;
        try {
            rec = make_pair(base, Category::color, world, rng);
        } catch (const GenerationError&) {
            continue;
        }
        std::set<Shape> scene_shapes;
        for (const auto& o : rec.prompt_1.objects) scene_shapes.insert(o.shape);
        for (const auto& o : rec.prompt_2.objects) scene_shapes.insert(o.shape);
        for (size_t p = 0; p < rec.grid_2.tokens.size(); ++p) {
            if (rec.grid_1.tokens[p] == VocabSpec::background_token() &&
                rec.grid_2.tokens[p] != VocabSpec::background_token()) {
                ++with_distractors;
                CHECK_FALSE(scene_shapes.contains(VocabSpec::token_shape(rec.grid_2.tokens[p])));
            }
        }
        // distractors never perturb the verification rewards
        CHECK(reward(rec.prompt_2, rec.grid_2, kVocab).total == doctest::Approx(1.0));
    }
    CHECK(with_distractors > 0);
}
