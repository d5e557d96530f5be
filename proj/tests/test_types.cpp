#include <doctest.h>

#include <set>

#include "gridrl/errors.hpp"
#include "gridrl/serialize.hpp"
#include "gridrl/types.hpp"
#include "helpers.hpp"

using namespace gridrl;

TEST_CASE("grid_index is row-major") {
    CHECK(grid_index(0, 0, 4, 4) == 0);
    CHECK(grid_index(1, 0, 4, 4) == 4);
    CHECK(grid_index(2, 3, 4, 4) == 11);
    CHECK_THROWS_AS(grid_index(4, 0, 4, 4), ValidationError);
    CHECK_THROWS_AS(grid_index(0, -1, 4, 4), ValidationError);
}

TEST_CASE("grid_index is a bijection over the 4x4 grid") {
    std::set<int> seen;
    for (int r = 0; r < 4; ++r) {
        for (int c = 0; c < 4; ++c) seen.insert(grid_index(r, c, 4, 4));
    }
    CHECK(seen.size() == 16);
    CHECK(*seen.begin() == 0);
    CHECK(*seen.rbegin() == 15);
}

TEST_CASE("vocab layout: one background plus shape x color") {
    VocabSpec v;
    CHECK(v.vocab_size() == 16);
    CHECK(v.seq_len() == 16);
    std::set<int> ids{VocabSpec::background_token()};
    for (int s = 0; s < kNumShapes; ++s) {
        for (int c = 0; c < kNumColors; ++c) {
            const int id = VocabSpec::object_token(static_cast<Shape>(s), static_cast<Color>(c));
            CHECK(VocabSpec::token_shape(id) == static_cast<Shape>(s));
            CHECK(VocabSpec::token_color(id) == static_cast<Color>(c));
            ids.insert(id);
        }
    }
    CHECK(ids.size() == 16);
}

TEST_CASE("surface text follows the template grammar") {
    VocabSpec vocab;
    const PromptSpec one = make_prompt({{Shape::circle, Color::red, 1}}, {}, Category::color, vocab);
    CHECK(one.surface_text == "a red circle");

    const PromptSpec counted =
        make_prompt({{Shape::triangle, Color::green, 2}}, {}, Category::counting, vocab);
    CHECK(counted.surface_text == "2 green triangles");

    const PromptSpec related = make_prompt(
        {{Shape::circle, Color::red, 1}, {Shape::square, Color::blue, 1}},
        {{0, RelationKind::left_of, 1}}, Category::position, vocab);
    CHECK(related.surface_text == "a red circle left of a blue square");

    const PromptSpec mixed = make_prompt(
        {{Shape::circle, Color::red, 1}, {Shape::triangle, Color::green, 2}}, {}, Category::color,
        vocab);
    CHECK(mixed.surface_text == "a red circle and 2 green triangles");
}

TEST_CASE("encode_prompt is deterministic and fixed-length") {
    VocabSpec vocab;
    Rng rng(7);
    for (int i = 0; i < 50; ++i) {
        const PromptSpec spec = test::random_spec(WorldConfig{}, rng);
        const auto a = encode_prompt(spec, vocab);
        const auto b = encode_prompt(spec, vocab);
        CHECK(a == b);
        CHECK(a.size() == static_cast<size_t>(prompt_vocab::kEncodedLength));
    }
}

TEST_CASE("specs differing in one color differ exactly in the color slot") {
    VocabSpec vocab;
    const PromptSpec a = make_prompt(
        {{Shape::circle, Color::red, 1}, {Shape::square, Color::blue, 1}},
        {{0, RelationKind::left_of, 1}}, Category::color, vocab);
    PromptSpec b = a;
    b.objects[0].color = Color::green;
    b.finalize(vocab);
    const auto ta = encode_prompt(a, vocab);
    const auto tb = encode_prompt(b, vocab);
    int diffs = 0;
    int diff_pos = -1;
    for (size_t i = 0; i < ta.size(); ++i) {
        if (ta[i] != tb[i]) {
            ++diffs;
            diff_pos = static_cast<int>(i);
        }
    }
    CHECK(diffs == 1);
    CHECK(diff_pos == 2);  // [category][count][color]...
}

TEST_CASE("decode(encode(spec)) round-trips for 1000 random specs") {
    VocabSpec vocab;
    WorldConfig world;
    Rng rng(99);
    for (int i = 0; i < 1000; ++i) {
        const PromptSpec spec = test::random_spec(world, rng);
        const PromptSpec back = decode_prompt(encode_prompt(spec, vocab), vocab);
        REQUIRE(back == spec);
    }
}

TEST_CASE("prompt encoding golden values are stable across runs") {
    VocabSpec vocab;
    const PromptSpec spec = make_prompt(
        {{Shape::circle, Color::red, 1}, {Shape::square, Color::blue, 1}},
        {{0, RelationKind::left_of, 1}}, Category::position, vocab);
    // layout: [category][count,color,shape]x3 [subj,rel,obj]x2, PAD = 0
    const std::vector<int> expected{17, 18, 5, 2, 18, 7, 3, 0, 0, 0, 22, 10, 23, 0, 0, 0};
    CHECK(encode_prompt(spec, vocab) == expected);
}

TEST_CASE("null prompt encoding is reserved and never produced by encode") {
    VocabSpec vocab;
    const auto null_tokens = null_prompt_tokens();
    CHECK(null_tokens[0] == prompt_vocab::kNull);
    Rng rng(3);
    for (int i = 0; i < 100; ++i) {
        CHECK(encode_prompt(test::random_spec(WorldConfig{}, rng), vocab) != null_tokens);
    }
}

TEST_CASE("validation rejects malformed specs") {
    VocabSpec vocab;
    PromptSpec empty;
    empty.category = Category::color;
    CHECK_THROWS_AS(empty.validate(vocab), ValidationError);

    PromptSpec self_rel;
    self_rel.objects = {{Shape::circle, Color::red, 1}};
    self_rel.relations = {{0, RelationKind::left_of, 0}};
    CHECK_THROWS_AS(self_rel.validate(vocab), ValidationError);

    PromptSpec dangling;
    dangling.objects = {{Shape::circle, Color::red, 1}};
    dangling.relations = {{0, RelationKind::left_of, 1}};
    CHECK_THROWS_AS(dangling.validate(vocab), ValidationError);

    PromptSpec too_many;
    too_many.objects = {{Shape::circle, Color::red, 4},
                        {Shape::square, Color::red, 4},
                        {Shape::triangle, Color::red, 4}};
    CHECK_NOTHROW(too_many.validate(vocab));  // 12 <= 16 cells
    too_many.objects[0].count = 9;
    CHECK_THROWS_AS(too_many.validate(vocab), ValidationError);
}

TEST_CASE("token grid validation") {
    VocabSpec vocab;
    TokenGrid g = TokenGrid::background(vocab);
    CHECK_NOTHROW(g.validate(vocab));
    CHECK(g.at(0, 0) == 0);
    g.at(1, 2) = 5;
    CHECK(g.tokens[6] == 5);
    g.tokens[0] = 16;
    CHECK_THROWS_AS(g.validate(vocab), ValidationError);
    g.tokens[0] = -1;
    CHECK_THROWS_AS(g.validate(vocab), ValidationError);
}

TEST_CASE("serialization round-trips through the record container") {
    VocabSpec vocab;
    WorldConfig world;
    Rng rng(1234);
    for (int i = 0; i < 50; ++i) {
        const PromptSpec spec = test::random_spec(world, rng);
        nlohmann::json j = spec;
        CHECK(j.get<PromptSpec>() == spec);
    }
    TokenGrid g = TokenGrid::background(vocab);
    g.tokens[3] = 7;
    nlohmann::json gj = g;
    CHECK(gj.get<TokenGrid>() == g);

    const std::string line = record_line("token_grid", gj);
    const Record rec = parse_record_line(line);
    CHECK(rec.type == "token_grid");
    CHECK(rec.payload.get<TokenGrid>() == g);

    CHECK_THROWS_AS(parse_record_line("{not json"), ValidationError);
    CHECK_THROWS_AS(parse_record_line(R"({"schema_version":1})"), ValidationError);
}

TEST_CASE("skeleton and field-diff accounting") {
    VocabSpec vocab;
    const PromptSpec a = make_prompt(
        {{Shape::circle, Color::red, 1}, {Shape::square, Color::blue, 1}},
        {{0, RelationKind::left_of, 1}}, Category::position, vocab);
    PromptSpec b = a;
    b.relations[0].kind = RelationKind::right_of;
    b.finalize(vocab);
    CHECK(same_skeleton(a, b));
    CHECK(field_diff_count(a, b) == 1);

    const PromptSpec c = make_prompt({{Shape::circle, Color::red, 1}}, {}, Category::color, vocab);
    CHECK_FALSE(same_skeleton(a, c));
}
