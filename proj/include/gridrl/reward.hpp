#pragma once

#include <vector>

#include "gridrl/rng.hpp"
#include "gridrl/types.hpp"

namespace gridrl {

enum class QuestionKind : int { existence = 0, color_of = 1, count_of = 2, relation = 3 };

const char* to_string(QuestionKind k);

// One yes/no-style probe derived from a prompt's semantic tuples.
struct Question {
    QuestionKind kind{};
    int subject_index = -1;  // index into spec.objects
    int object_index = -1;   // relation questions only
    Shape subject_shape{};
    Color subject_color{};   // color_of: expected answer; count_of/relation: match color
    Shape object_shape{};    // relation questions only
    Color object_color{};
    RelationKind rel{};      // relation questions only
    int expected_count = 0;  // count_of questions only

    bool operator==(const Question&) const = default;
};

struct RewardBreakdown {
    std::vector<std::pair<Question, double>> per_question;
    double total = 0.0;
};

// Fixed decomposition table:
//   - every object:           existence(shape)
//   - object with count == 1: color_of(shape) == color
//   - object with count >= 2: count_of(shape, color) == count
//   - every relation:         relation(subject shape+color, kind, object shape+color)
std::vector<Question> decompose(const PromptSpec& spec);

// Scoring rules:
//   existence  -> 1 if any cell has the shape, else 0
//   color_of   -> 1 iff exactly one cell has the shape and its color matches
//   count_of   -> max(0, 1 - |actual - expected| / expected) over (shape, color) cells
//   relation   -> 0 if either reference matches no cell; 1/0 by the relation when both
//                 references are unique; 0.5 when either reference is ambiguous
double answer(const Question& q, const TokenGrid& grid, const VocabSpec& vocab);

RewardBreakdown reward(const PromptSpec& spec, const TokenGrid& grid, const VocabSpec& vocab);

// Total with optional uniform +/- delta noise, clamped to [0, 1]. delta = 0
// reproduces the deterministic oracle.
double noisy_reward_total(const PromptSpec& spec, const TokenGrid& grid, const VocabSpec& vocab,
                          double delta, Rng& rng);

bool relation_holds(RelationKind kind, int subj_row, int subj_col, int obj_row, int obj_col);

}  // namespace gridrl
