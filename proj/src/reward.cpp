#include "gridrl/reward.hpp"

#include <algorithm>
#include <cmath>

namespace gridrl {

const char* to_string(QuestionKind k) {
    switch (k) {
        case QuestionKind::existence: return "existence";
        case QuestionKind::color_of: return "color_of";
        case QuestionKind::count_of: return "count_of";
        case QuestionKind::relation: return "relation";
    }
    return "";
}

std::vector<Question> decompose(const PromptSpec& spec) {
    std::vector<Question> out;
    for (size_t i = 0; i < spec.objects.size(); ++i) {
        const auto& o = spec.objects[i];
        Question ex;
        ex.kind = QuestionKind::existence;
        ex.subject_index = static_cast<int>(i);
        ex.subject_shape = o.shape;
        ex.subject_color = o.color;
        out.push_back(ex);
        if (o.count == 1) {
            Question q;
            q.kind = QuestionKind::color_of;
            q.subject_index = static_cast<int>(i);
            q.subject_shape = o.shape;
            q.subject_color = o.color;
            out.push_back(q);
        } else {
            Question q;
            q.kind = QuestionKind::count_of;
            q.subject_index = static_cast<int>(i);
            q.subject_shape = o.shape;
            q.subject_color = o.color;
            q.expected_count = o.count;
            out.push_back(q);
        }
    }
    for (const auto& r : spec.relations) {
        Question q;
        q.kind = QuestionKind::relation;
        q.subject_index = r.subject;
        q.object_index = r.object;
        q.subject_shape = spec.objects[static_cast<size_t>(r.subject)].shape;
        q.subject_color = spec.objects[static_cast<size_t>(r.subject)].color;
        q.object_shape = spec.objects[static_cast<size_t>(r.object)].shape;
        q.object_color = spec.objects[static_cast<size_t>(r.object)].color;
        q.rel = r.kind;
        out.push_back(q);
    }
    return out;
}

bool relation_holds(RelationKind kind, int subj_row, int subj_col, int obj_row, int obj_col) {
    switch (kind) {
        case RelationKind::left_of: return subj_col < obj_col;
        case RelationKind::right_of: return subj_col > obj_col;
        case RelationKind::above: return subj_row < obj_row;
        case RelationKind::below: return subj_row > obj_row;
    }
    return false;
}

namespace {

struct CellMatch {
    int row;
    int col;
};

// cells whose token has the given shape (any color unless color is set)
std::vector<CellMatch> matching_cells(const TokenGrid& grid, Shape shape, const Color* color) {
    std::vector<CellMatch> out;
    for (int r = 0; r < grid.height; ++r) {
        for (int c = 0; c < grid.width; ++c) {
            const int t = grid.at(r, c);
            if (!VocabSpec::is_object_token(t)) continue;
            if (VocabSpec::token_shape(t) != shape) continue;
            if (color != nullptr && VocabSpec::token_color(t) != *color) continue;
            out.push_back({r, c});
        }
    }
    return out;
}

}  // namespace

double answer(const Question& q, const TokenGrid& grid, const VocabSpec& vocab) {
    (void)vocab;
    switch (q.kind) {
        case QuestionKind::existence: {
            return matching_cells(grid, q.subject_shape, nullptr).empty() ? 0.0 : 1.0;
        }
        case QuestionKind::color_of: {
            const auto cells = matching_cells(grid, q.subject_shape, nullptr);
            if (cells.size() != 1) return 0.0;
            const int t = grid.at(cells[0].row, cells[0].col);
            return VocabSpec::token_color(t) == q.subject_color ? 1.0 : 0.0;
        }
        case QuestionKind::count_of: {
            const auto cells = matching_cells(grid, q.subject_shape, &q.subject_color);
            const double actual = static_cast<double>(cells.size());
            const double expected = static_cast<double>(q.expected_count);
            return std::max(0.0, 1.0 - std::abs(actual - expected) / expected);
        }
        case QuestionKind::relation: {
            const auto subj = matching_cells(grid, q.subject_shape, &q.subject_color);
            const auto obj = matching_cells(grid, q.object_shape, &q.object_color);
            if (subj.empty() || obj.empty()) return 0.0;
            if (subj.size() > 1 || obj.size() > 1) return 0.5;
            return relation_holds(q.rel, subj[0].row, subj[0].col, obj[0].row, obj[0].col) ? 1.0
                                                                                           : 0.0;
        }
    }
    return 0.0;
}

RewardBreakdown reward(const PromptSpec& spec, const TokenGrid& grid, const VocabSpec& vocab) {
    RewardBreakdown out;
    const auto questions = decompose(spec);
    double sum = 0.0;
    out.per_question.reserve(questions.size());
    for (const auto& q : questions) {
        const double s = answer(q, grid, vocab);
        out.per_question.emplace_back(q, s);
        sum += s;
    }
    out.total = sum / static_cast<double>(questions.size());
    return out;
}

double noisy_reward_total(const PromptSpec& spec, const TokenGrid& grid, const VocabSpec& vocab,
                          double delta, Rng& rng) {
    double total = reward(spec, grid, vocab).total;
    if (delta > 0.0) {
        total = std::clamp(total + rng.uniform(-delta, delta), 0.0, 1.0);
    }
    return total;
}

}  // namespace gridrl
