#include "gridrl/types.hpp"

#include <algorithm>

#include "gridrl/errors.hpp"

namespace gridrl {

namespace {

constexpr const char* kShapeNames[] = {"circle", "square", "triangle"};
constexpr const char* kColorNames[] = {"red", "green", "blue", "yellow", "purple"};
constexpr const char* kRelationNames[] = {"left_of", "right_of", "above", "below"};
constexpr const char* kCategoryNames[] = {"overall_appearance", "color", "counting", "position"};

template <class E, size_t N>
E enum_from_string(const std::string& s, const char* const (&names)[N], const char* what) {
    for (size_t i = 0; i < N; ++i) {
        if (s == names[i]) return static_cast<E>(i);
    }
    throw ValidationError(std::string("unknown ") + what + ": " + s);
}

}  // namespace

const char* to_string(Shape s) { return kShapeNames[static_cast<int>(s)]; }
const char* to_string(Color c) { return kColorNames[static_cast<int>(c)]; }
const char* to_string(RelationKind r) { return kRelationNames[static_cast<int>(r)]; }
const char* to_string(Category c) { return kCategoryNames[static_cast<int>(c)]; }

Shape shape_from_string(const std::string& s) { return enum_from_string<Shape>(s, kShapeNames, "shape"); }
Color color_from_string(const std::string& s) { return enum_from_string<Color>(s, kColorNames, "color"); }
RelationKind relation_from_string(const std::string& s) {
    return enum_from_string<RelationKind>(s, kRelationNames, "relation");
}
Category category_from_string(const std::string& s) {
    return enum_from_string<Category>(s, kCategoryNames, "category");
}

Shape VocabSpec::token_shape(int id) { return static_cast<Shape>((id - 1) / kNumColors); }
Color VocabSpec::token_color(int id) { return static_cast<Color>((id - 1) % kNumColors); }

void VocabSpec::validate() const {
    if (grid_height <= 0 || grid_width <= 0) {
        throw ValidationError("grid dimensions must be positive");
    }
    if (seq_len() < 4) {
        throw ValidationError("sequence length must be at least 4");
    }
}

void PromptSpec::validate(const VocabSpec& vocab) const {
    if (objects.empty()) throw ValidationError("prompt has no objects");
    if (static_cast<int>(objects.size()) > kMaxObjects) {
        throw ValidationError("too many objects in prompt");
    }
    if (static_cast<int>(relations.size()) > kMaxRelationsPerScene) {
        throw ValidationError("too many relations in prompt");
    }
    int total = 0;
    for (const auto& o : objects) {
        if (o.count < 1 || o.count > kMaxCount) throw ValidationError("object count out of range");
        total += o.count;
    }
    if (total > vocab.seq_len()) throw ValidationError("objects exceed grid capacity");
    const int n = static_cast<int>(objects.size());
    for (const auto& r : relations) {
        if (r.subject < 0 || r.subject >= n || r.object < 0 || r.object >= n) {
            throw ValidationError("relation references missing object");
        }
        if (r.subject == r.object) throw ValidationError("relation pairs an object with itself");
    }
}

std::string render_surface_text(const PromptSpec& spec) {
    auto phrase = [](const SceneObject& o) {
        std::string out;
        if (o.count == 1) {
            out = "a ";
        } else {
            out = std::to_string(o.count) + " ";
        }
        out += to_string(o.color);
        out += " ";
        out += to_string(o.shape);
        if (o.count != 1) out += "s";
        return out;
    };
    auto relation_words = [](RelationKind k) -> std::string {
        switch (k) {
            case RelationKind::left_of: return "left of";
            case RelationKind::right_of: return "right of";
            case RelationKind::above: return "above";
            case RelationKind::below: return "below";
        }
        return "";
    };

    std::string text;
    std::vector<bool> used(spec.objects.size(), false);
    if (!spec.relations.empty()) {
        const auto& r = spec.relations.front();
        text = phrase(spec.objects[r.subject]) + " " + relation_words(r.kind) + " " +
               phrase(spec.objects[r.object]);
        used[static_cast<size_t>(r.subject)] = true;
        used[static_cast<size_t>(r.object)] = true;
    }
    for (size_t i = 0; i < spec.objects.size(); ++i) {
        if (used[i]) continue;
        if (!text.empty()) text += " and ";
        text += phrase(spec.objects[i]);
    }
    for (size_t ri = 1; ri < spec.relations.size(); ++ri) {
        const auto& r = spec.relations[ri];
        text += ", the " + std::string(to_string(spec.objects[r.subject].color)) + " " +
                to_string(spec.objects[r.subject].shape) + " " + relation_words(r.kind) + " the " +
                to_string(spec.objects[r.object].color) + " " + to_string(spec.objects[r.object].shape);
    }
    return text;
}

void PromptSpec::finalize(const VocabSpec& vocab) {
    validate(vocab);
    surface_text = render_surface_text(*this);
    prompt_tokens = encode_prompt(*this, vocab);
}

PromptSpec make_prompt(std::vector<SceneObject> objects, std::vector<SceneRelation> relations,
                       Category category, const VocabSpec& vocab) {
    PromptSpec spec;
    spec.objects = std::move(objects);
    spec.relations = std::move(relations);
    spec.category = category;
    spec.finalize(vocab);
    return spec;
}

std::vector<int> encode_prompt(const PromptSpec& spec, const VocabSpec& vocab) {
    spec.validate(vocab);
    namespace pv = prompt_vocab;
    std::vector<int> out(pv::kEncodedLength, pv::kPad);
    out[0] = pv::kCategoryBase + static_cast<int>(spec.category);
    for (size_t i = 0; i < spec.objects.size(); ++i) {
        const auto& o = spec.objects[i];
        const size_t base = 1 + 3 * i;
        out[base + 0] = pv::kCountBase + (o.count - 1);
        out[base + 1] = pv::kColorBase + static_cast<int>(o.color);
        out[base + 2] = pv::kShapeBase + static_cast<int>(o.shape);
    }
    for (size_t i = 0; i < spec.relations.size(); ++i) {
        const auto& r = spec.relations[i];
        const size_t base = 1 + 3 * kMaxObjects + 3 * i;
        out[base + 0] = pv::kIndexBase + r.subject;
        out[base + 1] = pv::kRelationBase + static_cast<int>(r.kind);
        out[base + 2] = pv::kIndexBase + r.object;
    }
    return out;
}

PromptSpec decode_prompt(const std::vector<int>& tokens, const VocabSpec& vocab) {
    namespace pv = prompt_vocab;
    if (static_cast<int>(tokens.size()) != pv::kEncodedLength) {
        throw ValidationError("prompt token sequence has wrong length");
    }
    auto expect_range = [&](int id, int base, int n, const char* what) {
        if (id < base || id >= base + n) {
            throw ValidationError(std::string("prompt token out of range for ") + what);
        }
        return id - base;
    };
    PromptSpec spec;
    spec.category = static_cast<Category>(
        expect_range(tokens[0], pv::kCategoryBase, kNumCategories, "category"));
    for (int i = 0; i < kMaxObjects; ++i) {
        const int base = 1 + 3 * i;
        if (tokens[base] == pv::kPad) {
            for (int j = 1; j < 3; ++j) {
                if (tokens[base + j] != pv::kPad) throw ValidationError("ragged object slot");
            }
            continue;
        }
        SceneObject o;
        o.count = 1 + expect_range(tokens[base + 0], pv::kCountBase, kMaxCount, "count");
        o.color = static_cast<Color>(expect_range(tokens[base + 1], pv::kColorBase, kNumColors, "color"));
        o.shape = static_cast<Shape>(expect_range(tokens[base + 2], pv::kShapeBase, kNumShapes, "shape"));
        spec.objects.push_back(o);
    }
    for (int i = 0; i < kMaxRelationsPerScene; ++i) {
        const int base = 1 + 3 * kMaxObjects + 3 * i;
        if (tokens[base] == pv::kPad) continue;
        SceneRelation r;
        r.subject = expect_range(tokens[base + 0], pv::kIndexBase, kMaxObjects, "subject index");
        r.kind = static_cast<RelationKind>(
            expect_range(tokens[base + 1], pv::kRelationBase, kNumRelations, "relation"));
        r.object = expect_range(tokens[base + 2], pv::kIndexBase, kMaxObjects, "object index");
        spec.relations.push_back(r);
    }
    spec.finalize(vocab);
    return spec;
}

std::vector<int> null_prompt_tokens() {
    std::vector<int> out(prompt_vocab::kEncodedLength, prompt_vocab::kPad);
    out[0] = prompt_vocab::kNull;
    return out;
}

int& TokenGrid::at(int row, int col) { return tokens[static_cast<size_t>(grid_index(row, col, height, width))]; }
int TokenGrid::at(int row, int col) const {
    return tokens[static_cast<size_t>(grid_index(row, col, height, width))];
}

void TokenGrid::validate(const VocabSpec& vocab) const {
    if (height != vocab.grid_height || width != vocab.grid_width) {
        throw ValidationError("grid dimensions do not match vocabulary");
    }
    if (static_cast<int>(tokens.size()) != vocab.seq_len()) {
        throw ValidationError("grid has wrong token count");
    }
    for (int t : tokens) {
        if (t < 0 || t >= vocab.vocab_size()) throw ValidationError("token id out of range");
    }
}

TokenGrid TokenGrid::background(const VocabSpec& vocab) {
    TokenGrid g;
    g.height = vocab.grid_height;
    g.width = vocab.grid_width;
    g.tokens.assign(static_cast<size_t>(vocab.seq_len()), VocabSpec::background_token());
    return g;
}

int grid_index(int row, int col, int height, int width) {
    if (row < 0 || row >= height || col < 0 || col >= width) {
        throw ValidationError("grid index out of range");
    }
    return row * width + col;
}

bool same_skeleton(const PromptSpec& a, const PromptSpec& b) {
    if (a.objects.size() != b.objects.size()) return false;
    if (a.relations.size() != b.relations.size()) return false;
    for (size_t i = 0; i < a.relations.size(); ++i) {
        if (a.relations[i].subject != b.relations[i].subject) return false;
        if (a.relations[i].object != b.relations[i].object) return false;
    }
    return true;
}

int field_diff_count(const PromptSpec& a, const PromptSpec& b) {
    int diff = 0;
    const size_t n_obj = std::min(a.objects.size(), b.objects.size());
    for (size_t i = 0; i < n_obj; ++i) {
        diff += a.objects[i].shape != b.objects[i].shape;
        diff += a.objects[i].color != b.objects[i].color;
        diff += a.objects[i].count != b.objects[i].count;
    }
    const size_t n_rel = std::min(a.relations.size(), b.relations.size());
    for (size_t i = 0; i < n_rel; ++i) {
        diff += a.relations[i].kind != b.relations[i].kind;
        diff += a.relations[i].subject != b.relations[i].subject ||
                a.relations[i].object != b.relations[i].object;
    }
    return diff;
}

}  // namespace gridrl
