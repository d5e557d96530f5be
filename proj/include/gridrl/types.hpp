#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace gridrl {

enum class Shape : int { circle = 0, square = 1, triangle = 2 };
enum class Color : int { red = 0, green = 1, blue = 2, yellow = 3, purple = 4 };
enum class RelationKind : int { left_of = 0, right_of = 1, above = 2, below = 3 };
enum class Category : int { overall_appearance = 0, color = 1, counting = 2, position = 3 };

inline constexpr int kNumShapes = 3;
inline constexpr int kNumColors = 5;
inline constexpr int kNumRelations = 4;
inline constexpr int kNumCategories = 4;
inline constexpr int kMaxObjects = 3;
inline constexpr int kMaxRelationsPerScene = 2;
inline constexpr int kMaxCount = 4;

const char* to_string(Shape s);
const char* to_string(Color c);
const char* to_string(RelationKind r);
const char* to_string(Category c);
Shape shape_from_string(const std::string& s);
Color color_from_string(const std::string& s);
RelationKind relation_from_string(const std::string& s);
Category category_from_string(const std::string& s);

// Token-grid vocabulary: id 0 is the background token, ids 1.. are one token
// per (shape, color) combination.
struct VocabSpec {
    int grid_height = 4;
    int grid_width = 4;

    int vocab_size() const { return 1 + kNumShapes * kNumColors; }
    int seq_len() const { return grid_height * grid_width; }

    static constexpr int background_token() { return 0; }
    static int object_token(Shape s, Color c) {
        return 1 + static_cast<int>(s) * kNumColors + static_cast<int>(c);
    }
    static bool is_object_token(int id) { return id >= 1; }
    static Shape token_shape(int id);
    static Color token_color(int id);

    void validate() const;  // throws ValidationError
};

struct SceneObject {
    Shape shape{};
    Color color{};
    int count = 1;

    bool operator==(const SceneObject&) const = default;
};

struct SceneRelation {
    int subject = 0;  // index into objects
    RelationKind kind{};
    int object = 0;

    bool operator==(const SceneRelation&) const = default;
};

// Structured scene description plus its deterministic rendering as text and
// as a fixed-length conditioning token sequence.
struct PromptSpec {
    std::vector<SceneObject> objects;
    std::vector<SceneRelation> relations;
    Category category = Category::overall_appearance;
    std::string surface_text;
    std::vector<int> prompt_tokens;

    bool operator==(const PromptSpec&) const = default;

    // Fills surface_text and prompt_tokens from the structured fields.
    void finalize(const VocabSpec& vocab);
    void validate(const VocabSpec& vocab) const;  // throws ValidationError
};

// Builds a PromptSpec with derived fields populated.
PromptSpec make_prompt(std::vector<SceneObject> objects, std::vector<SceneRelation> relations,
                       Category category, const VocabSpec& vocab);

std::string render_surface_text(const PromptSpec& spec);

// Prompt-token vocabulary layout (conditioning side, distinct from the image
// token vocabulary).
namespace prompt_vocab {
inline constexpr int kPad = 0;
inline constexpr int kNull = 1;  // reserved classifier-free-guidance encoding
inline constexpr int kShapeBase = 2;
inline constexpr int kColorBase = kShapeBase + kNumShapes;
inline constexpr int kRelationBase = kColorBase + kNumColors;
inline constexpr int kCategoryBase = kRelationBase + kNumRelations;
inline constexpr int kCountBase = kCategoryBase + kNumCategories;   // encodes 1..kMaxCount
inline constexpr int kIndexBase = kCountBase + kMaxCount;           // object slot indices
inline constexpr int kSize = kIndexBase + kMaxObjects;
// slots: [category][3 x (count,color,shape)][2 x (subject,relation,object)]
inline constexpr int kEncodedLength = 1 + 3 * kMaxObjects + 3 * kMaxRelationsPerScene;
}  // namespace prompt_vocab

// Deterministic, injective encoding of a valid spec; fixed length with
// padding. Throws ValidationError on invalid specs.
std::vector<int> encode_prompt(const PromptSpec& spec, const VocabSpec& vocab);
PromptSpec decode_prompt(const std::vector<int>& tokens, const VocabSpec& vocab);
std::vector<int> null_prompt_tokens();

// Row-major token grid of length seq_len().
struct TokenGrid {
    int height = 0;
    int width = 0;
    std::vector<int> tokens;

    bool operator==(const TokenGrid&) const = default;

    int& at(int row, int col);
    int at(int row, int col) const;
    void validate(const VocabSpec& vocab) const;  // throws ValidationError

    static TokenGrid background(const VocabSpec& vocab);
};

// Row-major position; throws IndexError-style ValidationError when out of range.
int grid_index(int row, int col, int height, int width);

struct PairedRecord {
    PromptSpec prompt_1;
    TokenGrid grid_1;
    PromptSpec prompt_2;
    TokenGrid grid_2;
    Category category = Category::overall_appearance;
    bool verified = false;

    bool operator==(const PairedRecord&) const = default;
};

// Counts how many structured fields differ between two prompts with the same
// skeleton (object count, relation indices). Used by pair verification.
bool same_skeleton(const PromptSpec& a, const PromptSpec& b);
int field_diff_count(const PromptSpec& a, const PromptSpec& b);

}  // namespace gridrl
