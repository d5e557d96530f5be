#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "gridrl/config.hpp"
#include "gridrl/rng.hpp"
#include "gridrl/types.hpp"

namespace gridrl {

// Renders a grid that scores exactly 1.0 against the spec's oracle; object
// placement is randomized, everything else is background. Throws
// GenerationError (naming the violated constraint) when no placement can
// satisfy the oracle.
TokenGrid render_ground_truth(const PromptSpec& spec, const VocabSpec& vocab, Rng& rng);

struct RenderResult {
    TokenGrid grid;
    std::vector<std::vector<int>> object_cells;  // flat positions per object
};
RenderResult render_with_placement(const PromptSpec& spec, const VocabSpec& vocab, Rng& rng);

struct VerifyDetail {
    bool skeleton_ok = false;
    bool self_ok = false;
    bool cross_ok = false;
    double r11 = 0.0, r22 = 0.0, r12 = 0.0, r21 = 0.0;
};

// Three-condition post-verification; sets rec.verified and returns it.
bool verify_pair(PairedRecord& rec, const VocabSpec& vocab, double theta_pos, double theta_neg,
                 VerifyDetail* detail = nullptr);

// Scene generator with per-category structural constraints chosen so that a
// minimal category edit is always detectable by the oracle at the default
// verification thresholds:
//   color:    1-3 objects (distinct shapes), optional relation between two
//             singletons; edit recolors one object
//   counting: one counted object (1..4) or counted object plus a spectator
//             (counts 1<->2 only); no relations; edit is count +/-1
//   position: two singleton participants with one relation, optional
//             spectator; edit flips the relation
//   overall_appearance: 1-2 objects so a spare shape exists; edit swaps one
//             object's shape to an unused one
class SceneSampler {
public:
    explicit SceneSampler(const WorldConfig& cfg) : cfg_(cfg) {}

    PromptSpec sample_scene(Category category, Rng& rng) const;

private:
    WorldConfig cfg_;
};

// Applies the category edit to a copy of the base spec. Throws
// GenerationError when no valid edit exists (e.g. no spare shape).
PromptSpec perturb_spec(const PromptSpec& base, Category category, const VocabSpec& vocab,
                        Rng& rng);

using TextFilter = std::function<bool(const std::string&)>;

// Builds a verified record: grid_2 differs from grid_1 only in the edited
// object's cells plus (with probability free_rerand_prob) re-randomized free
// cells. Retries the edit up to cfg.max_retries times, then throws
// GenerationError.
PairedRecord make_pair(const PromptSpec& base, Category category, const WorldConfig& cfg,
                       Rng& rng, const TextFilter* text_filter = nullptr);

// Content-hash partition of the prompt space; evaluation prompts never
// collide with training prompts regardless of seeds.
bool in_eval_bucket(const std::string& surface_text, double eval_fraction);

std::vector<Category> enabled_categories(const WorldConfig& cfg);

// Streaming dataset generation; deterministic function of (cfg, seed).
struct GenStats {
    int emitted = 0;
    int skipped = 0;
};
GenStats generate_dataset(const WorldConfig& cfg, uint64_t seed, int n_pairs,
                          const std::function<void(const PairedRecord&)>& sink);

struct EvalCase {
    int id = 0;
    Category category{};
    PromptSpec prompt_1;
    PromptSpec prompt_2;
};

struct EvalSuite {
    std::vector<EvalCase> cases;
};

EvalSuite build_eval_suite(const WorldConfig& cfg, uint64_t seed, int n_per_category);

void write_dataset_file(const std::string& path, const WorldConfig& cfg, uint64_t seed,
                        int n_pairs, GenStats* stats = nullptr);
std::vector<PairedRecord> read_dataset_file(const std::string& path, const VocabSpec& vocab);
void write_suite_file(const std::string& path, const EvalSuite& suite);
EvalSuite read_suite_file(const std::string& path, const VocabSpec& vocab);

}  // namespace gridrl
