#include "gridrl/world.hpp"

#include <algorithm>
#include <set>

#include "gridrl/errors.hpp"
#include "gridrl/reward.hpp"
#include "gridrl/serialize.hpp"

namespace gridrl {

namespace {

constexpr int kPlacementTries = 2000;

std::string describe_question(const Question& q) {
    std::string s = to_string(q.kind);
    s += "(";
    s += to_string(q.subject_shape);
    if (q.kind == QuestionKind::relation) {
        s += std::string(",") + to_string(q.rel) + "," + to_string(q.object_shape);
    }
    s += ")";
    return s;
}

}  // namespace

RenderResult render_with_placement(const PromptSpec& spec, const VocabSpec& vocab, Rng& rng) {
    spec.validate(vocab);
    const int S = vocab.seq_len();
    int needed = 0;
    for (const auto& o : spec.objects) needed += o.count;
    if (needed > S) throw GenerationError("objects exceed grid capacity");

    std::vector<int> positions(static_cast<size_t>(S));
    for (int i = 0; i < S; ++i) positions[static_cast<size_t>(i)] = i;

    const Question* failed = nullptr;
    RewardBreakdown last;
    for (int attempt = 0; attempt < kPlacementTries; ++attempt) {
        rng.shuffle(positions);
        RenderResult out;
        out.grid = TokenGrid::background(vocab);
        out.object_cells.assign(spec.objects.size(), {});
        int next = 0;
        for (size_t i = 0; i < spec.objects.size(); ++i) {
            const auto& o = spec.objects[i];
            for (int k = 0; k < o.count; ++k) {
                const int pos = positions[static_cast<size_t>(next++)];
                out.grid.tokens[static_cast<size_t>(pos)] = VocabSpec::object_token(o.shape, o.color);
                out.object_cells[i].push_back(pos);
            }
        }
        last = reward(spec, out.grid, vocab);
        if (last.total == 1.0) return out;
    }
    for (const auto& [q, s] : last.per_question) {
        if (s < 1.0) {
            failed = &q;
            break;
        }
    }
    throw GenerationError("unsatisfiable spec, violated constraint: " +
                          (failed != nullptr ? describe_question(*failed) : std::string("unknown")));
}

TokenGrid render_ground_truth(const PromptSpec& spec, const VocabSpec& vocab, Rng& rng) {
    return render_with_placement(spec, vocab, rng).grid;
}

bool verify_pair(PairedRecord& rec, const VocabSpec& vocab, double theta_pos, double theta_neg,
                 VerifyDetail* detail) {
    VerifyDetail d;
    const int diff = field_diff_count(rec.prompt_1, rec.prompt_2);
    d.skeleton_ok = same_skeleton(rec.prompt_1, rec.prompt_2) && diff >= 1 && diff <= 3;
    d.r11 = reward(rec.prompt_1, rec.grid_1, vocab).total;
    d.r22 = reward(rec.prompt_2, rec.grid_2, vocab).total;
    d.r12 = reward(rec.prompt_1, rec.grid_2, vocab).total;
    d.r21 = reward(rec.prompt_2, rec.grid_1, vocab).total;
    d.self_ok = d.r11 >= theta_pos && d.r22 >= theta_pos;
    d.cross_ok = d.r12 <= theta_neg && d.r21 <= theta_neg;
    rec.verified = d.skeleton_ok && d.self_ok && d.cross_ok;
    if (detail != nullptr) *detail = d;
    return rec.verified;
}

namespace {

std::vector<Shape> pick_distinct_shapes(int n, Rng& rng) {
    std::vector<Shape> all{Shape::circle, Shape::square, Shape::triangle};
    rng.shuffle(all);
    all.resize(static_cast<size_t>(n));
    return all;
}

Color random_color(Rng& rng) { return static_cast<Color>(rng.uniform_int(0, kNumColors - 1)); }

int random_small_count(Rng& rng) {
    // counts 1..3, skewed toward singletons
    const double u = rng.uniform01();
    if (u < 0.60) return 1;
    if (u < 0.85) return 2;
    return 3;
}

}  // namespace

PromptSpec SceneSampler::sample_scene(Category category, Rng& rng) const {
    const VocabSpec& vocab = cfg_.vocab;
    std::vector<SceneObject> objects;
    std::vector<SceneRelation> relations;

    switch (category) {
        case Category::color:
        case Category::overall_appearance: {
            int n;
            if (category == Category::overall_appearance) {
                n = rng.bernoulli(0.55) ? 1 : 2;  // keep a spare shape for the swap
            } else {
                const double u = rng.uniform01();
                n = u < 0.35 ? 1 : (u < 0.75 ? 2 : 3);
            }
            const auto shapes = pick_distinct_shapes(n, rng);
            for (int i = 0; i < n; ++i) {
                objects.push_back({shapes[static_cast<size_t>(i)], random_color(rng),
                                   random_small_count(rng)});
            }
            std::vector<int> singletons;
            for (int i = 0; i < n; ++i) {
                if (objects[static_cast<size_t>(i)].count == 1) singletons.push_back(i);
            }
            if (singletons.size() >= 2 && rng.bernoulli(0.5)) {
                const int a = rng.uniform_int(0, static_cast<int>(singletons.size()) - 1);
                int b = rng.uniform_int(0, static_cast<int>(singletons.size()) - 2);
                if (b >= a) ++b;
                relations.push_back({singletons[static_cast<size_t>(a)],
                                     static_cast<RelationKind>(rng.uniform_int(0, kNumRelations - 1)),
                                     singletons[static_cast<size_t>(b)]});
            }
            break;
        }
        case Category::counting: {
            if (rng.bernoulli(0.6)) {
                objects.push_back({pick_distinct_shapes(1, rng)[0], random_color(rng),
                                   rng.uniform_int(1, 3)});
            } else {
                const auto shapes = pick_distinct_shapes(2, rng);
                objects.push_back({shapes[0], random_color(rng), rng.uniform_int(1, 2)});
                objects.push_back({shapes[1], random_color(rng), random_small_count(rng)});
            }
            break;
        }
        case Category::position: {
            const bool spectator = rng.bernoulli(0.35);
            const auto shapes = pick_distinct_shapes(spectator ? 3 : 2, rng);
            objects.push_back({shapes[0], random_color(rng), 1});
            objects.push_back({shapes[1], random_color(rng), 1});
            if (spectator) {
                objects.push_back({shapes[2], random_color(rng), random_small_count(rng)});
            }
            relations.push_back(
                {0, static_cast<RelationKind>(rng.uniform_int(0, kNumRelations - 1)), 1});
            break;
        }
    }
    return make_prompt(std::move(objects), std::move(relations), category, vocab);
}

PromptSpec perturb_spec(const PromptSpec& base, Category category, const VocabSpec& vocab,
                        Rng& rng) {
    PromptSpec out = base;
    switch (category) {
        case Category::color: {
            const int i = rng.uniform_int(0, static_cast<int>(base.objects.size()) - 1);
            const int old_color = static_cast<int>(base.objects[static_cast<size_t>(i)].color);
            int c = rng.uniform_int(0, kNumColors - 2);
            if (c >= old_color) ++c;
            out.objects[static_cast<size_t>(i)].color = static_cast<Color>(c);
            break;
        }
        case Category::overall_appearance: {
            const int i = rng.uniform_int(0, static_cast<int>(base.objects.size()) - 1);
            std::set<int> used;
            for (const auto& o : base.objects) used.insert(static_cast<int>(o.shape));
            std::vector<int> free_shapes;
            for (int s = 0; s < kNumShapes; ++s) {
                if (!used.contains(s)) free_shapes.push_back(s);
            }
            if (free_shapes.empty()) throw GenerationError("no unused shape for appearance edit");
            out.objects[static_cast<size_t>(i)].shape = static_cast<Shape>(
                free_shapes[static_cast<size_t>(rng.uniform_int(0, static_cast<int>(free_shapes.size()) - 1))]);
            break;
        }
        case Category::counting: {
            // only the first object is counted-editable by scene construction;
            // two-object scenes stay within 1<->2 so the edit remains detectable
            const int i = 0;
            const int old_count = base.objects[static_cast<size_t>(i)].count;
            const int limit = base.objects.size() > 1 ? 2 : kMaxCount;
            int delta;
            if (old_count <= 1) {
                delta = 1;
            } else if (old_count >= limit) {
                delta = -1;
            } else {
                delta = rng.bernoulli(0.5) ? 1 : -1;
            }
            out.objects[static_cast<size_t>(i)].count = old_count + delta;
            break;
        }
        case Category::position: {
            if (base.relations.empty()) throw GenerationError("no relation to flip");
            auto& r = out.relations.front();
            switch (r.kind) {
                case RelationKind::left_of: r.kind = RelationKind::right_of; break;
                case RelationKind::right_of: r.kind = RelationKind::left_of; break;
                case RelationKind::above: r.kind = RelationKind::below; break;
                case RelationKind::below: r.kind = RelationKind::above; break;
            }
            break;
        }
    }
    out.finalize(vocab);
    return out;
}

bool in_eval_bucket(const std::string& surface_text, double eval_fraction) {
    const uint64_t h = fnv1a64(surface_text);
    return static_cast<double>(h % 10000ull) < eval_fraction * 10000.0;
}

namespace {

int find_edited_object(const PromptSpec& a, const PromptSpec& b) {
    for (size_t i = 0; i < a.objects.size(); ++i) {
        if (!(a.objects[i] == b.objects[i])) return static_cast<int>(i);
    }
    return -1;
}

// grid_2 := grid_1 with only the edited cells rewritten
TokenGrid apply_edit_to_grid(const RenderResult& base_render, const PromptSpec& base,
                             const PromptSpec& edited, Category category, const VocabSpec& vocab,
                             Rng& rng) {
    TokenGrid g = base_render.grid;
    switch (category) {
        case Category::color:
        case Category::overall_appearance: {
            const int i = find_edited_object(base, edited);
            if (i < 0) throw GenerationError("edit did not change any object");
            const auto& o = edited.objects[static_cast<size_t>(i)];
            for (int pos : base_render.object_cells[static_cast<size_t>(i)]) {
                g.tokens[static_cast<size_t>(pos)] = VocabSpec::object_token(o.shape, o.color);
            }
            break;
        }
        case Category::counting: {
            const int i = find_edited_object(base, edited);
            if (i < 0) throw GenerationError("edit did not change any object");
            const auto& cells = base_render.object_cells[static_cast<size_t>(i)];
            const int delta = edited.objects[static_cast<size_t>(i)].count -
                              base.objects[static_cast<size_t>(i)].count;
            if (delta == 1) {
                std::vector<int> free_cells;
                for (size_t p = 0; p < g.tokens.size(); ++p) {
                    if (g.tokens[p] == VocabSpec::background_token()) {
                        free_cells.push_back(static_cast<int>(p));
                    }
                }
                if (free_cells.empty()) throw GenerationError("no free cell for count edit");
                const int pos = free_cells[static_cast<size_t>(
                    rng.uniform_int(0, static_cast<int>(free_cells.size()) - 1))];
                const auto& o = edited.objects[static_cast<size_t>(i)];
                g.tokens[static_cast<size_t>(pos)] = VocabSpec::object_token(o.shape, o.color);
            } else if (delta == -1) {
                const int k = rng.uniform_int(0, static_cast<int>(cells.size()) - 1);
                g.tokens[static_cast<size_t>(cells[static_cast<size_t>(k)])] =
                    VocabSpec::background_token();
            } else {
                throw GenerationError("count edit must be +/-1");
            }
            break;
        }
        case Category::position: {
            const auto& r = base.relations.front();
            const auto& subj_cells = base_render.object_cells[static_cast<size_t>(r.subject)];
            const auto& obj_cells = base_render.object_cells[static_cast<size_t>(r.object)];
            if (subj_cells.size() != 1 || obj_cells.size() != 1) {
                throw GenerationError("relation participants must be singletons");
            }
            std::swap(g.tokens[static_cast<size_t>(subj_cells[0])],
                      g.tokens[static_cast<size_t>(obj_cells[0])]);
            break;
        }
    }
    (void)vocab;
    return g;
}

void sprinkle_distractors(TokenGrid& g2, const TokenGrid& g1, const PromptSpec& p1,
                          const PromptSpec& p2, double density, Rng& rng) {
    std::set<int> used;
    for (const auto& o : p1.objects) used.insert(static_cast<int>(o.shape));
    for (const auto& o : p2.objects) used.insert(static_cast<int>(o.shape));
    std::vector<int> free_shapes;
    for (int s = 0; s < kNumShapes; ++s) {
        if (!used.contains(s)) free_shapes.push_back(s);
    }
    if (free_shapes.empty()) return;  // every shape is referenced, nothing is invisible
    for (size_t p = 0; p < g2.tokens.size(); ++p) {
        const bool free_in_both = g1.tokens[p] == VocabSpec::background_token() &&
                                  g2.tokens[p] == VocabSpec::background_token();
        if (!free_in_both) continue;
        if (!rng.bernoulli(density)) continue;
        const Shape s = static_cast<Shape>(free_shapes[static_cast<size_t>(
            rng.uniform_int(0, static_cast<int>(free_shapes.size()) - 1))]);
        g2.tokens[p] = VocabSpec::object_token(s, random_color(rng));
    }
}

}  // namespace

PairedRecord make_pair(const PromptSpec& base, Category category, const WorldConfig& cfg, Rng& rng,
                       const TextFilter* text_filter) {
    const VocabSpec& vocab = cfg.vocab;
    const RenderResult base_render = render_with_placement(base, vocab, rng);
    std::string last_reason = "perturbation never produced a valid record";
    for (int attempt = 0; attempt < cfg.max_retries; ++attempt) {
        PromptSpec edited;
        try {
            edited = perturb_spec(base, category, vocab, rng);
        } catch (const GenerationError& e) {
            last_reason = e.what();
            continue;
        }
        if (text_filter != nullptr && !(*text_filter)(edited.surface_text)) {
            last_reason = "edited prompt landed outside the requested partition";
            continue;
        }
        PairedRecord rec;
        rec.prompt_1 = base;
        rec.grid_1 = base_render.grid;
        rec.prompt_2 = edited;
        try {
            rec.grid_2 = apply_edit_to_grid(base_render, base, edited, category, vocab, rng);
        } catch (const GenerationError& e) {
            last_reason = e.what();
            continue;
        }
        if (rng.bernoulli(cfg.free_rerand_prob)) {
            sprinkle_distractors(rec.grid_2, rec.grid_1, rec.prompt_1, rec.prompt_2,
                                 cfg.distractor_density, rng);
        }
        rec.category = category;
        if (verify_pair(rec, vocab, cfg.theta_pos, cfg.theta_neg)) return rec;
        last_reason = "post-verification rejected the record";
    }
    throw GenerationError("pair construction failed after " + std::to_string(cfg.max_retries) +
                          " retries: " + last_reason);
}

std::vector<Category> enabled_categories(const WorldConfig& cfg) {
    std::vector<Category> out;
    out.reserve(cfg.categories.size());
    for (const auto& name : cfg.categories) out.push_back(category_from_string(name));
    return out;
}

GenStats generate_dataset(const WorldConfig& cfg, uint64_t seed, int n_pairs,
                          const std::function<void(const PairedRecord&)>& sink) {
    const SceneSampler sampler(cfg);
    const auto cats = enabled_categories(cfg);
    std::vector<double> weights;
    weights.reserve(cats.size());
    for (Category c : cats) weights.push_back(cfg.category_weights[static_cast<size_t>(c)]);
    const TextFilter train_filter = [&](const std::string& text) {
        return !in_eval_bucket(text, cfg.eval_fraction);
    };

    GenStats stats;
    uint64_t stream = 0;
    const uint64_t max_streams = static_cast<uint64_t>(n_pairs) * 1000ull + 100000ull;
    while (stats.emitted < n_pairs) {
        if (stream >= max_streams) {
            throw GenerationError("dataset generation exhausted its stream budget");
        }
        Rng rng(derive_seed(seed, "train_pair", stream++));
        const Category cat = cats[static_cast<size_t>(rng.weighted_index(weights))];
        const PromptSpec base = sampler.sample_scene(cat, rng);
        if (!train_filter(base.surface_text)) {
            ++stats.skipped;
            continue;
        }
        try {
            const PairedRecord rec = make_pair(base, cat, cfg, rng, &train_filter);
            sink(rec);
            ++stats.emitted;
        } catch (const GenerationError&) {
            ++stats.skipped;
        }
    }
    return stats;
}

EvalSuite build_eval_suite(const WorldConfig& cfg, uint64_t seed, int n_per_category) {
    const SceneSampler sampler(cfg);
    const TextFilter eval_filter = [&](const std::string& text) {
        return in_eval_bucket(text, cfg.eval_fraction);
    };
    EvalSuite suite;
    int id = 0;
    for (Category cat : enabled_categories(cfg)) {
        int emitted = 0;
        uint64_t stream = 0;
        const uint64_t max_streams = static_cast<uint64_t>(n_per_category) * 5000ull + 100000ull;
        while (emitted < n_per_category) {
            if (stream >= max_streams) {
                throw GenerationError(std::string("eval suite generation exhausted for category ") +
                                      to_string(cat));
            }
            Rng rng(derive_seed(seed, "eval_case", static_cast<uint64_t>(cat), stream++));
            const PromptSpec base = sampler.sample_scene(cat, rng);
            if (!eval_filter(base.surface_text)) continue;
            try {
                const PairedRecord rec = make_pair(base, cat, cfg, rng, &eval_filter);
                suite.cases.push_back({id++, cat, rec.prompt_1, rec.prompt_2});
                ++emitted;
            } catch (const GenerationError&) {
            }
        }
    }
    return suite;
}

void write_dataset_file(const std::string& path, const WorldConfig& cfg, uint64_t seed,
                        int n_pairs, GenStats* stats) {
    RecordWriter writer(path);
    const GenStats s = generate_dataset(cfg, seed, n_pairs, [&](const PairedRecord& rec) {
        writer.write("paired_record", rec);
    });
    writer.close();
    if (stats != nullptr) *stats = s;
}

std::vector<PairedRecord> read_dataset_file(const std::string& path, const VocabSpec& vocab) {
    std::vector<PairedRecord> out;
    read_records(path, [&](const Record& r) {
        if (r.type != "paired_record") return;
        PairedRecord rec = r.payload.get<PairedRecord>();
        rec.prompt_1.validate(vocab);
        rec.prompt_2.validate(vocab);
        rec.grid_1.validate(vocab);
        rec.grid_2.validate(vocab);
        out.push_back(std::move(rec));
    });
    if (out.empty()) throw ValidationError("dataset file contains no paired records: " + path);
    return out;
}

void write_suite_file(const std::string& path, const EvalSuite& suite) {
    RecordWriter writer(path);
    for (const auto& c : suite.cases) {
        nlohmann::json payload{{"id", c.id},
                               {"category", to_string(c.category)},
                               {"prompt_1", c.prompt_1},
                               {"prompt_2", c.prompt_2}};
        writer.write("eval_case", payload);
    }
    writer.close();
}

EvalSuite read_suite_file(const std::string& path, const VocabSpec& vocab) {
    EvalSuite suite;
    read_records(path, [&](const Record& r) {
        if (r.type != "eval_case") return;
        EvalCase c;
        c.id = r.payload.at("id").get<int>();
        c.category = category_from_string(r.payload.at("category").get<std::string>());
        c.prompt_1 = r.payload.at("prompt_1").get<PromptSpec>();
        c.prompt_2 = r.payload.at("prompt_2").get<PromptSpec>();
        c.prompt_1.validate(vocab);
        c.prompt_2.validate(vocab);
        suite.cases.push_back(std::move(c));
    });
    if (suite.cases.empty()) throw ValidationError("suite file contains no eval cases: " + path);
    return suite;
}

}  // namespace gridrl
