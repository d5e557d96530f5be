#include "gridrl/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <thread>

#include "gridrl/errors.hpp"
#include "gridrl/reward.hpp"
#include "gridrl/serialize.hpp"

namespace gridrl {

GridGenerator policy_generator(const PolicySnapshot& snapshot, const SamplerConfig& sampler) {
    return [snapshot, sampler](const PromptSpec& prompt, uint64_t sample_seed) {
        Rng rng(sample_seed);
        return sample_sequence(snapshot, prompt.prompt_tokens, sampler, rng).grid;
    };
}

CaseResult score_case(const GridGenerator& gen, const EvalCase& c, const VocabSpec& vocab,
                      uint64_t seed) {
    CaseResult out;
    out.case_id = c.id;
    out.category = c.category;
    int idx = 0;
    for (int j = 0; j < 2; ++j) {
        const PromptSpec& prompt = j == 0 ? c.prompt_1 : c.prompt_2;
        for (int k = 0; k < 2; ++k) {
            const uint64_t s = derive_seed(seed, "eval_image", static_cast<uint64_t>(c.id),
                                           static_cast<uint64_t>(j), static_cast<uint64_t>(k));
            const TokenGrid grid = gen(prompt, s);
            out.scores[static_cast<size_t>(idx++)] = reward(prompt, grid, vocab).total;
        }
    }
    return out;
}

EvalReport aggregate(const std::vector<CaseResult>& results) {
    std::map<Category, std::vector<const CaseResult*>> by_cat;
    for (const auto& r : results) by_cat[r.category].push_back(&r);

    EvalReport report;
    for (const auto& [cat, cases] : by_cat) {
        if (cases.empty()) continue;
        double sum = 0.0;
        double geo_sum = 0.0;
        for (const CaseResult* c : cases) {
            double log_prod = 0.0;
            bool zero = false;
            for (double s : c->scores) {
                sum += s;
                if (s < 1e-12) {
                    zero = true;
                } else {
                    log_prod += std::log(s);
                }
            }
            geo_sum += zero ? 0.0 : std::exp(log_prod / 4.0);
        }
        CategoryStats stats;
        stats.category = cat;
        stats.n = static_cast<int>(cases.size());
        stats.s_a = sum / (4.0 * stats.n);
        stats.s_g = geo_sum / stats.n;
        stats.gap = stats.s_a - stats.s_g;
        report.categories.push_back(stats);
    }
    if (report.categories.empty()) throw ValidationError("no case results to aggregate");
    for (const auto& s : report.categories) {
        report.overall_sa += s.s_a;
        report.overall_sg += s.s_g;
    }
    report.overall_sa /= static_cast<double>(report.categories.size());
    report.overall_sg /= static_cast<double>(report.categories.size());
    report.overall_gap = report.overall_sa - report.overall_sg;
    return report;
}

EvalReport evaluate_suite(const EvalSuite& suite, const GridGenerator& gen, const VocabSpec& vocab,
                          uint64_t seed, int threads) {
    std::vector<CaseResult> results(suite.cases.size());
    int n_threads = threads > 0 ? threads : static_cast<int>(std::thread::hardware_concurrency());
    n_threads = std::max(1, std::min<int>(n_threads, static_cast<int>(suite.cases.size())));
    if (n_threads == 1) {
        for (size_t i = 0; i < suite.cases.size(); ++i) {
            results[i] = score_case(gen, suite.cases[i], vocab, seed);
        }
    } else {
        std::vector<std::thread> pool;
        pool.reserve(static_cast<size_t>(n_threads));
        for (int t = 0; t < n_threads; ++t) {
            pool.emplace_back([&, t]() {
                for (size_t i = static_cast<size_t>(t); i < suite.cases.size();
                     i += static_cast<size_t>(n_threads)) {
                    results[i] = score_case(gen, suite.cases[i], vocab, seed);
                }
            });
        }
        for (auto& th : pool) th.join();
    }
    return aggregate(results);
}

void write_report_file(const std::string& path, const EvalReport& report) {
    RecordWriter writer(path);
    writer.write("report_meta", nlohmann::json{{"suite_digest", report.suite_digest},
                                               {"checkpoint_digest", report.checkpoint_digest}});
    for (const auto& c : report.categories) {
        writer.write("eval_category", nlohmann::json{{"category", to_string(c.category)},
                                                     {"s_a", c.s_a},
                                                     {"s_g", c.s_g},
                                                     {"gap", c.gap},
                                                     {"N", c.n}});
    }
    writer.write("eval_overall", nlohmann::json{{"s_a", report.overall_sa},
                                                {"s_g", report.overall_sg},
                                                {"gap", report.overall_gap}});
    writer.close();
}

EvalReport read_report_file(const std::string& path) {
    EvalReport report;
    bool have_overall = false;
    read_records(path, [&](const Record& r) {
        if (r.type == "report_meta") {
            report.suite_digest = r.payload.at("suite_digest").get<std::string>();
            report.checkpoint_digest = r.payload.at("checkpoint_digest").get<std::string>();
        } else if (r.type == "eval_category") {
            CategoryStats c;
            c.category = category_from_string(r.payload.at("category").get<std::string>());
            c.s_a = r.payload.at("s_a").get<double>();
            c.s_g = r.payload.at("s_g").get<double>();
            c.gap = r.payload.at("gap").get<double>();
            c.n = r.payload.at("N").get<int>();
            report.categories.push_back(c);
        } else if (r.type == "eval_overall") {
            report.overall_sa = r.payload.at("s_a").get<double>();
            report.overall_sg = r.payload.at("s_g").get<double>();
            report.overall_gap = r.payload.at("gap").get<double>();
            have_overall = true;
        }
    });
    if (report.categories.empty() || !have_overall) {
        throw ValidationError("report file is incomplete: " + path);
    }
    return report;
}

std::string render_report_table(const EvalReport& report) {
    char buf[160];
    std::string out;
    out += "category             s_a      s_g      gap      N\n";
    out += "---------------------------------------------------\n";
    for (const auto& c : report.categories) {
        std::snprintf(buf, sizeof(buf), "%-20s %.4f   %.4f   %.4f   %d\n", to_string(c.category),
                      c.s_a, c.s_g, c.gap, c.n);
        out += buf;
    }
    std::snprintf(buf, sizeof(buf), "%-20s %.4f   %.4f   %.4f   -\n", "overall", report.overall_sa,
                  report.overall_sg, report.overall_gap);
    out += buf;
    return out;
}

CompareResult compare_reports(const EvalReport& a, const EvalReport& b) {
    if (a.suite_digest != b.suite_digest) {
        throw ValidationError("reports were produced on different suites");
    }
    std::map<Category, const CategoryStats*> bmap;
    for (const auto& c : b.categories) bmap[c.category] = &c;
    CompareResult out;
    for (const auto& c : a.categories) {
        const auto it = bmap.find(c.category);
        if (it == bmap.end()) continue;
        ReportDelta d;
        d.category = c.category;
        d.d_sa = c.s_a - it->second->s_a;
        d.d_sg = c.s_g - it->second->s_g;
        d.d_gap = c.gap - it->second->gap;
        out.categories.push_back(d);
    }
    out.overall.d_sa = a.overall_sa - b.overall_sa;
    out.overall.d_sg = a.overall_sg - b.overall_sg;
    out.overall.d_gap = a.overall_gap - b.overall_gap;
    return out;
}

std::string render_compare_table(const CompareResult& cmp) {
    char buf[160];
    std::string out;
    out += "category             d_s_a     d_s_g     d_gap\n";
    out += "------------------------------------------------\n";
    for (const auto& d : cmp.categories) {
        std::snprintf(buf, sizeof(buf), "%-20s %+.4f   %+.4f   %+.4f\n", to_string(d.category),
                      d.d_sa, d.d_sg, d.d_gap);
        out += buf;
    }
    std::snprintf(buf, sizeof(buf), "%-20s %+.4f   %+.4f   %+.4f\n", "overall", cmp.overall.d_sa,
                  cmp.overall.d_sg, cmp.overall.d_gap);
    out += buf;
    return out;
}

void metrics_to_csv(const std::string& metrics_path, const std::string& csv_path) {
    std::string csv;
    bool header_written = false;
    bool with_wall = false;
    read_records(metrics_path, [&](const Record& r) {
        if (r.type != "train_metrics" && r.type != "sft_metrics") return;
        if (!header_written) {
            if (r.type == "sft_metrics") {
                csv = "iter,loss,lr\n";
            } else {
                with_wall = r.payload.contains("wall_ms");
                csv = with_wall ? "iter,mean_reward,p,lr,clip_frac,mean_kl,wall_ms\n"
                                : "iter,mean_reward,p,lr,clip_frac,mean_kl\n";
            }
            header_written = true;
        }
        char buf[256];
        if (r.type == "sft_metrics") {
            std::snprintf(buf, sizeof(buf), "%lld,%.17g,%.17g\n",
                          static_cast<long long>(r.payload.at("iter").get<int64_t>()),
                          r.payload.at("loss").get<double>(), r.payload.at("lr").get<double>());
        } else if (with_wall) {
            std::snprintf(buf, sizeof(buf), "%lld,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n",
                          static_cast<long long>(r.payload.at("iter").get<int64_t>()),
                          r.payload.at("mean_reward").get<double>(), r.payload.at("p").get<double>(),
                          r.payload.at("lr").get<double>(), r.payload.at("clip_frac").get<double>(),
                          r.payload.at("mean_kl").get<double>(),
                          r.payload.at("wall_ms").get<double>());
        } else {
            std::snprintf(buf, sizeof(buf), "%lld,%.17g,%.17g,%.17g,%.17g,%.17g\n",
                          static_cast<long long>(r.payload.at("iter").get<int64_t>()),
                          r.payload.at("mean_reward").get<double>(), r.payload.at("p").get<double>(),
                          r.payload.at("lr").get<double>(), r.payload.at("clip_frac").get<double>(),
                          r.payload.at("mean_kl").get<double>());
        }
        csv += buf;
    });
    if (!header_written) throw ValidationError("no metric records found in " + metrics_path);
    write_text_file(csv_path, csv);
}

}  // namespace gridrl
