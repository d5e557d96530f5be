#pragma once

#include <array>
#include <functional>
#include <string>
#include <vector>

#include "gridrl/config.hpp"
#include "gridrl/policy.hpp"
#include "gridrl/types.hpp"
#include "gridrl/world.hpp"

namespace gridrl {

struct CaseResult {
    int case_id = 0;
    Category category{};
    // s[j][k] = consistency of image k of prompt j against prompt j
    std::array<double, 4> scores{};  // order: (1,1), (1,2), (2,1), (2,2)
};

struct CategoryStats {
    Category category{};
    double s_a = 0.0;
    double s_g = 0.0;
    double gap = 0.0;
    int n = 0;
};

struct EvalReport {
    std::vector<CategoryStats> categories;
    double overall_sa = 0.0;
    double overall_sg = 0.0;
    double overall_gap = 0.0;
    std::string suite_digest;
    std::string checkpoint_digest;
};

// Pluggable image source so oracles (perfect renders, constant grids) can
// stand in for the policy in tests.
using GridGenerator = std::function<TokenGrid(const PromptSpec&, uint64_t sample_seed)>;

GridGenerator policy_generator(const PolicySnapshot& snapshot, const SamplerConfig& sampler);

// Two images per prompt, each scored against its own prompt.
CaseResult score_case(const GridGenerator& gen, const EvalCase& c, const VocabSpec& vocab,
                      uint64_t seed);

// s_a = mean of all scores; s_g = mean over cases of the 4th root of the
// score product (log-space, scores below 1e-12 zero the case's term).
// Overall values are unweighted means across categories.
EvalReport aggregate(const std::vector<CaseResult>& results);

EvalReport evaluate_suite(const EvalSuite& suite, const GridGenerator& gen, const VocabSpec& vocab,
                          uint64_t seed, int threads);

void write_report_file(const std::string& path, const EvalReport& report);
EvalReport read_report_file(const std::string& path);

std::string render_report_table(const EvalReport& report);

struct ReportDelta {
    Category category{};
    double d_sa = 0.0;
    double d_sg = 0.0;
    double d_gap = 0.0;
};

struct CompareResult {
    std::vector<ReportDelta> categories;
    ReportDelta overall;
};

// Throws ValidationError when the reports were produced on different suites.
CompareResult compare_reports(const EvalReport& a, const EvalReport& b);
std::string render_compare_table(const CompareResult& cmp);

// Plot-ready CSV of training metric curves.
void metrics_to_csv(const std::string& metrics_path, const std::string& csv_path);

}  // namespace gridrl
