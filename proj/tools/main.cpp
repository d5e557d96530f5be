// gridrl command line: dataset generation, SFT, RL training, evaluation and
// report tooling on top of the shared-library C API.

#include <csignal>
#include <cstdio>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "gridrl.h"

namespace {

void on_signal(int) { grl_request_abort(); }

int exit_code_for(grl_status status) {
    switch (status) {
        case GRL_OK: return 0;
        case GRL_ERR_CONFIG: return 2;
        case GRL_ERR_NUMERIC: return 3;
        case GRL_ERR_RESUME: return 4;
        default: return 1;
    }
}

int fail(grl_status status) {
    std::fprintf(stderr, "error (%s): %s\n", grl_status_name(status), grl_last_error());
    return exit_code_for(status);
}

struct ConfigHandle {
    grl_config* cfg = nullptr;
    ~ConfigHandle() { grl_config_destroy(cfg); }
};

// categories come in as a comma list; the config wants a JSON array
std::string categories_to_json(const std::string& csv) {
    std::string out = "[";
    size_t start = 0;
    while (start <= csv.size()) {
        size_t end = csv.find(',', start);
        if (end == std::string::npos) end = csv.size();
        const std::string item = csv.substr(start, end - start);
        if (!item.empty()) {
            if (out.size() > 1) out += ",";
            out += "\"" + item + "\"";
        }
        if (end == csv.size()) break;
        start = end + 1;
    }
    return out + "]";
}

struct CommonOpts {
    std::string config_path;
    std::vector<std::string> sets;
    std::string seed;
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
    cmd->add_option("--config", opts.config_path, "run config file (JSON)");
    cmd->add_option("--set", opts.sets, "override a config key, e.g. --set grpo.group_size=5");
    cmd->add_option("--seed", opts.seed, "override the run seed");
}

grl_status build_config(const CommonOpts& opts, ConfigHandle& handle) {
    grl_status st = opts.config_path.empty() ? grl_config_create(&handle.cfg)
                                             : grl_config_load(opts.config_path.c_str(), &handle.cfg);
    if (st != GRL_OK) return st;
    if ((st = grl_config_apply_env(handle.cfg, "GRIDRL_")) != GRL_OK) return st;
    for (const auto& kv : opts.sets) {
        const size_t eq = kv.find('=');
        if (eq == std::string::npos) {
            std::fprintf(stderr, "error: --set expects key=value, got '%s'\n", kv.c_str());
            return GRL_ERR_CONFIG;
        }
        st = grl_config_set(handle.cfg, kv.substr(0, eq).c_str(), kv.substr(eq + 1).c_str());
        if (st != GRL_OK) return st;
    }
    if (!opts.seed.empty()) {
        if ((st = grl_config_set(handle.cfg, "seed", opts.seed.c_str())) != GRL_OK) return st;
    }
    return GRL_OK;
}

}  // namespace

int main(int argc, char** argv) {
    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);

    CLI::App app{"token-grid text-to-image trainer with paired-prompt RL"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(grl_version()));

    // gen-data
    auto* gen = app.add_subcommand("gen-data", "generate a paired dataset and eval suite");
    CommonOpts gen_common;
    add_common(gen, gen_common);
    std::string gen_out = "train.records", gen_suite, gen_categories;
    std::string gen_pairs, gen_theta_pos, gen_theta_neg;
    gen->add_option("--out", gen_out, "output records file")->required();
    gen->add_option("--suite-out", gen_suite, "also write an eval suite here");
    gen->add_option("--pairs", gen_pairs, "number of pairs");
    gen->add_option("--categories", gen_categories, "comma list of categories");
    gen->add_option("--theta-pos", gen_theta_pos, "verification positive threshold");
    gen->add_option("--theta-neg", gen_theta_neg, "verification negative threshold");

    // sft
    auto* sft = app.add_subcommand("sft", "supervised fine-tuning stage");
    CommonOpts sft_common;
    add_common(sft, sft_common);
    std::string sft_data, sft_ckpt = "sft.ckpt", sft_metrics = "sft_metrics.records";
    sft->add_option("--data", sft_data, "paired-record training data")->required();
    sft->add_option("--ckpt-out", sft_ckpt, "checkpoint output path");
    sft->add_option("--metrics-out", sft_metrics, "metrics lines output path");

    // train
    auto* train = app.add_subcommand("train", "reinforcement-learning stage");
    CommonOpts train_common;
    add_common(train, train_common);
    std::string train_data, train_mode, train_resume, train_init;
    std::string train_ckpt = "rl.ckpt", train_metrics = "train_metrics.records";
    std::string train_endpoint;
    double train_lr_scale = 1.0;
    bool train_refresh = false;
    train->add_option("--data", train_data, "paired-record training data")->required();
    train->add_option("--mode", train_mode,
                      "pair_grpo|no_group_expanding|no_gt_image|vanilla_grpo");
    train->add_option("--resume", train_resume, "resume from an rl checkpoint");
    train->add_option("--init", train_init, "initialize from an sft checkpoint");
    train->add_option("--ckpt-out", train_ckpt, "checkpoint output path");
    train->add_option("--metrics-out", train_metrics, "metrics lines output path");
    train->add_option("--reward-endpoint", train_endpoint, "remote reward endpoint host:port");
    train->add_option("--lr-scale", train_lr_scale, "scale the lr schedule (resume intervention)");
    train->add_flag("--refresh-reference", train_refresh, "reset the reference policy on start");

    // eval
    auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on a suite");
    CommonOpts eval_common;
    add_common(eval, eval_common);
    std::string eval_ckpt, eval_suite, eval_report = "report.records";
    eval->add_option("--checkpoint", eval_ckpt, "policy checkpoint")->required();
    eval->add_option("--suite", eval_suite, "eval suite records")->required();
    eval->add_option("--report-out", eval_report, "report output path");

    // report
    auto* report = app.add_subcommand("report", "render a report table / metrics CSV");
    std::string report_file, report_metrics, report_csv;
    report->add_option("--report", report_file, "report records file to render");
    report->add_option("--metrics", report_metrics, "training metrics records");
    report->add_option("--csv-out", report_csv, "CSV output for metric curves");

    // compare
    auto* compare = app.add_subcommand("compare", "delta table between two reports");
    std::string cmp_a, cmp_b;
    compare->add_option("--a", cmp_a, "first report")->required();
    compare->add_option("--b", cmp_b, "second report")->required();

    // run
    auto* run = app.add_subcommand("run", "full pipeline: gen-data, sft, train, eval, report");
    CommonOpts run_common;
    add_common(run, run_common);
    std::string run_dir = "runs/default";
    run->add_option("--out-dir", run_dir, "output directory (owned exclusively by the run)");

    CLI11_PARSE(app, argc, argv);

    grl_status st = GRL_OK;
    if (gen->parsed()) {
        ConfigHandle h;
        if ((st = build_config(gen_common, h)) != GRL_OK) return fail(st);
        if (!gen_pairs.empty() && (st = grl_config_set(h.cfg, "world.pairs", gen_pairs.c_str())) != GRL_OK)
            return fail(st);
        if (!gen_theta_pos.empty() &&
            (st = grl_config_set(h.cfg, "world.theta_pos", gen_theta_pos.c_str())) != GRL_OK)
            return fail(st);
        if (!gen_theta_neg.empty() &&
            (st = grl_config_set(h.cfg, "world.theta_neg", gen_theta_neg.c_str())) != GRL_OK)
            return fail(st);
        if (!gen_categories.empty() &&
            (st = grl_config_set(h.cfg, "world.categories",
                                 categories_to_json(gen_categories).c_str())) != GRL_OK)
            return fail(st);
        st = grl_gen_data(h.cfg, gen_out.c_str(), gen_suite.empty() ? nullptr : gen_suite.c_str());
        if (st != GRL_OK) return fail(st);
        std::printf("wrote %s%s%s\n", gen_out.c_str(), gen_suite.empty() ? "" : " and ",
                    gen_suite.c_str());
    } else if (sft->parsed()) {
        ConfigHandle h;
        if ((st = build_config(sft_common, h)) != GRL_OK) return fail(st);
        st = grl_sft(h.cfg, sft_data.c_str(), sft_ckpt.c_str(), sft_metrics.c_str());
        if (st != GRL_OK) return fail(st);
        std::printf("sft checkpoint: %s\n", sft_ckpt.c_str());
    } else if (train->parsed()) {
        ConfigHandle h;
        if ((st = build_config(train_common, h)) != GRL_OK) return fail(st);
        if (!train_mode.empty() &&
            (st = grl_config_set(h.cfg, "grpo.mode", train_mode.c_str())) != GRL_OK)
            return fail(st);
        if (!train_endpoint.empty() &&
            (st = grl_config_set(h.cfg, "reward.endpoint", train_endpoint.c_str())) != GRL_OK)
            return fail(st);
        st = grl_train(h.cfg, train_data.c_str(), train_init.empty() ? nullptr : train_init.c_str(),
                       train_resume.empty() ? nullptr : train_resume.c_str(), train_ckpt.c_str(),
                       train_metrics.c_str(), train_lr_scale, train_refresh ? 1 : 0);
        if (st != GRL_OK) return fail(st);
        std::printf("rl checkpoint: %s\n", train_ckpt.c_str());
    } else if (eval->parsed()) {
        ConfigHandle h;
        if ((st = build_config(eval_common, h)) != GRL_OK) return fail(st);
        st = grl_eval(h.cfg, eval_ckpt.c_str(), eval_suite.c_str(), eval_report.c_str());
        if (st != GRL_OK) return fail(st);
        char* text = nullptr;
        if (grl_report_render(eval_report.c_str(), &text) == GRL_OK) {
            std::printf("%s", text);
            grl_string_free(text);
        }
    } else if (report->parsed()) {
        if (report_file.empty() && report_metrics.empty()) {
            std::fprintf(stderr, "error: report needs --report and/or --metrics\n");
            return 2;
        }
        if (!report_file.empty()) {
            char* text = nullptr;
            if ((st = grl_report_render(report_file.c_str(), &text)) != GRL_OK) return fail(st);
            std::printf("%s", text);
            grl_string_free(text);
        }
        if (!report_metrics.empty()) {
            if (report_csv.empty()) {
                std::fprintf(stderr, "error: --metrics requires --csv-out\n");
                return 2;
            }
            if ((st = grl_metrics_csv(report_metrics.c_str(), report_csv.c_str())) != GRL_OK)
                return fail(st);
            std::printf("wrote %s\n", report_csv.c_str());
        }
    } else if (compare->parsed()) {
        char* text = nullptr;
        if ((st = grl_compare(cmp_a.c_str(), cmp_b.c_str(), &text)) != GRL_OK) return fail(st);
        std::printf("%s", text);
        grl_string_free(text);
    } else if (run->parsed()) {
        ConfigHandle h;
        if ((st = build_config(run_common, h)) != GRL_OK) return fail(st);
        if ((st = grl_run_pipeline(h.cfg, run_dir.c_str())) != GRL_OK) return fail(st);
        std::printf("pipeline complete, manifest: %s/manifest.json\n", run_dir.c_str());
    }
    return 0;
}
