#include "gridrl.h"

#include <atomic>
#include <cstring>
#include <string>

#include "gridrl/config.hpp"
#include "gridrl/errors.hpp"
#include "gridrl/eval.hpp"
#include "gridrl/serialize.hpp"
#include "gridrl/trainer.hpp"
#include "gridrl/world.hpp"

struct grl_config {
    gridrl::RunConfig cfg;
};

namespace {

thread_local std::string g_last_error;
std::atomic<int> g_abort_flag{0};

grl_status set_error(grl_status status, const std::string& message) {
    g_last_error = message;
    return status;
}

grl_status run_guarded(const std::function<void()>& fn) {
    try {
        fn();
        return GRL_OK;
    } catch (const gridrl::ConfigError& e) {
        return set_error(GRL_ERR_CONFIG, e.what());
    } catch (const gridrl::NumericalError& e) {
        return set_error(GRL_ERR_NUMERIC, e.what());
    } catch (const gridrl::ResumeMismatchError& e) {
        return set_error(GRL_ERR_RESUME, e.what());
    } catch (const gridrl::IoError& e) {
        return set_error(GRL_ERR_IO, e.what());
    } catch (const gridrl::RemoteError& e) {
        return set_error(GRL_ERR_REMOTE, e.what());
    } catch (const gridrl::GenerationError& e) {
        return set_error(GRL_ERR_GENERATION, e.what());
    } catch (const gridrl::ValidationError& e) {
        return set_error(GRL_ERR_VALIDATION, e.what());
    } catch (const std::exception& e) {
        return set_error(GRL_ERR, e.what());
    } catch (...) {
        return set_error(GRL_ERR, "unknown error");
    }
}

grl_status copy_out(const std::string& s, char* buf, size_t buf_len) {
    if (buf == nullptr || buf_len == 0) return set_error(GRL_ERR_VALIDATION, "null output buffer");
    if (s.size() + 1 > buf_len) return set_error(GRL_ERR_VALIDATION, "output buffer too small");
    std::memcpy(buf, s.c_str(), s.size() + 1);
    return GRL_OK;
}

char* dup_string(const std::string& s) {
    char* out = new char[s.size() + 1];
    std::memcpy(out, s.c_str(), s.size() + 1);
    return out;
}

}  // namespace

extern "C" {

grl_status grl_config_create(grl_config** out) {
    if (out == nullptr) return set_error(GRL_ERR_VALIDATION, "null output handle");
    return run_guarded([&] { *out = new grl_config{}; });
}

grl_status grl_config_load(const char* path, grl_config** out) {
    if (out == nullptr || path == nullptr) {
        return set_error(GRL_ERR_VALIDATION, "null argument");
    }
    return run_guarded([&] { *out = new grl_config{gridrl::load_config_file(path)}; });
}

void grl_config_destroy(grl_config* cfg) { delete cfg; }

grl_status grl_config_set(grl_config* cfg, const char* dotted_key, const char* value) {
    if (cfg == nullptr || dotted_key == nullptr || value == nullptr) {
        return set_error(GRL_ERR_VALIDATION, "null argument");
    }
    return run_guarded([&] { gridrl::apply_override(cfg->cfg, dotted_key, value); });
}

grl_status grl_config_get(const grl_config* cfg, const char* dotted_key, char* buf,
                          size_t buf_len) {
    if (cfg == nullptr || dotted_key == nullptr) {
        return set_error(GRL_ERR_VALIDATION, "null argument");
    }
    std::string value;
    const grl_status st =
        run_guarded([&] { value = gridrl::query_config(cfg->cfg, dotted_key); });
    if (st != GRL_OK) return st;
    return copy_out(value, buf, buf_len);
}

grl_status grl_config_apply_env(grl_config* cfg, const char* prefix) {
    if (cfg == nullptr) return set_error(GRL_ERR_VALIDATION, "null config");
    return run_guarded(
        [&] { gridrl::apply_env_overrides(cfg->cfg, prefix != nullptr ? prefix : "GRIDRL_"); });
}

grl_status grl_config_digest(const grl_config* cfg, char* buf, size_t buf_len) {
    if (cfg == nullptr) return set_error(GRL_ERR_VALIDATION, "null config");
    std::string digest;
    const grl_status st = run_guarded([&] { digest = cfg->cfg.digest(); });
    if (st != GRL_OK) return st;
    return copy_out(digest, buf, buf_len);
}

grl_status grl_config_save(const grl_config* cfg, const char* path) {
    if (cfg == nullptr || path == nullptr) return set_error(GRL_ERR_VALIDATION, "null argument");
    return run_guarded([&] { gridrl::save_config_file(cfg->cfg, path); });
}

grl_status grl_gen_data(const grl_config* cfg, const char* records_out, const char* suite_out) {
    if (cfg == nullptr || records_out == nullptr) {
        return set_error(GRL_ERR_VALIDATION, "null argument");
    }
    return run_guarded([&] {
        cfg->cfg.validate();
        gridrl::write_dataset_file(records_out, cfg->cfg.world, cfg->cfg.seed, cfg->cfg.world.pairs);
        if (suite_out != nullptr) {
            const gridrl::EvalSuite suite = gridrl::build_eval_suite(
                cfg->cfg.world, gridrl::derive_seed(cfg->cfg.seed, "eval_suite"),
                cfg->cfg.eval.n_per_category);
            gridrl::write_suite_file(suite_out, suite);
        }
    });
}

grl_status grl_sft(const grl_config* cfg, const char* data_path, const char* ckpt_out,
                   const char* metrics_out) {
    if (cfg == nullptr || data_path == nullptr || ckpt_out == nullptr || metrics_out == nullptr) {
        return set_error(GRL_ERR_VALIDATION, "null argument");
    }
    g_abort_flag.store(0);
    return run_guarded([&] {
        cfg->cfg.validate();
        gridrl::run_sft(cfg->cfg, data_path, ckpt_out, metrics_out, &g_abort_flag);
    });
}

grl_status grl_train(const grl_config* cfg, const char* data_path, const char* init_ckpt,
                     const char* resume_ckpt, const char* ckpt_out, const char* metrics_out,
                     double lr_scale, int refresh_reference) {
    if (cfg == nullptr || data_path == nullptr || ckpt_out == nullptr || metrics_out == nullptr) {
        return set_error(GRL_ERR_VALIDATION, "null argument");
    }
    g_abort_flag.store(0);
    return run_guarded([&] {
        cfg->cfg.validate();
        gridrl::TrainOptions opts;
        opts.data_path = data_path;
        opts.init_checkpoint = init_ckpt != nullptr ? init_ckpt : "";
        opts.resume_checkpoint = resume_ckpt != nullptr ? resume_ckpt : "";
        opts.checkpoint_out = ckpt_out;
        opts.metrics_out = metrics_out;
        opts.lr_scale = lr_scale > 0.0 ? lr_scale : 1.0;
        opts.refresh_reference_now = refresh_reference != 0;
        opts.abort_flag = &g_abort_flag;
        gridrl::run_rl(cfg->cfg, opts);
    });
}

grl_status grl_eval(const grl_config* cfg, const char* ckpt_path, const char* suite_path,
                    const char* report_out) {
    if (cfg == nullptr || ckpt_path == nullptr || suite_path == nullptr || report_out == nullptr) {
        return set_error(GRL_ERR_VALIDATION, "null argument");
    }
    return run_guarded([&] {
        cfg->cfg.validate();
        gridrl::run_eval_stage(cfg->cfg, ckpt_path, suite_path, report_out);
    });
}

grl_status grl_run_pipeline(const grl_config* cfg, const char* out_dir) {
    if (cfg == nullptr || out_dir == nullptr) return set_error(GRL_ERR_VALIDATION, "null argument");
    g_abort_flag.store(0);
    return run_guarded([&] {
        cfg->cfg.validate();
        gridrl::run_pipeline(cfg->cfg, out_dir, &g_abort_flag);
    });
}

grl_status grl_report_render(const char* report_path, char** out_text) {
    if (report_path == nullptr || out_text == nullptr) {
        return set_error(GRL_ERR_VALIDATION, "null argument");
    }
    return run_guarded([&] {
        const gridrl::EvalReport report = gridrl::read_report_file(report_path);
        *out_text = dup_string(gridrl::render_report_table(report));
    });
}

grl_status grl_metrics_csv(const char* metrics_path, const char* csv_out) {
    if (metrics_path == nullptr || csv_out == nullptr) {
        return set_error(GRL_ERR_VALIDATION, "null argument");
    }
    return run_guarded([&] { gridrl::metrics_to_csv(metrics_path, csv_out); });
}

grl_status grl_compare(const char* report_a, const char* report_b, char** out_text) {
    if (report_a == nullptr || report_b == nullptr || out_text == nullptr) {
        return set_error(GRL_ERR_VALIDATION, "null argument");
    }
    return run_guarded([&] {
        const gridrl::EvalReport a = gridrl::read_report_file(report_a);
        const gridrl::EvalReport b = gridrl::read_report_file(report_b);
        *out_text = dup_string(gridrl::render_compare_table(gridrl::compare_reports(a, b)));
    });
}

void grl_string_free(char* s) { delete[] s; }

void grl_request_abort(void) { g_abort_flag.store(1); }

const char* grl_last_error(void) { return g_last_error.c_str(); }

const char* grl_status_name(grl_status status) {
    switch (status) {
        case GRL_OK: return "ok";
        case GRL_ERR: return "error";
        case GRL_ERR_CONFIG: return "config_error";
        case GRL_ERR_NUMERIC: return "numerical_error";
        case GRL_ERR_RESUME: return "resume_mismatch";
        case GRL_ERR_IO: return "io_error";
        case GRL_ERR_VALIDATION: return "validation_error";
        case GRL_ERR_REMOTE: return "remote_error";
        case GRL_ERR_GENERATION: return "generation_error";
    }
    return "unknown";
}

const char* grl_version(void) { return gridrl::kCodeVersion; }

}  // extern "C"
