#include "flexmatch.h"

#include <cstring>
#include <fstream>
#include <memory>
#include <optional>
#include <string>
#include <variant>

#include "../core/oracle.hpp"
#include "../core/policies.hpp"
#include "../core/runner.hpp"
#include "../core/scenario.hpp"
#include "../core/trace_io.hpp"
#include "../core/trainer.hpp"
#include "../core/verify.hpp"

namespace {

thread_local std::string g_last_error = "no error";

void set_error(const std::string& message) { g_last_error = message; }

char* dup_string(const std::string& s) {
    char* out = new char[s.size() + 1];
    std::memcpy(out, s.c_str(), s.size() + 1);
    return out;
}

template <typename Fn>
fxm_status guarded(Fn&& fn) {
    try {
        return fn();
    } catch (const fxm::ConfigError& e) {
        set_error(e.what());
        return FXM_ERR_CONFIG;
    } catch (const fxm::ContractViolation& e) {
        set_error(e.what());
        return FXM_ERR_USAGE;
    } catch (const std::exception& e) {
        set_error(e.what());
        return FXM_ERR_RUNTIME;
    }
}

fxm_status require(bool ok, const char* message) {
    if (ok) return FXM_OK;
    set_error(message);
    return FXM_ERR_USAGE;
}

}  // namespace

struct fxm_config {
    fxm::Scenario scenario;
};

struct fxm_policy {
    // Either a named heuristic or a learnable model instance.
    std::string name;  // "ma" | "mh" | "med" | "la"
    std::unique_ptr<fxm::TcnPolicyModel> model;
};

struct fxm_result {
    std::vector<fxm::EpochScore> scores;
};

extern "C" {

const char* fxm_version(void) { return "flexmatch 1.0.0"; }

const char* fxm_last_error(void) { return g_last_error.c_str(); }

fxm_status fxm_config_open(const char* path, fxm_config** out) {
    if (auto rc = require(path && out, "fxm_config_open: null argument")) return rc;
    return guarded([&] {
        *out = new fxm_config{fxm::load_scenario(path)};
        return FXM_OK;
    });
}

fxm_status fxm_config_parse(const char* json_text, const char* base_dir, fxm_config** out) {
    if (auto rc = require(json_text && out, "fxm_config_parse: null argument")) return rc;
    return guarded([&] {
        *out = new fxm_config{fxm::parse_scenario(json_text, base_dir ? base_dir : ".")};
        return FXM_OK;
    });
}

fxm_status fxm_config_to_json(const fxm_config* config, char** out_text) {
    if (auto rc = require(config && out_text, "fxm_config_to_json: null argument")) return rc;
    return guarded([&] {
        *out_text = dup_string(fxm::scenario_to_json(config->scenario));
        return FXM_OK;
    });
}

int fxm_config_is_hybrid(const fxm_config* config) {
    return config && config->scenario.hybrid() ? 1 : 0;
}

void fxm_config_close(fxm_config* config) { delete config; }

void fxm_string_free(char* text) { delete[] text; }

fxm_status fxm_policy_open(const fxm_config* config, const char* name, uint64_t seed,
                           fxm_policy** out) {
    if (auto rc = require(config && name && out, "fxm_policy_open: null argument")) return rc;
    return guarded([&]() -> fxm_status {
        const std::string policy_name(name);
        auto policy = std::make_unique<fxm_policy>();
        if (policy_name == "ma" || policy_name == "mh" || policy_name == "med") {
            policy->name = policy_name;
        } else if (policy_name == "la1" || policy_name == "la2") {
            policy->name = "la";
            fxm::TcnConfig tcn;
            const fxm::MarketParams params = config->scenario.market_params();
            tcn.max_arrivals = params.max_arrivals;
            tcn.horizon = params.horizon;
            tcn.input_scale = [&] {
                double max_mean = 0.0;
                for (std::uint64_t e = 1; e <= (config->scenario.hybrid() ? 3u : 1u); ++e) {
                    const auto& profile = config->scenario.profile(e);
                    for (double v : profile.mean_load) max_mean = std::max(max_mean, v);
                    for (double v : profile.mean_generation) max_mean = std::max(max_mean, v);
                }
                return max_mean > 0.0 ? 1.0 / max_mean : 1.0;
            }();
            policy->model = std::make_unique<fxm::TcnPolicyModel>(tcn, seed);
        } else {
            set_error("unknown policy name: " + policy_name +
                      " (expected ma, mh, med, la1 or la2)");
            return FXM_ERR_USAGE;
        }
        *out = policy.release();
        return FXM_OK;
    });
}

fxm_status fxm_policy_open_checkpoint(const char* path, fxm_policy** out) {
    if (auto rc = require(path && out, "fxm_policy_open_checkpoint: null argument")) return rc;
    return guarded([&] {
        const fxm::Checkpoint ck = fxm::load_checkpoint(path);
        auto policy = std::make_unique<fxm_policy>();
        policy->name = "la";
        policy->model = std::make_unique<fxm::TcnPolicyModel>(ck.policy_config, ck.policy_params);
        *out = policy.release();
        return FXM_OK;
    });
}

fxm_status fxm_policy_save_checkpoint(const fxm_policy* policy, const char* path) {
    if (auto rc = require(policy && path, "fxm_policy_save_checkpoint: null argument")) return rc;
    if (auto rc = require(policy->model != nullptr, "only learnable policies have checkpoints"))
        return rc;
    return guarded([&] {
        fxm::Checkpoint ck;
        ck.policy_config = policy->model->config();
        ck.policy_params.assign(policy->model->params().begin(), policy->model->params().end());
        fxm::save_checkpoint(path, ck);
        return FXM_OK;
    });
}

void fxm_policy_close(fxm_policy* policy) { delete policy; }

namespace {

std::unique_ptr<std::ofstream> open_trace(const char* trace_path) {
    if (!trace_path) return nullptr;
    auto out = std::make_unique<std::ofstream>(trace_path, std::ios::trunc);
    if (!*out) throw std::runtime_error(std::string("cannot write trace file: ") + trace_path);
    return out;
}

}  // namespace

fxm_status fxm_evaluate(const fxm_config* config, fxm_policy* policy, uint64_t first_epoch,
                        uint64_t epochs, uint64_t seed, const char* trace_path, fxm_result** out) {
    if (auto rc = require(config && policy && out, "fxm_evaluate: null argument")) return rc;
    if (auto rc = require(first_epoch >= 1, "fxm_evaluate: epochs are 1-based")) return rc;
    return guarded([&] {
        auto trace = open_trace(trace_path);
        auto result = std::make_unique<fxm_result>();
        if (policy->model) {
            result->scores = fxm::evaluate_model(config->scenario, *policy->model, first_epoch,
                                                 epochs, seed, trace.get());
        } else {
            result->scores = fxm::evaluate_baseline(config->scenario, policy->name, first_epoch,
                                                    epochs, trace.get());
        }
        *out = result.release();
        return FXM_OK;
    });
}

fxm_status fxm_evaluate_oracle(const fxm_config* config, uint64_t first_epoch, uint64_t epochs,
                               const char* trace_path, fxm_result** out) {
    if (auto rc = require(config && out, "fxm_evaluate_oracle: null argument")) return rc;
    if (auto rc = require(first_epoch >= 1, "fxm_evaluate_oracle: epochs are 1-based")) return rc;
    return guarded([&] {
        auto trace = open_trace(trace_path);
        auto result = std::make_unique<fxm_result>();
        result->scores =
            fxm::evaluate_oracle(config->scenario, first_epoch, epochs, trace.get());
        *out = result.release();
        return FXM_OK;
    });
}

fxm_status fxm_train(const fxm_config* config, const char* algorithm, uint64_t epochs,
                     uint64_t batch, int lookahead_k, uint64_t seed, const char* resume_path,
                     const char* checkpoint_path, uint64_t checkpoint_interval,
                     const char* curve_path, fxm_result** out) {
    if (auto rc = require(config && algorithm, "fxm_train: null argument")) return rc;
    return guarded([&]() -> fxm_status {
        const fxm::Algo algo = fxm::algo_from_name(algorithm);
        if (algo == fxm::Algo::LA1 && lookahead_k > 0) {
            set_error("lookahead k applies to la2 only");
            return FXM_ERR_USAGE;
        }

        fxm::TrainOptions options;
        options.algo = algo;
        options.epochs = epochs;
        options.batch = batch > 0 ? batch : (algo == fxm::Algo::LA1 ? 80 : 20);
        options.lookahead_k = lookahead_k > 0 ? lookahead_k : 1;
        options.seed = seed;
        if (checkpoint_path) options.checkpoint_path = checkpoint_path;
        options.checkpoint_interval = checkpoint_interval;

        const fxm::MarketParams params = config->scenario.market_params();
        std::unique_ptr<fxm::TcnPolicyModel> policy;
        std::unique_ptr<fxm::TcnValueModel> critic;
        std::unique_ptr<fxm::AdamState> policy_adam;
        std::unique_ptr<fxm::AdamState> critic_adam;

        if (resume_path) {
            fxm::Checkpoint ck = fxm::load_checkpoint(resume_path);
            if (!ck.has_session)
                throw std::runtime_error("checkpoint has no training session to resume");
            if (ck.algo != algo)
                throw std::runtime_error("checkpoint was trained with a different algorithm");
            policy = std::make_unique<fxm::TcnPolicyModel>(ck.policy_config, ck.policy_params);
            policy_adam = std::make_unique<fxm::AdamState>(ck.policy_adam_state);
            options.policy_adam = ck.policy_adam;
            options.lookahead_k = ck.lookahead_k;
            options.batch = ck.batch;
            options.seed = ck.seed;
            options.first_epoch = ck.epochs_done + 1;
            if (ck.has_critic) {
                critic = std::make_unique<fxm::TcnValueModel>(ck.critic_config, ck.critic_params);
                critic_adam = std::make_unique<fxm::AdamState>(ck.critic_adam_state);
                options.critic_adam = ck.critic_adam;
            }
        } else {
            fxm::TcnConfig tcn;
            tcn.max_arrivals = params.max_arrivals;
            tcn.horizon = params.horizon;
            double max_mean = 0.0;
            for (std::uint64_t e = 1; e <= (config->scenario.hybrid() ? 3u : 1u); ++e) {
                const auto& profile = config->scenario.profile(e);
                for (double v : profile.mean_load) max_mean = std::max(max_mean, v);
                for (double v : profile.mean_generation) max_mean = std::max(max_mean, v);
            }
            tcn.input_scale = max_mean > 0.0 ? 1.0 / max_mean : 1.0;
            policy = std::make_unique<fxm::TcnPolicyModel>(tcn, seed);
            policy_adam = std::make_unique<fxm::AdamState>(policy->param_count());
            if (algo == fxm::Algo::LA2) {
                critic = std::make_unique<fxm::TcnValueModel>(tcn, seed);
                critic_adam = std::make_unique<fxm::AdamState>(critic->param_count());
            }
        }
        if (algo == fxm::Algo::LA2 && !critic)
            throw std::runtime_error("la2 resume needs a critic in the checkpoint");

        const fxm::TrainResult trained =
            fxm::train(config->scenario, *policy, critic.get(), *policy_adam, critic_adam.get(),
                       options);

        if (curve_path) {
            std::ofstream curve(curve_path, std::ios::trunc);
            if (!curve)
                throw std::runtime_error(std::string("cannot write curve file: ") + curve_path);
            fxm::write_curve_tsv(curve, trained.curve);
        }
        if (out) {
            auto result = std::make_unique<fxm_result>();
            result->scores.reserve(trained.curve.size());
            for (const auto& point : trained.curve)
                result->scores.push_back({point.epoch, point.welfare});
            *out = result.release();
        }
        return FXM_OK;
    });
}

size_t fxm_result_size(const fxm_result* result) { return result ? result->scores.size() : 0; }

fxm_status fxm_result_epoch(const fxm_result* result, size_t index, uint64_t* out) {
    if (auto rc = require(result && out && index < result->scores.size(),
                          "fxm_result_epoch: bad index or null argument"))
        return rc;
    *out = result->scores[index].epoch;
    return FXM_OK;
}

fxm_status fxm_result_welfare(const fxm_result* result, size_t index, double* out) {
    if (auto rc = require(result && out && index < result->scores.size(),
                          "fxm_result_welfare: bad index or null argument"))
        return rc;
    *out = result->scores[index].welfare;
    return FXM_OK;
}

fxm_status fxm_result_mean(const fxm_result* result, double* out) {
    if (auto rc = require(result && out, "fxm_result_mean: null argument")) return rc;
    *out = fxm::mean_welfare(result->scores);
    return FXM_OK;
}

void fxm_result_close(fxm_result* result) { delete result; }

fxm_status fxm_verify(const fxm_config* config, uint64_t seed, char** report_out,
                      int* failures_out) {
    if (auto rc = require(report_out && failures_out, "fxm_verify: null argument")) return rc;
    return guarded([&] {
        std::optional<fxm::Scenario> scope;
        if (config) scope = config->scenario;
        const fxm::VerifyReport report = fxm::run_verification(scope, seed);
        *report_out = dup_string(report.to_text());
        *failures_out = report.failures();
        return FXM_OK;
    });
}

}  // extern "C"
