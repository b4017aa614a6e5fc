// Command-line harness over the flexmatch C API: run policies, train the
// learnable ones, compare algorithms across scenarios, and self-verify.

#include <cinttypes>
#include <cstdio>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "flexmatch.h"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitRuntime = 2;

int exit_code(fxm_status status) {
    switch (status) {
        case FXM_OK: return kExitOk;
        case FXM_ERR_USAGE:
        case FXM_ERR_CONFIG: return kExitUsage;
        default: return kExitRuntime;
    }
}

int fail(fxm_status status) {
    std::fprintf(stderr, "error: %s\n", fxm_last_error());
    return exit_code(status);
}

struct ConfigHandle {
    fxm_config* ptr = nullptr;
    ~ConfigHandle() { fxm_config_close(ptr); }
};

struct PolicyHandle {
    fxm_policy* ptr = nullptr;
    ~PolicyHandle() { fxm_policy_close(ptr); }
};

struct ResultHandle {
    fxm_result* ptr = nullptr;
    ~ResultHandle() { fxm_result_close(ptr); }
};

struct PolicySpec {
    std::string name;        // ma | mh | med | ooa | la1 | la2
    std::string checkpoint;  // optional, la policies only
};

// "la2:path/to.ckpt" selects a trained policy; bare names select heuristics,
// the oracle, or a freshly initialized learnable policy.
PolicySpec parse_policy_spec(const std::string& token) {
    PolicySpec spec;
    const auto colon = token.find(':');
    spec.name = token.substr(0, colon);
    if (colon != std::string::npos) spec.checkpoint = token.substr(colon + 1);
    return spec;
}

fxm_status open_policy(const fxm_config* config, const PolicySpec& spec, uint64_t seed,
                       fxm_policy** out) {
    if (!spec.checkpoint.empty()) return fxm_policy_open_checkpoint(spec.checkpoint.c_str(), out);
    return fxm_policy_open(config, spec.name.c_str(), seed, out);
}

fxm_status evaluate_spec(const fxm_config* config, const PolicySpec& spec, uint64_t first_epoch,
                         uint64_t epochs, uint64_t seed, const char* trace_path,
                         fxm_result** out) {
    if (spec.name == "ooa") return fxm_evaluate_oracle(config, first_epoch, epochs, trace_path, out);
    PolicyHandle policy;
    if (fxm_status rc = open_policy(config, spec, seed, &policy.ptr)) return rc;
    return fxm_evaluate(config, policy.ptr, first_epoch, epochs, seed, trace_path, out);
}

FILE* open_out(const std::string& path, std::unique_ptr<FILE, int (*)(FILE*)>& holder) {
    if (path.empty() || path == "-") return stdout;
    FILE* f = std::fopen(path.c_str(), "w");
    if (f) holder.reset(f);
    return f;
}

int cmd_run(const std::string& config_path, const std::string& policy_token, uint64_t epochs,
            uint64_t first_epoch, uint64_t seed, const std::string& out_path,
            const std::string& trace_path) {
    ConfigHandle config;
    if (fxm_status rc = fxm_config_open(config_path.c_str(), &config.ptr)) return fail(rc);
    const PolicySpec spec = parse_policy_spec(policy_token);
    ResultHandle result;
    if (fxm_status rc = evaluate_spec(config.ptr, spec, first_epoch, epochs, seed,
                                      trace_path.empty() ? nullptr : trace_path.c_str(),
                                      &result.ptr))
        return fail(rc);

    std::unique_ptr<FILE, int (*)(FILE*)> holder(nullptr, &std::fclose);
    FILE* out = open_out(out_path, holder);
    if (!out) {
        std::fprintf(stderr, "error: cannot write %s\n", out_path.c_str());
        return kExitRuntime;
    }
    double mean = 0.0;
    fxm_result_mean(result.ptr, &mean);
    std::fprintf(out, "# policy\t%s\n# epochs\t%zu\n# mean_welfare\t%.12g\n", policy_token.c_str(),
                 fxm_result_size(result.ptr), mean);
    std::fprintf(out, "# epoch\twelfare\n");
    for (size_t i = 0; i < fxm_result_size(result.ptr); ++i) {
        uint64_t epoch = 0;
        double welfare = 0.0;
        fxm_result_epoch(result.ptr, i, &epoch);
        fxm_result_welfare(result.ptr, i, &welfare);
        std::fprintf(out, "%" PRIu64 "\t%.12g\n", epoch, welfare);
    }
    return kExitOk;
}

int cmd_train(const std::string& config_path, const std::string& algo, uint64_t epochs,
              uint64_t batch, int lookahead_k, uint64_t seed, const std::string& resume,
              const std::string& checkpoint, uint64_t checkpoint_interval,
              const std::string& curve) {
    ConfigHandle config;
    if (fxm_status rc = fxm_config_open(config_path.c_str(), &config.ptr)) return fail(rc);
    ResultHandle result;
    if (fxm_status rc = fxm_train(config.ptr, algo.c_str(), epochs, batch, lookahead_k, seed,
                                  resume.empty() ? nullptr : resume.c_str(),
                                  checkpoint.empty() ? nullptr : checkpoint.c_str(),
                                  checkpoint_interval, curve.empty() ? nullptr : curve.c_str(),
                                  &result.ptr))
        return fail(rc);
    double mean = 0.0;
    fxm_result_mean(result.ptr, &mean);
    std::fprintf(stdout, "trained %s for %zu epochs, mean welfare %.12g\n", algo.c_str(),
                 fxm_result_size(result.ptr), mean);
    if (!checkpoint.empty()) std::fprintf(stdout, "checkpoint written to %s\n", checkpoint.c_str());
    if (!curve.empty()) std::fprintf(stdout, "curve written to %s\n", curve.c_str());
    return kExitOk;
}

int cmd_compare(const std::vector<std::string>& config_paths,
                const std::vector<std::string>& policy_tokens, std::vector<uint64_t> seeds,
                uint64_t epochs, uint64_t first_epoch, const std::string& out_path) {
    if (seeds.empty()) seeds.push_back(1);
    std::unique_ptr<FILE, int (*)(FILE*)> holder(nullptr, &std::fclose);
    FILE* out = open_out(out_path, holder);
    if (!out) {
        std::fprintf(stderr, "error: cannot write %s\n", out_path.c_str());
        return kExitRuntime;
    }

    std::fprintf(out, "scenario");
    for (const auto& token : policy_tokens) std::fprintf(out, "\t%s", token.c_str());
    std::fprintf(out, "\n");

    for (const auto& config_path : config_paths) {
        ConfigHandle config;
        if (fxm_status rc = fxm_config_open(config_path.c_str(), &config.ptr)) return fail(rc);
        std::fprintf(out, "%s", config_path.c_str());

        // hybrid runs additionally report each epoch, Table-II style
        std::vector<std::vector<double>> per_epoch(policy_tokens.size());
        std::vector<uint64_t> epoch_ids;

        for (size_t p = 0; p < policy_tokens.size(); ++p) {
            const PolicySpec spec = parse_policy_spec(policy_tokens[p]);
            double sum = 0.0;
            size_t count = 0;
            const bool seed_sensitive = spec.name == "la1" || spec.name == "la2";
            const size_t runs = seed_sensitive ? seeds.size() : 1;
            for (size_t s = 0; s < runs; ++s) {
                ResultHandle result;
                if (fxm_status rc = evaluate_spec(config.ptr, spec, first_epoch, epochs, seeds[s],
                                                  nullptr, &result.ptr))
                    return fail(rc);
                const size_t n = fxm_result_size(result.ptr);
                if (per_epoch[p].empty()) per_epoch[p].assign(n, 0.0);
                for (size_t i = 0; i < n; ++i) {
                    double welfare = 0.0;
                    fxm_result_welfare(result.ptr, i, &welfare);
                    sum += welfare;
                    per_epoch[p][i] += welfare / static_cast<double>(runs);
                    if (p == 0 && s == 0) {
                        uint64_t epoch = 0;
                        fxm_result_epoch(result.ptr, i, &epoch);
                        epoch_ids.push_back(epoch);
                    }
                }
                count += n;
            }
            std::fprintf(out, "\t%.12g", count ? sum / static_cast<double>(count) : 0.0);
        }
        std::fprintf(out, "\n");

        if (fxm_config_is_hybrid(config.ptr) && !out_path.empty() && out_path != "-") {
            const std::string epochs_path = out_path + "." + std::to_string(&config_path - config_paths.data() + 1) + ".epochs.tsv";
            FILE* ef = std::fopen(epochs_path.c_str(), "w");
            if (!ef) {
                std::fprintf(stderr, "error: cannot write %s\n", epochs_path.c_str());
                return kExitRuntime;
            }
            std::fprintf(ef, "epoch");
            for (const auto& token : policy_tokens) std::fprintf(ef, "\t%s", token.c_str());
            std::fprintf(ef, "\n");
            for (size_t i = 0; i < epoch_ids.size(); ++i) {
                std::fprintf(ef, "%" PRIu64, epoch_ids[i]);
                for (size_t p = 0; p < policy_tokens.size(); ++p)
                    std::fprintf(ef, "\t%.12g", per_epoch[p][i]);
                std::fprintf(ef, "\n");
            }
            std::fclose(ef);
        }
    }
    return kExitOk;
}

int cmd_verify(const std::string& config_path, uint64_t seed) {
    ConfigHandle config;
    if (!config_path.empty()) {
        if (fxm_status rc = fxm_config_open(config_path.c_str(), &config.ptr)) return fail(rc);
        char* echo = nullptr;
        if (fxm_status rc = fxm_config_to_json(config.ptr, &echo)) return fail(rc);
        std::fprintf(stdout, "parsed config:\n%s\n", echo);
        fxm_string_free(echo);
    }
    char* report = nullptr;
    int failures = 0;
    if (fxm_status rc = fxm_verify(config.ptr, seed, &report, &failures)) return fail(rc);
    std::fputs(report, stdout);
    fxm_string_free(report);
    return failures == 0 ? kExitOk : kExitRuntime;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"flexmatch: online power-matching market simulator and policy trainer"};
    app.require_subcommand(1);

    std::string config_path, policy_token, out_path, trace_path;
    std::string algo, resume, checkpoint, curve;
    std::vector<std::string> config_paths, policy_tokens;
    std::vector<uint64_t> seeds;
    uint64_t epochs = 100, first_epoch = 1, seed = 1, batch = 0, checkpoint_interval = 0;
    int lookahead_k = 0;

    auto* run = app.add_subcommand("run", "evaluate a policy (or the hindsight oracle) per epoch");
    run->add_option("--config", config_path, "scenario config file")->required();
    run->add_option("--policy", policy_token, "ma|mh|med|ooa|la1|la2, optionally name:checkpoint")
        ->required();
    run->add_option("--epochs", epochs, "number of epochs");
    run->add_option("--first-epoch", first_epoch, "1-based index of the first epoch");
    run->add_option("--seed", seed, "policy sampling seed");
    run->add_option("--out", out_path, "result file (default stdout)");
    run->add_option("--trace", trace_path, "JSONL trace output");

    auto* train = app.add_subcommand("train", "train the learnable policy");
    train->add_option("--config", config_path, "scenario config file")->required();
    train->add_option("--algo", algo, "la1 (vanilla policy gradient) or la2 (actor-critic)")
        ->required();
    train->add_option("--epochs", epochs, "training epochs");
    train->add_option("--batch", batch, "trace buffer size (default 80 la1 / 20 la2)");
    train->add_option("--k", lookahead_k, "actor-critic lookahead (la2 only)");
    train->add_option("--seed", seed, "initialization and sampling seed");
    train->add_option("--resume", resume, "checkpoint to continue from");
    train->add_option("--checkpoint", checkpoint, "checkpoint output path");
    train->add_option("--checkpoint-interval", checkpoint_interval,
                      "also rewrite the checkpoint every N epochs");
    train->add_option("--out", curve, "learning-curve TSV output");

    auto* compare = app.add_subcommand("compare", "scenario x policy welfare table");
    compare->add_option("--config", config_paths, "scenario config files")->required();
    compare->add_option("--policy", policy_tokens, "policies to compare")->required();
    compare->add_option("--seeds", seeds, "seeds for the learnable policies");
    compare->add_option("--epochs", epochs, "epochs per scenario");
    compare->add_option("--first-epoch", first_epoch, "1-based index of the first epoch");
    compare->add_option("--out", out_path, "table file (default stdout)");

    auto* verify = app.add_subcommand("verify", "run the invariant and oracle suites");
    verify->add_option("--config", config_path, "optional scenario to scope the checks");
    verify->add_option("--seed", seed, "randomization seed");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kExitOk : kExitUsage;
    }

    if (run->parsed())
        return cmd_run(config_path, policy_token, epochs, first_epoch, seed, out_path, trace_path);
    if (train->parsed())
        return cmd_train(config_path, algo, epochs, batch, lookahead_k, seed, resume, checkpoint,
                         checkpoint_interval, curve);
    if (compare->parsed())
        return cmd_compare(config_paths, policy_tokens, seeds, epochs, first_epoch, out_path);
    if (verify->parsed()) return cmd_verify(config_path, seed);
    return kExitUsage;
}
