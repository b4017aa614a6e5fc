#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>

#include "flexmatch.h"

namespace {

std::string config_path(const char* name) {
    return std::string(FLEXMATCH_CONFIG_DIR) + "/" + name;
}

std::string temp_file(const char* name) {
    return (std::filesystem::temp_directory_path() / name).string();
}

}  // namespace

TEST_CASE("config lifecycle and echo") {
    fxm_config* config = nullptr;
    REQUIRE(fxm_config_open(config_path("scenario1.json").c_str(), &config) == FXM_OK);
    CHECK(fxm_config_is_hybrid(config) == 0);
    char* echo = nullptr;
    REQUIRE(fxm_config_to_json(config, &echo) == FXM_OK);
    CHECK(std::strstr(echo, "\"horizon\": 12") != nullptr);
    CHECK(std::strstr(echo, "\"grid_price\": 10.0") != nullptr);
    fxm_string_free(echo);
    fxm_config_close(config);

    fxm_config* hybrid = nullptr;
    REQUIRE(fxm_config_open(config_path("scenario5.json").c_str(), &hybrid) == FXM_OK);
    CHECK(fxm_config_is_hybrid(hybrid) == 1);
    fxm_config_close(hybrid);

    fxm_config* missing = nullptr;
    CHECK(fxm_config_open("/nonexistent.json", &missing) == FXM_ERR_CONFIG);
    CHECK(std::strlen(fxm_last_error()) > 0);
    fxm_config* bad = nullptr;
    CHECK(fxm_config_parse("{\"horizon\": -3}", nullptr, &bad) == FXM_ERR_CONFIG);
}

TEST_CASE("unknown policy names are usage errors") {
    fxm_config* config = nullptr;
    REQUIRE(fxm_config_open(config_path("scenario1.json").c_str(), &config) == FXM_OK);
    fxm_policy* policy = nullptr;
    CHECK(fxm_policy_open(config, "foo", 1, &policy) == FXM_ERR_USAGE);
    CHECK(std::strstr(fxm_last_error(), "foo") != nullptr);
    fxm_config_close(config);
}

TEST_CASE("evaluation is deterministic and oracle-dominated") {
    fxm_config* config = nullptr;
    REQUIRE(fxm_config_open(config_path("scenario2.json").c_str(), &config) == FXM_OK);

    fxm_policy* ma = nullptr;
    REQUIRE(fxm_policy_open(config, "ma", 1, &ma) == FXM_OK);
    fxm_result* first = nullptr;
    fxm_result* second = nullptr;
    REQUIRE(fxm_evaluate(config, ma, 1, 20, 1, nullptr, &first) == FXM_OK);
    REQUIRE(fxm_evaluate(config, ma, 1, 20, 1, nullptr, &second) == FXM_OK);
    REQUIRE(fxm_result_size(first) == 20);
    for (size_t i = 0; i < 20; ++i) {
        double a = 0.0, b = 0.0;
        fxm_result_welfare(first, i, &a);
        fxm_result_welfare(second, i, &b);
        CHECK(a == b);
    }

    fxm_result* ooa = nullptr;
    REQUIRE(fxm_evaluate_oracle(config, 1, 20, nullptr, &ooa) == FXM_OK);
    for (size_t i = 0; i < 20; ++i) {
        double online = 0.0, best = 0.0;
        fxm_result_welfare(first, i, &online);
        fxm_result_welfare(ooa, i, &best);
        CHECK(online <= best + 1e-6);
    }
    double mean = 0.0;
    REQUIRE(fxm_result_mean(first, &mean) == FXM_OK);
    CHECK(mean > 0.0);

    uint64_t epoch = 0;
    REQUIRE(fxm_result_epoch(first, 0, &epoch) == FXM_OK);
    CHECK(epoch == 1);
    CHECK(fxm_result_welfare(first, 99, &mean) == FXM_ERR_USAGE);

    fxm_result_close(first);
    fxm_result_close(second);
    fxm_result_close(ooa);
    fxm_policy_close(ma);
    fxm_config_close(config);
}

TEST_CASE("trace files hold one JSON record per period") {
    fxm_config* config = nullptr;
    REQUIRE(fxm_config_open(config_path("scenario1.json").c_str(), &config) == FXM_OK);
    fxm_policy* med = nullptr;
    REQUIRE(fxm_policy_open(config, "med", 1, &med) == FXM_OK);
    const std::string trace_path = temp_file("fxm_capi_trace.jsonl");
    fxm_result* result = nullptr;
    REQUIRE(fxm_evaluate(config, med, 1, 3, 1, trace_path.c_str(), &result) == FXM_OK);
    fxm_result_close(result);
    fxm_policy_close(med);
    fxm_config_close(config);

    std::ifstream in(trace_path);
    REQUIRE(in.good());
    std::string line;
    int lines = 0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        ++lines;
        CHECK(line.find("\"period\"") != std::string::npos);
        CHECK(line.find("\"welfare\"") != std::string::npos);
        CHECK(line.find("\"decision\"") != std::string::npos);
    }
    CHECK(lines == 3 * 12);
    std::filesystem::remove(trace_path);
}

TEST_CASE("training writes curves and checkpoints that resume bit-exactly") {
    fxm_config* config = nullptr;
    REQUIRE(fxm_config_open(config_path("scenario3.json").c_str(), &config) == FXM_OK);
    const std::string curve_path = temp_file("fxm_capi_curve.tsv");
    const std::string ckpt_path = temp_file("fxm_capi.ckpt");
    const std::string ckpt2_path = temp_file("fxm_capi_resumed.ckpt");

    fxm_result* result = nullptr;
    REQUIRE(fxm_train(config, "la2", 8, 4, 1, 3, nullptr, ckpt_path.c_str(), 0,
                      curve_path.c_str(), &result) == FXM_OK);
    REQUIRE(fxm_result_size(result) == 8);
    fxm_result_close(result);

    std::ifstream curve(curve_path);
    REQUIRE(curve.good());
    std::string line;
    int rows = 0;
    while (std::getline(curve, line))
        if (!line.empty() && line[0] != '#') ++rows;
    CHECK(rows == 8);

    // straight 16-epoch run vs 8 + resume(8): identical curve tails
    fxm_result* straight = nullptr;
    REQUIRE(fxm_train(config, "la2", 16, 4, 1, 3, nullptr, nullptr, 0, nullptr, &straight) ==
            FXM_OK);
    fxm_result* resumed = nullptr;
    REQUIRE(fxm_train(config, "la2", 8, 0, 0, 0, ckpt_path.c_str(), ckpt2_path.c_str(), 0,
                      nullptr, &resumed) == FXM_OK);
    REQUIRE(fxm_result_size(resumed) == 8);
    for (size_t i = 0; i < 8; ++i) {
        double a = 0.0, b = 0.0;
        fxm_result_welfare(straight, i + 8, &a);
        fxm_result_welfare(resumed, i, &b);
        CHECK(a == b);
    }
    fxm_result_close(straight);
    fxm_result_close(resumed);

    // the trained policy is usable for evaluation
    fxm_policy* trained = nullptr;
    REQUIRE(fxm_policy_open_checkpoint(ckpt2_path.c_str(), &trained) == FXM_OK);
    fxm_result* eval = nullptr;
    REQUIRE(fxm_evaluate(config, trained, 100, 5, 9, nullptr, &eval) == FXM_OK);
    CHECK(fxm_result_size(eval) == 5);
    fxm_result_close(eval);
    fxm_policy_close(trained);

    // la1 rejects a lookahead flag
    CHECK(fxm_train(config, "la1", 2, 2, 1, 1, nullptr, nullptr, 0, nullptr, nullptr) ==
          FXM_ERR_USAGE);
    CHECK(fxm_train(config, "nope", 2, 2, 0, 1, nullptr, nullptr, 0, nullptr, nullptr) ==
          FXM_ERR_CONFIG);

    std::filesystem::remove(curve_path);
    std::filesystem::remove(ckpt_path);
    std::filesystem::remove(ckpt2_path);
    fxm_config_close(config);
}

TEST_CASE("built-in verification passes through the C surface") {
    char* report = nullptr;
    int failures = -1;
    REQUIRE(fxm_verify(nullptr, 4, &report, &failures) == FXM_OK);
    CHECK(failures == 0);
    CHECK(std::strstr(report, "feasibility-closure") != nullptr);
    fxm_string_free(report);
}
