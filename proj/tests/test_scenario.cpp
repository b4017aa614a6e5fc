#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <fstream>

#include "scenario.hpp"
#include "test_util.hpp"

using namespace fxm;

namespace {

ProfileConfig base_config() {
    ProfileConfig c;
    c.name = "test";
    c.horizon = 12;
    c.grid_price = 10.0;
    c.mean_load.assign(12, 2.2);
    c.mean_generation.assign(12, 2.0);
    c.relative_stddev = 0.15;
    c.deadline_model.kind = DeadlineModel::Kind::Fixed;
    c.deadline_model.fixed_offset = 8;
    c.varphi = 0.5;
    c.seed = 7;
    return c;
}

}  // namespace

TEST_CASE("degenerate stddev reproduces the means exactly") {
    ProfileConfig c = base_config();
    c.relative_stddev = 0.0;
    const ScenarioRealization r = draw_epoch(c, 3);
    REQUIRE(r.periods.size() == 12);
    for (int t = 0; t < 12; ++t) {
        const auto& period = r.periods[static_cast<std::size_t>(t)];
        CHECK(period.renewable == doctest::Approx(2.0));
        REQUIRE(period.arrivals.size() == 1);
        CHECK(period.arrivals[0].load == doctest::Approx(2.2));
        CHECK(period.arrivals[0].arrival == t + 1);
        CHECK(period.arrivals[0].deadline == std::min(t + 1 + 8, 12));
    }
}

TEST_CASE("same (seed, epoch) gives identical realizations; different epochs differ") {
    const ProfileConfig c = base_config();
    const ScenarioRealization a = draw_epoch(c, 11);
    const ScenarioRealization b = draw_epoch(c, 11);
    REQUIRE(a.periods.size() == b.periods.size());
    bool identical = true;
    for (std::size_t t = 0; t < a.periods.size(); ++t) {
        CHECK(a.periods[t].renewable == b.periods[t].renewable);
        REQUIRE(a.periods[t].arrivals.size() == b.periods[t].arrivals.size());
        for (std::size_t i = 0; i < a.periods[t].arrivals.size(); ++i) {
            CHECK(a.periods[t].arrivals[i].load == b.periods[t].arrivals[i].load);
            CHECK(a.periods[t].arrivals[i].deadline == b.periods[t].arrivals[i].deadline);
        }
    }
    const ScenarioRealization other = draw_epoch(c, 12);
    for (std::size_t t = 0; t < a.periods.size() && identical; ++t)
        if (a.periods[t].renewable != other.periods[t].renewable) identical = false;
    CHECK_FALSE(identical);
}

TEST_CASE("no realization carries negative load or generation") {
    ProfileConfig c = base_config();
    c.relative_stddev = 0.5;  // heavy noise to exercise the truncation
    for (std::uint64_t e = 1; e <= 200; ++e) {
        const ScenarioRealization r = draw_epoch(c, e);
        for (const auto& period : r.periods) {
            CHECK(period.renewable >= 0.0);
            for (const auto& spec : period.arrivals) CHECK(spec.load > 0.0);
        }
    }
}

TEST_CASE("empirical per-period stddev tracks the configured fraction") {
    // Monte-Carlo estimate against the configured distribution; the clip at
    // zero shaves about 2% off the ideal 0.5 * mean at this mean/sigma ratio.
    ProfileConfig c = base_config();
    c.relative_stddev = 0.5;
    const int draws = 10000;
    const int period = 5;
    double sum = 0.0, sumsq = 0.0;
    for (int e = 1; e <= draws; ++e) {
        const ScenarioRealization r = draw_epoch(c, static_cast<std::uint64_t>(e));
        const double q = r.periods[period].arrivals.empty()
                             ? 0.0
                             : r.periods[period].arrivals[0].load;
        sum += q;
        sumsq += q * q;
    }
    const double mean = sum / draws;
    const double stddev = std::sqrt(std::max(0.0, sumsq / draws - mean * mean));
    const double target = 0.5 * c.mean_load[static_cast<std::size_t>(period)];
    CHECK(stddev == doctest::Approx(target).epsilon(0.05));
}

TEST_CASE("hybrid rotation follows the 3k+1 / 3k+2 / 3(k+1) pattern") {
    ProfileConfig c1 = base_config();
    c1.name = "one";
    ProfileConfig c2 = base_config();
    c2.name = "two";
    ProfileConfig c3 = base_config();
    c3.name = "three";
    const std::array<ProfileConfig, 3> configs{c1, c2, c3};
    CHECK(hybrid_select(configs, 163).name == "one");    // 163 = 3*54 + 1
    CHECK(hybrid_select(configs, 164).name == "two");
    CHECK(hybrid_select(configs, 165).name == "three");  // 165 = 3*55
    CHECK(hybrid_select(configs, 1).name == "one");
    CHECK(hybrid_select(configs, 2).name == "two");
    CHECK(hybrid_select(configs, 3).name == "three");
    CHECK_THROWS_AS(hybrid_select(configs, 0), ContractViolation);
}

TEST_CASE("arrival-dependent deadlines follow the configured table") {
    ProfileConfig c = base_config();
    c.deadline_model.kind = DeadlineModel::Kind::ArrivalDependent;
    c.deadline_model.arrival_offsets = {8, 8, 8, 6, 5, 4, 3, 3, 3, 2, 2, 1};
    const ScenarioRealization r = draw_epoch(c, 1);
    for (int t = 1; t <= 12; ++t) {
        const auto& spec = r.periods[static_cast<std::size_t>(t - 1)].arrivals.at(0);
        const int expected = std::min(t + c.deadline_model.arrival_offsets[static_cast<std::size_t>(t - 1)], 12);
        CHECK(spec.deadline == expected);
    }
}

TEST_CASE("random deadline models stay within the window and hit their mean") {
    ProfileConfig c = base_config();
    c.horizon = 12;
    c.deadline_model.kind = DeadlineModel::Kind::RandomShort;
    double sum = 0.0;
    int count = 0;
    for (std::uint64_t e = 1; e <= 2000; ++e) {
        const ScenarioRealization r = draw_epoch(c, e);
        // only the first arrival is unclipped for sure
        const auto& spec = r.periods[0].arrivals.at(0);
        CHECK(spec.deadline >= spec.arrival);
        CHECK(spec.deadline <= 12);
        sum += spec.deadline - spec.arrival;
        ++count;
    }
    CHECK(sum / count == doctest::Approx(4.0).epsilon(0.05));
}

TEST_CASE("shipped scenario configs load, validate, and draw 12-period epochs") {
    const char* files[] = {"scenario1.json", "scenario2.json", "scenario3.json",
                           "scenario4.json", "scenario5.json"};
    for (const char* file : files) {
        const Scenario scenario = load_scenario(std::string(FLEXMATCH_CONFIG_DIR) + "/" + file);
        for (std::uint64_t e = 1; e <= 4; ++e) {
            const ScenarioRealization r = scenario.draw(e);
            CHECK(r.periods.size() == 12);
            for (const auto& period : r.periods) {
                CHECK(period.arrivals.size() <= 1);
                for (const auto& spec : period.arrivals) CHECK(spec.deadline <= 12);
            }
        }
    }
    const Scenario hybrid = load_scenario(std::string(FLEXMATCH_CONFIG_DIR) + "/scenario5.json");
    CHECK(hybrid.hybrid());
    CHECK(hybrid.profile(1).name == "scenario1");
    CHECK(hybrid.profile(2).name == "scenario2");
    CHECK(hybrid.profile(3).name == "scenario3");
}

TEST_CASE("config JSON round-trips and rejects malformed input") {
    ProfileConfig c = base_config();
    c.deadline_model.kind = DeadlineModel::Kind::Custom;
    c.deadline_model.custom_offsets = {2, 5, 9};
    c.deadline_model.custom_weights = {0.2, 0.5, 0.3};
    const std::string text = profile_config_to_json(c);
    const ProfileConfig back = parse_profile_config(text);
    CHECK(back.horizon == c.horizon);
    CHECK(back.grid_price == c.grid_price);
    CHECK(back.mean_load == c.mean_load);
    CHECK(back.deadline_model.custom_offsets == c.deadline_model.custom_offsets);
    CHECK(back.seed == c.seed);

    CHECK_THROWS_AS(parse_profile_config("{not json"), ConfigError);
    CHECK_THROWS_AS(parse_profile_config("{\"horizon\": 12}"), ConfigError);

    ProfileConfig bad = base_config();
    bad.mean_load.pop_back();
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = base_config();
    bad.relative_stddev = -0.1;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = base_config();
    bad.varphi = 1.5;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("custom deadline distribution draws only configured offsets") {
    ProfileConfig c = base_config();
    c.deadline_model.kind = DeadlineModel::Kind::Custom;
    c.deadline_model.custom_offsets = {1, 3};
    c.deadline_model.custom_weights = {0.75, 0.25};
    int ones = 0, total = 0;
    for (std::uint64_t e = 1; e <= 1000; ++e) {
        const ScenarioRealization r = draw_epoch(c, e);
        const auto& spec = r.periods[0].arrivals.at(0);
        const int offset = spec.deadline - spec.arrival;
        CHECK((offset == 1 || offset == 3));
        ones += offset == 1;
        ++total;
    }
    CHECK(static_cast<double>(ones) / total == doctest::Approx(0.75).epsilon(0.08));
}
