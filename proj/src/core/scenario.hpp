#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "market.hpp"
#include "types.hpp"

namespace fxm {

// How a customer's deadline offset from its arrival period is drawn.
struct DeadlineModel {
    enum class Kind { RandomShort, ArrivalDependent, RandomLarge, Fixed, Custom };

    Kind kind = Kind::RandomShort;
    int fixed_offset = 8;                  // Fixed
    std::vector<int> arrival_offsets;      // ArrivalDependent: offset per arrival period
    std::vector<int> custom_offsets;       // Custom: support of the offset distribution
    std::vector<double> custom_weights;    // Custom: matching weights
};

// Mean generation/consumption profile plus customer characteristics for one
// scenario, loaded from a JSON config file.
struct ProfileConfig {
    std::string name;
    int horizon = 12;
    double grid_price = 10.0;
    std::vector<double> mean_load;        // per-period aggregate mean, length horizon
    std::vector<double> mean_generation;  // per-period mean, length horizon
    double relative_stddev = 0.15;
    DeadlineModel deadline_model;
    double varphi = 1.0;
    int arrivals_per_period = 1;
    int max_arrivals = 1;
    std::uint64_t seed = 1;

    MarketParams market_params() const;
    void validate() const;
};

// One epoch's random draw: per-period arrival batches and renewable output.
struct ScenarioRealization {
    std::vector<PeriodDraw> periods;
};

// Draws an epoch realization. Pure function of (config, epoch_index): per-period
// aggregate load and generation ~ Normal(mean, relative_stddev * mean) truncated
// at zero, the load split equally over the period's arrivals, deadlines drawn
// from the configured model and clipped to [t, T].
ScenarioRealization draw_epoch(const ProfileConfig& config, std::uint64_t epoch_index);

// Scenario-5 style rotation: epochs 3k+1, 3k+2, 3(k+1) use configs[0..2].
const ProfileConfig& hybrid_select(const std::array<ProfileConfig, 3>& configs,
                                   std::uint64_t epoch_index);
ScenarioRealization hybrid_schedule(const std::array<ProfileConfig, 3>& configs,
                                    std::uint64_t epoch_index);

// A runnable scenario: either a single profile or a hybrid rotation.
class Scenario {
public:
    explicit Scenario(ProfileConfig config);
    explicit Scenario(std::array<ProfileConfig, 3> configs);

    bool hybrid() const { return std::holds_alternative<std::array<ProfileConfig, 3>>(source_); }
    const ProfileConfig& profile(std::uint64_t epoch_index) const;
    MarketParams market_params() const;
    ScenarioRealization draw(std::uint64_t epoch_index) const;
    const std::string& name() const { return name_; }

private:
    std::variant<ProfileConfig, std::array<ProfileConfig, 3>> source_;
    std::string name_;
};

// JSON config file I/O. load_scenario resolves hybrid member paths relative to
// the file's directory.
ProfileConfig parse_profile_config(const std::string& json_text);
std::string profile_config_to_json(const ProfileConfig& config);
Scenario load_scenario(const std::string& path);
Scenario parse_scenario(const std::string& json_text, const std::string& base_dir);
std::string scenario_to_json(const Scenario& scenario);

}  // namespace fxm
