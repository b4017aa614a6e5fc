#include "scenario.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "rng.hpp"

namespace fxm {

namespace {

constexpr std::uint64_t kScenarioStream = 0x5343454e41524941ULL;  // scenario draw stream tag

int draw_offset(const DeadlineModel& model, int arrival, Rng& rng) {
    using Kind = DeadlineModel::Kind;
    switch (model.kind) {
        case Kind::RandomShort:
            // mean 4 periods from arrival
            return static_cast<int>(rng.uniform_int(2, 6));
        case Kind::RandomLarge:
            // mean 8 periods from arrival
            return static_cast<int>(rng.uniform_int(5, 11));
        case Kind::Fixed:
            return model.fixed_offset;
        case Kind::ArrivalDependent: {
            const auto idx = static_cast<std::size_t>(arrival - 1);
            return model.arrival_offsets.at(idx);
        }
        case Kind::Custom: {
            double total = 0.0;
            for (double w : model.custom_weights) total += w;
            double u = rng.uniform() * total;
            for (std::size_t i = 0; i < model.custom_offsets.size(); ++i) {
                u -= model.custom_weights[i];
                if (u < 0.0) return model.custom_offsets[i];
            }
            return model.custom_offsets.back();
        }
    }
    throw ContractViolation("unhandled deadline model");
}

}  // namespace

MarketParams ProfileConfig::market_params() const {
    MarketParams p;
    p.horizon = horizon;
    p.grid_price = grid_price;
    p.max_arrivals = max_arrivals;
    return p;
}

void ProfileConfig::validate() const {
    market_params().validate();
    if (static_cast<int>(mean_load.size()) != horizon)
        throw ConfigError("mean_load must have exactly `horizon` entries");
    if (static_cast<int>(mean_generation.size()) != horizon)
        throw ConfigError("mean_generation must have exactly `horizon` entries");
    for (double v : mean_load)
        if (v < 0.0) throw ConfigError("mean_load entries must be >= 0");
    for (double v : mean_generation)
        if (v < 0.0) throw ConfigError("mean_generation entries must be >= 0");
    if (relative_stddev < 0.0) throw ConfigError("relative_stddev must be >= 0");
    if (varphi < 0.0 || varphi > 1.0) throw ConfigError("varphi must lie in [0, 1]");
    if (arrivals_per_period < 1 || arrivals_per_period > max_arrivals)
        throw ConfigError("arrivals_per_period must lie in [1, max_arrivals]");
    using Kind = DeadlineModel::Kind;
    if (deadline_model.kind == Kind::ArrivalDependent) {
        if (static_cast<int>(deadline_model.arrival_offsets.size()) != horizon)
            throw ConfigError("arrival_dependent deadline model needs one offset per period");
        for (std::size_t i = 1; i < deadline_model.arrival_offsets.size(); ++i)
            if (deadline_model.arrival_offsets[i] > deadline_model.arrival_offsets[i - 1])
                throw ConfigError("arrival_dependent offsets must be non-increasing");
        for (int off : deadline_model.arrival_offsets)
            if (off < 0) throw ConfigError("deadline offsets must be >= 0");
    }
    if (deadline_model.kind == Kind::Fixed && deadline_model.fixed_offset < 0)
        throw ConfigError("fixed deadline offset must be >= 0");
    if (deadline_model.kind == Kind::Custom) {
        if (deadline_model.custom_offsets.empty() ||
            deadline_model.custom_offsets.size() != deadline_model.custom_weights.size())
            throw ConfigError("custom deadline model needs matching offsets and weights");
        double total = 0.0;
        for (double w : deadline_model.custom_weights) {
            if (w < 0.0) throw ConfigError("custom deadline weights must be >= 0");
            total += w;
        }
        if (total <= 0.0) throw ConfigError("custom deadline weights must not all be zero");
    }
}

ScenarioRealization draw_epoch(const ProfileConfig& config, std::uint64_t epoch_index) {
    config.validate();
    Rng rng(derive_seed(config.seed, epoch_index, kScenarioStream));

    ScenarioRealization out;
    out.periods.resize(static_cast<std::size_t>(config.horizon));
    CustomerId next_id = 1;
    for (int t = 1; t <= config.horizon; ++t) {
        auto& period = out.periods[static_cast<std::size_t>(t - 1)];
        const double mean_q = config.mean_load[static_cast<std::size_t>(t - 1)];
        const double mean_r = config.mean_generation[static_cast<std::size_t>(t - 1)];
        const double aggregate = std::max(0.0, rng.normal(mean_q, config.relative_stddev * mean_q));
        period.renewable = std::max(0.0, rng.normal(mean_r, config.relative_stddev * mean_r));

        const double share = aggregate / static_cast<double>(config.arrivals_per_period);
        for (int s = 0; s < config.arrivals_per_period; ++s) {
            const int offset = draw_offset(config.deadline_model, t, rng);
            if (share <= 0.0) continue;  // zero-load draws spawn no customer
            CustomerSpec spec;
            spec.id = next_id;
            spec.arrival = t;
            spec.load = share;
            spec.deadline = std::min(t + offset, config.horizon);
            spec.criticality = config.varphi;
            period.arrivals.push_back(spec);
            ++next_id;
        }
        // Keep ids aligned with (period, slot) even when a batch is skipped.
        next_id = static_cast<CustomerId>(t * config.arrivals_per_period + 1);
    }
    return out;
}

const ProfileConfig& hybrid_select(const std::array<ProfileConfig, 3>& configs,
                                   std::uint64_t epoch_index) {
    if (epoch_index == 0) throw ContractViolation("epoch_index is 1-based");
    switch (epoch_index % 3) {
        case 1: return configs[0];
        case 2: return configs[1];
        default: return configs[2];
    }
}

ScenarioRealization hybrid_schedule(const std::array<ProfileConfig, 3>& configs,
                                    std::uint64_t epoch_index) {
    return draw_epoch(hybrid_select(configs, epoch_index), epoch_index);
}

Scenario::Scenario(ProfileConfig config) : source_(std::move(config)) {
    const auto& c = std::get<ProfileConfig>(source_);
    c.validate();
    name_ = c.name;
}

Scenario::Scenario(std::array<ProfileConfig, 3> configs) : source_(std::move(configs)) {
    const auto& cs = std::get<std::array<ProfileConfig, 3>>(source_);
    for (const auto& c : cs) {
        c.validate();
        if (c.horizon != cs[0].horizon || c.grid_price != cs[0].grid_price ||
            c.max_arrivals != cs[0].max_arrivals)
            throw ConfigError("hybrid members must share horizon, grid_price and max_arrivals");
    }
    name_ = "hybrid(" + cs[0].name + "," + cs[1].name + "," + cs[2].name + ")";
}

const ProfileConfig& Scenario::profile(std::uint64_t epoch_index) const {
    if (const auto* single = std::get_if<ProfileConfig>(&source_)) return *single;
    return hybrid_select(std::get<std::array<ProfileConfig, 3>>(source_), epoch_index);
}

MarketParams Scenario::market_params() const { return profile(1).market_params(); }

ScenarioRealization Scenario::draw(std::uint64_t epoch_index) const {
    return draw_epoch(profile(epoch_index), epoch_index);
}

namespace {

using nlohmann::ordered_json;

DeadlineModel parse_deadline_model(const ordered_json& j) {
    DeadlineModel model;
    std::string kind;
    if (j.is_string()) {
        kind = j.get<std::string>();
    } else if (j.is_object()) {
        kind = j.at("kind").get<std::string>();
    } else {
        throw ConfigError("deadline_model must be a string or an object");
    }
    using Kind = DeadlineModel::Kind;
    if (kind == "random_short") {
        model.kind = Kind::RandomShort;
    } else if (kind == "random_large") {
        model.kind = Kind::RandomLarge;
    } else if (kind == "fixed") {
        model.kind = Kind::Fixed;
        if (j.is_object() && j.contains("offset")) model.fixed_offset = j.at("offset").get<int>();
    } else if (kind == "arrival_dependent") {
        model.kind = Kind::ArrivalDependent;
        if (!j.is_object() || !j.contains("offsets"))
            throw ConfigError("arrival_dependent deadline model needs an offsets array");
        model.arrival_offsets = j.at("offsets").get<std::vector<int>>();
    } else if (kind == "custom") {
        model.kind = Kind::Custom;
        if (!j.is_object() || !j.contains("offsets") || !j.contains("weights"))
            throw ConfigError("custom deadline model needs offsets and weights arrays");
        model.custom_offsets = j.at("offsets").get<std::vector<int>>();
        model.custom_weights = j.at("weights").get<std::vector<double>>();
    } else {
        throw ConfigError("unknown deadline_model kind: " + kind);
    }
    return model;
}

ordered_json deadline_model_to_json(const DeadlineModel& model) {
    using Kind = DeadlineModel::Kind;
    ordered_json j;
    switch (model.kind) {
        case Kind::RandomShort: j["kind"] = "random_short"; break;
        case Kind::RandomLarge: j["kind"] = "random_large"; break;
        case Kind::Fixed:
            j["kind"] = "fixed";
            j["offset"] = model.fixed_offset;
            break;
        case Kind::ArrivalDependent:
            j["kind"] = "arrival_dependent";
            j["offsets"] = model.arrival_offsets;
            break;
        case Kind::Custom:
            j["kind"] = "custom";
            j["offsets"] = model.custom_offsets;
            j["weights"] = model.custom_weights;
            break;
    }
    return j;
}

ProfileConfig profile_from_json(const ordered_json& j) {
    ProfileConfig c;
    try {
        if (j.contains("name")) c.name = j.at("name").get<std::string>();
        c.horizon = j.at("horizon").get<int>();
        c.grid_price = j.at("grid_price").get<double>();
        c.mean_load = j.at("mean_load").get<std::vector<double>>();
        c.mean_generation = j.at("mean_generation").get<std::vector<double>>();
        c.relative_stddev = j.at("relative_stddev").get<double>();
        c.deadline_model = parse_deadline_model(j.at("deadline_model"));
        c.varphi = j.at("varphi").get<double>();
        c.arrivals_per_period = j.value("arrivals_per_period", 1);
        c.max_arrivals = j.value("max_arrivals", c.arrivals_per_period);
        c.seed = j.value("seed", std::uint64_t{1});
    } catch (const ordered_json::exception& e) {
        throw ConfigError(std::string("malformed profile config: ") + e.what());
    }
    c.validate();
    return c;
}

ordered_json profile_to_json(const ProfileConfig& c) {
    ordered_json j;
    j["name"] = c.name;
    j["horizon"] = c.horizon;
    j["grid_price"] = c.grid_price;
    j["mean_load"] = c.mean_load;
    j["mean_generation"] = c.mean_generation;
    j["relative_stddev"] = c.relative_stddev;
    j["deadline_model"] = deadline_model_to_json(c.deadline_model);
    j["varphi"] = c.varphi;
    j["arrivals_per_period"] = c.arrivals_per_period;
    j["max_arrivals"] = c.max_arrivals;
    j["seed"] = c.seed;
    return j;
}

ordered_json parse_json_text(const std::string& text) {
    try {
        return ordered_json::parse(text);
    } catch (const ordered_json::exception& e) {
        throw ConfigError(std::string("invalid JSON: ") + e.what());
    }
}

std::string read_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

ProfileConfig parse_profile_config(const std::string& json_text) {
    return profile_from_json(parse_json_text(json_text));
}

std::string profile_config_to_json(const ProfileConfig& config) {
    return profile_to_json(config).dump(2);
}

Scenario parse_scenario(const std::string& json_text, const std::string& base_dir) {
    const ordered_json j = parse_json_text(json_text);
    if (j.contains("hybrid")) {
        const auto paths = j.at("hybrid").get<std::vector<std::string>>();
        if (paths.size() != 3) throw ConfigError("hybrid config needs exactly 3 member paths");
        std::array<ProfileConfig, 3> members;
        for (std::size_t i = 0; i < 3; ++i) {
            std::filesystem::path p(paths[i]);
            if (p.is_relative()) p = std::filesystem::path(base_dir) / p;
            members[i] = parse_profile_config(read_file(p.string()));
        }
        return Scenario(std::move(members));
    }
    return Scenario(profile_from_json(j));
}

Scenario load_scenario(const std::string& path) {
    const std::string text = read_file(path);
    const std::string dir = std::filesystem::path(path).parent_path().string();
    return parse_scenario(text, dir.empty() ? "." : dir);
}

std::string scenario_to_json(const Scenario& scenario) {
    if (!scenario.hybrid()) return profile_config_to_json(scenario.profile(1));
    ordered_json j;
    j["hybrid"] = ordered_json::array();
    for (std::uint64_t e = 1; e <= 3; ++e) j["hybrid"].push_back(profile_to_json(scenario.profile(e)));
    return j.dump(2);
}

}  // namespace fxm
