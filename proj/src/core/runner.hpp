#pragma once

#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

#include "scenario.hpp"
#include "trainer.hpp"

namespace fxm {

struct EpochScore {
    std::uint64_t epoch = 0;
    double welfare = 0.0;
};

double mean_welfare(const std::vector<EpochScore>& scores);

// Evaluates a rule-based policy ("ma" | "mh" | "med") over consecutive epochs.
// Realizations depend only on (config, epoch index), so different policies on
// the same scenario see identical draws.
std::vector<EpochScore> evaluate_baseline(const Scenario& scenario, const std::string& name,
                                          std::uint64_t first_epoch, std::uint64_t epochs,
                                          std::ostream* trace_out = nullptr);

// Evaluates the learnable policy (dropout off, stochastic matching sampled
// from the seed-derived stream).
std::vector<EpochScore> evaluate_model(const Scenario& scenario, TcnPolicyModel& model,
                                       std::uint64_t first_epoch, std::uint64_t epochs,
                                       std::uint64_t seed, std::ostream* trace_out = nullptr);

// Hindsight-optimal welfare per epoch; schedules replayed through the market
// transition so the emitted traces share the online accounting.
std::vector<EpochScore> evaluate_oracle(const Scenario& scenario, std::uint64_t first_epoch,
                                        std::uint64_t epochs, std::ostream* trace_out = nullptr);

}  // namespace fxm
