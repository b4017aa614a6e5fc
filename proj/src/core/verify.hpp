#pragma once

#include <optional>
#include <string>
#include <vector>

#include "scenario.hpp"

namespace fxm {

struct VerifyCheck {
    std::string name;
    bool passed = false;
    std::string detail;
};

struct VerifyReport {
    std::vector<VerifyCheck> checks;

    int failures() const {
        int n = 0;
        for (const auto& c : checks)
            if (!c.passed) ++n;
        return n;
    }
    std::string to_text() const;
};

// Fast self-checks: feasibility closure of nu . phi on random states, nu
// idempotence, oracle dominance and brute-force agreement, and a TCN gradient
// probe. `scenario` scopes the dominance check; a built-in profile is used
// when absent.
VerifyReport run_verification(const std::optional<Scenario>& scenario, std::uint64_t seed);

}  // namespace fxm
