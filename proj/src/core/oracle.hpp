#pragma once

#include <vector>

#include "market.hpp"
#include "scenario.hpp"
#include "types.hpp"

namespace fxm {

struct HindsightSolution {
    double welfare = 0.0;
    std::vector<MatchDecision> schedule;  // one decision per period 1..T
};

// Offline-optimal matching for a fully known epoch: maximizes
// sum_t sum_i sum_j (pi_i(t) - c_j) M_t(j, i) subject to full service of every
// customer within its window and per-period renewable capacity. Solved as a
// linear program with a transportation structure; grid service is unbounded.
HindsightSolution solve_hindsight(const ScenarioRealization& realization,
                                  const MarketParams& params);

// Replays a hindsight schedule through the market transition, returning the
// trace (and re-deriving welfare through the same accounting as any policy).
EpochTrace replay_schedule(const ScenarioRealization& realization, const MarketParams& params,
                           const std::vector<MatchDecision>& schedule);

// Exhaustive search over schedules discretized at `grid_resolution`, for tiny
// instances only (<= 3 customers, T <= 4). The oracle's oracle.
double brute_force_verify(const ScenarioRealization& realization, const MarketParams& params,
                          double grid_resolution);

// Dense tableau simplex for max c.x s.t. eq rows A x = b, leq rows A x <= b,
// x >= 0, with a caller-supplied starting basis. Sizes here are tiny.
class SimplexSolver {
public:
    // rows: eq_count equality rows first, then leq rows (slacks added inside).
    SimplexSolver(std::vector<std::vector<double>> rows, std::vector<double> rhs,
                  std::vector<double> objective, std::size_t eq_count,
                  std::vector<std::size_t> initial_basis);

    // Returns the optimal objective; solution() holds the structural variables.
    double maximize();
    const std::vector<double>& solution() const { return solution_; }

private:
    std::size_t rows_, cols_;  // tableau dimensions (cols excludes RHS)
    std::vector<std::vector<double>> tab_;
    std::vector<double> cost_;
    std::vector<std::size_t> basis_;
    std::vector<double> solution_;
    std::size_t structural_;
};

}  // namespace fxm
