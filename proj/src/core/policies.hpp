#pragma once

#include <functional>

#include "market.hpp"
#include "rng.hpp"
#include "types.hpp"

namespace fxm {

// Independent Bernoulli draw per active customer. Returns the sampled flags
// and log mu(m) = sum_i [m_i log p_i + (1 - m_i) log(1 - p_i)].
std::pair<DiscreteMatch, double> sample_discrete(const MatchProbabilities& probs, Rng& rng);

double discrete_log_prob(const MatchProbabilities& probs, const DiscreteMatch& match);

// The fixed dispatch function phi. Marked customers are served their full
// remaining load, renewables first (the boundary customer splits rs/gs);
// leftover renewable goes to unmarked customers in descending willingness-to-
// pay order, each capped at its remaining load. Always feasible.
MatchDecision dispatch_phi(const DiscreteMatch& match, const MarketState& state);

// The fixed override nu. Any active customer whose deadline is the current
// period and whose remaining load is not covered by `decision` has the
// shortfall assigned from the grid. Idempotent.
MatchDecision nu_override(const MatchDecision& decision, const MarketState& state);

// Online heuristics, all passed through nu_override as a safety net.
MatchDecision policy_ma(const MarketState& state);   // match on arrival
MatchDecision policy_mh(const MarketState& state);   // match to the highest pi
MatchDecision policy_med(const MarketState& state);  // match to the earliest deadline

PolicyFn baseline_policy(const std::string& name);

// A probability-emitting learnable component.
using MuFn = std::function<MatchProbabilities(const MarketState&)>;

// chi = nu . phi . m, m ~ mu: samples the discrete match, dispatches, applies
// the deadline override, and reports the sampled match and its log-probability.
PolicyFn compose_policy(MuFn mu, Rng& rng);

// Active ids ordered by (deadline, arrival, id) ascending; the dispatch order
// used for marked customers and the arrival heuristics.
std::vector<CustomerId> deadline_order(const MarketState& state,
                                       const std::vector<CustomerId>& ids);

}  // namespace fxm
