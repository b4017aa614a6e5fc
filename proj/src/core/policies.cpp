#include "policies.hpp"

#include <algorithm>
#include <cmath>

namespace fxm {

namespace {

constexpr double kEps = 1e-12;

// Serves `id` its full remaining load: renewables while the pool lasts, the
// rest from the grid.
void serve_fully(const MarketState& state, CustomerId id, double& renewable_left,
                 MatchDecision& out) {
    const double need = state.customer(id).unserved;
    auto& split = out.entries[id];
    const double already = split.total();
    const double remaining = need - already;
    if (remaining <= kEps) return;
    const double rs = std::min(remaining, std::max(0.0, renewable_left));
    split.renewable += rs;
    split.grid += remaining - rs;
    renewable_left -= rs;
}

// Pours renewables down `order`, each customer capped at its remaining load.
void pour_renewable(const MarketState& state, const std::vector<CustomerId>& order,
                    double& renewable_left, MatchDecision& out) {
    for (CustomerId id : order) {
        if (renewable_left <= kEps) break;
        auto& split = out.entries[id];
        const double room = state.customer(id).unserved - split.total();
        if (room <= kEps) continue;
        const double rs = std::min(room, renewable_left);
        split.renewable += rs;
        renewable_left -= rs;
    }
}

std::vector<CustomerId> descending_willingness(const MarketState& state,
                                               const std::vector<CustomerId>& ids) {
    std::vector<CustomerId> order(ids);
    std::stable_sort(order.begin(), order.end(), [&](CustomerId a, CustomerId b) {
        const double pa = state.willingness(a);
        const double pb = state.willingness(b);
        if (pa != pb) return pa > pb;
        const auto& ca = state.customer(a).spec;
        const auto& cb = state.customer(b).spec;
        if (ca.deadline != cb.deadline) return ca.deadline < cb.deadline;
        return a < b;
    });
    return order;
}

void drop_empty_entries(MatchDecision& decision) {
    for (auto it = decision.entries.begin(); it != decision.entries.end();) {
        if (it->second.total() <= kEps)
            it = decision.entries.erase(it);
        else
            ++it;
    }
}

}  // namespace

std::vector<CustomerId> deadline_order(const MarketState& state,
                                       const std::vector<CustomerId>& ids) {
    std::vector<CustomerId> order(ids);
    std::sort(order.begin(), order.end(), [&](CustomerId a, CustomerId b) {
        const auto& ca = state.customer(a).spec;
        const auto& cb = state.customer(b).spec;
        if (ca.deadline != cb.deadline) return ca.deadline < cb.deadline;
        if (ca.arrival != cb.arrival) return ca.arrival < cb.arrival;
        return a < b;
    });
    return order;
}

std::pair<DiscreteMatch, double> sample_discrete(const MatchProbabilities& probs, Rng& rng) {
    DiscreteMatch match;
    match.ids = probs.ids;
    match.flags.resize(probs.size());
    double log_prob = 0.0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        const double p = probs.probs[i];
        if (p < 0.0 || p > 1.0) throw ContractViolation("match probability outside [0, 1]");
        const bool hit = rng.bernoulli(p);
        match.flags[i] = hit ? 1 : 0;
        log_prob += hit ? std::log(p) : std::log1p(-p);
    }
    return {std::move(match), log_prob};
}

double discrete_log_prob(const MatchProbabilities& probs, const DiscreteMatch& match) {
    if (probs.ids != match.ids) throw ContractViolation("probability/match id mismatch");
    double log_prob = 0.0;
    for (std::size_t i = 0; i < probs.size(); ++i)
        log_prob += match.flags[i] ? std::log(probs.probs[i]) : std::log1p(-probs.probs[i]);
    return log_prob;
}

MatchDecision dispatch_phi(const DiscreteMatch& match, const MarketState& state) {
    std::vector<CustomerId> marked;
    std::vector<CustomerId> unmarked;
    for (std::size_t i = 0; i < match.size(); ++i) {
        if (!state.is_active(match.ids[i]))
            throw ContractViolation("discrete match refers to inactive customer");
        (match.flags[i] ? marked : unmarked).push_back(match.ids[i]);
    }
    for (CustomerId id : state.active_ids())
        if (std::find(match.ids.begin(), match.ids.end(), id) == match.ids.end())
            unmarked.push_back(id);

    MatchDecision out;
    double renewable_left = state.current_renewable();
    for (CustomerId id : deadline_order(state, marked))
        serve_fully(state, id, renewable_left, out);
    // surplus renewable flows to the unmatched, highest willingness first
    if (renewable_left > kEps)
        pour_renewable(state, descending_willingness(state, unmarked), renewable_left, out);
    drop_empty_entries(out);
    return out;
}

MatchDecision nu_override(const MatchDecision& decision, const MarketState& state) {
    MatchDecision out = decision;
    const int t = state.current_period();
    for (CustomerId id : state.active_ids()) {
        const auto& cust = state.customer(id);
        if (std::min(cust.spec.deadline, state.params().horizon) != t) continue;
        const double assigned = out.entries.count(id) ? out.entries.at(id).total() : 0.0;
        const double shortfall = cust.unserved - assigned;
        if (shortfall > kEps) out.entries[id].grid += shortfall;
    }
    return out;
}

MatchDecision policy_ma(const MarketState& state) {
    std::vector<CustomerId> arrivals;
    for (CustomerId id : state.active_ids())
        if (state.customer(id).spec.arrival == state.current_period()) arrivals.push_back(id);

    MatchDecision out;
    double renewable_left = state.current_renewable();
    for (CustomerId id : deadline_order(state, arrivals))
        serve_fully(state, id, renewable_left, out);
    drop_empty_entries(out);
    return nu_override(out, state);
}

MatchDecision policy_mh(const MarketState& state) {
    MatchDecision out;
    double renewable_left = state.current_renewable();
    pour_renewable(state, descending_willingness(state, state.active_ids()), renewable_left, out);
    drop_empty_entries(out);
    // immediate-deadline shortfall falls back to the grid
    return nu_override(out, state);
}

MatchDecision policy_med(const MarketState& state) {
    MatchDecision out;
    double renewable_left = state.current_renewable();
    pour_renewable(state, deadline_order(state, state.active_ids()), renewable_left, out);
    drop_empty_entries(out);
    return nu_override(out, state);
}

PolicyFn baseline_policy(const std::string& name) {
    MatchDecision (*fn)(const MarketState&) = nullptr;
    if (name == "ma") fn = &policy_ma;
    else if (name == "mh") fn = &policy_mh;
    else if (name == "med") fn = &policy_med;
    else throw ConfigError("unknown baseline policy: " + name);
    return [fn](const MarketState& state) {
        PolicyStep step;
        step.decision = fn(state);
        return step;
    };
}

PolicyFn compose_policy(MuFn mu, Rng& rng) {
    return [mu = std::move(mu), &rng](const MarketState& state) {
        const MatchProbabilities probs = mu(state);
        auto [match, log_prob] = sample_discrete(probs, rng);
        PolicyStep step;
        step.decision = nu_override(dispatch_phi(match, state), state);
        step.match = std::move(match);
        step.log_prob = log_prob;
        return step;
    };
}

}  // namespace fxm
