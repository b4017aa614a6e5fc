#pragma once

#include <functional>
#include <map>
#include <optional>
#include <vector>

#include "types.hpp"

namespace fxm {

// Per-period amounts dispatched to one customer.
struct SupplySplit {
    double renewable = 0.0;  // kWh from local renewable units
    double grid = 0.0;       // kWh from the upstream grid

    double total() const { return renewable + grid; }
};

// Real-valued dispatch for one period: customer id -> amounts per supply type.
struct MatchDecision {
    std::map<CustomerId, SupplySplit> entries;

    double renewable_total() const {
        double s = 0.0;
        for (const auto& [id, split] : entries) s += split.renewable;
        return s;
    }
};

// Arrival batch and renewable generation of one period.
struct PeriodDraw {
    std::vector<CustomerSpec> arrivals;
    double renewable = 0.0;
};

// Binary match/no-match flags for the active customers, as sampled from the
// learnable policy. Parallel vectors, ids ascending.
struct DiscreteMatch {
    std::vector<CustomerId> ids;
    std::vector<std::uint8_t> flags;

    bool empty() const { return ids.empty(); }
    std::size_t size() const { return ids.size(); }
};

// Per-customer match probabilities emitted by the learnable component.
struct MatchProbabilities {
    std::vector<CustomerId> ids;
    std::vector<double> probs;

    std::size_t size() const { return ids.size(); }
};

// The cumulative market history X_t the policy conditions on. Immutable
// snapshot semantics: step() returns a new state.
class MarketState {
public:
    MarketState(MarketParams params, const PeriodDraw& first);

    const MarketParams& params() const { return params_; }
    int current_period() const { return period_; }
    bool complete() const { return period_ > params_.horizon; }

    // History record l (1-based): the arrivals of period l and its renewable.
    // Unserved amounts live in customer states and reflect decisions so far.
    const std::vector<PeriodDraw>& history() const { return history_; }
    double current_renewable() const { return history_.back().renewable; }

    const std::vector<CustomerId>& active_ids() const { return active_; }
    bool is_active(CustomerId id) const;
    const CustomerState& customer(CustomerId id) const;
    const std::map<CustomerId, CustomerState>& customers() const { return customers_; }

    // Willingness to pay of an active customer at the current period.
    double willingness(CustomerId id) const;

    friend std::pair<MarketState, double> step(const MarketState& state,
                                               const MatchDecision& decision,
                                               const std::optional<PeriodDraw>& next);

private:
    MarketState() = default;
    void admit(const PeriodDraw& draw);
    void refresh_active();

    MarketParams params_;
    int period_ = 1;
    std::vector<PeriodDraw> history_;
    std::map<CustomerId, CustomerState> customers_;
    std::vector<CustomerId> active_;
};

// Eq. utility: pi = max(0, c - b (t - a)); equals c at arrival, clamped at 0.
double willingness_to_pay(const CustomerSpec& spec, int period, const MarketParams& params);

// Applies one period's decision, returning the successor state and the
// period's welfare sum_i sum_j (pi_i - c_j) M(j, i). `next` supplies the
// following period's arrivals and renewable; pass nullopt after period T.
std::pair<MarketState, double> step(const MarketState& state, const MatchDecision& decision,
                                    const std::optional<PeriodDraw>& next);

// What a policy produces for one period. Baselines leave `match` empty.
struct PolicyStep {
    MatchDecision decision;
    DiscreteMatch match;
    double log_prob = 0.0;
};

using PolicyFn = std::function<PolicyStep(const MarketState&)>;

struct TracePeriod {
    MarketState state;       // X_t as the policy saw it
    DiscreteMatch match;     // sampled m_t (empty for rule-based policies)
    double log_prob = 0.0;   // log mu_t(m_t)
    MatchDecision decision;  // final dispatch after nu
    double welfare = 0.0;    // v_t
};

// One epoch's (state, match, welfare) sequence, the unit the trainers consume.
struct EpochTrace {
    int horizon = 0;
    std::vector<TracePeriod> periods;
};

// Runs one full epoch of `realization`, querying the policy each period.
EpochTrace run_epoch(const MarketParams& params, const std::vector<PeriodDraw>& realization,
                     const PolicyFn& policy);

// Total welfare W of a complete trace.
double epoch_welfare(const EpochTrace& trace);

}  // namespace fxm
