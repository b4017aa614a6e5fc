#include "market.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace fxm {

namespace {
constexpr double kAmountTol = 1e-9;
constexpr double kZeroSnap = 1e-12;
}  // namespace

double willingness_to_pay(const CustomerSpec& spec, int period, const MarketParams& params) {
    if (period < spec.arrival || period > spec.deadline)
        throw ContractViolation("willingness_to_pay: period " + std::to_string(period) +
                                " outside customer window [" + std::to_string(spec.arrival) +
                                ", " + std::to_string(spec.deadline) + "]");
    const double b = spec.decay_rate(params.grid_price);
    return std::max(0.0, params.grid_price - b * static_cast<double>(period - spec.arrival));
}

MarketState::MarketState(MarketParams params, const PeriodDraw& first) : params_(std::move(params)) {
    params_.validate();
    period_ = 1;
    admit(first);
    refresh_active();
}

void MarketState::admit(const PeriodDraw& draw) {
    if (static_cast<int>(draw.arrivals.size()) > params_.max_arrivals)
        throw ContractViolation("arrival batch exceeds max_arrivals");
    for (const auto& spec : draw.arrivals) {
        spec.validate(params_);
        if (spec.arrival != period_)
            throw ContractViolation("arrival period mismatch for customer " + std::to_string(spec.id));
        if (customers_.count(spec.id))
            throw ContractViolation("duplicate customer id " + std::to_string(spec.id));
        customers_.emplace(spec.id, CustomerState{spec, spec.load, {}});
    }
    history_.push_back(draw);
}

void MarketState::refresh_active() {
    active_.clear();
    for (const auto& [id, cust] : customers_) {
        if (cust.unserved > 0.0 && cust.spec.deadline >= period_ && cust.spec.arrival <= period_)
            active_.push_back(id);
    }
}

bool MarketState::is_active(CustomerId id) const {
    return std::binary_search(active_.begin(), active_.end(), id);
}

const CustomerState& MarketState::customer(CustomerId id) const {
    auto it = customers_.find(id);
    if (it == customers_.end())
        throw ContractViolation("unknown customer id " + std::to_string(id));
    return it->second;
}

double MarketState::willingness(CustomerId id) const {
    return willingness_to_pay(customer(id).spec, period_, params_);
}

std::pair<MarketState, double> step(const MarketState& state, const MatchDecision& decision,
                                    const std::optional<PeriodDraw>& next) {
    if (state.complete()) throw ContractViolation("step on a completed epoch");
    const int t = state.period_;
    const MarketParams& params = state.params_;

    // Validate the decision against the current state before touching anything.
    double renewable_used = 0.0;
    for (const auto& [id, split] : decision.entries) {
        if (split.renewable < -kAmountTol || split.grid < -kAmountTol)
            throw FeasibilityError("negative dispatch amount for customer " + std::to_string(id));
        if (split.total() <= 0.0) continue;
        if (!state.is_active(id))
            throw FeasibilityError("dispatch to inactive customer " + std::to_string(id));
        const auto& cust = state.customer(id);
        if (split.total() > cust.unserved + kAmountTol)
            throw FeasibilityError("dispatch exceeds unserved load of customer " + std::to_string(id));
        renewable_used += split.renewable;
    }
    if (renewable_used > state.current_renewable() + kAmountTol)
        throw FeasibilityError("renewable dispatch exceeds generation r_t");

    MarketState out = state;
    double welfare = 0.0;
    for (const auto& [id, split] : decision.entries) {
        if (split.total() <= 0.0) continue;
        auto& cust = out.customers_.at(id);
        const double pi = willingness_to_pay(cust.spec, t, params);
        welfare += (pi - params.supply_cost(SupplyType::Renewable)) * split.renewable;
        welfare += (pi - params.supply_cost(SupplyType::Grid)) * split.grid;
        if (split.renewable > 0.0)
            cust.service_log.push_back({t, SupplyType::Renewable, split.renewable});
        if (split.grid > 0.0)
            cust.service_log.push_back({t, SupplyType::Grid, split.grid});
        cust.unserved -= split.total();
        if (std::abs(cust.unserved) < kZeroSnap) cust.unserved = 0.0;
    }

    // Nobody may cross its deadline (or the horizon) with load left; nu must
    // have topped the decision up before step is called.
    for (const auto& [id, cust] : out.customers_) {
        if (cust.unserved > kAmountTol && std::min(cust.spec.deadline, params.horizon) <= t)
            throw DeadlineViolation("customer " + std::to_string(id) +
                                    " unserved at deadline in period " + std::to_string(t));
    }

    out.period_ = t + 1;
    if (next.has_value()) {
        if (out.period_ > params.horizon)
            throw ContractViolation("arrivals supplied past the horizon");
        out.admit(*next);
    } else if (out.period_ <= params.horizon) {
        throw ContractViolation("missing next-period draw before the horizon");
    }
    out.refresh_active();
    return {std::move(out), welfare};
}

EpochTrace run_epoch(const MarketParams& params, const std::vector<PeriodDraw>& realization,
                     const PolicyFn& policy) {
    if (static_cast<int>(realization.size()) != params.horizon)
        throw ContractViolation("realization length differs from horizon");
    EpochTrace trace;
    trace.horizon = params.horizon;
    trace.periods.reserve(params.horizon);

    MarketState state(params, realization.front());
    for (int t = 1; t <= params.horizon; ++t) {
        PolicyStep act = policy(state);
        std::optional<PeriodDraw> next;
        if (t < params.horizon) next = realization[static_cast<std::size_t>(t)];
        auto [succ, welfare] = step(state, act.decision, next);
        trace.periods.push_back({std::move(state), std::move(act.match), act.log_prob,
                                 std::move(act.decision), welfare});
        state = std::move(succ);
    }
    return trace;
}

double epoch_welfare(const EpochTrace& trace) {
    if (trace.horizon <= 0 || static_cast<int>(trace.periods.size()) != trace.horizon)
        throw ContractViolation("epoch_welfare on an incomplete trace");
    double sum = 0.0;
    for (const auto& p : trace.periods) sum += p.welfare;
    return sum;
}

}  // namespace fxm
