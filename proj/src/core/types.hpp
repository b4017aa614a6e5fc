#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace fxm {

using CustomerId = std::uint32_t;

enum class SupplyType { Grid, Renewable };

// Error raised when a caller breaks a documented precondition.
class ContractViolation : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

// A matching decision that exceeds unserved load or renewable capacity.
class FeasibilityError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// A customer reached its deadline with unserved load after the decision.
class DeadlineViolation : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Market-wide constants for one epoch. Renewable supply is free, grid supply
// is unbounded at the retail price.
struct MarketParams {
    int horizon = 12;             // periods per epoch (T)
    double period_length = 1.0;   // informational interval length
    double grid_price = 10.0;     // retail price c per kWh
    int max_arrivals = 1;         // per-period arrival cap (n bar)

    double supply_cost(SupplyType type) const {
        return type == SupplyType::Grid ? grid_price : 0.0;
    }

    void validate() const {
        if (horizon < 1) throw ContractViolation("horizon must be >= 1");
        if (grid_price <= 0.0) throw ContractViolation("grid_price must be > 0");
        if (max_arrivals < 1) throw ContractViolation("max_arrivals must be >= 1");
    }
};

// An arriving flexible load. Willingness to pay starts at the grid price and
// decays linearly to (1 - criticality) * price at the deadline.
struct CustomerSpec {
    CustomerId id = 0;
    int arrival = 1;          // a_i, period index in [1, T]
    double load = 0.0;        // q_i, kWh
    int deadline = 1;         // d_i, period index in [arrival, T]
    double criticality = 0.0; // varphi in [0, 1]

    // Decay rate b_i. A single-period window (deadline == arrival) gets b = 0:
    // the customer must be served immediately and pays the full price.
    double decay_rate(double grid_price) const {
        if (deadline == arrival) return 0.0;
        return criticality * grid_price / static_cast<double>(deadline - arrival);
    }

    void validate(const MarketParams& params) const {
        if (arrival < 1 || arrival > params.horizon)
            throw ContractViolation("customer arrival outside [1, T]");
        if (deadline < arrival || deadline > params.horizon)
            throw ContractViolation("customer deadline outside [arrival, T]");
        if (!(load > 0.0)) throw ContractViolation("customer load must be > 0");
        if (criticality < 0.0 || criticality > 1.0)
            throw ContractViolation("criticality must lie in [0, 1]");
    }
};

struct ServiceEntry {
    int period = 0;
    SupplyType supply = SupplyType::Grid;
    double amount = 0.0;
};

// Live bookkeeping for one customer.
struct CustomerState {
    CustomerSpec spec;
    double unserved = 0.0;  // q_p, remaining kWh
    std::vector<ServiceEntry> service_log;

    double served_total() const {
        double s = 0.0;
        for (const auto& e : service_log) s += e.amount;
        return s;
    }
};

inline const char* supply_name(SupplyType type) {
    return type == SupplyType::Grid ? "gs" : "rs";
}

}  // namespace fxm
