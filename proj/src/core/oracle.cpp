#include "oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace fxm {

namespace {
constexpr double kTol = 1e-9;
}

SimplexSolver::SimplexSolver(std::vector<std::vector<double>> rows, std::vector<double> rhs,
                             std::vector<double> objective, std::size_t eq_count,
                             std::vector<std::size_t> initial_basis)
    : structural_(objective.size()) {
    rows_ = rows.size();
    const std::size_t slacks = rows_ - eq_count;
    cols_ = structural_ + slacks;
    tab_.assign(rows_, std::vector<double>(cols_ + 1, 0.0));
    for (std::size_t r = 0; r < rows_; ++r) {
        if (rhs[r] < -kTol) throw ContractViolation("simplex rhs must be non-negative");
        std::copy(rows[r].begin(), rows[r].end(), tab_[r].begin());
        if (r >= eq_count) tab_[r][structural_ + (r - eq_count)] = 1.0;
        tab_[r][cols_] = rhs[r];
    }
    cost_.assign(cols_ + 1, 0.0);
    std::copy(objective.begin(), objective.end(), cost_.begin());
    basis_ = std::move(initial_basis);
    if (basis_.size() != rows_) throw ContractViolation("simplex basis size mismatch");

    // Price out the starting basis so reduced costs start consistent. The
    // callers below always start from zero-cost basic columns, but keep this
    // general.
    for (std::size_t r = 0; r < rows_; ++r) {
        const double cb = cost_[basis_[r]];
        if (cb == 0.0) continue;
        for (std::size_t c = 0; c <= cols_; ++c) cost_[c] -= cb * tab_[r][c];
    }
}

double SimplexSolver::maximize() {
    const std::size_t iter_cap = 200 * (cols_ + rows_) + 1000;
    std::size_t iter = 0;
    bool bland = false;
    for (;; ++iter) {
        if (iter > iter_cap) throw std::runtime_error("simplex iteration cap exceeded");
        if (iter > 50 * (cols_ + rows_)) bland = true;

        // entering column: most positive reduced cost (Bland: first positive)
        std::size_t enter = cols_;
        double best = kTol;
        for (std::size_t c = 0; c < cols_; ++c) {
            if (cost_[c] > best) {
                enter = c;
                best = cost_[c];
                if (bland) break;
            }
        }
        if (enter == cols_) break;  // optimal

        // ratio test
        std::size_t leave = rows_;
        double best_ratio = std::numeric_limits<double>::infinity();
        for (std::size_t r = 0; r < rows_; ++r) {
            const double a = tab_[r][enter];
            if (a <= kTol) continue;
            const double ratio = tab_[r][cols_] / a;
            if (ratio < best_ratio - kTol ||
                (ratio < best_ratio + kTol && (leave == rows_ || basis_[r] < basis_[leave]))) {
                best_ratio = ratio;
                leave = r;
            }
        }
        if (leave == rows_) throw std::runtime_error("simplex objective unbounded");

        // pivot
        const double pivot = tab_[leave][enter];
        for (std::size_t c = 0; c <= cols_; ++c) tab_[leave][c] /= pivot;
        for (std::size_t r = 0; r < rows_; ++r) {
            if (r == leave) continue;
            const double f = tab_[r][enter];
            if (f == 0.0) continue;
            for (std::size_t c = 0; c <= cols_; ++c) tab_[r][c] -= f * tab_[leave][c];
        }
        const double fc = cost_[enter];
        if (fc != 0.0)
            for (std::size_t c = 0; c <= cols_; ++c) cost_[c] -= fc * tab_[leave][c];
        basis_[leave] = enter;
    }

    solution_.assign(structural_, 0.0);
    for (std::size_t r = 0; r < rows_; ++r) {
        if (basis_[r] < structural_) solution_[basis_[r]] = std::max(0.0, tab_[r][cols_]);
    }
    // the cost-row RHS accumulates the negated objective gain over the start basis
    return -cost_[cols_];
}

namespace {

struct OracleVar {
    std::size_t customer;  // index into the flattened customer list
    int period;
    bool renewable;
};

struct FlatCustomer {
    CustomerSpec spec;
};

std::vector<FlatCustomer> flatten_customers(const ScenarioRealization& realization,
                                            const MarketParams& params) {
    std::vector<FlatCustomer> out;
    for (const auto& period : realization.periods)
        for (const auto& spec : period.arrivals) {
            spec.validate(params);
            out.push_back({spec});
        }
    return out;
}

}  // namespace

HindsightSolution solve_hindsight(const ScenarioRealization& realization,
                                  const MarketParams& params) {
    params.validate();
    const int T = params.horizon;
    if (static_cast<int>(realization.periods.size()) != T)
        throw ContractViolation("realization length differs from horizon");
    const auto customers = flatten_customers(realization, params);
    const std::size_t n = customers.size();

    // Columns: (rs, gs) per (customer, in-window period).
    std::vector<OracleVar> vars;
    std::vector<std::size_t> arrival_gs_col(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto& spec = customers[i].spec;
        for (int t = spec.arrival; t <= spec.deadline; ++t) {
            vars.push_back({i, t, true});
            if (t == spec.arrival) arrival_gs_col[i] = vars.size();
            vars.push_back({i, t, false});
        }
    }

    const std::size_t rows = n + static_cast<std::size_t>(T);
    std::vector<std::vector<double>> a(rows, std::vector<double>(vars.size(), 0.0));
    std::vector<double> rhs(rows, 0.0);
    std::vector<double> obj(vars.size(), 0.0);
    for (std::size_t v = 0; v < vars.size(); ++v) {
        const auto& var = vars[v];
        const auto& spec = customers[var.customer].spec;
        const double pi = willingness_to_pay(spec, var.period, params);
        obj[v] = var.renewable ? pi : pi - params.grid_price;
        a[var.customer][v] = 1.0;  // full-service equality row
        if (var.renewable) a[n + static_cast<std::size_t>(var.period - 1)][v] = 1.0;
    }
    for (std::size_t i = 0; i < n; ++i) rhs[i] = customers[i].spec.load;
    for (int t = 1; t <= T; ++t)
        rhs[n + static_cast<std::size_t>(t - 1)] = realization.periods[static_cast<std::size_t>(t - 1)].renewable;

    // Start from "everything grid-served on arrival" plus capacity slacks; all
    // those columns carry zero objective (pi equals the grid price at arrival).
    std::vector<std::size_t> basis;
    for (std::size_t i = 0; i < n; ++i) basis.push_back(arrival_gs_col[i]);
    for (int t = 0; t < T; ++t) basis.push_back(vars.size() + static_cast<std::size_t>(t));

    HindsightSolution out;
    out.schedule.assign(static_cast<std::size_t>(T), MatchDecision{});
    if (n == 0) return out;

    SimplexSolver lp(std::move(a), std::move(rhs), std::move(obj), n, std::move(basis));
    out.welfare = lp.maximize();
    const auto& x = lp.solution();
    for (std::size_t v = 0; v < vars.size(); ++v) {
        if (x[v] <= kTol) continue;
        const auto& var = vars[v];
        auto& split = out.schedule[static_cast<std::size_t>(var.period - 1)]
                          .entries[customers[var.customer].spec.id];
        (var.renewable ? split.renewable : split.grid) += x[v];
    }
    return out;
}

EpochTrace replay_schedule(const ScenarioRealization& realization, const MarketParams& params,
                           const std::vector<MatchDecision>& schedule) {
    if (schedule.size() != realization.periods.size())
        throw ContractViolation("schedule length differs from realization");
    return run_epoch(params, realization.periods, [&](const MarketState& state) {
        PolicyStep step;
        step.decision = schedule[static_cast<std::size_t>(state.current_period() - 1)];
        return step;
    });
}

namespace {

// All ways to spread `units` grid steps over `cells` slots.
void compositions(int units, int cells, std::vector<int>& current,
                  std::vector<std::vector<int>>& out) {
    if (cells == 1) {
        current.push_back(units);
        out.push_back(current);
        current.pop_back();
        return;
    }
    for (int u = 0; u <= units; ++u) {
        current.push_back(u);
        compositions(units - u, cells - 1, current, out);
        current.pop_back();
    }
}

struct Candidate {
    double welfare = 0.0;
    std::vector<double> rs_by_period;  // length T
};

}  // namespace

double brute_force_verify(const ScenarioRealization& realization, const MarketParams& params,
                          double grid_resolution) {
    const int T = params.horizon;
    const auto customers = flatten_customers(realization, params);
    if (customers.size() > 3 || T > 4)
        throw ContractViolation("brute_force_verify: instance too large (max 3 customers, T <= 4)");
    if (!(grid_resolution > 0.0)) throw ContractViolation("grid_resolution must be > 0");
    if (customers.empty()) return 0.0;

    // Per customer: every discretized split of its load over (window x supply).
    std::vector<std::vector<Candidate>> candidates(customers.size());
    for (std::size_t i = 0; i < customers.size(); ++i) {
        const auto& spec = customers[i].spec;
        const double units_f = spec.load / grid_resolution;
        const int units = static_cast<int>(std::llround(units_f));
        if (std::abs(units_f - units) > 1e-6)
            throw ContractViolation("customer load is not a multiple of grid_resolution");
        const int window = spec.deadline - spec.arrival + 1;
        std::vector<std::vector<int>> splits;
        std::vector<int> scratch;
        compositions(units, 2 * window, scratch, splits);
        candidates[i].reserve(splits.size());
        for (const auto& split : splits) {
            Candidate cand;
            cand.rs_by_period.assign(static_cast<std::size_t>(T), 0.0);
            for (int w = 0; w < window; ++w) {
                const int t = spec.arrival + w;
                const double pi = willingness_to_pay(spec, t, params);
                const double rs = split[static_cast<std::size_t>(2 * w)] * grid_resolution;
                const double gs = split[static_cast<std::size_t>(2 * w + 1)] * grid_resolution;
                cand.welfare += pi * rs + (pi - params.grid_price) * gs;
                cand.rs_by_period[static_cast<std::size_t>(t - 1)] += rs;
            }
            candidates[i].push_back(std::move(cand));
        }
    }

    double best = -std::numeric_limits<double>::infinity();
    std::vector<double> rs_used(static_cast<std::size_t>(T), 0.0);
    // depth-first product over per-customer candidates with capacity pruning
    auto dfs = [&](auto&& self, std::size_t i, double welfare) -> void {
        if (i == customers.size()) {
            best = std::max(best, welfare);
            return;
        }
        for (const auto& cand : candidates[i]) {
            bool feasible = true;
            for (int t = 0; t < T; ++t) {
                if (rs_used[static_cast<std::size_t>(t)] + cand.rs_by_period[static_cast<std::size_t>(t)] >
                    realization.periods[static_cast<std::size_t>(t)].renewable + kTol) {
                    feasible = false;
                    break;
                }
            }
            if (!feasible) continue;
            for (int t = 0; t < T; ++t)
                rs_used[static_cast<std::size_t>(t)] += cand.rs_by_period[static_cast<std::size_t>(t)];
            self(self, i + 1, welfare + cand.welfare);
            for (int t = 0; t < T; ++t)
                rs_used[static_cast<std::size_t>(t)] -= cand.rs_by_period[static_cast<std::size_t>(t)];
        }
    };
    dfs(dfs, 0, 0.0);
    return best;
}

}  // namespace fxm
