#include "verify.hpp"

#include <cmath>
#include <sstream>

#include "oracle.hpp"
#include "policies.hpp"
#include "runner.hpp"
#include "tcn.hpp"
#include "trainer.hpp"

namespace fxm {

namespace {

constexpr double kTol = 1e-9;

ScenarioRealization random_realization(Rng& rng, const MarketParams& params) {
    ScenarioRealization out;
    out.periods.resize(static_cast<std::size_t>(params.horizon));
    CustomerId next_id = 1;
    for (int t = 1; t <= params.horizon; ++t) {
        auto& period = out.periods[static_cast<std::size_t>(t - 1)];
        period.renewable = rng.uniform(0.0, 4.0);
        const int arrivals = static_cast<int>(rng.uniform_int(0, params.max_arrivals));
        for (int s = 0; s < arrivals; ++s) {
            CustomerSpec spec;
            spec.id = next_id++;
            spec.arrival = t;
            spec.load = rng.uniform(0.5, 4.0);
            spec.deadline = static_cast<int>(rng.uniform_int(t, params.horizon));
            spec.criticality = rng.uniform(0.0, 1.0);
            period.arrivals.push_back(spec);
        }
    }
    return out;
}

DiscreteMatch random_match(const MarketState& state, Rng& rng) {
    DiscreteMatch match;
    for (CustomerId id : state.active_ids()) {
        match.ids.push_back(id);
        match.flags.push_back(rng.bernoulli(0.5) ? 1 : 0);
    }
    return match;
}

// A mid-epoch state reached through the real transition under random matches.
MarketState random_market_state(Rng& rng) {
    MarketParams params;
    params.horizon = static_cast<int>(rng.uniform_int(3, 8));
    params.grid_price = rng.uniform(5.0, 15.0);
    params.max_arrivals = static_cast<int>(rng.uniform_int(1, 3));
    const ScenarioRealization realization = random_realization(rng, params);
    const int stop = static_cast<int>(rng.uniform_int(1, params.horizon));

    MarketState state(params, realization.periods.front());
    for (int t = 1; t < stop; ++t) {
        const MatchDecision decision = nu_override(dispatch_phi(random_match(state, rng), state), state);
        auto [next, welfare] = step(state, decision, realization.periods[static_cast<std::size_t>(t)]);
        (void)welfare;
        state = std::move(next);
    }
    return state;
}

bool decision_feasible(const MarketState& state, const MatchDecision& decision,
                       std::string& why) {
    double rs_total = 0.0;
    for (const auto& [id, split] : decision.entries) {
        if (split.renewable < -kTol || split.grid < -kTol) {
            why = "negative amount";
            return false;
        }
        if (!state.is_active(id)) {
            why = "dispatch to inactive customer";
            return false;
        }
        if (split.total() > state.customer(id).unserved + kTol) {
            why = "exceeds unserved load";
            return false;
        }
        rs_total += split.renewable;
    }
    if (rs_total > state.current_renewable() + kTol) {
        why = "exceeds renewable generation";
        return false;
    }
    for (CustomerId id : state.active_ids()) {
        const auto& cust = state.customer(id);
        if (std::min(cust.spec.deadline, state.params().horizon) != state.current_period()) continue;
        const double assigned = decision.entries.count(id) ? decision.entries.at(id).total() : 0.0;
        if (assigned < cust.unserved - kTol) {
            why = "deadline customer left short";
            return false;
        }
    }
    return true;
}

VerifyCheck check_feasibility_closure(std::uint64_t seed, int trials) {
    Rng rng(derive_seed(seed, 1, 0xFEA5));
    for (int i = 0; i < trials; ++i) {
        const MarketState state = random_market_state(rng);
        const DiscreteMatch match = random_match(state, rng);
        const MatchDecision decision = nu_override(dispatch_phi(match, state), state);
        std::string why;
        if (!decision_feasible(state, decision, why))
            return {"feasibility-closure", false,
                    "violation after " + std::to_string(i) + " trials: " + why};
    }
    return {"feasibility-closure", true, std::to_string(trials) + " random (state, match) pairs"};
}

VerifyCheck check_nu_idempotent(std::uint64_t seed, int trials) {
    Rng rng(derive_seed(seed, 2, 0xFEA5));
    for (int i = 0; i < trials; ++i) {
        const MarketState state = random_market_state(rng);
        const MatchDecision once = nu_override(dispatch_phi(random_match(state, rng), state), state);
        const MatchDecision twice = nu_override(once, state);
        if (once.entries.size() != twice.entries.size())
            return {"nu-idempotence", false, "entry count changed on reapplication"};
        for (const auto& [id, split] : once.entries) {
            const auto& other = twice.entries.at(id);
            if (std::abs(split.renewable - other.renewable) > kTol ||
                std::abs(split.grid - other.grid) > kTol)
                return {"nu-idempotence", false, "amounts changed on reapplication"};
        }
    }
    return {"nu-idempotence", true, std::to_string(trials) + " random decisions"};
}

VerifyCheck check_oracle_brute_force(std::uint64_t seed, int instances) {
    Rng rng(derive_seed(seed, 3, 0xFEA5));
    const double grid = 0.5;
    for (int i = 0; i < instances; ++i) {
        MarketParams params;
        params.horizon = static_cast<int>(rng.uniform_int(2, 4));
        params.grid_price = 10.0;
        params.max_arrivals = 1;
        ScenarioRealization realization;
        realization.periods.resize(static_cast<std::size_t>(params.horizon));
        const int customers = static_cast<int>(rng.uniform_int(0, 3));
        for (int t = 0; t < params.horizon; ++t)
            realization.periods[static_cast<std::size_t>(t)].renewable =
                grid * static_cast<double>(rng.uniform_int(0, 4));
        for (CustomerId id = 1; id <= static_cast<CustomerId>(customers); ++id) {
            CustomerSpec spec;
            spec.arrival = static_cast<int>(rng.uniform_int(1, params.horizon));
            spec.id = id;
            spec.load = grid * static_cast<double>(rng.uniform_int(1, 4));
            spec.deadline = static_cast<int>(rng.uniform_int(spec.arrival, params.horizon));
            spec.criticality = rng.uniform(0.0, 1.0);
            realization.periods[static_cast<std::size_t>(spec.arrival - 1)].arrivals.push_back(spec);
        }
        // batches above may exceed 1 arrival per period
        params.max_arrivals = 3;
        const double lp = solve_hindsight(realization, params).welfare;
        const double brute = brute_force_verify(realization, params, grid);
        if (brute > lp + 1e-6 || brute < lp - 1e-6)
            return {"oracle-vs-brute-force", false,
                    "instance " + std::to_string(i) + ": lp=" + std::to_string(lp) +
                        " brute=" + std::to_string(brute)};
    }
    return {"oracle-vs-brute-force", true, std::to_string(instances) + " grid-aligned instances"};
}

VerifyCheck check_dominance(const Scenario& scenario, std::uint64_t seed, int epochs) {
    const auto ooa = evaluate_oracle(scenario, 1, static_cast<std::uint64_t>(epochs));
    for (const char* name : {"ma", "mh", "med"}) {
        const auto scores =
            evaluate_baseline(scenario, name, 1, static_cast<std::uint64_t>(epochs));
        for (int e = 0; e < epochs; ++e) {
            if (scores[static_cast<std::size_t>(e)].welfare >
                ooa[static_cast<std::size_t>(e)].welfare + 1e-6)
                return {"oracle-dominance", false,
                        std::string(name) + " beat the oracle on epoch " +
                            std::to_string(scores[static_cast<std::size_t>(e)].epoch)};
        }
    }
    TcnConfig config;
    config.max_arrivals = scenario.market_params().max_arrivals;
    config.horizon = scenario.market_params().horizon;
    TcnPolicyModel model(config, seed);
    const auto la = evaluate_model(scenario, model, 1, static_cast<std::uint64_t>(epochs), seed);
    for (int e = 0; e < epochs; ++e) {
        if (la[static_cast<std::size_t>(e)].welfare >
            ooa[static_cast<std::size_t>(e)].welfare + 1e-6)
            return {"oracle-dominance", false,
                    "la beat the oracle on epoch " +
                        std::to_string(la[static_cast<std::size_t>(e)].epoch)};
    }
    return {"oracle-dominance", true,
            std::to_string(epochs) + " epochs x {ma, mh, med, la} on " + scenario.name()};
}

VerifyCheck check_gradient_probe(std::uint64_t seed) {
    TcnConfig config;
    config.num_blocks = 2;
    config.filters_per_block = 3;
    config.kernel_size = 2;
    config.dropout_rate = 0.0;
    config.dilation_base = 2;
    config.max_arrivals = 2;
    config.horizon = 4;
    TcnNetwork net(config);
    std::vector<double> params(net.param_count());
    Rng rng(derive_seed(seed, 4, 0xFEA5));
    net.init_params(params, rng);
    for (double& p : params) p += rng.uniform(-0.3, 0.3);

    Seq input(config.input_channels(), 4);
    for (double& v : input.v) v = rng.uniform(-1.0, 1.0);
    Seq upstream(config.head_dim(), 4);
    for (double& v : upstream.v) v = rng.uniform(-1.0, 1.0);

    auto objective = [&](std::span<const double> p) {
        const Seq logits = net.forward(p, input, RunMode::Eval, nullptr, nullptr);
        double sum = 0.0;
        for (std::size_t i = 0; i < logits.v.size(); ++i) sum += logits.v[i] * upstream.v[i];
        return sum;
    };

    TcnCache cache;
    net.forward(params, input, RunMode::Eval, nullptr, &cache);
    std::vector<double> grad(params.size(), 0.0);
    net.backward(params, cache, upstream, grad);

    const double h = 1e-5;
    double max_rel = 0.0;
    for (std::size_t i = 0; i < params.size(); i += 7) {  // probe a spread of parameters
        std::vector<double> p = params;
        p[i] += h;
        const double up = objective(p);
        p[i] -= 2 * h;
        const double down = objective(p);
        const double fd = (up - down) / (2 * h);
        const double rel = std::abs(fd - grad[i]) / std::max({std::abs(fd), std::abs(grad[i]), 1e-4});
        max_rel = std::max(max_rel, rel);
    }
    if (max_rel >= 1e-4)
        return {"tcn-gradient-probe", false, "max relative error " + std::to_string(max_rel)};
    std::ostringstream detail;
    detail << "max relative error " << max_rel;
    return {"tcn-gradient-probe", true, detail.str()};
}

ProfileConfig builtin_profile() {
    ProfileConfig config;
    config.name = "verify-builtin";
    config.horizon = 12;
    config.grid_price = 10.0;
    config.mean_load = {3.0, 3.0, 2.5, 2.0, 1.5, 1.5, 1.5, 1.5, 2.0, 2.0, 2.5, 3.0};
    config.mean_generation = {0.5, 1.0, 2.0, 3.5, 4.5, 5.0, 4.5, 3.5, 2.0, 1.0, 0.5, 0.3};
    config.relative_stddev = 0.15;
    config.deadline_model.kind = DeadlineModel::Kind::RandomLarge;
    config.varphi = 0.5;
    return config;
}

}  // namespace

std::string VerifyReport::to_text() const {
    std::ostringstream out;
    for (const auto& check : checks)
        out << (check.passed ? "[PASS] " : "[FAIL] ") << check.name << ": " << check.detail << '\n';
    out << (failures() == 0 ? "all checks passed" : std::to_string(failures()) + " check(s) failed")
        << '\n';
    return out.str();
}

VerifyReport run_verification(const std::optional<Scenario>& scenario, std::uint64_t seed) {
    VerifyReport report;
    report.checks.push_back(check_feasibility_closure(seed, 10000));
    report.checks.push_back(check_nu_idempotent(seed, 2000));
    report.checks.push_back(check_oracle_brute_force(seed, 40));
    const Scenario& scope = scenario ? *scenario : Scenario(builtin_profile());
    report.checks.push_back(check_dominance(scope, seed, 50));
    report.checks.push_back(check_gradient_probe(seed));
    return report;
}

}  // namespace fxm
