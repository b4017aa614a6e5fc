#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "market.hpp"
#include "policies.hpp"
#include "test_util.hpp"

using namespace fxm;
using testutil::customer;
using testutil::params;

TEST_CASE("willingness to pay follows the decaying utility") {
    const MarketParams p = params(8);

    SUBCASE("zero criticality keeps the full price over the window") {
        const CustomerSpec spec = customer(1, 2, 1.0, 6, 0.0);
        for (int t = 2; t <= 6; ++t) CHECK(willingness_to_pay(spec, t, p) == doctest::Approx(10.0));
    }
    SUBCASE("full criticality reaches zero at the deadline") {
        const CustomerSpec spec = customer(1, 1, 1.0, 5, 1.0);
        CHECK(willingness_to_pay(spec, 5, p) == doctest::Approx(0.0));
    }
    SUBCASE("mid-window value: c=10, a=1, d=5, varphi=1, t=3") {
        const CustomerSpec spec = customer(1, 1, 2.0, 5, 1.0);
        CHECK(willingness_to_pay(spec, 3, p) == doctest::Approx(5.0));
    }
    SUBCASE("equals the grid price at arrival") {
        const CustomerSpec spec = customer(1, 3, 1.0, 7, 0.7);
        CHECK(willingness_to_pay(spec, 3, p) == doctest::Approx(p.grid_price));
    }
    SUBCASE("single-period customers pay the full price") {
        const CustomerSpec spec = customer(1, 4, 1.0, 4, 1.0);
        CHECK(willingness_to_pay(spec, 4, p) == doctest::Approx(10.0));
    }
    SUBCASE("non-increasing in the period") {
        const CustomerSpec spec = customer(1, 1, 1.0, 8, 0.63);
        double prev = willingness_to_pay(spec, 1, p);
        for (int t = 2; t <= 8; ++t) {
            const double cur = willingness_to_pay(spec, t, p);
            CHECK(cur <= prev + 1e-12);
            prev = cur;
        }
    }
    SUBCASE("out-of-window periods are rejected") {
        const CustomerSpec spec = customer(1, 2, 1.0, 4, 0.5);
        CHECK_THROWS_AS(willingness_to_pay(spec, 1, p), ContractViolation);
        CHECK_THROWS_AS(willingness_to_pay(spec, 5, p), ContractViolation);
    }
}

TEST_CASE("step accounts welfare per supply type") {
    const MarketParams p = params(4);

    SUBCASE("grid service at arrival contributes zero") {
        PeriodDraw first{{customer(1, 1, 2.0, 3, 1.0)}, 0.0};
        MarketState state(p, first);
        MatchDecision d;
        d.entries[1] = {0.0, 2.0};
        auto [next, welfare] = step(state, d, PeriodDraw{});
        CHECK(welfare == doctest::Approx(0.0));
        CHECK(next.customer(1).unserved == doctest::Approx(0.0));
        CHECK(next.active_ids().empty());
    }
    SUBCASE("renewable service at arrival earns the full price") {
        PeriodDraw first{{customer(1, 1, 2.0, 3, 1.0)}, 2.0};
        MarketState state(p, first);
        MatchDecision d;
        d.entries[1] = {2.0, 0.0};
        auto [next, welfare] = step(state, d, PeriodDraw{});
        CHECK(welfare == doctest::Approx(2.0 * p.grid_price));
    }
    SUBCASE("empty active set wastes the renewable at zero welfare") {
        MarketState state(p, PeriodDraw{{}, 3.0});
        auto [next, welfare] = step(state, MatchDecision{}, PeriodDraw{});
        CHECK(welfare == doctest::Approx(0.0));
    }
    SUBCASE("over-dispatch of a customer is infeasible") {
        MarketState state(p, PeriodDraw{{customer(1, 1, 1.0, 3, 0.0)}, 0.0});
        MatchDecision d;
        d.entries[1] = {0.0, 1.5};
        CHECK_THROWS_AS(step(state, d, PeriodDraw{}), FeasibilityError);
    }
    SUBCASE("over-dispatch of the renewable pool is infeasible") {
        MarketState state(p, PeriodDraw{{customer(1, 1, 5.0, 3, 0.0)}, 1.0});
        MatchDecision d;
        d.entries[1] = {2.0, 0.0};
        CHECK_THROWS_AS(step(state, d, PeriodDraw{}), FeasibilityError);
    }
    SUBCASE("an unserved customer at its deadline is a violation") {
        MarketState state(p, PeriodDraw{{customer(1, 1, 1.0, 1, 0.0)}, 0.0});
        CHECK_THROWS_AS(step(state, MatchDecision{}, PeriodDraw{}), DeadlineViolation);
    }
    SUBCASE("dispatch to an inactive id is infeasible") {
        MarketState state(p, PeriodDraw{{customer(1, 1, 1.0, 3, 0.0)}, 0.0});
        MatchDecision d;
        d.entries[7] = {0.0, 1.0};
        CHECK_THROWS_AS(step(state, d, PeriodDraw{}), FeasibilityError);
    }
}

TEST_CASE("epoch welfare sums the per-period terms") {
    MarketParams p = params(2);

    SUBCASE("deferring a fully-critical customer to its deadline forfeits the value") {
        // same customer, served from rs at t=1 vs t=2
        const CustomerSpec spec = customer(1, 1, 1.0, 2, 1.0);
        ScenarioRealization r;
        r.periods = {{{spec}, 1.0}, {{}, 1.0}};

        auto serve_at = [&](int when) {
            return run_epoch(p, r.periods, [&](const MarketState& state) {
                PolicyStep step;
                if (state.current_period() == when) step.decision.entries[1] = {1.0, 0.0};
                return step;
            });
        };
        CHECK(epoch_welfare(serve_at(1)) == doctest::Approx(10.0));
        CHECK(epoch_welfare(serve_at(2)) == doctest::Approx(0.0));
    }
    SUBCASE("zero-criticality load forced to the grid at deadline nets zero") {
        ScenarioRealization r;
        r.periods = {{{customer(1, 1, 2.0, 2, 0.0), customer(2, 1, 1.0, 1, 0.0)}, 0.0},
                     {{customer(3, 2, 1.5, 2, 0.0)}, 0.0}};
        const EpochTrace trace = run_epoch(p, r.periods, [&](const MarketState& state) {
            PolicyStep step;
            step.decision = nu_override(MatchDecision{}, state);
            return step;
        });
        CHECK(epoch_welfare(trace) == doctest::Approx(0.0));
        CHECK(trace.periods.size() == 2);
    }
    SUBCASE("incomplete traces are rejected") {
        EpochTrace trace;
        trace.horizon = 4;
        const MarketState dummy(params(1, 10.0, 1), PeriodDraw{});
        trace.periods.push_back({dummy, {}, 0.0, {}, 1.0});
        trace.periods.push_back({dummy, {}, 0.0, {}, 2.0});
        CHECK_THROWS_AS(epoch_welfare(trace), ContractViolation);
    }
}

TEST_CASE("market invariants hold on random epochs under random matching") {
    Rng rng(20260808);
    for (int trial = 0; trial < 200; ++trial) {
        const MarketParams p = params(static_cast<int>(rng.uniform_int(2, 6)), 10.0, 2);
        const ScenarioRealization r = testutil::random_realization(rng, p);

        std::vector<double> renewable_dispatched(static_cast<std::size_t>(p.horizon), 0.0);
        const EpochTrace trace = run_epoch(p, r.periods, [&](const MarketState& state) {
            DiscreteMatch match;
            for (CustomerId id : state.active_ids()) {
                match.ids.push_back(id);
                match.flags.push_back(rng.bernoulli(0.5) ? 1 : 0);
            }
            PolicyStep step;
            step.decision = nu_override(dispatch_phi(match, state), state);
            renewable_dispatched[static_cast<std::size_t>(state.current_period() - 1)] =
                step.decision.renewable_total();
            return step;
        });

        // supply conservation
        for (int t = 0; t < p.horizon; ++t)
            CHECK(renewable_dispatched[static_cast<std::size_t>(t)] <=
                  r.periods[static_cast<std::size_t>(t)].renewable + 1e-9);

        // deadline guarantee and demand conservation, via the final state's books
        double welfare_cap = 0.0;
        std::map<CustomerId, double> served;
        for (const auto& period : trace.periods)
            for (const auto& [id, split] : period.decision.entries) {
                served[id] += split.total();
            }
        for (const auto& period : r.periods)
            for (const auto& spec : period.arrivals) {
                welfare_cap += p.grid_price * spec.load;
                REQUIRE(served.count(spec.id));
                CHECK(served[spec.id] == doctest::Approx(spec.load).epsilon(1e-9));
            }
        CHECK(epoch_welfare(trace) <= welfare_cap + 1e-9);
    }
}

TEST_CASE("customer state bookkeeping stays consistent through an epoch") {
    const MarketParams p = params(3);
    ScenarioRealization r;
    r.periods = {{{customer(1, 1, 3.0, 3, 0.5)}, 1.0},
                 {{customer(2, 2, 1.0, 2, 1.0)}, 0.5},
                 {{}, 2.0}};
    MarketState state(p, r.periods[0]);
    CHECK(state.history().size() == 1);
    CHECK(state.current_period() == 1);

    MatchDecision d1;
    d1.entries[1] = {1.0, 0.5};
    auto [s2, w1] = step(state, d1, r.periods[1]);
    CHECK(s2.history().size() == 2);
    CHECK(s2.customer(1).unserved == doctest::Approx(1.5));
    CHECK(s2.customer(1).served_total() == doctest::Approx(1.5));
    CHECK(s2.active_ids() == std::vector<CustomerId>{1, 2});

    MatchDecision d2;
    d2.entries[2] = {0.5, 0.5};
    d2.entries[1] = {0.0, 1.5};
    auto [s3, w2] = step(s2, d2, r.periods[2]);
    CHECK(s3.active_ids().empty());
    CHECK(s3.customer(1).unserved == doctest::Approx(0.0));
    // service log never strays outside the window
    for (const auto& [id, cust] : s3.customers())
        for (const auto& entry : cust.service_log) {
            CHECK(entry.period >= cust.spec.arrival);
            CHECK(entry.period <= cust.spec.deadline);
        }
}
