#include "runner.hpp"

#include "oracle.hpp"
#include "policies.hpp"
#include "trace_io.hpp"

namespace fxm {

namespace {
constexpr std::uint64_t kEvalStream = 0x4556414c53545245ULL;
}

double mean_welfare(const std::vector<EpochScore>& scores) {
    if (scores.empty()) return 0.0;
    double sum = 0.0;
    for (const auto& s : scores) sum += s.welfare;
    return sum / static_cast<double>(scores.size());
}

std::vector<EpochScore> evaluate_baseline(const Scenario& scenario, const std::string& name,
                                          std::uint64_t first_epoch, std::uint64_t epochs,
                                          std::ostream* trace_out) {
    const PolicyFn policy = baseline_policy(name);
    const MarketParams params = scenario.market_params();
    std::vector<EpochScore> scores;
    scores.reserve(epochs);
    for (std::uint64_t e = 0; e < epochs; ++e) {
        const std::uint64_t epoch_index = first_epoch + e;
        const ScenarioRealization realization = scenario.draw(epoch_index);
        const EpochTrace trace = run_epoch(params, realization.periods, policy);
        scores.push_back({epoch_index, epoch_welfare(trace)});
        if (trace_out) write_trace_jsonl(*trace_out, trace, epoch_index);
    }
    return scores;
}

std::vector<EpochScore> evaluate_model(const Scenario& scenario, TcnPolicyModel& model,
                                       std::uint64_t first_epoch, std::uint64_t epochs,
                                       std::uint64_t seed, std::ostream* trace_out) {
    const MarketParams params = scenario.market_params();
    std::vector<EpochScore> scores;
    scores.reserve(epochs);
    for (std::uint64_t e = 0; e < epochs; ++e) {
        const std::uint64_t epoch_index = first_epoch + e;
        const ScenarioRealization realization = scenario.draw(epoch_index);
        Rng rng(derive_seed(seed, epoch_index, kEvalStream));
        const EpochTrace trace =
            run_epoch(params, realization.periods, [&](const MarketState& state) {
                MatchProbabilities probs = model.probabilities(state, RunMode::Eval, rng, nullptr);
                auto [match, log_prob] = sample_discrete(probs, rng);
                PolicyStep step;
                step.decision = nu_override(dispatch_phi(match, state), state);
                step.match = std::move(match);
                step.log_prob = log_prob;
                return step;
            });
        scores.push_back({epoch_index, epoch_welfare(trace)});
        if (trace_out) write_trace_jsonl(*trace_out, trace, epoch_index);
    }
    return scores;
}

std::vector<EpochScore> evaluate_oracle(const Scenario& scenario, std::uint64_t first_epoch,
                                        std::uint64_t epochs, std::ostream* trace_out) {
    const MarketParams params = scenario.market_params();
    std::vector<EpochScore> scores;
    scores.reserve(epochs);
    for (std::uint64_t e = 0; e < epochs; ++e) {
        const std::uint64_t epoch_index = first_epoch + e;
        const ScenarioRealization realization = scenario.draw(epoch_index);
        const HindsightSolution solution = solve_hindsight(realization, params);
        scores.push_back({epoch_index, solution.welfare});
        if (trace_out) {
            const EpochTrace trace = replay_schedule(realization, params, solution.schedule);
            write_trace_jsonl(*trace_out, trace, epoch_index);
        }
    }
    return scores;
}

}  // namespace fxm
