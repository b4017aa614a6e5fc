#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "market.hpp"
#include "scenario.hpp"
#include "tcn.hpp"
#include "types.hpp"

namespace fxm {

struct ModelCache {
    virtual ~ModelCache() = default;
};

// A probability-emitting learnable component with reverse-mode gradients of
// its log-likelihood. The gradient estimators only see this surface, so test
// doubles (e.g. an enumerable logistic policy) can drive them too.
class PolicyModel {
public:
    virtual ~PolicyModel() = default;
    virtual std::size_t param_count() const = 0;
    virtual std::span<double> params() = 0;
    virtual std::span<const double> params() const = 0;
    virtual std::uint64_t version() const = 0;
    virtual void mark_updated() = 0;
    virtual MatchProbabilities probabilities(const MarketState& state, RunMode mode, Rng& rng,
                                             std::unique_ptr<ModelCache>* cache) = 0;
    // grad += scale * d log mu(match) / d theta
    virtual void accumulate_logprob_gradient(const ModelCache& cache, const DiscreteMatch& match,
                                             double scale, std::span<double> grad) const = 0;
};

// Critic surface: V(X; phi) with gradients.
class ValueModel {
public:
    virtual ~ValueModel() = default;
    virtual std::size_t param_count() const = 0;
    virtual std::span<double> params() = 0;
    virtual double value(const MarketState& state, RunMode mode, Rng& rng,
                         std::unique_ptr<ModelCache>* cache) = 0;
    // grad += scale * d V / d phi
    virtual void accumulate_value_gradient(const ModelCache& cache, double scale,
                                           std::span<double> grad) const = 0;
};

// TCN-backed match-probability policy.
class TcnPolicyModel : public PolicyModel {
public:
    TcnPolicyModel(TcnConfig config, std::uint64_t init_seed);
    TcnPolicyModel(TcnConfig config, std::vector<double> params);

    const TcnNetwork& network() const { return net_; }
    const TcnConfig& config() const { return net_.config(); }

    std::size_t param_count() const override { return params_.size(); }
    std::span<double> params() override { return params_; }
    std::span<const double> params() const override { return params_; }
    std::uint64_t version() const override { return version_; }
    void mark_updated() override { ++version_; }
    MatchProbabilities probabilities(const MarketState& state, RunMode mode, Rng& rng,
                                     std::unique_ptr<ModelCache>* cache) override;
    void accumulate_logprob_gradient(const ModelCache& cache, const DiscreteMatch& match,
                                     double scale, std::span<double> grad) const override;

private:
    TcnNetwork net_;
    std::vector<double> params_;
    std::uint64_t version_ = 1;
};

// TCN critic with a scalar linear head sharing the same state encoder.
class TcnValueModel : public ValueModel {
public:
    TcnValueModel(TcnConfig config, std::uint64_t init_seed);
    TcnValueModel(TcnConfig config, std::vector<double> params);

    const TcnConfig& config() const { return net_.config(); }

    std::size_t param_count() const override { return params_.size(); }
    std::span<double> params() override { return params_; }
    std::span<const double> params() const { return params_; }
    double value(const MarketState& state, RunMode mode, Rng& rng,
                 std::unique_ptr<ModelCache>* cache) override;
    void accumulate_value_gradient(const ModelCache& cache, double scale,
                                   std::span<double> grad) const override;

private:
    TcnNetwork net_;
    std::vector<double> params_;
};

// One epoch rolled out under a policy snapshot, with the per-period forward
// caches the gradient estimators replay.
struct RolloutTrace {
    EpochTrace trace;
    std::vector<std::unique_ptr<ModelCache>> caches;
    std::uint64_t params_version = 0;
    std::uint64_t epoch_index = 0;
};

RolloutTrace collect_rollout(PolicyModel& model, const MarketParams& params,
                             const ScenarioRealization& realization, std::uint64_t epoch_index,
                             Rng& rng, RunMode mode);

// Tail welfare sum_{l=t}^{T} v_l; t is 1-based.
double return_to_go(const EpochTrace& trace, int t);

// REINFORCE: batch mean of sum_t d log mu_t(m_t) * return_to_go(t).
// `subtract_baseline` replaces the weight with its deviation from the
// per-period batch mean; the estimator stays unbiased and its variance drops
// by orders of magnitude when all returns share one sign.
std::vector<double> reinforce_gradient(const std::vector<RolloutTrace>& batch, PolicyModel& model,
                                       bool subtract_baseline = false);

// AC-k: the k-step sampled welfare plus the critic bootstrap (zero past T).
std::vector<double> actor_critic_gradient(const std::vector<RolloutTrace>& batch,
                                          PolicyModel& model, ValueModel& critic, int lookahead_k,
                                          Rng& rng, bool subtract_baseline = false);

// One ADAM descent step on the batch least-squares error of the critic against
// the observed returns-to-go. Returns the pre-update loss.
double critic_update(const std::vector<RolloutTrace>& batch, ValueModel& critic,
                     AdamState& adam_state, const AdamConfig& adam_config, Rng& rng);

enum class Algo { LA1, LA2 };

Algo algo_from_name(const std::string& name);
const char* algo_name(Algo algo);

struct TrainOptions {
    Algo algo = Algo::LA1;
    std::uint64_t epochs = 800;
    std::uint64_t batch = 80;
    int lookahead_k = 1;  // LA2 only
    std::uint64_t seed = 1;
    std::uint64_t first_epoch = 1;
    AdamConfig policy_adam;
    AdamConfig critic_adam{.alpha = 0.05};
    int critic_steps = 25;                   // least-squares ADAM steps per batch
    bool subtract_baseline = true;           // per-period batch-mean baseline
    std::string checkpoint_path;             // written at interval boundaries and at the end
    std::uint64_t checkpoint_interval = 0;   // epochs; 0 = final only
};

struct CurvePoint {
    std::uint64_t epoch = 0;
    double welfare = 0.0;
    double running_avg = 0.0;
};

struct TrainResult {
    std::vector<CurvePoint> curve;
};

// Algorithm: roll out epochs, buffer M traces, ADAM-ascend theta with the
// selected estimator (and descend the critic for LA2), clear, repeat.
TrainResult train(const Scenario& scenario, TcnPolicyModel& policy, TcnValueModel* critic,
                  AdamState& policy_adam_state, AdamState* critic_adam_state,
                  const TrainOptions& options);

// Training/evaluation checkpoints; loads round-trip bit-exactly.
struct Checkpoint {
    TcnConfig policy_config;
    std::vector<double> policy_params;

    bool has_session = false;
    Algo algo = Algo::LA1;
    int lookahead_k = 1;
    std::uint64_t epochs_done = 0;
    std::uint64_t seed = 1;
    std::uint64_t batch = 80;
    AdamConfig policy_adam;
    AdamState policy_adam_state;
    bool has_critic = false;
    TcnConfig critic_config;
    std::vector<double> critic_params;
    AdamConfig critic_adam;
    AdamState critic_adam_state;
};

void save_checkpoint(const std::string& path, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace fxm
