#include "trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include "policies.hpp"

namespace fxm {

namespace {

constexpr std::uint64_t kPolicyStream = 0x504f4c4943595354ULL;
constexpr std::uint64_t kCriticStream = 0x4352495449435354ULL;

struct TcnModelCache : ModelCache {
    TcnCache net;
    std::vector<int> slots;      // output slot per active customer
    std::vector<double> probs;   // decoded probabilities, aligned with slots
    int seq_len = 0;
};

EncoderScaling scaling_for(const TcnConfig& config) {
    return {config.input_scale, 1.0 / static_cast<double>(config.horizon)};
}

}  // namespace

TcnPolicyModel::TcnPolicyModel(TcnConfig config, std::uint64_t init_seed)
    : net_(std::move(config)), params_(net_.param_count(), 0.0) {
    Rng rng(derive_seed(init_seed, 0x696e6974, 1));
    net_.init_params(params_, rng);
}

TcnPolicyModel::TcnPolicyModel(TcnConfig config, std::vector<double> params)
    : net_(std::move(config)), params_(std::move(params)) {
    if (params_.size() != net_.param_count())
        throw ContractViolation("checkpoint parameter count mismatch");
}

MatchProbabilities TcnPolicyModel::probabilities(const MarketState& state, RunMode mode, Rng& rng,
                                                 std::unique_ptr<ModelCache>* cache) {
    const Seq input = encode_input(state, scaling_for(net_.config()));
    auto local = cache ? std::make_unique<TcnModelCache>() : nullptr;
    const Seq logits = net_.forward(params_, input, mode, &rng, local ? &local->net : nullptr);
    MatchProbabilities probs = decode_probabilities(logits, state);
    if (local) {
        local->seq_len = input.len;
        local->probs = probs.probs;
        local->slots.reserve(probs.ids.size());
        for (CustomerId id : probs.ids) local->slots.push_back(customer_slot(state, id));
        *cache = std::move(local);
    }
    return probs;
}

void TcnPolicyModel::accumulate_logprob_gradient(const ModelCache& cache,
                                                 const DiscreteMatch& match, double scale,
                                                 std::span<double> grad) const {
    const auto& tc = dynamic_cast<const TcnModelCache&>(cache);
    if (tc.slots.size() != match.size())
        throw ContractViolation("match does not align with the cached forward");
    if (match.empty() || scale == 0.0) return;
    Seq dlogits(net_.config().head_dim(), tc.seq_len);
    for (std::size_t i = 0; i < match.size(); ++i) {
        const double p = tc.probs[i];
        const double m = match.flags[i] ? 1.0 : 0.0;
        dlogits.at(tc.slots[i], tc.seq_len - 1) = scale * (m - p);
    }
    net_.backward(params_, tc.net, dlogits, grad);
}

TcnValueModel::TcnValueModel(TcnConfig config, std::uint64_t init_seed)
    : net_([&config] {
          config.output_dim = 1;
          return std::move(config);
      }()),
      params_(net_.param_count(), 0.0) {
    Rng rng(derive_seed(init_seed, 0x696e6974, 2));
    net_.init_params(params_, rng);
}

TcnValueModel::TcnValueModel(TcnConfig config, std::vector<double> params)
    : net_([&config] {
          config.output_dim = 1;
          return std::move(config);
      }()),
      params_(std::move(params)) {
    if (params_.size() != net_.param_count())
        throw ContractViolation("checkpoint parameter count mismatch");
}

double TcnValueModel::value(const MarketState& state, RunMode mode, Rng& rng,
                            std::unique_ptr<ModelCache>* cache) {
    const Seq input = encode_input(state, scaling_for(net_.config()));
    auto local = cache ? std::make_unique<TcnModelCache>() : nullptr;
    const Seq logits = net_.forward(params_, input, mode, &rng, local ? &local->net : nullptr);
    const double v = logits.at(0, input.len - 1);
    if (local) {
        local->seq_len = input.len;
        *cache = std::move(local);
    }
    return v;
}

void TcnValueModel::accumulate_value_gradient(const ModelCache& cache, double scale,
                                              std::span<double> grad) const {
    const auto& tc = dynamic_cast<const TcnModelCache&>(cache);
    Seq dlogits(1, tc.seq_len);
    dlogits.at(0, tc.seq_len - 1) = scale;
    net_.backward(params_, tc.net, dlogits, grad);
}

RolloutTrace collect_rollout(PolicyModel& model, const MarketParams& params,
                             const ScenarioRealization& realization, std::uint64_t epoch_index,
                             Rng& rng, RunMode mode) {
    RolloutTrace out;
    out.params_version = model.version();
    out.epoch_index = epoch_index;
    out.trace = run_epoch(params, realization.periods, [&](const MarketState& state) {
        std::unique_ptr<ModelCache> cache;
        MatchProbabilities probs = model.probabilities(state, mode, rng, &cache);
        auto [match, log_prob] = sample_discrete(probs, rng);
        out.caches.push_back(std::move(cache));
        PolicyStep step;
        step.decision = nu_override(dispatch_phi(match, state), state);
        step.match = std::move(match);
        step.log_prob = log_prob;
        return step;
    });
    return out;
}

double return_to_go(const EpochTrace& trace, int t) {
    if (t < 1 || t > static_cast<int>(trace.periods.size()))
        throw ContractViolation("return_to_go period out of range");
    double sum = 0.0;
    for (std::size_t l = static_cast<std::size_t>(t - 1); l < trace.periods.size(); ++l)
        sum += trace.periods[l].welfare;
    return sum;
}

namespace {

void check_fresh(const std::vector<RolloutTrace>& batch, const PolicyModel& model) {
    if (batch.empty()) throw ContractViolation("empty trace batch");
    for (const auto& rollout : batch)
        if (rollout.params_version != model.version())
            throw ContractViolation("stale traces: collected under different parameters");
}

}  // namespace

namespace {

// Accumulates the batch-mean policy gradient with the per-(trace, period)
// weights in `targets`, optionally recentred by the per-period batch mean.
std::vector<double> weighted_logprob_gradient(const std::vector<RolloutTrace>& batch,
                                              PolicyModel& model,
                                              const std::vector<std::vector<double>>& targets,
                                              bool subtract_baseline) {
    const std::size_t horizon = targets.front().size();
    std::vector<double> baseline(horizon, 0.0);
    if (subtract_baseline) {
        for (const auto& row : targets)
            for (std::size_t t = 0; t < horizon; ++t) baseline[t] += row[t];
        for (double& b : baseline) b /= static_cast<double>(batch.size());
    }
    std::vector<double> grad(model.param_count(), 0.0);
    const double inv = 1.0 / static_cast<double>(batch.size());
    for (std::size_t r = 0; r < batch.size(); ++r) {
        const auto& rollout = batch[r];
        for (std::size_t t = 0; t < rollout.trace.periods.size(); ++t) {
            const auto& period = rollout.trace.periods[t];
            if (period.match.empty()) continue;
            const double weight = targets[r][t] - baseline[t];
            model.accumulate_logprob_gradient(*rollout.caches[t], period.match, weight * inv,
                                              grad);
        }
    }
    return grad;
}

}  // namespace

std::vector<double> reinforce_gradient(const std::vector<RolloutTrace>& batch, PolicyModel& model,
                                       bool subtract_baseline) {
    check_fresh(batch, model);
    std::vector<std::vector<double>> targets;
    targets.reserve(batch.size());
    for (const auto& rollout : batch) {
        const int T = static_cast<int>(rollout.trace.periods.size());
        std::vector<double> row(static_cast<std::size_t>(T), 0.0);
        for (int t = 1; t <= T; ++t)
            row[static_cast<std::size_t>(t - 1)] = return_to_go(rollout.trace, t);
        targets.push_back(std::move(row));
    }
    return weighted_logprob_gradient(batch, model, targets, subtract_baseline);
}

std::vector<double> actor_critic_gradient(const std::vector<RolloutTrace>& batch,
                                          PolicyModel& model, ValueModel& critic, int lookahead_k,
                                          Rng& rng, bool subtract_baseline) {
    if (lookahead_k < 1) throw ContractViolation("lookahead k must be >= 1");
    check_fresh(batch, model);
    std::vector<std::vector<double>> targets;
    targets.reserve(batch.size());
    for (const auto& rollout : batch) {
        const int T = static_cast<int>(rollout.trace.periods.size());
        std::vector<double> row(static_cast<std::size_t>(T), 0.0);
        for (int t = 1; t <= T; ++t) {
            double target = 0.0;
            const int tail = std::min(t + lookahead_k - 1, T);
            for (int l = t; l <= tail; ++l)
                target += rollout.trace.periods[static_cast<std::size_t>(l - 1)].welfare;
            if (t + lookahead_k <= T) {
                const auto& boot =
                    rollout.trace.periods[static_cast<std::size_t>(t + lookahead_k - 1)];
                target += critic.value(boot.state, RunMode::Eval, rng, nullptr);
            }
            row[static_cast<std::size_t>(t - 1)] = target;
        }
        targets.push_back(std::move(row));
    }
    return weighted_logprob_gradient(batch, model, targets, subtract_baseline);
}

double critic_update(const std::vector<RolloutTrace>& batch, ValueModel& critic,
                     AdamState& adam_state, const AdamConfig& adam_config, Rng& rng) {
    if (batch.empty()) throw ContractViolation("empty trace batch");
    std::vector<double> grad(critic.param_count(), 0.0);
    const double inv = 1.0 / static_cast<double>(batch.size());
    double loss = 0.0;
    for (const auto& rollout : batch) {
        const int T = static_cast<int>(rollout.trace.periods.size());
        for (int t = 1; t <= T; ++t) {
            std::unique_ptr<ModelCache> cache;
            const auto& state = rollout.trace.periods[static_cast<std::size_t>(t - 1)].state;
            const double v = critic.value(state, RunMode::Train, rng, &cache);
            const double residual = v - return_to_go(rollout.trace, t);
            loss += 0.5 * residual * residual * inv;
            critic.accumulate_value_gradient(*cache, residual * inv, grad);
        }
    }
    adam_step(critic.params(), grad, adam_state, adam_config, -1.0);
    return loss;
}

Algo algo_from_name(const std::string& name) {
    if (name == "la1") return Algo::LA1;
    if (name == "la2") return Algo::LA2;
    throw ConfigError("unknown learning algorithm: " + name + " (expected la1 or la2)");
}

const char* algo_name(Algo algo) { return algo == Algo::LA1 ? "la1" : "la2"; }

TrainResult train(const Scenario& scenario, TcnPolicyModel& policy, TcnValueModel* critic,
                  AdamState& policy_adam_state, AdamState* critic_adam_state,
                  const TrainOptions& options) {
    if (options.batch < 1) throw ContractViolation("batch size must be >= 1");
    if (options.algo == Algo::LA2 && (critic == nullptr || critic_adam_state == nullptr))
        throw ContractViolation("LA2 training needs a critic and its optimizer state");

    const MarketParams params = scenario.market_params();
    TrainResult result;
    std::vector<RolloutTrace> buffer;
    double welfare_sum = 0.0;

    auto write_checkpoint = [&](std::uint64_t epochs_done) {
        if (options.checkpoint_path.empty()) return;
        Checkpoint ck;
        ck.policy_config = policy.config();
        ck.policy_params.assign(policy.params().begin(), policy.params().end());
        ck.has_session = true;
        ck.algo = options.algo;
        ck.lookahead_k = options.lookahead_k;
        ck.epochs_done = epochs_done;
        ck.seed = options.seed;
        ck.batch = options.batch;
        ck.policy_adam = options.policy_adam;
        ck.policy_adam_state = policy_adam_state;
        if (critic != nullptr) {
            ck.has_critic = true;
            ck.critic_config = critic->config();
            ck.critic_params.assign(critic->params().begin(), critic->params().end());
            ck.critic_adam = options.critic_adam;
            ck.critic_adam_state = *critic_adam_state;
        }
        save_checkpoint(options.checkpoint_path, ck);
    };

    for (std::uint64_t e = 0; e < options.epochs; ++e) {
        const std::uint64_t epoch_index = options.first_epoch + e;
        const ScenarioRealization realization = scenario.draw(epoch_index);
        Rng rollout_rng(derive_seed(options.seed, epoch_index, kPolicyStream));
        RolloutTrace rollout =
            collect_rollout(policy, params, realization, epoch_index, rollout_rng, RunMode::Train);
        const double welfare = epoch_welfare(rollout.trace);
        welfare_sum += welfare;
        result.curve.push_back({epoch_index, welfare, welfare_sum / static_cast<double>(e + 1)});
        buffer.push_back(std::move(rollout));

        if (buffer.size() == options.batch) {
            std::vector<double> grad =
                options.algo == Algo::LA1
                    ? reinforce_gradient(buffer, policy, options.subtract_baseline)
                    : actor_critic_gradient(buffer, policy, *critic, options.lookahead_k,
                                            rollout_rng, options.subtract_baseline);
            adam_step(policy.params(), grad, policy_adam_state, options.policy_adam, +1.0);
            policy.mark_updated();
            if (options.algo == Algo::LA2) {
                Rng critic_rng(derive_seed(options.seed, epoch_index, kCriticStream));
                for (int s = 0; s < options.critic_steps; ++s)
                    critic_update(buffer, *critic, *critic_adam_state, options.critic_adam,
                                  critic_rng);
            }
            buffer.clear();
        }
        if (options.checkpoint_interval > 0 && (e + 1) % options.checkpoint_interval == 0 &&
            e + 1 < options.epochs)
            write_checkpoint(epoch_index);
    }
    write_checkpoint(options.first_epoch + options.epochs - 1);
    return result;
}

namespace {

void put_bytes(std::ofstream& out, const void* data, std::size_t size) {
    out.write(static_cast<const char*>(data), static_cast<std::streamsize>(size));
}

void put_u32(std::ofstream& out, std::uint32_t v) { put_bytes(out, &v, sizeof v); }
void put_u64(std::ofstream& out, std::uint64_t v) { put_bytes(out, &v, sizeof v); }
void put_i32(std::ofstream& out, std::int32_t v) { put_bytes(out, &v, sizeof v); }
void put_f64(std::ofstream& out, double v) { put_bytes(out, &v, sizeof v); }
void put_doubles(std::ofstream& out, const std::vector<double>& v) {
    put_u64(out, v.size());
    put_bytes(out, v.data(), v.size() * sizeof(double));
}

void get_bytes(std::ifstream& in, void* data, std::size_t size) {
    in.read(static_cast<char*>(data), static_cast<std::streamsize>(size));
    if (!in) throw std::runtime_error("truncated checkpoint file");
}

std::uint32_t get_u32(std::ifstream& in) { std::uint32_t v; get_bytes(in, &v, sizeof v); return v; }
std::uint64_t get_u64(std::ifstream& in) { std::uint64_t v; get_bytes(in, &v, sizeof v); return v; }
std::int32_t get_i32(std::ifstream& in) { std::int32_t v; get_bytes(in, &v, sizeof v); return v; }
double get_f64(std::ifstream& in) { double v; get_bytes(in, &v, sizeof v); return v; }
std::vector<double> get_doubles(std::ifstream& in) {
    const std::uint64_t n = get_u64(in);
    if (n > (1ULL << 32)) throw std::runtime_error("implausible checkpoint vector size");
    std::vector<double> v(n);
    get_bytes(in, v.data(), n * sizeof(double));
    return v;
}

void put_tcn_config(std::ofstream& out, const TcnConfig& c) {
    put_i32(out, c.num_blocks);
    put_i32(out, c.filters_per_block);
    put_i32(out, c.kernel_size);
    put_f64(out, c.dropout_rate);
    put_i32(out, c.dilation_base);
    put_u32(out, c.additive_dilation ? 1 : 0);
    put_i32(out, c.max_arrivals);
    put_i32(out, c.horizon);
    put_i32(out, c.output_dim);
    put_f64(out, c.input_scale);
}

TcnConfig get_tcn_config(std::ifstream& in) {
    TcnConfig c;
    c.num_blocks = get_i32(in);
    c.filters_per_block = get_i32(in);
    c.kernel_size = get_i32(in);
    c.dropout_rate = get_f64(in);
    c.dilation_base = get_i32(in);
    c.additive_dilation = get_u32(in) != 0;
    c.max_arrivals = get_i32(in);
    c.horizon = get_i32(in);
    c.output_dim = get_i32(in);
    c.input_scale = get_f64(in);
    return c;
}

void put_adam_config(std::ofstream& out, const AdamConfig& c) {
    put_f64(out, c.alpha);
    put_f64(out, c.beta1);
    put_f64(out, c.beta2);
    put_f64(out, c.epsilon);
}

AdamConfig get_adam_config(std::ifstream& in) {
    AdamConfig c;
    c.alpha = get_f64(in);
    c.beta1 = get_f64(in);
    c.beta2 = get_f64(in);
    c.epsilon = get_f64(in);
    return c;
}

void put_adam_state(std::ofstream& out, const AdamState& s) {
    put_u64(out, s.step);
    put_doubles(out, s.m);
    put_doubles(out, s.v);
}

AdamState get_adam_state(std::ifstream& in) {
    AdamState s;
    s.step = get_u64(in);
    s.m = get_doubles(in);
    s.v = get_doubles(in);
    return s;
}

constexpr char kCheckpointMagic[8] = {'F', 'X', 'M', 'C', 'K', 'P', 'T', '\n'};
constexpr std::uint32_t kCheckpointVersion = 1;

}  // namespace

void save_checkpoint(const std::string& path, const Checkpoint& ck) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write checkpoint: " + path);
    put_bytes(out, kCheckpointMagic, sizeof kCheckpointMagic);
    put_u32(out, kCheckpointVersion);
    put_tcn_config(out, ck.policy_config);
    put_doubles(out, ck.policy_params);
    put_u32(out, ck.has_session ? 1 : 0);
    if (ck.has_session) {
        put_u32(out, ck.algo == Algo::LA1 ? 1 : 2);
        put_i32(out, ck.lookahead_k);
        put_u64(out, ck.epochs_done);
        put_u64(out, ck.seed);
        put_u64(out, ck.batch);
        put_adam_config(out, ck.policy_adam);
        put_adam_state(out, ck.policy_adam_state);
        put_u32(out, ck.has_critic ? 1 : 0);
        if (ck.has_critic) {
            put_tcn_config(out, ck.critic_config);
            put_doubles(out, ck.critic_params);
            put_adam_config(out, ck.critic_adam);
            put_adam_state(out, ck.critic_adam_state);
        }
    }
    out.flush();
    if (!out) throw std::runtime_error("failed writing checkpoint: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
    char magic[8];
    get_bytes(in, magic, sizeof magic);
    if (std::memcmp(magic, kCheckpointMagic, sizeof magic) != 0)
        throw std::runtime_error("not a checkpoint file: " + path);
    if (get_u32(in) != kCheckpointVersion)
        throw std::runtime_error("unsupported checkpoint version in " + path);
    Checkpoint ck;
    ck.policy_config = get_tcn_config(in);
    ck.policy_params = get_doubles(in);
    ck.has_session = get_u32(in) != 0;
    if (ck.has_session) {
        ck.algo = get_u32(in) == 1 ? Algo::LA1 : Algo::LA2;
        ck.lookahead_k = get_i32(in);
        ck.epochs_done = get_u64(in);
        ck.seed = get_u64(in);
        ck.batch = get_u64(in);
        ck.policy_adam = get_adam_config(in);
        ck.policy_adam_state = get_adam_state(in);
        ck.has_critic = get_u32(in) != 0;
        if (ck.has_critic) {
            ck.critic_config = get_tcn_config(in);
            ck.critic_params = get_doubles(in);
            ck.critic_adam = get_adam_config(in);
            ck.critic_adam_state = get_adam_state(in);
        }
    }
    return ck;
}

}  // namespace fxm
