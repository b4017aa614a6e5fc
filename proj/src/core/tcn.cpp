#include "tcn.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace fxm {

namespace {
constexpr double kNormEps = 1e-5;
constexpr double kInitRange = 0.05;
}

int TcnConfig::dilation(int block) const {
    if (additive_dilation) return 1 + 2 * (block - 1);
    int d = 1;
    for (int l = 1; l < block; ++l) d *= dilation_base;
    return d;
}

void TcnConfig::validate() const {
    if (num_blocks < 1 || filters_per_block < 1 || kernel_size < 1 || dilation_base < 1)
        throw ContractViolation("tcn counts must be >= 1");
    if (dropout_rate < 0.0 || dropout_rate >= 1.0)
        throw ContractViolation("dropout_rate must lie in [0, 1)");
    if (max_arrivals < 1 || horizon < 1)
        throw ContractViolation("tcn needs max_arrivals >= 1 and horizon >= 1");
    if (output_dim < 0) throw ContractViolation("output_dim must be >= 0");
    if (!(input_scale > 0.0)) throw ContractViolation("input_scale must be > 0");
}

namespace tcn_ops {

Seq conv1d_forward(const ConvSpec& spec, std::span<const double> params, const Seq& in) {
    Seq out(spec.out_ch, in.len);
    const double* w = params.data() + spec.weight_off;
    const double* b = params.data() + spec.bias_off;
    for (int o = 0; o < spec.out_ch; ++o) {
        for (int t = 0; t < in.len; ++t) {
            double acc = spec.has_bias ? b[o] : 0.0;
            for (int c = 0; c < spec.in_ch; ++c) {
                const double* woc = w + (static_cast<std::size_t>(o) * spec.in_ch + c) * spec.kernel;
                for (int k = 0; k < spec.kernel; ++k) {
                    const int src = t - (spec.kernel - 1 - k) * spec.dilation;
                    if (src >= 0) acc += woc[k] * in.at(c, src);
                }
            }
            out.at(o, t) = acc;
        }
    }
    return out;
}

void conv1d_backward(const ConvSpec& spec, std::span<const double> params, const Seq& in,
                     const Seq& dout, Seq& din, std::span<double> grad) {
    const double* w = params.data() + spec.weight_off;
    double* dw = grad.data() + spec.weight_off;
    double* db = grad.data() + spec.bias_off;
    for (int o = 0; o < spec.out_ch; ++o) {
        for (int t = 0; t < in.len; ++t) {
            const double g = dout.at(o, t);
            if (g == 0.0) continue;
            if (spec.has_bias) db[o] += g;
            for (int c = 0; c < spec.in_ch; ++c) {
                const std::size_t base = (static_cast<std::size_t>(o) * spec.in_ch + c) * spec.kernel;
                for (int k = 0; k < spec.kernel; ++k) {
                    const int src = t - (spec.kernel - 1 - k) * spec.dilation;
                    if (src < 0) continue;
                    dw[base + k] += g * in.at(c, src);
                    din.at(c, src) += g * w[base + k];
                }
            }
        }
    }
}

Seq channel_norm_forward(const NormSpec& spec, std::span<const double> params, const Seq& in,
                         NormStats& stats) {
    Seq out(in.channels, in.len);
    stats.mean.assign(static_cast<std::size_t>(in.len), 0.0);
    stats.sigma.assign(static_cast<std::size_t>(in.len), 0.0);
    const double* gamma = params.data() + spec.gamma_off;
    const double* beta = params.data() + spec.beta_off;
    const double n = static_cast<double>(in.channels);
    for (int t = 0; t < in.len; ++t) {
        double sum = 0.0;
        for (int c = 0; c < in.channels; ++c) sum += in.at(c, t);
        const double mean = sum / n;
        double var = 0.0;
        for (int c = 0; c < in.channels; ++c) {
            const double d = in.at(c, t) - mean;
            var += d * d;
        }
        var /= n;
        const double sigma = std::sqrt(var + kNormEps);
        stats.mean[static_cast<std::size_t>(t)] = mean;
        stats.sigma[static_cast<std::size_t>(t)] = sigma;
        for (int c = 0; c < in.channels; ++c)
            out.at(c, t) = gamma[c] * (in.at(c, t) - mean) / sigma + beta[c];
    }
    return out;
}

void channel_norm_backward(const NormSpec& spec, std::span<const double> params, const Seq& in,
                           const NormStats& stats, const Seq& dout, Seq& din,
                           std::span<double> grad) {
    const double* gamma = params.data() + spec.gamma_off;
    double* dgamma = grad.data() + spec.gamma_off;
    double* dbeta = grad.data() + spec.beta_off;
    const double n = static_cast<double>(in.channels);
    for (int t = 0; t < in.len; ++t) {
        const double mean = stats.mean[static_cast<std::size_t>(t)];
        const double sigma = stats.sigma[static_cast<std::size_t>(t)];
        double sum_h = 0.0;
        double sum_hx = 0.0;  // sum of h_c * (x_c - mean)
        for (int c = 0; c < in.channels; ++c) {
            const double g = dout.at(c, t);
            const double xhat = (in.at(c, t) - mean) / sigma;
            dgamma[c] += g * xhat;
            dbeta[c] += g;
            const double h = g * gamma[c];
            sum_h += h;
            sum_hx += h * (in.at(c, t) - mean);
        }
        const double dvar_term = -0.5 * sum_hx / (sigma * sigma * sigma);
        for (int c = 0; c < in.channels; ++c) {
            const double h = dout.at(c, t) * gamma[c];
            const double centered = in.at(c, t) - mean;
            din.at(c, t) +=
                h / sigma + dvar_term * 2.0 * centered / n - sum_h / (sigma * n);
        }
    }
}

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

}  // namespace tcn_ops

using tcn_ops::ConvSpec;
using tcn_ops::NormSpec;

TcnNetwork::TcnNetwork(TcnConfig config) : config_(std::move(config)) {
    config_.validate();
    std::size_t off = 0;
    auto add_conv = [&off](int in_ch, int out_ch, int kernel, int dilation, bool bias = true) {
        ConvSpec spec;
        spec.in_ch = in_ch;
        spec.out_ch = out_ch;
        spec.kernel = kernel;
        spec.dilation = dilation;
        spec.has_bias = bias;
        spec.weight_off = off;
        off += spec.weight_count();
        if (bias) {
            spec.bias_off = off;
            off += static_cast<std::size_t>(out_ch);
        }
        return spec;
    };
    auto add_norm = [&off](int ch) {
        NormSpec spec;
        spec.ch = ch;
        spec.gamma_off = off;
        off += static_cast<std::size_t>(ch);
        spec.beta_off = off;
        off += static_cast<std::size_t>(ch);
        return spec;
    };

    int in_ch = config_.input_channels();
    const int filters = config_.filters_per_block;
    for (int l = 1; l <= config_.num_blocks; ++l) {
        BlockLayout block;
        const int dil = config_.dilation(l);
        block.conv1 = add_conv(in_ch, filters, config_.kernel_size, dil);
        block.norm1 = add_norm(filters);
        block.conv2 = add_conv(filters, filters, config_.kernel_size, dil);
        block.norm2 = add_norm(filters);
        block.has_proj = (in_ch != filters);
        if (block.has_proj) block.proj = add_conv(in_ch, filters, 1, 1, /*bias=*/false);
        blocks_.push_back(block);
        in_ch = filters;
    }
    head_ = add_conv(in_ch, config_.head_dim(), 1, 1);
    param_count_ = off;
}

void TcnNetwork::init_params(std::span<double> params, Rng& rng) const {
    if (params.size() != param_count_) throw ContractViolation("parameter size mismatch");
    for (double& p : params) p = rng.uniform(-kInitRange, kInitRange);
    // start the normalizations as identity-with-unit-scale
    for (const auto& block : blocks_) {
        for (const auto& norm : {block.norm1, block.norm2}) {
            for (int c = 0; c < norm.ch; ++c) {
                params[norm.gamma_off + static_cast<std::size_t>(c)] = 1.0;
                params[norm.beta_off + static_cast<std::size_t>(c)] = 0.0;
            }
        }
    }
}

namespace {

Seq relu(const Seq& in) {
    Seq out = in;
    for (double& x : out.v) x = std::max(0.0, x);
    return out;
}

void apply_dropout(Seq& x, const std::vector<std::uint8_t>& kept, double rate) {
    const double scale = 1.0 / (1.0 - rate);
    for (int c = 0; c < x.channels; ++c) {
        const double f = kept[static_cast<std::size_t>(c)] ? scale : 0.0;
        for (int t = 0; t < x.len; ++t) x.at(c, t) *= f;
    }
}

std::vector<std::uint8_t> draw_channel_mask(int channels, double rate, Rng* rng) {
    std::vector<std::uint8_t> kept(static_cast<std::size_t>(channels), 1);
    if (rate <= 0.0 || rng == nullptr) return kept;
    for (auto& k : kept) k = rng->bernoulli(rate) ? 0 : 1;
    return kept;
}

}  // namespace

Seq TcnNetwork::forward(std::span<const double> params, const Seq& input, RunMode mode,
                        Rng* dropout_rng, TcnCache* cache) const {
    if (params.size() != param_count_) throw ContractViolation("parameter size mismatch");
    if (input.channels != config_.input_channels())
        throw ContractViolation("input has " + std::to_string(input.channels) +
                                " channels, expected " + std::to_string(config_.input_channels()));
    if (input.len < 1) throw ContractViolation("input sequence is empty");
    const bool train = mode == RunMode::Train;
    if (train && config_.dropout_rate > 0.0 && dropout_rng == nullptr)
        throw ContractViolation("train-mode forward needs a dropout rng");
    if (cache) {
        cache->blocks.clear();
        cache->train_mode = train;
    }

    Seq x = input;
    for (const auto& block : blocks_) {
        TcnCache::Block bc;
        bc.input = x;

        Seq c1 = tcn_ops::conv1d_forward(block.conv1, params, x);
        Seq n1 = tcn_ops::channel_norm_forward(block.norm1, params, c1, bc.norm1);
        bc.conv1_out = std::move(c1);
        Seq a1 = relu(n1);
        bc.norm1_out = std::move(n1);
        bc.drop1 = draw_channel_mask(a1.channels, train ? config_.dropout_rate : 0.0, dropout_rng);
        if (train && config_.dropout_rate > 0.0) apply_dropout(a1, bc.drop1, config_.dropout_rate);

        Seq c2 = tcn_ops::conv1d_forward(block.conv2, params, a1);
        bc.conv2_in = std::move(a1);
        Seq n2 = tcn_ops::channel_norm_forward(block.norm2, params, c2, bc.norm2);
        bc.conv2_out = std::move(c2);
        Seq a2 = relu(n2);
        bc.norm2_out = std::move(n2);
        bc.drop2 = draw_channel_mask(a2.channels, train ? config_.dropout_rate : 0.0, dropout_rng);
        if (train && config_.dropout_rate > 0.0) apply_dropout(a2, bc.drop2, config_.dropout_rate);

        // residual: identity when the channel counts already agree
        Seq res = block.has_proj ? tcn_ops::conv1d_forward(block.proj, params, bc.input) : bc.input;
        for (std::size_t i = 0; i < a2.v.size(); ++i) a2.v[i] += res.v[i];
        x = std::move(a2);
        if (cache) cache->blocks.push_back(std::move(bc));
    }

    Seq logits = tcn_ops::conv1d_forward(head_, params, x);
    if (cache) {
        cache->head_in = std::move(x);
        cache->logits = logits;
    }
    return logits;
}

void TcnNetwork::backward(std::span<const double> params, const TcnCache& cache,
                          const Seq& dlogits, std::span<double> grad) const {
    if (params.size() != param_count_ || grad.size() != param_count_)
        throw ContractViolation("parameter size mismatch");
    if (cache.blocks.size() != blocks_.size())
        throw ContractViolation("stale or foreign forward cache");

    Seq dx(cache.head_in.channels, cache.head_in.len);
    tcn_ops::conv1d_backward(head_, params, cache.head_in, dlogits, dx, grad);

    for (std::size_t b = blocks_.size(); b-- > 0;) {
        const auto& block = blocks_[b];
        const auto& bc = cache.blocks[b];
        const double rate = cache.train_mode ? config_.dropout_rate : 0.0;

        Seq dinput(bc.input.channels, bc.input.len);
        // residual path
        if (block.has_proj) {
            tcn_ops::conv1d_backward(block.proj, params, bc.input, dx, dinput, grad);
        } else {
            for (std::size_t i = 0; i < dx.v.size(); ++i) dinput.v[i] += dx.v[i];
        }

        Seq da2 = dx;
        if (rate > 0.0) apply_dropout(da2, bc.drop2, rate);
        for (int c = 0; c < da2.channels; ++c)
            for (int t = 0; t < da2.len; ++t)
                if (bc.norm2_out.at(c, t) <= 0.0) da2.at(c, t) = 0.0;
        Seq dc2(bc.conv2_out.channels, bc.conv2_out.len);
        tcn_ops::channel_norm_backward(block.norm2, params, bc.conv2_out, bc.norm2, da2, dc2, grad);
        Seq dd1(bc.conv2_in.channels, bc.conv2_in.len);
        tcn_ops::conv1d_backward(block.conv2, params, bc.conv2_in, dc2, dd1, grad);

        if (rate > 0.0) apply_dropout(dd1, bc.drop1, rate);
        for (int c = 0; c < dd1.channels; ++c)
            for (int t = 0; t < dd1.len; ++t)
                if (bc.norm1_out.at(c, t) <= 0.0) dd1.at(c, t) = 0.0;
        Seq dc1(bc.conv1_out.channels, bc.conv1_out.len);
        tcn_ops::channel_norm_backward(block.norm1, params, bc.conv1_out, bc.norm1, dd1, dc1, grad);
        tcn_ops::conv1d_backward(block.conv1, params, bc.input, dc1, dinput, grad);

        dx = std::move(dinput);
    }
}

Seq encode_input(const MarketState& state, const EncoderScaling& scaling) {
    const int nbar = state.params().max_arrivals;
    const int len = static_cast<int>(state.history().size());
    Seq out(3 * nbar + 1, len);
    for (int l = 0; l < len; ++l) {
        const auto& record = state.history()[static_cast<std::size_t>(l)];
        if (static_cast<int>(record.arrivals.size()) > nbar)
            throw ContractViolation("arrival batch exceeds the encoder capacity nbar");
        for (int s = 0; s < static_cast<int>(record.arrivals.size()); ++s) {
            const auto& spec = record.arrivals[static_cast<std::size_t>(s)];
            out.at(s, l) = spec.load * scaling.load_scale;
            out.at(nbar + s, l) = spec.deadline * scaling.deadline_scale;
            out.at(2 * nbar + s, l) = state.customer(spec.id).unserved * scaling.load_scale;
        }
        out.at(3 * nbar, l) = record.renewable * scaling.load_scale;
    }
    return out;
}

int customer_slot(const MarketState& state, CustomerId id) {
    const auto& spec = state.customer(id).spec;
    const auto& record = state.history().at(static_cast<std::size_t>(spec.arrival - 1));
    for (int s = 0; s < static_cast<int>(record.arrivals.size()); ++s) {
        if (record.arrivals[static_cast<std::size_t>(s)].id == id)
            return (spec.arrival - 1) * state.params().max_arrivals + s;
    }
    throw ContractViolation("customer missing from its arrival batch");
}

MatchProbabilities decode_probabilities(const Seq& logits, const MarketState& state) {
    MatchProbabilities probs;
    const int last = logits.len - 1;
    for (CustomerId id : state.active_ids()) {
        const int slot = customer_slot(state, id);
        if (slot >= logits.channels) throw ContractViolation("customer slot outside the output head");
        probs.ids.push_back(id);
        probs.probs.push_back(tcn_ops::sigmoid(logits.at(slot, last)));
    }
    return probs;
}

void adam_step(std::span<double> params, std::span<const double> grad, AdamState& state,
               const AdamConfig& config, double direction) {
    if (params.size() != grad.size() || state.m.size() != params.size() ||
        state.v.size() != params.size())
        throw ContractViolation("adam_step size mismatch");
    for (double g : grad)
        if (!std::isfinite(g))
            throw std::runtime_error("adam_step: non-finite gradient component");
    state.step += 1;
    const double b1t = 1.0 - std::pow(config.beta1, static_cast<double>(state.step));
    const double b2t = 1.0 - std::pow(config.beta2, static_cast<double>(state.step));
    for (std::size_t i = 0; i < params.size(); ++i) {
        state.m[i] = config.beta1 * state.m[i] + (1.0 - config.beta1) * grad[i];
        state.v[i] = config.beta2 * state.v[i] + (1.0 - config.beta2) * grad[i] * grad[i];
        const double mhat = state.m[i] / b1t;
        const double vhat = state.v[i] / b2t;
        params[i] += direction * config.alpha * mhat / (std::sqrt(vhat) + config.epsilon);
    }
}

}  // namespace fxm
