#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "market.hpp"
#include "rng.hpp"
#include "types.hpp"

namespace fxm {

// Channel-major sequence tensor: v[c * len + t].
struct Seq {
    int channels = 0;
    int len = 0;
    std::vector<double> v;

    Seq() = default;
    Seq(int ch, int length) : channels(ch), len(length), v(static_cast<std::size_t>(ch) * length, 0.0) {}
    double& at(int c, int t) { return v[static_cast<std::size_t>(c) * len + t]; }
    double at(int c, int t) const { return v[static_cast<std::size_t>(c) * len + t]; }
};

// Dilated causal convolutional network configuration. Inputs carry 3*nbar + 1
// channels (per-slot load, deadline, unserved, plus renewable generation); the
// output head emits nbar * T logits of which the active customers' slots are
// read. input_scale multiplies loads/generation before the first layer;
// deadlines are scaled by 1/horizon.
struct TcnConfig {
    int num_blocks = 3;
    int filters_per_block = 4;
    int kernel_size = 3;
    double dropout_rate = 0.1;
    int dilation_base = 4;
    bool additive_dilation = false;  // dilation 1, 3, 5, ... instead of base^(l-1)
    int max_arrivals = 1;            // nbar
    int horizon = 12;                // T
    int output_dim = 0;              // 0: nbar * horizon (match policy); 1: critic head
    double input_scale = 1.0;

    int input_channels() const { return 3 * max_arrivals + 1; }
    int head_dim() const { return output_dim > 0 ? output_dim : max_arrivals * horizon; }
    int dilation(int block) const;  // block is 1-based
    void validate() const;
};

enum class RunMode { Train, Eval };

namespace tcn_ops {

struct ConvSpec {
    int in_ch = 0, out_ch = 0, kernel = 1, dilation = 1;
    bool has_bias = true;
    std::size_t weight_off = 0, bias_off = 0;
    std::size_t weight_count() const {
        return static_cast<std::size_t>(out_ch) * in_ch * kernel;
    }
};

struct NormSpec {
    int ch = 0;
    std::size_t gamma_off = 0, beta_off = 0;
};

// Left-padded causal convolution: output at t reads inputs t, t-d, ..., t-(K-1)d.
Seq conv1d_forward(const ConvSpec& spec, std::span<const double> params, const Seq& in);
void conv1d_backward(const ConvSpec& spec, std::span<const double> params, const Seq& in,
                     const Seq& dout, Seq& din, std::span<double> grad);

struct NormStats {
    std::vector<double> mean;   // per position
    std::vector<double> sigma;  // sqrt(var + eps) per position
};

// Normalization sub-layer: each position is standardized with the statistics
// of its own channel vector, then scaled/shifted per channel. Statistics stay
// local in time, so causality and the purely convolutional receptive field are
// preserved.
Seq channel_norm_forward(const NormSpec& spec, std::span<const double> params, const Seq& in,
                         NormStats& stats);
void channel_norm_backward(const NormSpec& spec, std::span<const double> params, const Seq& in,
                           const NormStats& stats, const Seq& dout, Seq& din,
                           std::span<double> grad);

double sigmoid(double z);

}  // namespace tcn_ops

struct TcnCache {
    struct Block {
        Seq input;
        Seq conv1_out;
        tcn_ops::NormStats norm1;
        Seq norm1_out;
        std::vector<std::uint8_t> drop1;  // kept-channel flags
        Seq conv2_in;
        Seq conv2_out;
        tcn_ops::NormStats norm2;
        Seq norm2_out;
        std::vector<std::uint8_t> drop2;
    };
    std::vector<Block> blocks;
    Seq head_in;
    Seq logits;
    bool train_mode = false;
};

// The dilated causal residual network. Parameters live in one flat vector the
// caller owns; layouts are derived from the config.
class TcnNetwork {
public:
    explicit TcnNetwork(TcnConfig config);

    const TcnConfig& config() const { return config_; }
    std::size_t param_count() const { return param_count_; }

    // Small uniform weights centered at zero so initial match probabilities
    // start near 0.5.
    void init_params(std::span<double> params, Rng& rng) const;

    // Logits for every position. Train mode applies spatial dropout (whole
    // channels, inverted scaling) drawn from `dropout_rng`; eval mode is
    // deterministic. `cache` must be supplied to backpropagate later.
    Seq forward(std::span<const double> params, const Seq& input, RunMode mode, Rng* dropout_rng,
                TcnCache* cache) const;

    // Exact reverse-mode gradient; `dlogits` matches the forward output shape,
    // gradient is accumulated into `grad`.
    void backward(std::span<const double> params, const TcnCache& cache, const Seq& dlogits,
                  std::span<double> grad) const;

private:
    struct BlockLayout {
        tcn_ops::ConvSpec conv1, conv2;
        tcn_ops::NormSpec norm1, norm2;
        bool has_proj = false;
        tcn_ops::ConvSpec proj;
    };

    TcnConfig config_;
    std::vector<BlockLayout> blocks_;
    tcn_ops::ConvSpec head_;
    std::size_t param_count_ = 0;
};

// Encoder scaling knobs; defaults leave values raw.
struct EncoderScaling {
    double load_scale = 1.0;
    double deadline_scale = 1.0;
};

// Builds the input sequence {x_1..x_t} for the current state: per arrival slot
// its load, deadline and current unserved remainder, plus the period's
// renewable, zero elsewhere.
Seq encode_input(const MarketState& state, const EncoderScaling& scaling = {});

// Output slot of a customer: (arrival - 1) * nbar + its position in the batch.
int customer_slot(const MarketState& state, CustomerId id);

// Sigmoid-decoded probabilities of the active customers at the final position.
MatchProbabilities decode_probabilities(const Seq& logits, const MarketState& state);

// ADAM with bias correction; direction +1 ascends, -1 descends.
struct AdamConfig {
    double alpha = 0.75;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

struct AdamState {
    std::vector<double> m, v;
    std::uint64_t step = 0;

    explicit AdamState(std::size_t n = 0) : m(n, 0.0), v(n, 0.0) {}
};

void adam_step(std::span<double> params, std::span<const double> grad, AdamState& state,
               const AdamConfig& config, double direction);

}  // namespace fxm
