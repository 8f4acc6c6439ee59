#pragma once

#include "greenflow/nn/layers.hpp"
#include "greenflow/nn/tensor.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace greenflow::nn {

/// Convolutional encoder-decoder with a residual output. N encoder blocks
/// (stride-2 conv, BN, dropout, LeakyReLU), N - 1 decoder blocks with
/// stride-2 transposed convs, and a final stride-2 transposed conv to one
/// channel. Output = input[residual_channel] + network(input).
struct Architecture {
    int in_channels = 7;
    std::vector<int> encoder_widths{32, 64, 128};
    std::vector<int> decoder_widths{64, 32};
    // Even kernels make every stride-2 transposed-conv output pixel see the
    // same number of taps (no checkerboard pattern in the predicted fields).
    int kernel = 4;
    // Kept in every block but off by default: at 0.1 the train/infer
    // mismatch roughly doubled the max-norm potential error.
    double dropout = 0.0;
    double leaky_slope = 0.01;
    double bn_momentum = 0.9;
    int residual_channel = 0;

    void validate() const;
    /// Spatial dims of the input must be multiples of this.
    int spatial_multiple() const { return 1 << encoder_widths.size(); }
    int padding() const { return (kernel - 1) / 2; }
    int output_padding() const { return 2 + 2 * padding() - kernel; }
    bool operator==(const Architecture&) const = default;
};

struct Param {
    std::string name;
    std::vector<int> dims;
    std::vector<double> value;
    /// Running statistics are stored but not trained.
    bool trainable = true;
};

/// One gradient array per entry of Model::params(); empty for buffers.
using Gradients = std::vector<std::vector<double>>;

struct BlockCache {
    Tensor4 input;
    BatchNormCache bn;
    Tensor4 mask;
    Tensor4 pre_activation;
};

struct ForwardCache {
    std::vector<BlockCache> blocks;
    Tensor4 final_input;
    int input_channels = 0;
};

class Model {
public:
    Model() = default;
    /// He-normal initialisation; the final layer starts scaled down so the
    /// untrained model is close to the residual identity.
    Model(const Architecture& arch, std::uint64_t seed);

    const Architecture& architecture() const { return arch_; }
    std::vector<Param>& params() { return params_; }
    const std::vector<Param>& params() const { return params_; }
    std::size_t block_count() const { return blocks_.size(); }

    /// Train mode uses batch statistics and the dropout masks derived from
    /// `dropout_seed`; it never touches the running statistics.
    Tensor4 forward(const Tensor4& x, Mode mode, std::uint64_t dropout_seed = 0, ForwardCache* cache = nullptr) const;
    Tensor4 infer(const Tensor4& x) const { return forward(x, Mode::Infer); }

    /// Accumulates parameter gradients into `grads` and returns d loss / d x.
    Tensor4 backward(const ForwardCache& cache, const Tensor4& grad_out, Gradients& grads) const;
    Gradients zero_gradients() const;

    /// Folds the batch statistics of a train-mode pass into the running stats.
    void absorb_batch_statistics(const ForwardCache& cache);
    /// Replaces the running statistics with the exact (unbiased) statistics
    /// of `x` seen with dropout disabled, so inference matches the
    /// activation distribution it will see.
    void calibrate_batch_norm(const Tensor4& x);
    void zero_final_layer();

private:
    struct BlockIndex {
        bool transposed = false;
        int weight, bias, gamma, beta, running_mean, running_var;
    };

    Tensor4 run(const Tensor4& x, bool batch_stats, bool drop, std::uint64_t dropout_seed, ForwardCache* cache) const;
    int add_param(std::string name, std::vector<int> dims, double fill, bool trainable = true);
    void check_input(const Tensor4& x) const;

    Architecture arch_;
    std::vector<Param> params_;
    std::vector<BlockIndex> blocks_;
    int final_weight_ = -1;
    int final_bias_ = -1;
};

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

struct AdamState {
    std::vector<std::vector<double>> m;
    std::vector<std::vector<double>> v;
    long step = 0;
};

/// Bias-corrected Adam update over parallel parameter/gradient arrays.
void adam_step(std::span<const std::span<double>> params, std::span<const std::span<const double>> grads,
               AdamState& state, const AdamConfig& cfg);
void adam_step(Model& model, const Gradients& grads, AdamState& state, const AdamConfig& cfg);

/// Directory with manifest.txt and weights.bin (little-endian f64).
void save_model(const Model& model, const std::filesystem::path& dir);
Model load_model(const std::filesystem::path& dir);

}  // namespace greenflow::nn
