#pragma once

#include "greenflow/nn/tensor.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace greenflow::nn {

enum class Mode { Train, Infer };

struct ConvGrads {
    Tensor4 input;
    Tensor4 weight;
    std::vector<double> bias;
};

/// Cross-correlation. Weight dims (out_ch, in_ch, k, k); square kernels only.
Tensor4 conv2d_forward(const Tensor4& x, const Tensor4& weight, std::span<const double> bias, int stride, int padding);
ConvGrads conv2d_backward(const Tensor4& x, const Tensor4& weight, int stride, int padding, const Tensor4& grad_out);

/// Adjoint of conv2d with the same weight tensor, so weight dims are
/// (in_ch, out_ch, k, k). Output size (in - 1) * stride - 2 * padding + k + output_padding.
Tensor4 conv_transpose2d_forward(const Tensor4& x, const Tensor4& weight, std::span<const double> bias, int stride,
                                 int padding, int output_padding);
ConvGrads conv_transpose2d_backward(const Tensor4& x, const Tensor4& weight, int stride, int padding,
                                    const Tensor4& grad_out);

struct BatchNormCache {
    Tensor4 normalized;
    std::vector<double> mean;
    std::vector<double> var;
    std::vector<double> inv_std;
};

struct BatchNormGrads {
    Tensor4 input;
    std::vector<double> gamma;
    std::vector<double> beta;
};

constexpr double batchnorm_eps = 1e-5;

/// Per-channel batch statistics over (n, h, w). Requires n >= 2.
Tensor4 batchnorm_train(const Tensor4& x, std::span<const double> gamma, std::span<const double> beta,
                        BatchNormCache& cache, double eps = batchnorm_eps);
Tensor4 batchnorm_infer(const Tensor4& x, std::span<const double> gamma, std::span<const double> beta,
                        std::span<const double> running_mean, std::span<const double> running_var,
                        double eps = batchnorm_eps);
BatchNormGrads batchnorm_backward(const BatchNormCache& cache, std::span<const double> gamma,
                                  const Tensor4& grad_out);
/// running = momentum * running + (1 - momentum) * batch; variance uses the unbiased estimate.
void update_running_stats(const BatchNormCache& cache, std::size_t count_per_channel, double momentum,
                          std::span<double> running_mean, std::span<double> running_var);

Tensor4 leaky_relu(const Tensor4& x, double slope);
Tensor4 leaky_relu_backward(const Tensor4& x, const Tensor4& grad_out, double slope);

/// Inverted dropout. In train mode each element survives with probability
/// 1 - rate and is scaled by 1 / (1 - rate); `mask` receives the applied scale.
Tensor4 dropout(const Tensor4& x, double rate, std::uint64_t seed, Mode mode, Tensor4* mask = nullptr);

/// Mean squared error over the top-left crop_h x crop_w window of every
/// sample and channel; the gradient is zero outside the window.
double mse_loss(const Tensor4& pred, const Tensor4& target, int crop_h, int crop_w, Tensor4* grad = nullptr);

}  // namespace greenflow::nn
