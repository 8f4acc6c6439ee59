#include "greenflow/nn/layers.hpp"
#include "greenflow/nn/random.hpp"

#include <cmath>
#include <stdexcept>

namespace greenflow::nn {

namespace {

std::size_t plane(const Tensor4& x) { return static_cast<std::size_t>(x.h()) * x.w(); }

template <class F>
void for_channel(const Tensor4& x, int c, F&& f) {
    const std::size_t hw = plane(x);
    for (int n = 0; n < x.n(); ++n) {
        const std::size_t base = (static_cast<std::size_t>(n) * x.c() + c) * hw;
        for (std::size_t i = 0; i < hw; ++i) f(base + i);
    }
}

void check_channels(const Tensor4& x, std::size_t size, const char* what) {
    if (size != static_cast<std::size_t>(x.c()))
        throw std::invalid_argument(std::string("batchnorm: ") + what + " size does not match channel count");
}

}  // namespace

Tensor4 batchnorm_train(const Tensor4& x, std::span<const double> gamma, std::span<const double> beta,
                        BatchNormCache& cache, double eps) {
    if (x.n() < 2) throw std::invalid_argument("batchnorm: train mode needs a batch of at least 2");
    check_channels(x, gamma.size(), "gamma");
    check_channels(x, beta.size(), "beta");
    const double count = static_cast<double>(x.n()) * plane(x);
    cache.normalized = Tensor4(x.n(), x.c(), x.h(), x.w());
    cache.mean.assign(x.c(), 0.0);
    cache.var.assign(x.c(), 0.0);
    cache.inv_std.assign(x.c(), 0.0);
    Tensor4 y(x.n(), x.c(), x.h(), x.w());
    for (int c = 0; c < x.c(); ++c) {
        double m = 0.0;
        for_channel(x, c, [&](std::size_t i) { m += x[i]; });
        m /= count;
        double v = 0.0;
        for_channel(x, c, [&](std::size_t i) { v += (x[i] - m) * (x[i] - m); });
        v /= count;
        const double inv = 1.0 / std::sqrt(v + eps);
        cache.mean[c] = m;
        cache.var[c] = v;
        cache.inv_std[c] = inv;
        for_channel(x, c, [&](std::size_t i) {
            cache.normalized[i] = (x[i] - m) * inv;
            y[i] = gamma[c] * cache.normalized[i] + beta[c];
        });
    }
    return y;
}

Tensor4 batchnorm_infer(const Tensor4& x, std::span<const double> gamma, std::span<const double> beta,
                        std::span<const double> running_mean, std::span<const double> running_var, double eps) {
    check_channels(x, gamma.size(), "gamma");
    check_channels(x, beta.size(), "beta");
    check_channels(x, running_mean.size(), "running mean");
    check_channels(x, running_var.size(), "running variance");
    Tensor4 y(x.n(), x.c(), x.h(), x.w());
    for (int c = 0; c < x.c(); ++c) {
        const double scale = gamma[c] / std::sqrt(running_var[c] + eps);
        for_channel(x, c, [&](std::size_t i) { y[i] = (x[i] - running_mean[c]) * scale + beta[c]; });
    }
    return y;
}

BatchNormGrads batchnorm_backward(const BatchNormCache& cache, std::span<const double> gamma,
                                  const Tensor4& grad_out) {
    const Tensor4& xh = cache.normalized;
    if (!xh.same_shape(grad_out)) throw std::invalid_argument("batchnorm_backward: shape mismatch");
    const double count = static_cast<double>(xh.n()) * plane(xh);
    BatchNormGrads g{Tensor4(xh.n(), xh.c(), xh.h(), xh.w()), std::vector<double>(xh.c(), 0.0),
                     std::vector<double>(xh.c(), 0.0)};
    for (int c = 0; c < xh.c(); ++c) {
        double sum_g = 0.0, sum_gx = 0.0;
        for_channel(xh, c, [&](std::size_t i) {
            sum_g += grad_out[i];
            sum_gx += grad_out[i] * xh[i];
        });
        g.beta[c] = sum_g;
        g.gamma[c] = sum_gx;
        const double k = gamma[c] * cache.inv_std[c] / count;
        for_channel(xh, c, [&](std::size_t i) { g.input[i] = k * (count * grad_out[i] - sum_g - xh[i] * sum_gx); });
    }
    return g;
}

void update_running_stats(const BatchNormCache& cache, std::size_t count_per_channel, double momentum,
                          std::span<double> running_mean, std::span<double> running_var) {
    const double unbias =
        count_per_channel > 1 ? static_cast<double>(count_per_channel) / (count_per_channel - 1.0) : 1.0;
    for (std::size_t c = 0; c < cache.mean.size(); ++c) {
        running_mean[c] = momentum * running_mean[c] + (1.0 - momentum) * cache.mean[c];
        running_var[c] = momentum * running_var[c] + (1.0 - momentum) * cache.var[c] * unbias;
    }
}

Tensor4 leaky_relu(const Tensor4& x, double slope) {
    Tensor4 y = x;
    for (double& v : y.values())
        if (v < 0.0) v *= slope;
    return y;
}

Tensor4 leaky_relu_backward(const Tensor4& x, const Tensor4& grad_out, double slope) {
    if (!x.same_shape(grad_out)) throw std::invalid_argument("leaky_relu_backward: shape mismatch");
    Tensor4 g = grad_out;
    for (std::size_t i = 0; i < g.size(); ++i)
        if (x[i] < 0.0) g[i] *= slope;
    return g;
}

Tensor4 dropout(const Tensor4& x, double rate, std::uint64_t seed, Mode mode, Tensor4* mask) {
    if (!(rate >= 0.0 && rate < 1.0)) throw std::invalid_argument("dropout: rate must be in [0, 1)");
    if (mode == Mode::Infer || rate == 0.0) {
        if (mask) *mask = Tensor4(x.n(), x.c(), x.h(), x.w(), 1.0);
        return x;
    }
    std::mt19937_64 rng(seed);
    const double keep_scale = 1.0 / (1.0 - rate);
    Tensor4 m(x.n(), x.c(), x.h(), x.w());
    Tensor4 y = x;
    for (std::size_t i = 0; i < y.size(); ++i) {
        m[i] = uniform01(rng) >= rate ? keep_scale : 0.0;
        y[i] *= m[i];
    }
    if (mask) *mask = std::move(m);
    return y;
}

double mse_loss(const Tensor4& pred, const Tensor4& target, int crop_h, int crop_w, Tensor4* grad) {
    if (!pred.same_shape(target)) throw std::invalid_argument("mse_loss: shape mismatch");
    if (crop_h < 1 || crop_w < 1 || crop_h > pred.h() || crop_w > pred.w())
        throw std::invalid_argument("mse_loss: crop window outside the tensor");
    const double count = static_cast<double>(pred.n()) * pred.c() * crop_h * crop_w;
    if (grad) *grad = Tensor4(pred.n(), pred.c(), pred.h(), pred.w());
    double sum = 0.0;
    for (int n = 0; n < pred.n(); ++n)
        for (int c = 0; c < pred.c(); ++c)
            for (int y = 0; y < crop_h; ++y)
                for (int x = 0; x < crop_w; ++x) {
                    const double d = pred(n, c, y, x) - target(n, c, y, x);
                    sum += d * d;
                    if (grad) (*grad)(n, c, y, x) = 2.0 * d / count;
                }
    return sum / count;
}

}  // namespace greenflow::nn
