#include "greenflow/nn/model.hpp"
#include "greenflow/nn/random.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace greenflow::nn {

namespace {

std::uint64_t splitmix(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

Tensor4 as_tensor(const Param& p) {
    Tensor4 t(p.dims[0], p.dims[1], p.dims[2], p.dims[3]);
    std::copy(p.value.begin(), p.value.end(), t.data());
    return t;
}

void accumulate(std::vector<double>& dst, std::span<const double> src) {
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

}  // namespace

void Architecture::validate() const {
    const std::size_t n = encoder_widths.size();
    if (n < 1) throw std::invalid_argument("architecture: need at least one encoder block");
    if (decoder_widths.size() + 1 != n)
        throw std::invalid_argument("architecture: decoder block count must be encoder count - 1");
    if (in_channels < 1) throw std::invalid_argument("architecture: in_channels must be positive");
    for (int w : encoder_widths)
        if (w < 1) throw std::invalid_argument("architecture: channel widths must be positive");
    for (int w : decoder_widths)
        if (w < 1) throw std::invalid_argument("architecture: channel widths must be positive");
    if (kernel < 2 || output_padding() < 0 || output_padding() > 1)
        throw std::invalid_argument("architecture: kernel must be 3 or 4");
    if (!(dropout >= 0.0 && dropout < 1.0)) throw std::invalid_argument("architecture: dropout must be in [0, 1)");
    if (!(leaky_slope > 0.0)) throw std::invalid_argument("architecture: leaky slope must be positive");
    if (!(bn_momentum >= 0.0 && bn_momentum < 1.0))
        throw std::invalid_argument("architecture: batch-norm momentum must be in [0, 1)");
    if (residual_channel < 0 || residual_channel >= in_channels)
        throw std::invalid_argument("architecture: residual channel out of range");
}

int Model::add_param(std::string name, std::vector<int> dims, double fill, bool trainable) {
    std::size_t count = 1;
    for (int d : dims) count *= static_cast<std::size_t>(d);
    params_.push_back({std::move(name), std::move(dims), std::vector<double>(count, fill), trainable});
    return static_cast<int>(params_.size()) - 1;
}

Model::Model(const Architecture& arch, std::uint64_t seed) : arch_(arch) {
    arch_.validate();
    std::mt19937_64 rng(seed);
    const int k = arch_.kernel;
    auto he = [&](int idx, int fan_in, double scale) {
        const double sd = scale * std::sqrt(2.0 / fan_in);
        for (double& v : params_[idx].value) v = sd * standard_normal(rng);
    };
    auto add_block = [&](const std::string& prefix, bool transposed, int in, int out) {
        BlockIndex b;
        b.transposed = transposed;
        b.weight = transposed ? add_param(prefix + ".weight", {in, out, k, k}, 0.0)
                              : add_param(prefix + ".weight", {out, in, k, k}, 0.0);
        he(b.weight, in * k * k, 1.0);
        b.bias = add_param(prefix + ".bias", {out}, 0.0);
        b.gamma = add_param(prefix + ".bn.gamma", {out}, 1.0);
        b.beta = add_param(prefix + ".bn.beta", {out}, 0.0);
        b.running_mean = add_param(prefix + ".bn.running_mean", {out}, 0.0, false);
        b.running_var = add_param(prefix + ".bn.running_var", {out}, 1.0, false);
        blocks_.push_back(b);
    };
    int ch = arch_.in_channels;
    for (std::size_t i = 0; i < arch_.encoder_widths.size(); ++i) {
        add_block("encoder" + std::to_string(i), false, ch, arch_.encoder_widths[i]);
        ch = arch_.encoder_widths[i];
    }
    for (std::size_t i = 0; i < arch_.decoder_widths.size(); ++i) {
        add_block("decoder" + std::to_string(i), true, ch, arch_.decoder_widths[i]);
        ch = arch_.decoder_widths[i];
    }
    final_weight_ = add_param("final.weight", {ch, 1, k, k}, 0.0);
    he(final_weight_, ch * k * k, 0.1);
    final_bias_ = add_param("final.bias", {1}, 0.0);
}

void Model::check_input(const Tensor4& x) const {
    if (blocks_.empty()) throw std::logic_error("model: not initialised");
    if (x.c() != arch_.in_channels)
        throw std::invalid_argument("model: input has " + std::to_string(x.c()) + " channels, expected " +
                                    std::to_string(arch_.in_channels));
    const int m = arch_.spatial_multiple();
    if (x.h() % m != 0 || x.w() % m != 0)
        throw std::invalid_argument("model: spatial dims must be multiples of " + std::to_string(m));
}

Tensor4 Model::forward(const Tensor4& x, Mode mode, std::uint64_t dropout_seed, ForwardCache* cache) const {
    const bool train = mode == Mode::Train;
    return run(x, train, train, dropout_seed, cache);
}

void Model::calibrate_batch_norm(const Tensor4& x) {
    ForwardCache cache;
    run(x, true, false, 0, &cache);
    for (std::size_t i = 0; i < blocks_.size(); ++i) {
        const BatchNormCache& bn = cache.blocks[i].bn;
        const Tensor4& z = bn.normalized;
        const double count = static_cast<double>(z.n()) * z.h() * z.w();
        for (std::size_t c = 0; c < bn.mean.size(); ++c) {
            params_[blocks_[i].running_mean].value[c] = bn.mean[c];
            params_[blocks_[i].running_var].value[c] = bn.var[c] * count / (count - 1.0);
        }
    }
}

Tensor4 Model::run(const Tensor4& x, bool batch_stats, bool drop, std::uint64_t dropout_seed,
                   ForwardCache* cache) const {
    check_input(x);
    ForwardCache local;
    ForwardCache& c = cache ? *cache : local;
    const bool keep = cache != nullptr;
    c.blocks.assign(blocks_.size(), {});
    c.input_channels = x.c();
    const int pad = arch_.padding();

    Tensor4 a = x;
    for (std::size_t i = 0; i < blocks_.size(); ++i) {
        const BlockIndex& b = blocks_[i];
        BlockCache& bc = c.blocks[i];
        const Tensor4 w = as_tensor(params_[b.weight]);
        const auto& bias = params_[b.bias].value;
        Tensor4 z = b.transposed ? conv_transpose2d_forward(a, w, bias, 2, pad, arch_.output_padding())
                                 : conv2d_forward(a, w, bias, 2, pad);
        if (keep) bc.input = std::move(a);
        Tensor4 y = batch_stats
                        ? batchnorm_train(z, params_[b.gamma].value, params_[b.beta].value, bc.bn)
                        : batchnorm_infer(z, params_[b.gamma].value, params_[b.beta].value,
                                          params_[b.running_mean].value, params_[b.running_var].value);
        y = dropout(y, arch_.dropout, splitmix(dropout_seed + i), drop ? Mode::Train : Mode::Infer,
                    keep ? &bc.mask : nullptr);
        a = leaky_relu(y, arch_.leaky_slope);
        if (keep) bc.pre_activation = std::move(y);
    }
    Tensor4 out = conv_transpose2d_forward(a, as_tensor(params_[final_weight_]), params_[final_bias_].value, 2, pad,
                                           arch_.output_padding());
    if (keep) c.final_input = std::move(a);
    for (int n = 0; n < x.n(); ++n)
        for (int h = 0; h < x.h(); ++h)
            for (int w = 0; w < x.w(); ++w) out(n, 0, h, w) += x(n, arch_.residual_channel, h, w);
    return out;
}

Gradients Model::zero_gradients() const {
    Gradients g(params_.size());
    for (std::size_t i = 0; i < params_.size(); ++i)
        if (params_[i].trainable) g[i].assign(params_[i].value.size(), 0.0);
    return g;
}

Tensor4 Model::backward(const ForwardCache& cache, const Tensor4& grad_out, Gradients& grads) const {
    if (cache.blocks.size() != blocks_.size() || cache.final_input.empty())
        throw std::invalid_argument("model backward: cache does not come from a cached forward pass");
    if (grads.size() != params_.size()) throw std::invalid_argument("model backward: gradient layout mismatch");
    const int pad = arch_.padding();

    ConvGrads fg = conv_transpose2d_backward(cache.final_input, as_tensor(params_[final_weight_]), 2, pad, grad_out);
    accumulate(grads[final_weight_], fg.weight.values());
    accumulate(grads[final_bias_], fg.bias);
    Tensor4 g = std::move(fg.input);

    for (std::size_t i = blocks_.size(); i-- > 0;) {
        const BlockIndex& b = blocks_[i];
        const BlockCache& bc = cache.blocks[i];
        g = leaky_relu_backward(bc.pre_activation, g, arch_.leaky_slope);
        for (std::size_t j = 0; j < g.size(); ++j) g[j] *= bc.mask[j];
        BatchNormGrads bg = batchnorm_backward(bc.bn, params_[b.gamma].value, g);
        accumulate(grads[b.gamma], bg.gamma);
        accumulate(grads[b.beta], bg.beta);
        const Tensor4 w = as_tensor(params_[b.weight]);
        ConvGrads cg = b.transposed ? conv_transpose2d_backward(bc.input, w, 2, pad, bg.input)
                                    : conv2d_backward(bc.input, w, 2, pad, bg.input);
        accumulate(grads[b.weight], cg.weight.values());
        accumulate(grads[b.bias], cg.bias);
        g = std::move(cg.input);
    }
    for (int n = 0; n < g.n(); ++n)
        for (int h = 0; h < g.h(); ++h)
            for (int w = 0; w < g.w(); ++w) g(n, arch_.residual_channel, h, w) += grad_out(n, 0, h, w);
    return g;
}

void Model::absorb_batch_statistics(const ForwardCache& cache) {
    if (cache.blocks.size() != blocks_.size()) throw std::invalid_argument("model: cache layout mismatch");
    for (std::size_t i = 0; i < blocks_.size(); ++i) {
        const BlockCache& bc = cache.blocks[i];
        if (bc.bn.mean.empty()) throw std::invalid_argument("model: cache holds no batch statistics");
        const Tensor4& z = bc.bn.normalized;
        update_running_stats(bc.bn, static_cast<std::size_t>(z.n()) * z.h() * z.w(), arch_.bn_momentum,
                             params_[blocks_[i].running_mean].value, params_[blocks_[i].running_var].value);
    }
}

void Model::zero_final_layer() {
    std::fill(params_[final_weight_].value.begin(), params_[final_weight_].value.end(), 0.0);
    std::fill(params_[final_bias_].value.begin(), params_[final_bias_].value.end(), 0.0);
}

void adam_step(std::span<const std::span<double>> params, std::span<const std::span<const double>> grads,
               AdamState& state, const AdamConfig& cfg) {
    if (params.size() != grads.size()) throw std::invalid_argument("adam: parameter/gradient count mismatch");
    if (state.m.empty()) {
        for (const auto& p : params) {
            state.m.emplace_back(p.size(), 0.0);
            state.v.emplace_back(p.size(), 0.0);
        }
    }
    if (state.m.size() != params.size()) throw std::invalid_argument("adam: state layout mismatch");
    ++state.step;
    const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
    const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
    for (std::size_t k = 0; k < params.size(); ++k) {
        const auto p = params[k];
        const auto g = grads[k];
        auto& m = state.m[k];
        auto& v = state.v[k];
        if (g.size() != p.size() || m.size() != p.size()) throw std::invalid_argument("adam: array size mismatch");
        for (std::size_t i = 0; i < p.size(); ++i) {
            m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
            v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
            p[i] -= cfg.lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + cfg.eps);
        }
    }
}

void adam_step(Model& model, const Gradients& grads, AdamState& state, const AdamConfig& cfg) {
    std::vector<std::span<double>> p;
    std::vector<std::span<const double>> g;
    auto& params = model.params();
    if (grads.size() != params.size()) throw std::invalid_argument("adam: gradient layout mismatch");
    for (std::size_t i = 0; i < params.size(); ++i)
        if (params[i].trainable) {
            p.emplace_back(params[i].value);
            g.emplace_back(grads[i]);
        }
    adam_step(p, g, state, cfg);
}

}  // namespace greenflow::nn
