#include "greenflow/nn/layers.hpp"

#include <Eigen/Core>

#include <stdexcept>
#include <string>

namespace greenflow::nn {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMat>;
using Map = Eigen::Map<RowMat>;

// Geometry of one strided correlation: an image of size (h, w) read into an
// output of size (oh, ow).
struct Geometry {
    int channels, h, w, k, stride, pad, oh, ow;
};

RowMat im2col(const double* img, const Geometry& g) {
    RowMat cols = RowMat::Zero(static_cast<Eigen::Index>(g.channels) * g.k * g.k, g.oh * g.ow);
    for (int c = 0; c < g.channels; ++c)
        for (int ky = 0; ky < g.k; ++ky)
            for (int kx = 0; kx < g.k; ++kx) {
                double* row = cols.row((c * g.k + ky) * g.k + kx).data();
                for (int oy = 0; oy < g.oh; ++oy) {
                    const int iy = oy * g.stride - g.pad + ky;
                    if (iy < 0 || iy >= g.h) continue;
                    const double* src = img + (static_cast<std::size_t>(c) * g.h + iy) * g.w;
                    for (int ox = 0; ox < g.ow; ++ox) {
                        const int ix = ox * g.stride - g.pad + kx;
                        if (ix >= 0 && ix < g.w) row[oy * g.ow + ox] = src[ix];
                    }
                }
            }
    return cols;
}

// Scatter-add, the adjoint of im2col.
void col2im(const RowMat& cols, const Geometry& g, double* img) {
    for (int c = 0; c < g.channels; ++c)
        for (int ky = 0; ky < g.k; ++ky)
            for (int kx = 0; kx < g.k; ++kx) {
                const double* row = cols.row((c * g.k + ky) * g.k + kx).data();
                for (int oy = 0; oy < g.oh; ++oy) {
                    const int iy = oy * g.stride - g.pad + ky;
                    if (iy < 0 || iy >= g.h) continue;
                    double* dst = img + (static_cast<std::size_t>(c) * g.h + iy) * g.w;
                    for (int ox = 0; ox < g.ow; ++ox) {
                        const int ix = ox * g.stride - g.pad + kx;
                        if (ix >= 0 && ix < g.w) dst[ix] += row[oy * g.ow + ox];
                    }
                }
            }
}

void check_kernel(const Tensor4& weight, std::size_t bias_size, int bias_channels, int stride, int padding,
                  const char* op) {
    if (weight.h() != weight.w()) throw std::invalid_argument(std::string(op) + ": kernel must be square");
    if (stride < 1 || padding < 0) throw std::invalid_argument(std::string(op) + ": invalid stride or padding");
    if (bias_size != static_cast<std::size_t>(bias_channels))
        throw std::invalid_argument(std::string(op) + ": bias size does not match output channels");
}

ConstMap weight_matrix(const Tensor4& w) { return ConstMap(w.data(), w.n(), static_cast<Eigen::Index>(w.c()) * w.h() * w.w()); }

}  // namespace

Tensor4 conv2d_forward(const Tensor4& x, const Tensor4& weight, std::span<const double> bias, int stride, int padding) {
    check_kernel(weight, bias.size(), weight.n(), stride, padding, "conv2d");
    if (x.c() != weight.c())
        throw std::invalid_argument("conv2d: input has " + std::to_string(x.c()) + " channels, kernel expects " +
                                    std::to_string(weight.c()));
    const int k = weight.h();
    const int oh = (x.h() + 2 * padding - k) / stride + 1;
    const int ow = (x.w() + 2 * padding - k) / stride + 1;
    if (x.h() + 2 * padding < k || x.w() + 2 * padding < k) throw std::invalid_argument("conv2d: kernel larger than input");
    const Geometry g{x.c(), x.h(), x.w(), k, stride, padding, oh, ow};
    const ConstMap wm = weight_matrix(weight);
    Tensor4 y(x.n(), weight.n(), oh, ow);
    for (int n = 0; n < x.n(); ++n) {
        Map out(y.sample(n), weight.n(), oh * ow);
        out.noalias() = wm * im2col(x.sample(n), g);
        for (int c = 0; c < weight.n(); ++c) out.row(c).array() += bias[c];
    }
    return y;
}

ConvGrads conv2d_backward(const Tensor4& x, const Tensor4& weight, int stride, int padding, const Tensor4& grad_out) {
    const int k = weight.h();
    const int oh = (x.h() + 2 * padding - k) / stride + 1;
    const int ow = (x.w() + 2 * padding - k) / stride + 1;
    if (x.c() != weight.c() || grad_out.n() != x.n() || grad_out.c() != weight.n() || grad_out.h() != oh ||
        grad_out.w() != ow)
        throw std::invalid_argument("conv2d_backward: shape mismatch");
    const Geometry g{x.c(), x.h(), x.w(), k, stride, padding, oh, ow};
    const ConstMap wm = weight_matrix(weight);
    ConvGrads out{Tensor4(x.n(), x.c(), x.h(), x.w()), Tensor4(weight.n(), weight.c(), k, k),
                  std::vector<double>(weight.n(), 0.0)};
    Map gw(out.weight.data(), wm.rows(), wm.cols());
    for (int n = 0; n < x.n(); ++n) {
        const ConstMap go(grad_out.sample(n), weight.n(), oh * ow);
        const RowMat cols = im2col(x.sample(n), g);
        gw.noalias() += go * cols.transpose();
        for (int c = 0; c < weight.n(); ++c) out.bias[c] += go.row(c).sum();
        const RowMat gcols = wm.transpose() * go;
        col2im(gcols, g, out.input.sample(n));
    }
    return out;
}

Tensor4 conv_transpose2d_forward(const Tensor4& x, const Tensor4& weight, std::span<const double> bias, int stride,
                                 int padding, int output_padding) {
    check_kernel(weight, bias.size(), weight.c(), stride, padding, "conv_transpose2d");
    if (x.c() != weight.n())
        throw std::invalid_argument("conv_transpose2d: input has " + std::to_string(x.c()) +
                                    " channels, kernel expects " + std::to_string(weight.n()));
    if (output_padding < 0 || output_padding >= stride)
        throw std::invalid_argument("conv_transpose2d: output_padding must be in [0, stride)");
    const int k = weight.h();
    const int oh = (x.h() - 1) * stride - 2 * padding + k + output_padding;
    const int ow = (x.w() - 1) * stride - 2 * padding + k + output_padding;
    if (oh < 1 || ow < 1) throw std::invalid_argument("conv_transpose2d: empty output");
    const Geometry g{weight.c(), oh, ow, k, stride, padding, x.h(), x.w()};
    const ConstMap wm = weight_matrix(weight);
    Tensor4 y(x.n(), weight.c(), oh, ow);
    for (int n = 0; n < x.n(); ++n) {
        const RowMat cols = wm.transpose() * ConstMap(x.sample(n), x.c(), x.h() * x.w());
        col2im(cols, g, y.sample(n));
        Map out(y.sample(n), weight.c(), oh * ow);
        for (int c = 0; c < weight.c(); ++c) out.row(c).array() += bias[c];
    }
    return y;
}

ConvGrads conv_transpose2d_backward(const Tensor4& x, const Tensor4& weight, int stride, int padding,
                                    const Tensor4& grad_out) {
    const int k = weight.h();
    if (x.c() != weight.n() || grad_out.n() != x.n() || grad_out.c() != weight.c())
        throw std::invalid_argument("conv_transpose2d_backward: shape mismatch");
    const int base_h = (x.h() - 1) * stride - 2 * padding + k;
    const int base_w = (x.w() - 1) * stride - 2 * padding + k;
    if (grad_out.h() - base_h < 0 || grad_out.h() - base_h >= stride || grad_out.w() - base_w < 0 ||
        grad_out.w() - base_w >= stride)
        throw std::invalid_argument("conv_transpose2d_backward: shape mismatch");
    const Geometry g{weight.c(), grad_out.h(), grad_out.w(), k, stride, padding, x.h(), x.w()};
    const ConstMap wm = weight_matrix(weight);
    ConvGrads out{Tensor4(x.n(), x.c(), x.h(), x.w()), Tensor4(weight.n(), weight.c(), k, k),
                  std::vector<double>(weight.c(), 0.0)};
    Map gw(out.weight.data(), wm.rows(), wm.cols());
    for (int n = 0; n < x.n(); ++n) {
        const RowMat gcols = im2col(grad_out.sample(n), g);
        const ConstMap xi(x.sample(n), x.c(), x.h() * x.w());
        gw.noalias() += xi * gcols.transpose();
        Map(out.input.sample(n), x.c(), x.h() * x.w()).noalias() = wm * gcols;
        const ConstMap go(grad_out.sample(n), weight.c(), grad_out.h() * grad_out.w());
        for (int c = 0; c < weight.c(); ++c) out.bias[c] += go.row(c).sum();
    }
    return out;
}

}  // namespace greenflow::nn
