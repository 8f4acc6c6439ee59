#include "greenflow/nn/tensor.hpp"

#include <stdexcept>

namespace greenflow::nn {

Tensor4::Tensor4(int n, int c, int h, int w, double fill) : n_(n), c_(c), h_(h), w_(w) {
    if (n < 1 || c < 1 || h < 1 || w < 1) throw std::invalid_argument("Tensor4: all dimensions must be >= 1");
    data_.assign(static_cast<std::size_t>(n) * c * h * w, fill);
}

double dot(const Tensor4& a, const Tensor4& b) {
    if (!a.same_shape(b)) throw std::invalid_argument("dot: shape mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

}  // namespace greenflow::nn
