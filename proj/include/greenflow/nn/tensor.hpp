#pragma once

#include <cstddef>
#include <new>
#include <span>
#include <vector>

namespace greenflow::nn {

/// Cache-line aligned storage. Vectorized Eigen kernels split work at
/// alignment boundaries, so a fixed base alignment keeps results
/// bit-identical from run to run.
template <class T>
struct AlignedAllocator {
    using value_type = T;
    static constexpr std::align_val_t alignment{64};

    AlignedAllocator() = default;
    template <class U>
    AlignedAllocator(const AlignedAllocator<U>&) noexcept {}

    T* allocate(std::size_t n) { return static_cast<T*>(::operator new(n * sizeof(T), alignment)); }
    void deallocate(T* p, std::size_t) noexcept { ::operator delete(p, alignment); }

    template <class U>
    bool operator==(const AlignedAllocator<U>&) const noexcept { return true; }
};

/// Dense NCHW tensor of doubles, row-major.
class Tensor4 {
public:
    Tensor4() = default;
    Tensor4(int n, int c, int h, int w, double fill = 0.0);

    int n() const { return n_; }
    int c() const { return c_; }
    int h() const { return h_; }
    int w() const { return w_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    double& operator()(int in, int ic, int ih, int iw) { return data_[offset(in, ic, ih, iw)]; }
    double operator()(int in, int ic, int ih, int iw) const { return data_[offset(in, ic, ih, iw)]; }
    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    std::span<double> values() { return data_; }
    std::span<const double> values() const { return data_; }

    /// Pointer to the first value of sample `in`.
    double* sample(int in) { return data_.data() + static_cast<std::size_t>(in) * c_ * h_ * w_; }
    const double* sample(int in) const { return data_.data() + static_cast<std::size_t>(in) * c_ * h_ * w_; }

    bool same_shape(const Tensor4& o) const { return n_ == o.n_ && c_ == o.c_ && h_ == o.h_ && w_ == o.w_; }
    bool operator==(const Tensor4&) const = default;

private:
    std::size_t offset(int in, int ic, int ih, int iw) const {
        return ((static_cast<std::size_t>(in) * c_ + ic) * h_ + ih) * w_ + iw;
    }

    int n_ = 0, c_ = 0, h_ = 0, w_ = 0;
    std::vector<double, AlignedAllocator<double>> data_;
};

double dot(const Tensor4& a, const Tensor4& b);

}  // namespace greenflow::nn
