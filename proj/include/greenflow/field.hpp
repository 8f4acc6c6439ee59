#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

namespace greenflow {

class Grid;

enum class Quantity { Potential, ElectronDensity, LogDensity };

std::string_view quantity_name(Quantity q);

/// Lower clamp applied to densities (cm^-3) before taking log10.
inline constexpr double density_floor = 1.0;

/// Scalar quantity on the device grid, x-major like Grid. Potentials are in
/// V, densities in cm^-3.
class Field {
public:
    Field() = default;
    Field(int nx, int ny, Quantity q, double fill = 0.0);
    Field(const Grid& grid, Quantity q, double fill = 0.0);

    int nx() const { return nx_; }
    int ny() const { return ny_; }
    std::size_t size() const { return values_.size(); }
    Quantity quantity() const { return quantity_; }

    double& operator()(int ix, int iy) { return values_[static_cast<std::size_t>(ix) * ny_ + iy]; }
    double operator()(int ix, int iy) const { return values_[static_cast<std::size_t>(ix) * ny_ + iy]; }
    double& operator[](std::size_t k) { return values_[k]; }
    double operator[](std::size_t k) const { return values_[k]; }

    std::span<double> values() { return values_; }
    std::span<const double> values() const { return values_; }

    bool same_shape(const Field& other) const { return nx_ == other.nx_ && ny_ == other.ny_; }
    bool matches(const Grid& grid) const;

    friend bool operator==(const Field&, const Field&) = default;

private:
    int nx_ = 0;
    int ny_ = 0;
    Quantity quantity_ = Quantity::Potential;
    std::vector<double> values_;
};

/// log10(max(n, floor)) per node.
Field log_density(const Field& density);

/// Max-norm of a - b. Shapes must match.
double max_abs_difference(const Field& a, const Field& b);

}  // namespace greenflow
