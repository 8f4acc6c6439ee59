#include "greenflow/field.hpp"

#include "greenflow/device.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace greenflow {

std::string_view quantity_name(Quantity q) {
    switch (q) {
        case Quantity::Potential: return "potential";
        case Quantity::ElectronDensity: return "electron_density";
        case Quantity::LogDensity: return "log_density";
    }
    return "unknown";
}

Field::Field(int nx, int ny, Quantity q, double fill)
    : nx_(nx), ny_(ny), quantity_(q), values_(static_cast<std::size_t>(nx) * ny, fill) {
    if (nx < 1 || ny < 1) throw std::invalid_argument("field dimensions must be positive");
}

Field::Field(const Grid& grid, Quantity q, double fill) : Field(grid.nx(), grid.ny(), q, fill) {}

bool Field::matches(const Grid& grid) const { return nx_ == grid.nx() && ny_ == grid.ny(); }

Field log_density(const Field& density) {
    if (density.quantity() != Quantity::ElectronDensity)
        throw std::invalid_argument("log_density expects an electron density field");
    Field out(density.nx(), density.ny(), Quantity::LogDensity);
    for (std::size_t k = 0; k < density.size(); ++k) out[k] = std::log10(std::max(density[k], density_floor));
    return out;
}

double max_abs_difference(const Field& a, const Field& b) {
    if (!a.same_shape(b)) throw std::invalid_argument("field shape mismatch");
    double m = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) m = std::max(m, std::abs(a[k] - b[k]));
    return m;
}

}  // namespace greenflow
