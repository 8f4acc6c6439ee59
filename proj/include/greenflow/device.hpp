#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace greenflow {

/// Geometry, doping and material parameters of the gate-all-around nanosheet.
/// Lengths in nm, dopings in cm^-3, voltages in V, energies in eV.
struct DeviceSpec {
    double channel_length = 16.0;
    double sd_length = 3.0;
    double body_thickness_y = 3.0;
    double oxide_thickness = 1.0;
    /// Translationally invariant sheet width along z.
    double width_z = 12.0;
    double channel_doping = 1e15;
    double sd_doping = 1e20;
    double gate_workfunction_offset = 0.68;
    double effective_mass_ratio = 0.19;
    double temperature = 300.0;
    double grid_spacing = 0.5;
    /// Source Fermi level relative to the flat-band conduction edge. Derived
    /// from contact neutrality when absent.
    std::optional<double> contact_fermi_level;

    double total_length() const { return 2.0 * sd_length + channel_length; }

    /// Throws std::invalid_argument when an invariant is violated.
    void validate() const;
};

/// Defaults with the contact Fermi level frozen (same values as
/// config/default_device.cfg).
DeviceSpec default_device_spec();

DeviceSpec parse_device_config(std::istream& in);
DeviceSpec load_device_config(const std::filesystem::path& path);
std::string to_config_text(const DeviceSpec& spec);

enum class Region : std::uint8_t { Source, Channel, Drain, Oxide };

char region_code(Region r);

/// Uniform node grid over the XY plane. Nodes are indexed (ix, iy) with x
/// along transport and y across the body; storage is x-major so one column
/// (a transport slice) is contiguous.
class Grid {
public:
    Grid() = default;

    int nx() const { return nx_; }
    int ny() const { return ny_; }
    int size() const { return nx_ * ny_; }
    double spacing() const { return spacing_; }
    int index(int ix, int iy) const { return ix * ny_ + iy; }

    Region region(int ix, int iy) const { return regions_[index(ix, iy)]; }
    bool is_silicon(int ix, int iy) const { return region(ix, iy) != Region::Oxide; }
    bool gate_contact(int ix, int iy) const { return gate_[index(ix, iy)] != 0; }
    double donor_density(int ix, int iy) const { return donors_[index(ix, iy)]; }
    double permittivity(int ix, int iy) const { return permittivity_[index(ix, iy)]; }

    const std::vector<double>& permittivities() const { return permittivity_; }

    /// Silicon occupies the contiguous rows [first_silicon_row, first_silicon_row + silicon_rows).
    int first_silicon_row() const { return first_si_row_; }
    int silicon_rows() const { return si_rows_; }

    const DeviceSpec& spec() const { return spec_; }

private:
    friend Grid build_device(const DeviceSpec& spec);
    friend Grid read_grid(std::istream& in);

    int nx_ = 0;
    int ny_ = 0;
    double spacing_ = 0.0;
    int first_si_row_ = 0;
    int si_rows_ = 0;
    std::vector<Region> regions_;
    std::vector<std::uint8_t> gate_;
    std::vector<double> donors_;
    std::vector<double> permittivity_;
    DeviceSpec spec_;
};

/// Discretizes the device. Silicon nodes are the interior body rows; the
/// body/oxide interface rows belong to the oxide so the hard wall of the
/// transport Hamiltonian sits exactly body_thickness_y apart.
Grid build_device(const DeviceSpec& spec);

/// Recovers the geometric part of the spec from tag runs in the grid.
DeviceSpec reconstruct_spec(const Grid& grid);

void write_grid(std::ostream& out, const Grid& grid);
Grid read_grid(std::istream& in);

}  // namespace greenflow
