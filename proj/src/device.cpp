#include "greenflow/device.hpp"

#include "greenflow/constants.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <map>
#include <sstream>
#include <stdexcept>

namespace greenflow {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

double parse_number(const std::string& key, const std::string& text) {
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(text, &used);
    } catch (const std::exception&) {
        throw std::invalid_argument("config key '" + key + "': not a number: '" + text + "'");
    }
    if (used != text.size())
        throw std::invalid_argument("config key '" + key + "': trailing characters in '" + text + "'");
    return v;
}

// Number of grid cells spanned by `length`, or throws naming the dimension.
int cells(const char* name, double length, double spacing) {
    const double ratio = length / spacing;
    const double rounded = std::round(ratio);
    if (std::abs(ratio - rounded) * spacing > 1e-9 || rounded < 1.0) {
        std::ostringstream msg;
        msg << "grid spacing " << spacing << " nm does not divide " << name << " = " << length << " nm";
        throw std::invalid_argument(msg.str());
    }
    return static_cast<int>(rounded);
}

}  // namespace

void DeviceSpec::validate() const {
    auto positive = [](const char* name, double v) {
        if (!(v > 0.0) || !std::isfinite(v))
            throw std::invalid_argument(std::string(name) + " must be positive");
    };
    positive("channel_length", channel_length);
    positive("sd_length", sd_length);
    positive("body_thickness_y", body_thickness_y);
    positive("oxide_thickness", oxide_thickness);
    positive("width_z", width_z);
    positive("channel_doping", channel_doping);
    positive("sd_doping", sd_doping);
    positive("effective_mass_ratio", effective_mass_ratio);
    positive("temperature", temperature);
    positive("grid_spacing", grid_spacing);
    cells("sd_length", sd_length, grid_spacing);
    cells("channel_length", channel_length, grid_spacing);
    cells("oxide_thickness", oxide_thickness, grid_spacing);
    if (cells("body_thickness_y", body_thickness_y, grid_spacing) < 2)
        throw std::invalid_argument("body_thickness_y must span at least two grid cells");
}

DeviceSpec default_device_spec() {
    DeviceSpec spec;
    spec.contact_fermi_level = 0.5258981806;
    return spec;
}

DeviceSpec parse_device_config(std::istream& in) {
    DeviceSpec spec;
    const std::map<std::string, double DeviceSpec::*> fields = {
        {"channel_length", &DeviceSpec::channel_length},
        {"sd_length", &DeviceSpec::sd_length},
        {"body_thickness_y", &DeviceSpec::body_thickness_y},
        {"oxide_thickness", &DeviceSpec::oxide_thickness},
        {"width_z", &DeviceSpec::width_z},
        {"channel_doping", &DeviceSpec::channel_doping},
        {"sd_doping", &DeviceSpec::sd_doping},
        {"gate_workfunction_offset", &DeviceSpec::gate_workfunction_offset},
        {"effective_mass_ratio", &DeviceSpec::effective_mass_ratio},
        {"temperature", &DeviceSpec::temperature},
        {"grid_spacing", &DeviceSpec::grid_spacing},
    };
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("config line " + std::to_string(lineno) + ": expected 'key = value'");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key == "contact_fermi_level") {
            spec.contact_fermi_level = parse_number(key, value);
        } else if (auto it = fields.find(key); it != fields.end()) {
            spec.*(it->second) = parse_number(key, value);
        } else {
            throw std::invalid_argument("config line " + std::to_string(lineno) + ": unknown key '" + key + "'");
        }
    }
    spec.validate();
    return spec;
}

DeviceSpec load_device_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open device config " + path.string());
    return parse_device_config(in);
}

std::string to_config_text(const DeviceSpec& spec) {
    std::ostringstream out;
    out << std::setprecision(17);
    out << "channel_length = " << spec.channel_length << '\n'
        << "sd_length = " << spec.sd_length << '\n'
        << "body_thickness_y = " << spec.body_thickness_y << '\n'
        << "oxide_thickness = " << spec.oxide_thickness << '\n'
        << "width_z = " << spec.width_z << '\n'
        << "channel_doping = " << spec.channel_doping << '\n'
        << "sd_doping = " << spec.sd_doping << '\n'
        << "gate_workfunction_offset = " << spec.gate_workfunction_offset << '\n'
        << "effective_mass_ratio = " << spec.effective_mass_ratio << '\n'
        << "temperature = " << spec.temperature << '\n'
        << "grid_spacing = " << spec.grid_spacing << '\n';
    if (spec.contact_fermi_level) out << "contact_fermi_level = " << *spec.contact_fermi_level << '\n';
    return out.str();
}

char region_code(Region r) {
    switch (r) {
        case Region::Source: return 'S';
        case Region::Channel: return 'C';
        case Region::Drain: return 'D';
        case Region::Oxide: return 'O';
    }
    return '?';
}

Grid build_device(const DeviceSpec& spec) {
    spec.validate();
    const double a = spec.grid_spacing;
    const int n_sd = cells("sd_length", spec.sd_length, a);
    const int n_ch = cells("channel_length", spec.channel_length, a);
    const int n_ox = cells("oxide_thickness", spec.oxide_thickness, a);
    const int n_body = cells("body_thickness_y", spec.body_thickness_y, a);

    Grid g;
    g.spec_ = spec;
    g.spacing_ = a;
    g.nx_ = 2 * n_sd + n_ch + 1;
    g.ny_ = 2 * n_ox + n_body + 1;
    g.first_si_row_ = n_ox + 1;
    g.si_rows_ = n_body - 1;

    const int n = g.nx_ * g.ny_;
    g.regions_.assign(n, Region::Oxide);
    g.gate_.assign(n, 0);
    g.donors_.assign(n, 0.0);
    g.permittivity_.assign(n, constants::eps_oxide);

    const int gate_begin = n_sd;
    const int gate_end = n_sd + n_ch;  // inclusive
    for (int ix = 0; ix < g.nx_; ++ix) {
        const Region column = ix < gate_begin ? Region::Source : ix <= gate_end ? Region::Channel : Region::Drain;
        for (int iy = 0; iy < g.ny_; ++iy) {
            const int k = g.index(ix, iy);
            const bool si = iy >= g.first_si_row_ && iy < g.first_si_row_ + g.si_rows_;
            if (si) {
                g.regions_[k] = column;
                g.permittivity_[k] = constants::eps_silicon;
                g.donors_[k] = column == Region::Channel ? spec.channel_doping : spec.sd_doping;
            }
            if ((iy == 0 || iy == g.ny_ - 1) && ix >= gate_begin && ix <= gate_end) g.gate_[k] = 1;
        }
    }
    return g;
}

DeviceSpec reconstruct_spec(const Grid& grid) {
    DeviceSpec spec = grid.spec();
    const double a = grid.spacing();
    const int mid = grid.first_silicon_row();
    int source = 0;
    int channel = 0;
    for (int ix = 0; ix < grid.nx(); ++ix) {
        source += grid.region(ix, mid) == Region::Source;
        channel += grid.region(ix, mid) == Region::Channel;
    }
    spec.sd_length = source * a;
    spec.channel_length = (channel - 1) * a;
    spec.body_thickness_y = (grid.silicon_rows() + 1) * a;
    spec.oxide_thickness = (grid.first_silicon_row() - 1) * a;
    spec.grid_spacing = a;
    return spec;
}

void write_grid(std::ostream& out, const Grid& grid) {
    out << "# greenflow grid v1\n";
    out << to_config_text(grid.spec());
    out << "nx = " << grid.nx() << "\nny = " << grid.ny() << '\n';
    out << "[regions]\n";
    for (int iy = 0; iy < grid.ny(); ++iy) {
        for (int ix = 0; ix < grid.nx(); ++ix)
            out << (grid.gate_contact(ix, iy) ? 'G' : region_code(grid.region(ix, iy)));
        out << '\n';
    }
    out << std::setprecision(17) << "[donors]\n";
    for (int iy = 0; iy < grid.ny(); ++iy) {
        for (int ix = 0; ix < grid.nx(); ++ix) out << (ix ? " " : "") << grid.donor_density(ix, iy);
        out << '\n';
    }
    out << "[permittivity]\n";
    for (int iy = 0; iy < grid.ny(); ++iy) {
        for (int ix = 0; ix < grid.nx(); ++ix) out << (ix ? " " : "") << grid.permittivity(ix, iy);
        out << '\n';
    }
}

Grid read_grid(std::istream& in) {
    std::ostringstream header;
    std::string line;
    while (std::getline(in, line) && line != "[regions]") {
        if (line.rfind("nx", 0) == 0 || line.rfind("ny", 0) == 0) continue;
        header << line << '\n';
    }
    if (line != "[regions]") throw std::runtime_error("grid file: missing [regions] section");
    std::istringstream hs(header.str());
    Grid g = build_device(parse_device_config(hs));

    std::vector<std::string> rows;
    for (int iy = 0; iy < g.ny(); ++iy) {
        if (!std::getline(in, line) || static_cast<int>(line.size()) != g.nx())
            throw std::runtime_error("grid file: region map does not match the stored spec");
        for (int ix = 0; ix < g.nx(); ++ix) {
            const char expect = g.gate_contact(ix, iy) ? 'G' : region_code(g.region(ix, iy));
            if (line[ix] != expect) throw std::runtime_error("grid file: region map does not match the stored spec");
        }
    }
    return g;
}

}  // namespace greenflow
