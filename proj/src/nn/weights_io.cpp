#include "greenflow/binary_io.hpp"
#include "greenflow/nn/model.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace greenflow::nn {

namespace {

constexpr const char* magic = "greenflow-weights 1";

std::string join(const std::vector<int>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
    return s;
}

std::vector<int> split_ints(const std::string& s) {
    std::vector<int> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(std::stoi(item));
    return out;
}

std::string exact(double v) {
    char buf[32];
    const auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
}

// "key=value" tokens of one manifest line.
std::string field(std::istringstream& line, const std::string& key) {
    std::string tok;
    if (!(line >> tok) || tok.rfind(key + "=", 0) != 0)
        throw std::runtime_error("weights manifest: expected " + key + "=...");
    return tok.substr(key.size() + 1);
}

}  // namespace

void save_model(const Model& model, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    const Architecture& a = model.architecture();
    std::ofstream manifest(dir / "manifest.txt", std::ios::trunc);
    std::ofstream blob(dir / "weights.bin", std::ios::binary | std::ios::trunc);
    if (!manifest || !blob) throw std::runtime_error("cannot write model to " + dir.string());
    manifest << magic << "\n"
             << "dtype f64-le\n"
             << "architecture in_channels=" << a.in_channels << " encoder=" << join(a.encoder_widths)
             << " decoder=" << join(a.decoder_widths) << " kernel=" << a.kernel << " dropout=" << exact(a.dropout)
             << " slope=" << exact(a.leaky_slope) << " momentum=" << exact(a.bn_momentum)
             << " residual=" << a.residual_channel << "\n";
    std::size_t offset = 0;
    for (const Param& p : model.params()) {
        manifest << "param " << p.name << " trainable=" << (p.trainable ? 1 : 0) << " dims=" << join(p.dims)
                 << " offset=" << offset << " count=" << p.value.size() << "\n";
        write_f64_le(blob, p.value);
        offset += p.value.size() * 8;
    }
}

Model load_model(const std::filesystem::path& dir) {
    std::ifstream manifest(dir / "manifest.txt");
    if (!manifest) throw std::runtime_error("cannot open " + (dir / "manifest.txt").string());
    std::string line;
    std::getline(manifest, line);
    if (line != magic) throw std::runtime_error("weights manifest: unrecognised header");
    std::getline(manifest, line);
    if (line != "dtype f64-le") throw std::runtime_error("weights manifest: unsupported dtype");

    std::getline(manifest, line);
    std::istringstream arch_line(line);
    std::string word;
    arch_line >> word;
    if (word != "architecture") throw std::runtime_error("weights manifest: missing architecture line");
    Architecture a;
    a.in_channels = std::stoi(field(arch_line, "in_channels"));
    a.encoder_widths = split_ints(field(arch_line, "encoder"));
    a.decoder_widths = split_ints(field(arch_line, "decoder"));
    a.kernel = std::stoi(field(arch_line, "kernel"));
    a.dropout = std::stod(field(arch_line, "dropout"));
    a.leaky_slope = std::stod(field(arch_line, "slope"));
    a.bn_momentum = std::stod(field(arch_line, "momentum"));
    a.residual_channel = std::stoi(field(arch_line, "residual"));

    Model model(a, 0);
    std::ifstream blob(dir / "weights.bin", std::ios::binary);
    if (!blob) throw std::runtime_error("cannot open " + (dir / "weights.bin").string());
    for (Param& p : model.params()) {
        if (!std::getline(manifest, line)) throw std::runtime_error("weights manifest: missing parameter " + p.name);
        std::istringstream ls(line);
        std::string kind, name;
        ls >> kind >> name;
        if (kind != "param" || name != p.name)
            throw std::runtime_error("weights manifest: expected parameter " + p.name + ", found '" + name + "'");
        field(ls, "trainable");
        if (split_ints(field(ls, "dims")) != p.dims) throw std::runtime_error("weights manifest: dims mismatch for " + p.name);
        const auto offset = std::stoull(field(ls, "offset"));
        const auto count = std::stoull(field(ls, "count"));
        if (count != p.value.size()) throw std::runtime_error("weights manifest: count mismatch for " + p.name);
        blob.seekg(static_cast<std::streamoff>(offset));
        p.value = read_f64_le(blob, count);
    }
    return model;
}

}  // namespace greenflow::nn
