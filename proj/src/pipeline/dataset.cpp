#include "greenflow/binary_io.hpp"
#include "greenflow/nn/random.hpp"
#include "greenflow/parallel.hpp"
#include "greenflow/pipeline.hpp"

#include <spdlog/spdlog.h>

#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>

namespace greenflow {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

// Values are snapped to 1e-9 V so that ranges print cleanly.
double snap(double v) { return std::round(v * 1e9) / 1e9; }

std::map<std::string, std::string> key_values(std::istringstream& line) {
    std::map<std::string, std::string> kv;
    std::string tok;
    while (line >> tok) {
        const auto eq = tok.find('=');
        if (eq == std::string::npos) throw std::runtime_error("dataset manifest: malformed token '" + tok + "'");
        kv[tok.substr(0, eq)] = tok.substr(eq + 1);
    }
    return kv;
}

const std::string& need(const std::map<std::string, std::string>& kv, const std::string& key) {
    const auto it = kv.find(key);
    if (it == kv.end()) throw std::runtime_error("dataset manifest: missing " + key);
    return it->second;
}

std::string sample_file(std::size_t i) {
    std::ostringstream s;
    s << "samples/sample_" << std::setw(4) << std::setfill('0') << i << ".bin";
    return s.str();
}

constexpr const char* magic = "greenflow-dataset 1";

}  // namespace

std::vector<double> parse_values(const std::string& text) {
    const std::string t = trim(text);
    if (t.empty()) throw std::invalid_argument("sweep: empty value list");
    std::vector<double> out;
    if (t.find(':') != std::string::npos) {
        std::vector<double> parts;
        std::stringstream ss(t);
        std::string item;
        while (std::getline(ss, item, ':')) parts.push_back(std::stod(trim(item)));
        if (parts.size() != 3 || !(parts[1] > 0.0) || parts[2] < parts[0])
            throw std::invalid_argument("sweep: range must be start:step:stop with step > 0");
        const long n = std::lround((parts[2] - parts[0]) / parts[1]) + 1;
        for (long i = 0; i < n; ++i) out.push_back(snap(parts[0] + i * parts[1]));
    } else {
        std::stringstream ss(t);
        std::string item;
        while (std::getline(ss, item, ',')) out.push_back(snap(std::stod(trim(item))));
    }
    return out;
}

Sweep parse_sweep(std::istream& in) {
    Sweep s;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        line = trim(line.substr(0, line.find('#')));
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw std::invalid_argument("sweep line " + std::to_string(lineno) + ": expected key = values");
        const std::string key = trim(line.substr(0, eq));
        if (key == "vg")
            s.vg = parse_values(line.substr(eq + 1));
        else if (key == "vd")
            s.vd = parse_values(line.substr(eq + 1));
        else
            throw std::invalid_argument("sweep line " + std::to_string(lineno) + ": unknown key '" + key + "'");
    }
    if (s.vg.empty() || s.vd.empty()) throw std::invalid_argument("sweep: both vg and vd must be given");
    return s;
}

Sweep load_sweep(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open sweep file " + path.string());
    return parse_sweep(in);
}

std::string config_hash(const DeviceSpec& spec) { return hex64(fnv1a(to_config_text(spec))); }

std::size_t Dataset::train_count() const {
    std::size_t n = 0;
    for (const Sample& s : samples) n += s.train ? 1 : 0;
    return n;
}

std::vector<std::size_t> Dataset::indices(bool train) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < samples.size(); ++i)
        if (samples[i].train == train) out.push_back(i);
    return out;
}

Sample make_sample(const ScfResult& cold, double vg, double vd, int multiple) {
    const Snapshot& first = record_snapshot(cold, 1);
    const EncodedInput e = build_input(first.potential, first.density, vg, vd, multiple);
    Sample s;
    s.vg = vg;
    s.vd = vd;
    s.input = e.image;
    s.potential = e.potential;
    s.log_charge = e.log_charge;
    s.target_potential = encode_target(cold.potential, e.potential, e.image.h(), e.image.w());
    s.target_charge = encode_target(cold.density, e.log_charge, e.image.h(), e.image.w());
    s.first_snapshot = 1;
    s.final_snapshot = cold.iterations;
    return s;
}

void assign_split(Dataset& ds, std::uint64_t seed, double train_fraction) {
    std::vector<std::size_t> order(ds.samples.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::mt19937_64 rng(seed);
    nn::shuffle(order, rng);
    const auto n_train = static_cast<std::size_t>(std::lround(train_fraction * static_cast<double>(order.size())));
    for (std::size_t k = 0; k < order.size(); ++k) ds.samples[order[k]].train = k < n_train;
}

Dataset build_dataset(const DeviceSpec& spec, const Sweep& sweep, std::uint64_t seed, const ScfConfig& cfg) {
    if (sweep.vg.empty() || sweep.vd.empty()) throw std::invalid_argument("build_dataset: empty sweep");
    const Grid grid = build_device(spec);
    const ScfSolver solver(grid);
    ScfConfig run_cfg = cfg;
    run_cfg.record_snapshots = true;

    std::vector<BiasPoint> points;
    for (double vd : sweep.vd)
        for (double vg : sweep.vg) points.push_back({vg, vd});
    std::vector<std::optional<Sample>> slots(points.size());
    parallel_for(points.size(), [&](std::size_t i) {
        const ScfResult r = solver.run(points[i].vg, points[i].vd, std::nullopt, run_cfg);
        spdlog::debug("dataset: vg={} vd={} iterations={} converged={}", points[i].vg, points[i].vd, r.iterations,
                      r.converged);
        if (r.converged) slots[i] = make_sample(r, points[i].vg, points[i].vd);
    });

    Dataset ds;
    ds.seed = seed;
    ds.device = spec;
    ds.config_hash = config_hash(spec);
    ds.height = grid.ny();
    ds.width = grid.nx();
    for (std::size_t i = 0; i < points.size(); ++i) {
        if (slots[i]) {
            ds.samples.push_back(std::move(*slots[i]));
        } else {
            spdlog::warn("dataset: excluding vg={} vd={} (SCF did not converge)", points[i].vg, points[i].vd);
            ds.excluded.push_back(points[i]);
        }
    }
    if (ds.samples.empty()) throw std::runtime_error("build_dataset: no bias point converged");
    assign_split(ds, seed);
    spdlog::info("dataset: {} samples ({} train, {} test), {} excluded", ds.samples.size(), ds.train_count(),
                 ds.samples.size() - ds.train_count(), ds.excluded.size());
    return ds;
}

void save_dataset(const Dataset& ds, const std::filesystem::path& dir) {
    if (ds.samples.empty()) throw std::invalid_argument("save_dataset: empty dataset");
    std::filesystem::create_directories(dir / "samples");
    const nn::Tensor4& first = ds.samples.front().input;
    std::ofstream m(dir / "manifest.txt", std::ios::trunc);
    if (!m) throw std::runtime_error("cannot write " + (dir / "manifest.txt").string());
    m << magic << "\n"
      << "seed " << ds.seed << "\n"
      << "config_hash " << ds.config_hash << "\n"
      << "image height=" << ds.height << " width=" << ds.width << " padded_height=" << first.h()
      << " padded_width=" << first.w() << "\n"
      << "channels";
    for (const auto& c : channel_names()) m << " " << c;
    m << "\ntargets potential log_charge\n"
      << "dtype f64-le\n"
      << "samples " << ds.samples.size() << "\n";
    for (std::size_t i = 0; i < ds.samples.size(); ++i) {
        const Sample& s = ds.samples[i];
        m << "sample vg=" << format_double(s.vg) << " vd=" << format_double(s.vd)
          << " split=" << (s.train ? "train" : "test") << " first=" << s.first_snapshot << " final=" << s.final_snapshot
          << " potential_mean=" << format_double(s.potential.mean) << " potential_std=" << format_double(s.potential.std)
          << " charge_mean=" << format_double(s.log_charge.mean) << " charge_std=" << format_double(s.log_charge.std)
          << " file=" << sample_file(i) << "\n";
        std::ofstream b(dir / sample_file(i), std::ios::binary | std::ios::trunc);
        write_f64_le(b, s.input.values());
        write_f64_le(b, s.target_potential.values());
        write_f64_le(b, s.target_charge.values());
    }
    m << "excluded " << ds.excluded.size() << "\n";
    for (const BiasPoint& p : ds.excluded) m << "exclude vg=" << format_double(p.vg) << " vd=" << format_double(p.vd) << "\n";
    std::ofstream cfg(dir / "device.cfg", std::ios::trunc);
    cfg << to_config_text(ds.device);
}

Dataset load_dataset(const std::filesystem::path& dir) {
    std::ifstream m(dir / "manifest.txt");
    if (!m) throw std::runtime_error("cannot open " + (dir / "manifest.txt").string());
    std::string line, word;
    std::getline(m, line);
    if (line != magic) throw std::runtime_error("dataset manifest: unrecognised header");

    Dataset ds;
    ds.device = load_device_config(dir / "device.cfg");
    int ph = 0, pw = 0;
    std::size_t count = 0;
    while (std::getline(m, line)) {
        std::istringstream ls(line);
        ls >> word;
        if (word == "seed") {
            ls >> ds.seed;
        } else if (word == "config_hash") {
            ls >> ds.config_hash;
        } else if (word == "image") {
            const auto kv = key_values(ls);
            ds.height = std::stoi(need(kv, "height"));
            ds.width = std::stoi(need(kv, "width"));
            ph = std::stoi(need(kv, "padded_height"));
            pw = std::stoi(need(kv, "padded_width"));
        } else if (word == "channels") {
            std::vector<std::string> names;
            while (ls >> word) names.push_back(word);
            if (names != channel_names()) throw std::runtime_error("dataset manifest: unexpected channel order");
        } else if (word == "samples") {
            ls >> count;
        } else if (word == "sample") {
            const auto kv = key_values(ls);
            Sample s;
            s.vg = std::stod(need(kv, "vg"));
            s.vd = std::stod(need(kv, "vd"));
            s.train = need(kv, "split") == "train";
            s.first_snapshot = std::stoi(need(kv, "first"));
            s.final_snapshot = std::stoi(need(kv, "final"));
            s.potential = {std::stod(need(kv, "potential_mean")), std::stod(need(kv, "potential_std"))};
            s.log_charge = {std::stod(need(kv, "charge_mean")), std::stod(need(kv, "charge_std"))};
            std::ifstream b(dir / need(kv, "file"), std::ios::binary);
            if (!b) throw std::runtime_error("cannot open sample " + need(kv, "file"));
            s.input = nn::Tensor4(1, input_channels, ph, pw);
            s.target_potential = nn::Tensor4(1, 1, ph, pw);
            s.target_charge = nn::Tensor4(1, 1, ph, pw);
            for (nn::Tensor4* t : {&s.input, &s.target_potential, &s.target_charge}) {
                const auto v = read_f64_le(b, t->size());
                std::copy(v.begin(), v.end(), t->data());
            }
            ds.samples.push_back(std::move(s));
        } else if (word == "exclude") {
            const auto kv = key_values(ls);
            ds.excluded.push_back({std::stod(need(kv, "vg")), std::stod(need(kv, "vd"))});
        }
    }
    if (ds.samples.size() != count || count == 0) throw std::runtime_error("dataset manifest: sample count mismatch");
    if (ds.config_hash != config_hash(ds.device)) throw std::runtime_error("dataset: device.cfg does not match config_hash");
    return ds;
}

}  // namespace greenflow
