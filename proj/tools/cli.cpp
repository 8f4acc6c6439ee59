#include "cli.hpp"

#include "greenflow/binary_io.hpp"
#include "greenflow/device.hpp"
#include "greenflow/pipeline.hpp"
#include "greenflow/scf.hpp"

#include <CLI11.hpp>
#include <json.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

namespace greenflow::cli {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

struct NumericalFailure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ScfFlags {
    double alpha = 0.3;
    double tol = 1e-4;
    int max_iter = 100;
    int energy_points = 400;

    void attach(CLI::App& app) {
        app.add_option("--alpha", alpha, "Potential mixing factor")->capture_default_str();
        app.add_option("--tol", tol, "Convergence tolerance on the potential update (V)")->capture_default_str();
        app.add_option("--max-iter", max_iter, "Maximum SCF iterations")->capture_default_str();
        app.add_option("--energy-points", energy_points, "Energy grid points per NEGF solve")->capture_default_str();
    }
    ScfConfig config() const {
        ScfConfig c;
        c.mixing_alpha = alpha;
        c.tol_potential = tol;
        c.max_iterations = max_iter;
        c.negf.energy_points = energy_points;
        return c;
    }
    json to_json() const {
        return {{"mixing_alpha", alpha}, {"tol_potential", tol}, {"max_iterations", max_iter},
                {"energy_points", energy_points}};
    }
};

json spec_json(const DeviceSpec& s) {
    json j = {{"channel_length", s.channel_length},
              {"sd_length", s.sd_length},
              {"body_thickness_y", s.body_thickness_y},
              {"oxide_thickness", s.oxide_thickness},
              {"width_z", s.width_z},
              {"channel_doping", s.channel_doping},
              {"sd_doping", s.sd_doping},
              {"gate_workfunction_offset", s.gate_workfunction_offset},
              {"effective_mass_ratio", s.effective_mass_ratio},
              {"temperature", s.temperature},
              {"grid_spacing", s.grid_spacing}};
    j["contact_fermi_level"] = s.contact_fermi_level ? json(*s.contact_fermi_level) : json(nullptr);
    return j;
}

// One manifest per output directory; everything except "timings" is a
// function of the inputs.
class Manifest {
public:
    Manifest(std::string subcommand, fs::path dir) : dir_(std::move(dir)), start_(std::chrono::steady_clock::now()) {
        doc_["subcommand"] = std::move(subcommand);
        doc_["config"] = json::object();
        doc_["seeds"] = json::object();
        doc_["artifacts"] = json::object();
    }
    json& config() { return doc_["config"]; }
    json& seeds() { return doc_["seeds"]; }
    void artifact(const fs::path& file) {
        if (fs::is_directory(file)) {
            std::vector<fs::path> files;
            for (const auto& e : fs::recursive_directory_iterator(file))
                if (e.is_regular_file()) files.push_back(e.path());
            std::sort(files.begin(), files.end());
            for (const auto& f : files) doc_["artifacts"][fs::relative(f, dir_).generic_string()] = file_hash(f);
        } else {
            doc_["artifacts"][fs::relative(file, dir_).generic_string()] = file_hash(file);
        }
    }
    void write() {
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
        doc_["timings"] = {{"wall_seconds", secs}};
        std::ofstream out(dir_ / "run_manifest.json", std::ios::trunc);
        out << doc_.dump(2) << '\n';
    }

private:
    fs::path dir_;
    std::chrono::steady_clock::time_point start_;
    json doc_;
};

fs::path parent_dir(const fs::path& file) {
    const fs::path p = file.parent_path();
    return p.empty() ? fs::path(".") : p;
}

void ensure_dir(const fs::path& dir) { fs::create_directories(dir); }

std::ofstream open_out(const fs::path& file) {
    std::ofstream out(file, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + file.string());
    return out;
}

void write_field_csv(const Field& f, double spacing, const fs::path& file) {
    std::ofstream out = open_out(file);
    out << "x_nm,y_nm," << quantity_name(f.quantity()) << '\n';
    for (int ix = 0; ix < f.nx(); ++ix)
        for (int iy = 0; iy < f.ny(); ++iy)
            out << format_double(ix * spacing) << ',' << format_double(iy * spacing) << ',' << format_double(f(ix, iy))
                << '\n';
}

int cmd_generate(const std::string& config, const fs::path& out_dir) {
    Manifest m("generate", out_dir);
    const DeviceSpec spec = load_device_config(config);
    const Grid grid = build_device(spec);
    ensure_dir(out_dir);
    {
        std::ofstream out = open_out(out_dir / "grid.txt");
        write_grid(out, grid);
    }
    m.config()["device"] = spec_json(spec);
    m.artifact(out_dir / "grid.txt");
    m.write();
    spdlog::info("generate: {} x {} grid written to {}", grid.nx(), grid.ny(), (out_dir / "grid.txt").string());
    return Ok;
}

int cmd_simulate(const std::string& config, double vg, double vd, const fs::path& warm_start, const ScfFlags& flags,
                 const fs::path& out_dir) {
    Manifest m("simulate", out_dir);
    const DeviceSpec spec = load_device_config(config);
    const Grid grid = build_device(spec);
    const ScfSolver solver(grid);
    ScfResult r;
    if (warm_start.empty()) {
        r = solver.run(vg, vd, std::nullopt, flags.config());
    } else {
        const auto [pm, cm] = load_models(warm_start);
        r = warm_start_run(pm, cm, solver, vg, vd, flags.config());
    }
    ensure_dir(out_dir);
    json res = {{"vg", vg},
                {"vd", vd},
                {"warm_start", !warm_start.empty()},
                {"converged", r.converged},
                {"iterations", r.iterations},
                {"current_A", r.current},
                {"trace", r.trace}};
    open_out(out_dir / "result.json") << res.dump(2) << '\n';
    write_field_csv(r.potential, grid.spacing(), out_dir / "potential.csv");
    write_field_csv(r.density, grid.spacing(), out_dir / "density.csv");
    m.config()["device"] = spec_json(spec);
    m.config()["bias"] = {{"vg", vg}, {"vd", vd}};
    m.config()["scf"] = flags.to_json();
    if (!warm_start.empty()) m.config()["warm_start"] = warm_start.generic_string();
    for (const char* f : {"result.json", "potential.csv", "density.csv"}) m.artifact(out_dir / f);
    m.write();
    spdlog::info("simulate: vg={} vd={} iterations={} current={:.4e} A", vg, vd, r.iterations, r.current);
    if (!r.converged)
        throw NumericalFailure("SCF did not converge in " + std::to_string(r.iterations) + " iterations (last update " +
                               format_double(r.trace.back()) + " V)");
    return Ok;
}

int cmd_iv(const std::string& config, double vd, const std::string& vg_spec, const ScfFlags& flags,
           const fs::path& out_file) {
    const fs::path dir = parent_dir(out_file);
    Manifest m("iv", dir);
    const DeviceSpec spec = load_device_config(config);
    const Grid grid = build_device(spec);
    const ScfSolver solver(grid);
    const std::vector<double> vg = parse_values(vg_spec);
    const auto curve = iv_sweep(solver, vg, vd, flags.config());
    ensure_dir(dir);
    {
        std::ofstream out = open_out(out_file);
        write_iv_csv(curve, vd, out);
    }
    m.config()["device"] = spec_json(spec);
    m.config()["vd"] = vd;
    m.config()["vg"] = vg;
    m.config()["scf"] = flags.to_json();
    m.artifact(out_file);
    m.write();
    int failed = 0;
    for (const IvPoint& p : curve) failed += p.converged ? 0 : 1;
    if (failed) throw NumericalFailure(std::to_string(failed) + " bias points did not converge");
    return Ok;
}

int cmd_fom(const fs::path& iv_file, const std::string& config) {
    std::ifstream in(iv_file);
    if (!in) throw std::invalid_argument("cannot open " + iv_file.string());
    const auto curve = read_iv_csv(in);
    const DeviceSpec spec = config.empty() ? default_device_spec() : load_device_config(config);
    const FiguresOfMerit f = extract_fom(curve, threshold_current(spec));
    std::cout << "I_OFF_A " << format_double(f.i_off) << "\nI_ON_A " << format_double(f.i_on) << "\nSS_mV_per_dec "
              << format_double(f.ss) << "\nV_TH_V " << format_double(f.v_th) << '\n';
    return Ok;
}

int cmd_dataset_build(const std::string& config, const fs::path& sweep_file, std::uint64_t seed,
                      const ScfFlags& flags, const fs::path& out_dir) {
    Manifest m("dataset build", out_dir);
    const DeviceSpec spec = load_device_config(config);
    const Sweep sweep = load_sweep(sweep_file);
    const Dataset ds = build_dataset(spec, sweep, seed, flags.config());
    ensure_dir(out_dir);
    save_dataset(ds, out_dir);
    m.config()["device"] = spec_json(spec);
    m.config()["sweep"] = {{"vg", sweep.vg}, {"vd", sweep.vd}};
    m.config()["scf"] = flags.to_json();
    m.seeds()["split"] = seed;
    for (const char* f : {"manifest.txt", "device.cfg"}) m.artifact(out_dir / f);
    m.artifact(out_dir / "samples");
    m.write();
    return Ok;
}

int cmd_train(const fs::path& dataset_dir, const TrainConfig& cfg, const fs::path& out_dir) {
    Manifest m("train", out_dir);
    const Dataset ds = load_dataset(dataset_dir);
    const TrainedModels models = train(ds, cfg);
    ensure_dir(out_dir);
    save_models(models, out_dir);
    m.config()["dataset"] = {{"config_hash", ds.config_hash}, {"samples", ds.samples.size()}, {"train", ds.train_count()}};
    m.config()["epochs"] = cfg.epochs;
    m.config()["lr"] = cfg.lr;
    m.config()["lr_final_fraction"] = cfg.lr_final_fraction;
    m.config()["batch_size"] = cfg.batch_size;
    m.config()["architecture"] = {{"encoder", cfg.arch.encoder_widths}, {"decoder", cfg.arch.decoder_widths},
                                  {"kernel", cfg.arch.kernel},          {"dropout", cfg.arch.dropout},
                                  {"leaky_slope", cfg.arch.leaky_slope}, {"bn_momentum", cfg.arch.bn_momentum}};
    m.seeds()["model"] = cfg.seed;
    m.seeds()["dataset_split"] = ds.seed;
    m.artifact(out_dir / "potential");
    m.artifact(out_dir / "charge");
    m.artifact(out_dir / "loss_history.csv");
    m.write();
    return Ok;
}

int cmd_benchmark(const fs::path& model_dir, const std::string& config, const std::string& vg_spec,
                  const std::string& vd_spec, const ScfFlags& flags, const fs::path& out_file) {
    const fs::path dir = parent_dir(out_file);
    Manifest m("benchmark", dir);
    const DeviceSpec spec = load_device_config(config);
    const auto [pm, cm] = load_models(model_dir);
    const Grid grid = build_device(spec);
    const ScfSolver solver(grid);
    const auto rows = benchmark(pm, cm, solver, parse_values(vg_spec), parse_values(vd_spec), flags.config());
    ensure_dir(dir);
    {
        std::ofstream out = open_out(out_file);
        write_benchmark_csv(rows, out);
    }
    double sum = 0.0;
    int failed = 0;
    for (const auto& r : rows) {
        sum += r.reduction_pct();
        failed += (r.converged_cold && r.converged_warm) ? 0 : 1;
    }
    spdlog::info("benchmark: {} rows, mean reduction {:.1f}%", rows.size(), sum / static_cast<double>(rows.size()));
    m.config()["device"] = spec_json(spec);
    m.config()["vg"] = parse_values(vg_spec);
    m.config()["vd"] = parse_values(vd_spec);
    m.config()["scf"] = flags.to_json();
    m.config()["model"] = {{"potential", file_hash(model_dir / "potential" / "weights.bin")},
                           {"charge", file_hash(model_dir / "charge" / "weights.bin")}};
    m.artifact(out_file);
    m.write();
    if (failed) throw NumericalFailure(std::to_string(failed) + " benchmark rows did not converge");
    return Ok;
}

}  // namespace

int run(const std::vector<std::string>& argv) {
    if (!spdlog::get("greenflow")) {
        auto logger = spdlog::stderr_color_mt("greenflow");
        spdlog::set_default_logger(logger);
    }
    if (const char* lvl = std::getenv("GREENFLOW_LOG")) spdlog::set_level(spdlog::level::from_str(lvl));

    CLI::App app{"Quantum transport simulator for gate-all-around nanosheets with learned warm starts"};
    app.name(argv.empty() ? "greenflow" : fs::path(argv[0]).filename().string());
    app.require_subcommand(1);

    std::string config, sweep_file, vg_spec = "0:0.025:0.8", bench_vg = "0:0.05:0.8", bench_vd = "0.05,0.7";
    fs::path out, dataset_dir, model_dir, iv_file, warm_start;
    double vg = 0.0, vd = 0.0;
    std::uint64_t seed = 1;
    ScfFlags flags;
    TrainConfig tcfg;

    auto* gen = app.add_subcommand("generate", "Build the device grid and write it to --out");
    gen->add_option("--config", config, "Device configuration file")->required()->check(CLI::ExistingFile);
    gen->add_option("--out", out, "Output directory")->required();

    auto* sim = app.add_subcommand("simulate", "Run one self-consistent bias point");
    sim->add_option("--config", config, "Device configuration file")->required()->check(CLI::ExistingFile);
    sim->add_option("--vg", vg, "Gate voltage (V)")->required();
    sim->add_option("--vd", vd, "Drain voltage (V)")->required();
    sim->add_option("--warm-start", warm_start, "Model directory; seed the loop with predicted fields")
        ->check(CLI::ExistingDirectory);
    sim->add_option("--out", out, "Output directory")->required();
    flags.attach(*sim);

    auto* iv = app.add_subcommand("iv", "Transfer characteristic at fixed drain bias");
    iv->add_option("--config", config, "Device configuration file")->required()->check(CLI::ExistingFile);
    iv->add_option("--vd", vd, "Drain voltage (V)")->required();
    iv->add_option("--vg", vg_spec, "Gate voltages: start:step:stop or a comma list")->capture_default_str();
    iv->add_option("--out", out, "Output CSV file")->required();
    flags.attach(*iv);

    auto* fom = app.add_subcommand("fom", "Print I_OFF, I_ON, SS and V_TH of an I-V CSV");
    fom->add_option("--iv", iv_file, "I-V CSV written by 'iv'")->required()->check(CLI::ExistingFile);
    fom->add_option("--config", config, "Device configuration (sets W/L of the threshold current)")
        ->check(CLI::ExistingFile);

    auto* dataset = app.add_subcommand("dataset", "Training data management");
    dataset->require_subcommand(1);
    auto* build = dataset->add_subcommand("build", "Run a bias sweep and store first/final SCF fields");
    build->add_option("--config", config, "Device configuration file")->required()->check(CLI::ExistingFile);
    build->add_option("--sweep", sweep_file, "Sweep file")->required()->check(CLI::ExistingFile);
    build->add_option("--seed", seed, "Split seed")->capture_default_str();
    build->add_option("--out", out, "Output directory")->required();
    flags.attach(*build);

    auto* tr = app.add_subcommand("train", "Train the potential and charge models");
    tr->add_option("--dataset", dataset_dir, "Dataset directory")->required()->check(CLI::ExistingDirectory);
    tr->add_option("--epochs", tcfg.epochs, "Training epochs")->capture_default_str();
    tr->add_option("--lr", tcfg.lr, "Adam learning rate")->capture_default_str();
    tr->add_option("--lr-final", tcfg.lr_final_fraction, "Final learning rate as a fraction of --lr (cosine decay)")
        ->capture_default_str();
    tr->add_option("--batch", tcfg.batch_size, "Minibatch size")->capture_default_str();
    tr->add_option("--kernel", tcfg.arch.kernel, "Convolution kernel size")->capture_default_str();
    tr->add_option("--dropout", tcfg.arch.dropout, "Dropout rate in every block")->capture_default_str();
    tr->add_option("--seed", tcfg.seed, "Model initialisation and shuffling seed")->capture_default_str();
    tr->add_option("--out", out, "Model output directory")->required();

    auto* bench = app.add_subcommand("benchmark", "Compare cold and model-warm-started SCF runs");
    bench->add_option("--model", model_dir, "Model directory written by 'train'")->required()->check(CLI::ExistingDirectory);
    bench->add_option("--config", config, "Device configuration file")->required()->check(CLI::ExistingFile);
    bench->add_option("--vg", bench_vg, "Gate voltages")->capture_default_str();
    bench->add_option("--vd", bench_vd, "Drain voltages")->capture_default_str();
    bench->add_option("--out", out, "Report CSV file")->required();
    flags.attach(*bench);

    std::vector<std::string> args(argv.size() > 1 ? argv.begin() + 1 : argv.end(), argv.end());
    std::reverse(args.begin(), args.end());
    try {
        app.parse(args);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        std::cerr << app.help();
        return Usage;
    }

    try {
        if (*gen) return cmd_generate(config, out);
        if (*sim) return cmd_simulate(config, vg, vd, warm_start, flags, out);
        if (*iv) return cmd_iv(config, vd, vg_spec, flags, out);
        if (*fom) return cmd_fom(iv_file, config);
        if (*build) return cmd_dataset_build(config, sweep_file, seed, flags, out);
        if (*tr) return cmd_train(dataset_dir, tcfg, out);
        if (*bench) return cmd_benchmark(model_dir, config, bench_vg, bench_vd, flags, out);
    } catch (const std::invalid_argument& e) {
        spdlog::error("{}", e.what());
        std::cerr << app.help();
        return Usage;
    } catch (const std::exception& e) {
        spdlog::error("numerical failure: {}", e.what());
        return Numerical;
    }
    return Usage;
}

}  // namespace greenflow::cli
