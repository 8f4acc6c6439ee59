#pragma once

#include "greenflow/device.hpp"
#include "greenflow/field.hpp"
#include "greenflow/nn/model.hpp"
#include "greenflow/scf.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

namespace greenflow {

// ---- input encoding -------------------------------------------------------

/// Image channel layout of the model input.
enum Channel : int { Potential = 0, LogCharge = 1, DrainBias = 2, GateBias = 3, MapX = 4, MapY = 5, MapZ = 6 };
inline constexpr int input_channels = 7;
std::vector<std::string> channel_names();

struct NormStats {
    double mean = 0.0;
    double std = 1.0;
    double apply(double v) const { return (v - mean) / std; }
    double invert(double v) const { return v * std + mean; }
    bool operator==(const NormStats&) const = default;
};
inline constexpr double norm_std_floor = 1e-8;
NormStats norm_stats(std::span<const double> values);

/// Images are (rows = y, columns = x): element (i, j) holds field node (j, i).
std::vector<double> field_image(const Field& f);

/// Three channels (1 x 3 x h x w): x ramp 0..1 over columns, y ramp 0..1
/// over rows, and a constant 0.5 for the collapsed third axis.
nn::Tensor4 location_maps(int height, int width);

/// Smallest multiple of `m` that is >= n.
int padded_size(int n, int m);
/// Mirror padding at the bottom/right edge (edge sample not repeated).
std::vector<double> reflect_pad(std::span<const double> image, int height, int width, int padded_h, int padded_w);

struct EncodedInput {
    nn::Tensor4 image;  // 1 x 7 x padded_h x padded_w
    NormStats potential;
    NormStats log_charge;
    int height = 0;
    int width = 0;
};

/// Standardised potential and log10 density, raw bias volts, location maps;
/// all channels reflect-padded to multiples of `multiple`.
EncodedInput build_input(const Field& potential, const Field& density, double vg, double vd, int multiple = 8);

/// Normalised, padded single-channel image of `f` under fixed statistics.
nn::Tensor4 encode_target(const Field& f, const NormStats& stats, int padded_h, int padded_w);
/// Crops the top-left height x width window of channel 0 of sample `n` and
/// inverts the normalisation; the result is a field of quantity `q`.
Field decode_image(const nn::Tensor4& image, int n, const NormStats& stats, int height, int width, Quantity q);

// ---- dataset --------------------------------------------------------------

struct Sample {
    double vg = 0.0;
    double vd = 0.0;
    nn::Tensor4 input;              // 1 x 7 x H x W, from the first SCF iteration
    nn::Tensor4 target_potential;  // 1 x 1 x H x W, normalised by the input potential stats
    nn::Tensor4 target_charge;     // 1 x 1 x H x W, normalised by the input log-charge stats
    NormStats potential;
    NormStats log_charge;
    int first_snapshot = 1;
    int final_snapshot = 0;
    bool train = false;
};

struct BiasPoint {
    double vg = 0.0;
    double vd = 0.0;
};

struct Dataset {
    std::vector<Sample> samples;
    std::uint64_t seed = 0;
    std::string config_hash;
    DeviceSpec device;
    int height = 0;  // unpadded image rows (ny)
    int width = 0;   // unpadded image columns (nx)
    std::vector<BiasPoint> excluded;

    std::size_t train_count() const;
    std::vector<std::size_t> indices(bool train) const;
};

struct Sweep {
    std::vector<double> vg;
    std::vector<double> vd;
};

/// "vg = start:step:stop" (inclusive) or comma lists, one key per line.
Sweep parse_sweep(std::istream& in);
Sweep load_sweep(const std::filesystem::path& path);
std::vector<double> parse_values(const std::string& text);

std::string config_hash(const DeviceSpec& spec);

Sample make_sample(const ScfResult& cold, double vg, double vd, int multiple = 8);

/// Marks round(0.7 n) samples as training data after a seeded shuffle.
void assign_split(Dataset& ds, std::uint64_t seed, double train_fraction = 0.7);

/// Cold SCF with snapshots at every bias point (vd outer, vg inner);
/// non-converged points are excluded and listed in Dataset::excluded.
Dataset build_dataset(const DeviceSpec& spec, const Sweep& sweep, std::uint64_t seed, const ScfConfig& cfg = {});

void save_dataset(const Dataset& ds, const std::filesystem::path& dir);
Dataset load_dataset(const std::filesystem::path& dir);

// ---- training -------------------------------------------------------------

struct TrainConfig {
    int epochs = 500;
    double lr = 3e-3;
    /// Cosine decay of the learning rate from lr to lr * lr_final_fraction.
    double lr_final_fraction = 0.01;
    int batch_size = 4;
    std::uint64_t seed = 1;
    nn::Architecture arch;
    double divergence_limit = 1e3;
};

struct LossHistory {
    std::vector<double> train;     // mean minibatch loss per epoch
    std::vector<double> held_out;  // infer-mode loss on the test split per epoch
};

struct TrainedModels {
    nn::Model potential;
    nn::Model charge;
    LossHistory potential_history;
    LossHistory charge_history;
};

enum class Target { Potential, Charge };

/// Infer-mode MSE of `model` on the chosen samples (cropped window).
double evaluate(const nn::Model& model, const Dataset& ds, const std::vector<std::size_t>& which, Target target);

/// Trains one model; throws std::runtime_error if the loss exceeds
/// cfg.divergence_limit or becomes non-finite.
nn::Model train_model(const Dataset& ds, Target target, const TrainConfig& cfg, LossHistory& history);
TrainedModels train(const Dataset& ds, const TrainConfig& cfg);

void save_models(const TrainedModels& models, const std::filesystem::path& dir);
std::pair<nn::Model, nn::Model> load_models(const std::filesystem::path& dir);
void write_loss_csv(const TrainedModels& models, std::ostream& out);

// ---- inference and benchmarking -------------------------------------------

struct PredictedFields {
    Field potential;
    Field density;
};

PredictedFields predict_fields(const nn::Model& potential_model, const nn::Model& charge_model,
                               const Field& first_potential, const Field& first_density, double vg, double vd);

struct BenchmarkRow {
    double vg = 0.0;
    double vd = 0.0;
    int iters_cold = 0;
    /// Includes the cold iteration that produces the model input.
    int iters_warm = 0;
    double current_cold = 0.0;
    double current_warm = 0.0;
    bool converged_cold = false;
    bool converged_warm = false;
    double reduction_pct() const;
};

/// Cold first iteration, model prediction, then the SCF loop seeded with the
/// predicted fields. `iterations` counts the first iteration too.
ScfResult warm_start_run(const nn::Model& potential_model, const nn::Model& charge_model, const ScfSolver& solver,
                         double vg, double vd, const ScfConfig& cfg = {});

std::vector<BenchmarkRow> benchmark(const nn::Model& potential_model, const nn::Model& charge_model,
                                    const ScfSolver& solver, const std::vector<double>& vg,
                                    const std::vector<double>& vd, const ScfConfig& cfg = {});
void write_benchmark_csv(const std::vector<BenchmarkRow>& rows, std::ostream& out);

// ---- I-V and figures of merit ---------------------------------------------

struct IvPoint {
    double vg = 0.0;
    double current = 0.0;
    int iterations = 0;
    bool converged = false;
};

std::vector<IvPoint> iv_sweep(const ScfSolver& solver, const std::vector<double>& vg, double vd,
                              const ScfConfig& cfg = {});
void write_iv_csv(const std::vector<IvPoint>& curve, double vd, std::ostream& out);
std::vector<IvPoint> read_iv_csv(std::istream& in);

struct FiguresOfMerit {
    double i_off = 0.0;    // A, at the lowest gate bias
    double i_on = 0.0;     // A, at the highest gate bias
    double ss = 0.0;       // mV/dec, steepest slope below the threshold current
    double v_th = 0.0;     // V, NaN when the curve never reaches the threshold current
};

/// Threshold current 1e-7 A scaled by W/L.
double threshold_current(const DeviceSpec& spec);
/// Curve must be sorted by vg with strictly positive currents.
FiguresOfMerit extract_fom(const std::vector<IvPoint>& curve, double i_threshold);

/// Shortest round-trip decimal form.
std::string format_double(double v);

}  // namespace greenflow
