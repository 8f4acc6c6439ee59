#include "greenflow/nn/random.hpp"
#include "greenflow/pipeline.hpp"

#include <spdlog/spdlog.h>

#include <cmath>
#include <numbers>
#include <fstream>
#include <ostream>
#include <stdexcept>

namespace greenflow {

namespace {

const nn::Tensor4& target_of(const Sample& s, Target t) {
    return t == Target::Potential ? s.target_potential : s.target_charge;
}

void stack(const Dataset& ds, const std::vector<std::size_t>& which, Target t, nn::Tensor4& x, nn::Tensor4& y) {
    const nn::Tensor4& in0 = ds.samples[which.front()].input;
    const int b = static_cast<int>(which.size());
    x = nn::Tensor4(b, in0.c(), in0.h(), in0.w());
    y = nn::Tensor4(b, 1, in0.h(), in0.w());
    for (int k = 0; k < b; ++k) {
        const Sample& s = ds.samples[which[k]];
        std::copy(s.input.values().begin(), s.input.values().end(), x.sample(k));
        const nn::Tensor4& tg = target_of(s, t);
        std::copy(tg.values().begin(), tg.values().end(), y.sample(k));
    }
}

// Contiguous minibatches. Batch norm needs at least two samples in train
// mode, so a trailing single sample joins the previous batch and a
// one-sample training set is presented as a duplicated pair.
std::vector<std::vector<std::size_t>> minibatches(const std::vector<std::size_t>& order, int batch_size) {
    std::vector<std::vector<std::size_t>> out;
    if (order.size() == 1) return {{order[0], order[0]}};
    for (std::size_t i = 0; i < order.size(); i += batch_size) {
        const std::size_t end = std::min(order.size(), i + static_cast<std::size_t>(batch_size));
        std::vector<std::size_t> b(order.begin() + static_cast<std::ptrdiff_t>(i),
                                   order.begin() + static_cast<std::ptrdiff_t>(end));
        if (b.size() == 1 && !out.empty())
            out.back().push_back(b[0]);
        else
            out.push_back(std::move(b));
    }
    return out;
}

}  // namespace

double evaluate(const nn::Model& model, const Dataset& ds, const std::vector<std::size_t>& which, Target target) {
    if (which.empty()) return std::nan("");
    double sum = 0.0;
    for (std::size_t i : which) {
        const Sample& s = ds.samples[i];
        sum += nn::mse_loss(model.infer(s.input), target_of(s, target), ds.height, ds.width);
    }
    return sum / static_cast<double>(which.size());
}

nn::Model train_model(const Dataset& ds, Target target, const TrainConfig& cfg, LossHistory& history) {
    if (cfg.epochs < 1 || cfg.batch_size < 2 || !(cfg.lr > 0.0))
        throw std::invalid_argument("train: epochs >= 1, batch_size >= 2 and lr > 0 required");
    const std::vector<std::size_t> train_set = ds.indices(true);
    const std::vector<std::size_t> test_set = ds.indices(false);
    if (train_set.empty()) throw std::invalid_argument("train: training split is empty");

    nn::Architecture arch = cfg.arch;
    arch.residual_channel = target == Target::Potential ? Channel::Potential : Channel::LogCharge;
    const std::uint64_t salt = target == Target::Potential ? 0x5eedULL : 0xc4a76eULL;
    nn::Model model(arch, cfg.seed ^ salt);
    std::mt19937_64 rng((cfg.seed ^ salt) + 1);
    nn::AdamState adam;
    nn::AdamConfig adam_cfg{cfg.lr};
    const char* label = target == Target::Potential ? "potential" : "charge";

    history = {};
    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        const double phase = cfg.epochs > 1 ? static_cast<double>(epoch - 1) / (cfg.epochs - 1) : 0.0;
        const double f = cfg.lr_final_fraction;
        adam_cfg.lr = cfg.lr * (f + (1.0 - f) * 0.5 * (1.0 + std::cos(std::numbers::pi * phase)));
        std::vector<std::size_t> order = train_set;
        nn::shuffle(order, rng);
        double loss_sum = 0.0;
        std::size_t seen = 0;
        for (const auto& batch : minibatches(order, cfg.batch_size)) {
            nn::Tensor4 x, y, grad;
            stack(ds, batch, target, x, y);
            nn::ForwardCache cache;
            const nn::Tensor4 out = model.forward(x, nn::Mode::Train, rng(), &cache);
            const double loss = nn::mse_loss(out, y, ds.height, ds.width, &grad);
            if (!std::isfinite(loss) || loss > cfg.divergence_limit)
                throw std::runtime_error("train(" + std::string(label) + "): diverged at epoch " +
                                         std::to_string(epoch) + " with minibatch loss " + format_double(loss));
            nn::Gradients grads = model.zero_gradients();
            model.backward(cache, grad, grads);
            model.absorb_batch_statistics(cache);
            nn::adam_step(model, grads, adam, adam_cfg);
            loss_sum += loss * static_cast<double>(batch.size());
            seen += batch.size();
        }
        history.train.push_back(loss_sum / static_cast<double>(seen));
        if (epoch == cfg.epochs) {
            // Running statistics were gathered with dropout active; re-estimate
            // them on the whole training split as inference will see it.
            nn::Tensor4 x, y;
            stack(ds, train_set.size() > 1 ? train_set : minibatches(train_set, 2).front(), target, x, y);
            model.calibrate_batch_norm(x);
        }
        history.held_out.push_back(evaluate(model, ds, test_set, target));
        if (epoch == 1 || epoch % 50 == 0 || epoch == cfg.epochs)
            spdlog::info("train({}): epoch {} train {:.4e} held-out {:.4e}", label, epoch, history.train.back(),
                         history.held_out.back());
    }
    return model;
}

TrainedModels train(const Dataset& ds, const TrainConfig& cfg) {
    TrainedModels m;
    m.potential = train_model(ds, Target::Potential, cfg, m.potential_history);
    m.charge = train_model(ds, Target::Charge, cfg, m.charge_history);
    return m;
}

void save_models(const TrainedModels& models, const std::filesystem::path& dir) {
    nn::save_model(models.potential, dir / "potential");
    nn::save_model(models.charge, dir / "charge");
    std::ofstream loss(dir / "loss_history.csv", std::ios::trunc);
    if (!loss) throw std::runtime_error("cannot write " + (dir / "loss_history.csv").string());
    write_loss_csv(models, loss);
}

std::pair<nn::Model, nn::Model> load_models(const std::filesystem::path& dir) {
    return {nn::load_model(dir / "potential"), nn::load_model(dir / "charge")};
}

void write_loss_csv(const TrainedModels& models, std::ostream& out) {
    out << "epoch,potential_train,potential_held_out,charge_train,charge_held_out\n";
    const auto& p = models.potential_history;
    const auto& c = models.charge_history;
    for (std::size_t e = 0; e < p.train.size(); ++e)
        out << e + 1 << ',' << format_double(p.train[e]) << ',' << format_double(p.held_out[e]) << ','
            << format_double(e < c.train.size() ? c.train[e] : std::nan("")) << ','
            << format_double(e < c.held_out.size() ? c.held_out[e] : std::nan("")) << '\n';
}

}  // namespace greenflow
