#include "greenflow/parallel.hpp"
#include "greenflow/pipeline.hpp"

#include <spdlog/spdlog.h>

#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace greenflow {

PredictedFields predict_fields(const nn::Model& potential_model, const nn::Model& charge_model,
                               const Field& first_potential, const Field& first_density, double vg, double vd) {
    if (potential_model.architecture().residual_channel != Channel::Potential ||
        charge_model.architecture().residual_channel != Channel::LogCharge)
        throw std::invalid_argument("predict_fields: models are swapped or have the wrong residual channel");
    const EncodedInput e =
        build_input(first_potential, first_density, vg, vd, potential_model.architecture().spatial_multiple());
    PredictedFields out;
    out.potential = decode_image(potential_model.infer(e.image), 0, e.potential, e.height, e.width, Quantity::Potential);
    const Field log_n = decode_image(charge_model.infer(e.image), 0, e.log_charge, e.height, e.width, Quantity::LogDensity);
    out.density = Field(e.width, e.height, Quantity::ElectronDensity);
    for (std::size_t i = 0; i < log_n.size(); ++i) out.density[i] = std::max(std::pow(10.0, log_n[i]), density_floor);
    return out;
}

double BenchmarkRow::reduction_pct() const {
    if (iters_cold <= 0) return std::nan("");
    return 100.0 * (iters_cold - iters_warm) / iters_cold;
}

ScfResult warm_start_run(const nn::Model& potential_model, const nn::Model& charge_model, const ScfSolver& solver,
                         double vg, double vd, const ScfConfig& cfg) {
    const Snapshot first = solver.first_iteration(vg, vd, cfg.negf);
    const PredictedFields p = predict_fields(potential_model, charge_model, first.potential, first.density, vg, vd);
    ScfResult r = solver.run(vg, vd, InitialFields{p.potential, p.density}, cfg);
    r.iterations += 1;
    for (Snapshot& s : r.snapshots) s.iteration += 1;
    return r;
}

std::vector<BenchmarkRow> benchmark(const nn::Model& potential_model, const nn::Model& charge_model,
                                    const ScfSolver& solver, const std::vector<double>& vg,
                                    const std::vector<double>& vd, const ScfConfig& cfg) {
    std::vector<BenchmarkRow> rows;
    for (double d : vd)
        for (double g : vg) rows.push_back({g, d});
    ScfConfig run_cfg = cfg;
    run_cfg.record_snapshots = false;
    parallel_for(rows.size(), [&](std::size_t i) {
        BenchmarkRow& row = rows[i];
        const ScfResult cold = solver.run(row.vg, row.vd, std::nullopt, run_cfg);
        row.iters_cold = cold.iterations;
        row.current_cold = cold.current;
        row.converged_cold = cold.converged;
        const ScfResult warm = warm_start_run(potential_model, charge_model, solver, row.vg, row.vd, run_cfg);
        row.iters_warm = warm.iterations;
        row.current_warm = warm.current;
        row.converged_warm = warm.converged;
        spdlog::debug("benchmark: vg={} vd={} cold={} warm={}", row.vg, row.vd, row.iters_cold, row.iters_warm);
    });
    return rows;
}

void write_benchmark_csv(const std::vector<BenchmarkRow>& rows, std::ostream& out) {
    out << "vg,vd,iters_cold,iters_warm,I_cold,I_warm,reduction_pct\n";
    for (const BenchmarkRow& r : rows)
        out << format_double(r.vg) << ',' << format_double(r.vd) << ',' << r.iters_cold << ',' << r.iters_warm << ','
            << format_double(r.current_cold) << ',' << format_double(r.current_warm) << ','
            << format_double(r.reduction_pct()) << '\n';
}

std::vector<IvPoint> iv_sweep(const ScfSolver& solver, const std::vector<double>& vg, double vd, const ScfConfig& cfg) {
    std::vector<IvPoint> curve(vg.size());
    parallel_for(vg.size(), [&](std::size_t i) {
        const ScfResult r = solver.run(vg[i], vd, std::nullopt, cfg);
        curve[i] = {vg[i], r.current, r.iterations, r.converged};
    });
    return curve;
}

void write_iv_csv(const std::vector<IvPoint>& curve, double vd, std::ostream& out) {
    out << "vg,vd,current,iterations,converged\n";
    for (const IvPoint& p : curve)
        out << format_double(p.vg) << ',' << format_double(vd) << ',' << format_double(p.current) << ','
            << p.iterations << ',' << (p.converged ? 1 : 0) << '\n';
}

std::vector<IvPoint> read_iv_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || line.rfind("vg,vd,current", 0) != 0)
        throw std::runtime_error("iv csv: expected header vg,vd,current,...");
    std::vector<IvPoint> curve;
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string cell;
        std::vector<std::string> cells;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (cells.size() < 3) throw std::runtime_error("iv csv line " + std::to_string(lineno) + ": too few columns");
        IvPoint p;
        p.vg = std::stod(cells[0]);
        p.current = std::stod(cells[2]);
        if (cells.size() > 3) p.iterations = std::stoi(cells[3]);
        p.converged = cells.size() > 4 ? cells[4] == "1" : true;
        curve.push_back(p);
    }
    return curve;
}

double threshold_current(const DeviceSpec& spec) { return 1e-7 * spec.width_z / spec.channel_length; }

FiguresOfMerit extract_fom(const std::vector<IvPoint>& curve, double i_threshold) {
    if (curve.size() < 2) throw std::invalid_argument("extract_fom: need at least two points");
    for (std::size_t i = 0; i < curve.size(); ++i) {
        if (!(curve[i].current > 0.0)) throw std::invalid_argument("extract_fom: currents must be positive");
        if (i > 0 && !(curve[i].vg > curve[i - 1].vg)) throw std::invalid_argument("extract_fom: vg must increase");
    }
    FiguresOfMerit f;
    f.i_off = curve.front().current;
    f.i_on = curve.back().current;
    f.v_th = std::numeric_limits<double>::quiet_NaN();
    for (std::size_t i = 1; i < curve.size(); ++i) {
        const double l0 = std::log10(curve[i - 1].current), l1 = std::log10(curve[i].current);
        const double lt = std::log10(i_threshold);
        if (l0 < lt && l1 >= lt) {
            f.v_th = curve[i - 1].vg + (lt - l0) / (l1 - l0) * (curve[i].vg - curve[i - 1].vg);
            break;
        }
    }

    // Steepest segment among those lying below the threshold current; the
    // whole curve is used when no segment qualifies.
    auto steepest = [&](bool below_only) {
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t i = 1; i < curve.size(); ++i) {
            if (below_only && curve[i].current > i_threshold) continue;
            const double dl = std::log10(curve[i].current) - std::log10(curve[i - 1].current);
            if (dl <= 0.0) continue;
            best = std::min(best, 1000.0 * (curve[i].vg - curve[i - 1].vg) / dl);
        }
        return best;
    };
    f.ss = steepest(true);
    if (!std::isfinite(f.ss)) f.ss = steepest(false);
    if (!std::isfinite(f.ss)) throw std::invalid_argument("extract_fom: current never increases with vg");
    return f;
}

}  // namespace greenflow
