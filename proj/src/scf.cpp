#include "greenflow/scf.hpp"

#include "greenflow/device.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace greenflow {

void ScfConfig::validate() const {
    if (!(mixing_alpha > 0.0 && mixing_alpha <= 1.0)) throw std::invalid_argument("scf: mixing_alpha must be in (0, 1]");
    if (!(tol_potential > 0.0)) throw std::invalid_argument("scf: tol_potential must be positive");
    if (max_iterations < 2) throw std::invalid_argument("scf: max_iterations must be at least 2");
}

const Snapshot& record_snapshot(const ScfResult& result, int k) {
    for (const Snapshot& s : result.snapshots)
        if (s.iteration == k) return s;
    throw std::out_of_range("scf: no snapshot for iteration " + std::to_string(k));
}

ScfSolver::ScfSolver(const Grid& grid)
    : grid_(&grid), poisson_(grid), mu_source_(contact_fermi_level(grid.spec())) {}

ScfResult ScfSolver::run(double vg, double vd, const std::optional<InitialFields>& init,
                         const ScfConfig& cfg) const {
    cfg.validate();
    const Grid& g = *grid_;
    const double mu_drain = mu_source_ - vd;

    Field v_old;
    if (init) {
        if (!init->potential.matches(g) || !init->density.matches(g))
            throw std::invalid_argument("scf: initial fields do not match the grid");
        v_old = init->potential;
    } else {
        v_old = poisson_.solve_neutral(vg, vd);
    }

    ScfResult result;
    for (int k = 1; k <= cfg.max_iterations; ++k) {
        NegfResult negf = solve_negf(g, v_old, mu_source_, mu_drain, cfg.negf);
        const Field v_new = poisson_.solve(negf.density, vg, vd);
        if (cfg.record_snapshots && k == 1) result.snapshots.push_back({1, v_new, negf.density});

        Field v_mixed = v_old;
        double change = 0.0;
        for (std::size_t i = 0; i < v_mixed.size(); ++i) {
            const double dv = cfg.mixing_alpha * (v_new[i] - v_old[i]);
            v_mixed[i] += dv;
            change = std::max(change, std::abs(dv));
        }
        result.trace.push_back(change);
        result.iterations = k;
        result.current = negf.current;
        result.density = std::move(negf.density);
        v_old = std::move(v_mixed);
        if (change < cfg.tol_potential) {
            result.converged = true;
            break;
        }
    }
    result.potential = v_old;
    if (cfg.record_snapshots && result.iterations > 1)
        result.snapshots.push_back({result.iterations, result.potential, result.density});
    return result;
}

Snapshot ScfSolver::first_iteration(double vg, double vd, const NegfConfig& negf) const {
    const Field v0 = poisson_.solve_neutral(vg, vd);
    NegfResult r = solve_negf(*grid_, v0, mu_source_, mu_source_ - vd, negf);
    Field v1 = poisson_.solve(r.density, vg, vd);
    return {1, std::move(v1), std::move(r.density)};
}

ScfResult run_scf(const Grid& grid, double vg, double vd, const std::optional<InitialFields>& init,
                  const ScfConfig& cfg) {
    return ScfSolver(grid).run(vg, vd, init, cfg);
}

}  // namespace greenflow
