#pragma once

#include "greenflow/field.hpp"
#include "greenflow/negf.hpp"
#include "greenflow/poisson.hpp"

#include <optional>
#include <vector>

namespace greenflow {

class Grid;

struct ScfConfig {
    double mixing_alpha = 0.3;
    double tol_potential = 1e-4;  // V, max-node change per iteration
    int max_iterations = 100;
    bool record_snapshots = false;
    NegfConfig negf;

    void validate() const;
};

struct Snapshot {
    int iteration = 0;
    Field potential;
    Field density;
};

/// Starting point for a warm-started loop.
struct InitialFields {
    Field potential;
    Field density;
};

struct ScfResult {
    bool converged = false;
    /// Number of NEGF evaluations performed.
    int iterations = 0;
    Field potential;
    Field density;
    /// Drain current in A from the last NEGF evaluation.
    double current = 0.0;
    /// Max-node potential update per iteration.
    std::vector<double> trace;
    /// Iteration 1 (Poisson output before mixing, with the NEGF density that
    /// produced it) and the final converged fields, when recording.
    std::vector<Snapshot> snapshots;
};

/// Returns the stored snapshot for k = 1 or k = result.iterations; throws
/// std::out_of_range otherwise or when recording was disabled.
const Snapshot& record_snapshot(const ScfResult& result, int k);

/// Gummel-style Poisson-NEGF loop with linear potential mixing. Holds the
/// factorized Poisson operator and contact Fermi level for reuse across
/// bias points; run() is const and may be called concurrently.
class ScfSolver {
public:
    explicit ScfSolver(const Grid& grid);

    ScfResult run(double vg, double vd, const std::optional<InitialFields>& init, const ScfConfig& cfg) const;
    /// Iteration 1 of a cold run before mixing: the NEGF density on the
    /// charge-neutral potential and the Poisson response to it.
    Snapshot first_iteration(double vg, double vd, const NegfConfig& negf) const;

    const Grid& grid() const { return *grid_; }
    const PoissonSolver& poisson() const { return poisson_; }
    double mu_source() const { return mu_source_; }

private:
    const Grid* grid_;
    PoissonSolver poisson_;
    double mu_source_;
};

ScfResult run_scf(const Grid& grid, double vg, double vd, const std::optional<InitialFields>& init,
                  const ScfConfig& cfg);

}  // namespace greenflow
