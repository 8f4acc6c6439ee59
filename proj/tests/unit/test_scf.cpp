#include "doctest.h"

#include "greenflow/device.hpp"
#include "greenflow/scf.hpp"

#include <cmath>

using namespace greenflow;

namespace {

const Grid& device() {
    static const Grid g = build_device(default_device_spec());
    return g;
}

const ScfSolver& solver() {
    static const ScfSolver s(device());
    return s;
}

ScfConfig recording() {
    ScfConfig cfg;
    cfg.record_snapshots = true;
    return cfg;
}

// Cold solution reused across cases.
const ScfResult& reference() {
    static const ScfResult r = solver().run(0.4, 0.3, std::nullopt, recording());
    return r;
}

Field blend(const Field& target, const Field& start, double frac) {
    Field out = target;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = target[i] + frac * (start[i] - target[i]);
    return out;
}

}  // namespace

TEST_CASE("cold start converges with recorded snapshots") {
    const ScfResult& r = reference();
    REQUIRE(r.converged);
    CHECK(r.iterations > 2);
    CHECK(r.trace.size() == static_cast<std::size_t>(r.iterations));
    CHECK(r.trace.back() < 1e-4);
    CHECK(r.current > 0.0);

    const Snapshot& first = record_snapshot(r, 1);
    CHECK(first.potential.quantity() == Quantity::Potential);
    CHECK(first.density.quantity() == Quantity::ElectronDensity);
    const Snapshot& last = record_snapshot(r, r.iterations);
    CHECK(last.potential == r.potential);
    CHECK(last.density == r.density);

    CHECK_THROWS_AS(record_snapshot(r, 0), std::out_of_range);
    CHECK_THROWS_AS(record_snapshot(r, r.iterations + 1), std::out_of_range);
    CHECK_THROWS_AS(record_snapshot(solver().run(0.4, 0.3, InitialFields{r.potential, r.density}, ScfConfig{}), 1),
                    std::out_of_range);
}

TEST_CASE("first iteration on its own equals the recorded first snapshot") {
    const Snapshot s = solver().first_iteration(0.4, 0.3, ScfConfig{}.negf);
    const Snapshot& first = record_snapshot(reference(), 1);
    CHECK(s.iteration == 1);
    CHECK(s.potential == first.potential);
    CHECK(s.density == first.density);
}

TEST_CASE("converged fields as initial guess finish within two iterations") {
    const ScfResult& r = reference();
    const ScfResult w = solver().run(0.4, 0.3, InitialFields{r.potential, r.density}, ScfConfig{});
    CHECK(w.converged);
    CHECK(w.iterations <= 2);
}

TEST_CASE("repeated runs are bitwise identical") {
    const ScfResult a = solver().run(0.4, 0.3, std::nullopt, recording());
    CHECK(a.iterations == reference().iterations);
    CHECK(a.potential == reference().potential);
    CHECK(a.density == reference().density);
    CHECK(a.current == reference().current);
}

TEST_CASE("warm start agrees with cold start and helps more when closer") {
    const ScfResult& r = reference();
    const Field v0 = solver().poisson().solve_neutral(0.4, 0.3);
    int previous = 0;
    for (double frac : {0.05, 0.2, 0.5}) {
        CAPTURE(frac);
        const ScfResult w = solver().run(0.4, 0.3, InitialFields{blend(r.potential, v0, frac), r.density}, ScfConfig{});
        REQUIRE(w.converged);
        CHECK(std::abs(w.current / r.current - 1.0) < 0.01);
        CHECK(max_abs_difference(w.potential, r.potential) < 5e-4);
        CHECK(w.iterations >= previous - 1);
        CHECK(w.iterations <= r.iterations + 1);
        previous = w.iterations;
    }
}

TEST_CASE("non-convergence is reported") {
    ScfConfig cfg;
    cfg.max_iterations = 3;
    const ScfResult r = solver().run(0.4, 0.3, std::nullopt, cfg);
    CHECK_FALSE(r.converged);
    CHECK(r.iterations == 3);
}

TEST_CASE("configuration and input validation") {
    ScfConfig cfg;
    cfg.mixing_alpha = 0.0;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg.mixing_alpha = 1.5;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = ScfConfig{};
    cfg.tol_potential = -1.0;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = ScfConfig{};
    cfg.max_iterations = 1;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);

    const InitialFields bad{Field(3, 3, Quantity::Potential), Field(3, 3, Quantity::ElectronDensity)};
    CHECK_THROWS_AS(solver().run(0.4, 0.3, bad, ScfConfig{}), std::invalid_argument);
}
