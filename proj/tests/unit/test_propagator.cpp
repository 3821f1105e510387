#include "doctest.h"
#include "hartree/oracle.hpp"
#include "hartree/propagator.hpp"
#include "helpers.hpp"

using namespace hartree;

namespace {

OrbitalEnsemble gaussian_ensemble(const GridSpec& g, double scale, int sign) {
    std::vector<ScalarField> orbitals;
    orbitals.push_back(free_gaussian(g, 0.0, GaussianSpec{{scale, 0.0}, 1.0, {0.0, 0.0, 0.0}, {}}));
    orbitals.push_back(free_gaussian(g, 0.0, GaussianSpec{{scale, 0.0}, 1.2, {1.0, -0.5, 0.0}, {0.0, 0.4, 0.0}}));
    orbitals.push_back(free_gaussian(g, 0.0, GaussianSpec{{scale, 0.0}, 0.9, {-1.0, 0.5, 0.5}, {-0.3, 0.0, 0.2}}));
    return OrbitalEnsemble(0.0, {1.0, 0.5, 0.25}, std::move(orbitals), sign);
}

StepConfig interacting(const GridSpec& g, double dt, int sign = +1) {
    StepConfig c;
    c.dt = dt;
    c.sign = sign;
    c.coulomb = std::make_shared<CoulombSolver>(g);
    return c;
}

double max_diff(const OrbitalEnsemble& a, const OrbitalEnsemble& b) {
    double d = 0.0;
    for (std::size_t j = 0; j < a.rank(); ++j) d = std::max(d, testing::max_abs_diff(a.orbitals()[j], b.orbitals()[j]));
    return d;
}

}  // namespace

TEST_CASE("free flow matches the closed form") {
    GridSpec g(64, 32.0);
    GaussianSpec spec{{1.0, 0.0}, 1.0, {0.5, 0.0, -0.5}, {}};
    OrbitalEnsemble e(0.0, {1.0}, {free_gaussian(g, 0.0, spec)}, 0);
    StepConfig free;
    free.dt = 0.01;
    free.sign = 0;
    auto out = evolve(e, free, EvolveOptions{.t_end = 1.0});
    CHECK(out.time() == doctest::Approx(1.0));
    CHECK(testing::max_abs_diff(out.orbitals()[0], free_gaussian(g, 1.0, spec, true)) < 1e-8);
}

TEST_CASE("boosted packet moves at twice its momentum") {
    GridSpec g(32, 24.0);
    const double xi = g.wavenumber(1);
    GaussianSpec spec{{1.0, 0.0}, 1.0, {-3.0, 0.0, 0.0}, {xi, 0.0, 0.0}};
    OrbitalEnsemble e(0.0, {1.0}, {free_gaussian(g, 0.0, spec)}, 0);
    StepConfig free;
    free.dt = 0.05;
    free.sign = 0;
    auto out = evolve(e, free, EvolveOptions{.t_end = 2.0});
    const auto rho = density(out);
    double first = 0.0, mass = 0.0;
    for (int i = 0; i < g.n(); ++i)
        for (int j = 0; j < g.n(); ++j)
            for (int l = 0; l < g.n(); ++l) {
                first += g.position(i) * rho[g.index(i, j, l)];
                mass += rho[g.index(i, j, l)];
            }
    CHECK(std::abs(first / mass - (-3.0 + 2.0 * xi * 2.0)) < g.spacing());
}

TEST_CASE("frozen potential step is reversible") {
    GridSpec g(16, 10.0);
    auto e = gaussian_ensemble(g, 1.0, 1);
    StepConfig c;
    c.dt = 0.05;
    c.sign = 1;
    c.frozen_potential = RealField(g, Space::position);
    for (int i = 0; i < g.n(); ++i)
        for (int j = 0; j < g.n(); ++j)
            for (int l = 0; l < g.n(); ++l)
                (*c.frozen_potential)[g.index(i, j, l)] = 1.0 / (1.0 + g.position(i) * g.position(i) + g.position(l) * g.position(l));
    auto forward = strang_step(e, c);
    c.dt = -c.dt;
    auto back = strang_step(forward, c);
    CHECK(max_diff(back, e) < 1e-10);
    CHECK(max_diff(forward, e) > 1e-3);
    CHECK(back.time() == doctest::Approx(0.0));
}

TEST_CASE("unitarity of the interacting step") {
    GridSpec g(24, 16.0);
    auto e = gaussian_ensemble(g, 0.5, 1);
    std::vector<Complex> gram0 = gram_matrix(e.orbitals(), e.orbitals());
    const double hs0 = hs_norm(e);
    auto out = evolve(e, interacting(g, 0.02), EvolveOptions{.t_end = 4.0});  // 200 steps
    auto gram = gram_matrix(out.orbitals(), out.orbitals());
    for (std::size_t i = 0; i < gram.size(); ++i) CHECK(std::abs(gram[i] - gram0[i]) < 1e-12 * std::abs(gram0[0]));
    CHECK(hs_norm(out) == doctest::Approx(hs0).epsilon(1e-12));
    CHECK(out.trace() == doctest::Approx(e.initial_trace()).epsilon(1e-12));
    CHECK(lp_norm(density(out), 1.0) == doctest::Approx(lp_norm(density(e), 1.0)).epsilon(1e-12));
}

TEST_CASE("second order in time") {
    GridSpec g(24, 16.0);
    auto e = gaussian_ensemble(g, 1.0, 1);
    const double t_end = 1.0;
    auto run = [&](double dt) { return evolve(e, interacting(g, dt), EvolveOptions{.t_end = t_end}); };
    const auto reference = run(0.1 / 16);
    auto error = [&](const OrbitalEnsemble& x) {
        double sum = 0.0;
        for (std::size_t j = 0; j < x.rank(); ++j) {
            auto diff = x.orbitals()[j];
            for (std::size_t i = 0; i < diff.size(); ++i) diff[i] -= reference.orbitals()[j][i];
            sum += l2_norm(diff);
        }
        return sum;
    };
    const double ratio = error(run(0.1)) / error(run(0.05));
    CHECK(ratio > 3.5);
    CHECK(ratio < 4.5);
}

TEST_CASE("evolve bookkeeping") {
    GridSpec g(16, 12.0);
    auto e = gaussian_ensemble(g, 0.3, 1);
    const auto cfg = interacting(g, 0.05);

    SUBCASE("t_end = 0 leaves the state alone") {
        int records = 0;
        auto out = evolve(e, cfg, EvolveOptions{.t_end = 0.0, .on_record = [&](const OrbitalEnsemble&) { ++records; }});
        CHECK(records == 0);
        CHECK(max_diff(out, e) == 0.0);
    }
    SUBCASE("two halves compose bit for bit") {
        auto whole = evolve(e, cfg, EvolveOptions{.t_end = 1.0});
        auto half = evolve(e, cfg, EvolveOptions{.t_end = 0.5});
        auto rest = evolve(half, cfg, EvolveOptions{.t_end = 1.0});
        CHECK(max_diff(whole, rest) == 0.0);
        CHECK(whole.time() == rest.time());
    }
    SUBCASE("records and hooks") {
        std::vector<double> seen;
        int steps = 0;
        double last_start = -1.0;
        EvolveOptions opt{.t_end = 1.0, .schedule = {0.1, 0.5, 1.0}};
        opt.on_record = [&](const OrbitalEnsemble& x) { seen.push_back(x.time()); };
        opt.on_step = [&](const StepContext& ctx) {
            ++steps;
            CHECK(ctx.t_start == doctest::Approx(ctx.ensemble.time() - ctx.dt));
            CHECK(ctx.step * ctx.dt == ctx.ensemble.time());
            last_start = ctx.t_start;
            for (double d : ctx.momentum_density.values()) CHECK(d >= 0.0);
        };
        evolve(e, cfg, opt);
        CHECK(steps == 20);
        CHECK(last_start == doctest::Approx(0.95));
        REQUIRE(seen.size() == 3);
        CHECK(seen[0] == doctest::Approx(0.1));
        CHECK(seen[2] == 1.0);
    }
    SUBCASE("schedule validation") {
        CHECK_THROWS_AS(evolve(e, cfg, EvolveOptions{.t_end = 1.0, .schedule = {0.5, 0.2}}), UsageError);
        CHECK_THROWS_AS(evolve(e, cfg, EvolveOptions{.t_end = 1.0, .schedule = {0.33}}), UsageError);
        CHECK_THROWS_AS(evolve(e, cfg, EvolveOptions{.t_end = 1.0, .schedule = {1.5}}), UsageError);
        CHECK_THROWS_AS(evolve(e, cfg, EvolveOptions{.t_end = 1.01}), UsageError);
    }
}

TEST_CASE("non-finite data aborts with a dump") {
    GridSpec g(8, 6.0);
    auto u = testing::random_field(g, 3);
    u[17] = Complex{std::nan(""), 0.0};
    OrbitalEnsemble e(0.0, {1.0}, {u}, 1);
    bool dumped = false;
    EvolveOptions opt{.t_end = 0.5};
    opt.on_failure = [&](const OrbitalEnsemble&, const std::string&) { dumped = true; };
    CHECK_THROWS_AS(evolve(e, interacting(g, 0.05), opt), NumericalError);
    CHECK(dumped);
}

TEST_CASE("energy") {
    GridSpec g(24, 16.0);
    OrbitalEnsemble zero(0.0, {1.0}, {ScalarField(g, Space::position)}, 1);
    CHECK(energy(zero, interacting(g, 0.1)) == 0.0);

    auto e = gaussian_ensemble(g, 0.5, 1);
    const auto parts = energy_parts(e, interacting(g, 0.1));
    CHECK(parts.kinetic > 0.0);
    CHECK(parts.potential > 0.0);
    CHECK(energy_parts(e, interacting(g, 0.1, -1)).potential == doctest::Approx(-parts.potential));

    // Kinetic energy grows with the boost.
    double previous = 0.0;
    for (int m = 0; m < 4; ++m) {
        const double xi = g.wavenumber(m);
        OrbitalEnsemble b(0.0, {1.0}, {free_gaussian(g, 0.0, GaussianSpec{{1.0, 0.0}, 1.0, {}, {xi, 0.0, 0.0}})}, 0);
        StepConfig free;
        free.sign = 0;
        const double k = energy_parts(b, free).kinetic;
        CHECK(k > previous);
        previous = k;
    }
}

TEST_CASE("energy drift is second order") {
    GridSpec g(24, 16.0);
    auto e = gaussian_ensemble(g, 1.5, 1);
    auto drift = [&](double dt) {
        const auto cfg = interacting(g, dt);
        auto out = evolve(e, cfg, EvolveOptions{.t_end = 2.0});
        return std::abs(energy(out, cfg) - energy(e, cfg));
    };
    const double ratio = drift(0.1) / drift(0.05);
    CHECK(ratio > 3.5);
    CHECK(ratio < 4.5);
}
