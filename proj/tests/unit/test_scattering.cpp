#include <numbers>

#include "doctest.h"
#include "hartree/oracle.hpp"
#include "hartree/scattering.hpp"
#include "helpers.hpp"

using namespace hartree;

namespace {

constexpr double kPi = std::numbers::pi;

RealField constant_field(const GridSpec& g, Space space, double c) {
    RealField f(g, space);
    for (double& x : f.values()) x = c;
    return f;
}

OrbitalEnsemble random_ensemble(const GridSpec& g, double t, int sign) {
    std::vector<ScalarField> orbitals;
    for (unsigned s : {11u, 12u, 13u}) orbitals.push_back(testing::random_field(g, s));
    return OrbitalEnsemble(t, {0.7, 0.2, 0.1}, std::move(orbitals), sign);
}

RealField random_phase(const GridSpec& g, unsigned seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-kPi, kPi);
    RealField psi(g, Space::frequency);
    for (double& x : psi.values()) x = u(rng);
    return psi;
}

}  // namespace

TEST_CASE("phase sample layout") {
    GridSpec g(32, 16.0);
    PhaseState ps(g, 1);
    CHECK(ps.first_mode() == -8);
    CHECK(ps.axis_count() == 9);
    CHECK(ps.size() == 729);
    const Vec3 zero = ps.wavenumber(ps.origin());
    CHECK(zero[0] == 0.0);
    CHECK(zero[2] == 0.0);
    for (std::size_t s : {std::size_t{0}, std::size_t{17}, std::size_t{400}}) {
        const Vec3 k = ps.wavenumber(s), m = ps.wavenumber(ps.mirror(s));
        for (int a = 0; a < 3; ++a) CHECK(k[a] == -m[a]);
    }
    CHECK(ps.coarse_grid().n() == 16);
    CHECK(ps.coarse_grid().wavenumber_spacing() == doctest::Approx(2.0 * g.wavenumber_spacing()));
    CHECK(std::isnan(ps.overlap_discrepancy()));

    PhaseState wide(g, 0, PhaseConfig{.k_stride = 1, .k_extent = 1.0});
    CHECK(wide.axis_count() == 31);
    CHECK_THROWS_AS(PhaseState(GridSpec(12, 1.0), 1, PhaseConfig{.k_stride = 4}), UsageError);
    CHECK_THROWS_AS(PhaseState(g, 2), UsageError);
    CHECK_THROWS_AS(PhaseState(g, 1, PhaseConfig{.k_extent = 0.0}), UsageError);
}

TEST_CASE("constant potential integrates exactly") {
    GridSpec g(16, 16.0);
    const double c = 0.3, dt = 0.05;
    PhaseState ps(g, 1, PhaseConfig{.k_extent = 1.0, .t1 = 2.0, .overlap_end = 2.0});
    const auto v = constant_field(g, Space::position, c);
    const RealField d(g, Space::frequency);
    for (int step = 0; step < 40; ++step) accumulate_phase(ps, v, d, step * dt, dt);
    CHECK(ps.t_last == doctest::Approx(2.0));
    CHECK(ps.psi[ps.origin()] == doctest::Approx(2.0 * c).epsilon(1e-12));
    CHECK(ps.method[ps.origin()] == PhaseMethod::direct);
    std::size_t invalid = 0;
    for (std::size_t s = 0; s < ps.size(); ++s) {
        const Vec3 k = ps.wavenumber(s);
        const double reach = 2.0 * 2.0 * std::max({std::abs(k[0]), std::abs(k[1]), std::abs(k[2])});
        if (ps.valid[s]) {
            CHECK(ps.psi[s] == doctest::Approx(2.0 * c).epsilon(1e-12));
        } else {
            ++invalid;
            // A sample leaves once 2tk is past 0.45 L, keeping what it had.
            CHECK(reach > 0.45 * g.length());
            CHECK(ps.psi[s] < 2.0 * c);
        }
    }
    CHECK(invalid > 0);
    CHECK(ps.invalid_fraction() == doctest::Approx(static_cast<double>(invalid) / ps.size()));
}

TEST_CASE("phase difference vanishes on the antidiagonal") {
    GridSpec g(16, 12.0);
    PhaseState ps(g, 1);
    auto v = RealField(g, Space::position);
    for (int i = 0; i < g.n(); ++i)
        for (int j = 0; j < g.n(); ++j)
            for (int l = 0; l < g.n(); ++l) v[g.index(i, j, l)] = std::exp(-0.1 * (g.position(i) + 2.0 * g.position(l)));
    const RealField d(g, Space::frequency);
    for (int step = 0; step < 10; ++step) accumulate_phase(ps, v, d, 0.1 * step, 0.1);
    bool asymmetric = false;
    for (std::size_t s = 0; s < ps.size(); ++s) {
        CHECK(phase_difference(ps, s, ps.mirror(s)) == 0.0);
        asymmetric = asymmetric || phase_difference(ps, s, s) != 0.0;
    }
    CHECK(asymmetric);
}

TEST_CASE("asymptotic coefficient matches extract_g at unit stride") {
    GridSpec g(16, 16.0);
    auto e = random_ensemble(g, 0.0, -1);
    for (auto& u : e.orbitals()) u = testing::gaussian(g, 1.5, {0.5, 0.0, -0.5}, {0.0, g.wavenumber(1), 0.0});
    const RealField d = antidiagonal_spectrum(e);
    PhaseState ps(g, -1, PhaseConfig{.k_stride = 1, .k_extent = 1.0});
    const auto coefficient = ps.asymptotic_coefficient(d);
    const RealField full = extract_g(d, -1, CoulombSolver::for_wavenumbers(g));
    auto index = [&](int m) { return m >= 0 ? m : m + g.n(); };
    double worst = 0.0;
    for (int a = 0; a < ps.axis_count(); ++a)
        for (int b = 0; b < ps.axis_count(); ++b)
            for (int c = 0; c < ps.axis_count(); ++c) {
                const double direct = full[g.index(index(ps.mode(a)), index(ps.mode(b)), index(ps.mode(c)))];
                worst = std::max(worst, std::abs(coefficient[ps.index(a, b, c)] - direct));
                CHECK(coefficient[ps.index(a, b, c)] < 0.0);
            }
    CHECK(worst < 1e-12 * std::abs(coefficient[ps.origin()]));

    // One asymptotic step adds dt g / t_mid.
    const RealField v(g, Space::position);
    accumulate_phase(ps, v, d, 3.0, 0.1);
    CHECK(ps.psi[ps.origin()] == doctest::Approx(0.1 * coefficient[ps.origin()] / 3.05).epsilon(1e-14));
    CHECK(ps.method[ps.origin()] == PhaseMethod::asymptotic);
    CHECK(std::isnan(ps.overlap_discrepancy()));
}

TEST_CASE("overlap accumulators") {
    GridSpec g(16, 16.0);
    PhaseState ps(g, 1);
    auto v = constant_field(g, Space::position, 0.5);
    const RealField d(g, Space::frequency);
    accumulate_phase(ps, v, d, 1.0, 0.1);
    CHECK(ps.overlap_direct[ps.origin()] == doctest::Approx(0.05));
    CHECK(ps.overlap_asymptotic[ps.origin()] == 0.0);
    CHECK(ps.overlap_discrepancy_origin() == doctest::Approx(1.0));
    accumulate_phase(ps, v, d, 2.5, 0.1);  // past the overlap window
    CHECK(ps.overlap_direct[ps.origin()] == doctest::Approx(0.05));
}

TEST_CASE("phase on the lattice") {
    GridSpec g(16, 10.0);
    PhaseState ps(g, 0);
    for (std::size_t s = 0; s < ps.size(); ++s) {
        const Vec3 k = ps.wavenumber(s);
        ps.psi[s] = 1.0 + 0.5 * k[0] - 0.25 * k[1] + k[2];
    }
    const RealField lattice = phase_on_lattice(ps);
    const double edge = -ps.first_mode() * g.wavenumber_spacing();
    for (int i = 0; i < g.n(); ++i)
        for (int j = 0; j < g.n(); ++j)
            for (int l = 0; l < g.n(); ++l) {
                const double kx = std::clamp(g.wavenumber(i), -edge, edge);
                const double ky = std::clamp(g.wavenumber(j), -edge, edge);
                const double kz = std::clamp(g.wavenumber(l), -edge, edge);
                CHECK(lattice[g.index(i, j, l)] == doctest::Approx(1.0 + 0.5 * kx - 0.25 * ky + kz).epsilon(1e-12));
            }
    // Invalid corners are skipped and the weights renormalized.
    for (std::size_t s = 0; s < ps.size(); ++s) ps.psi[s] = 2.0;
    ps.valid[ps.origin()] = 0;
    ps.psi[ps.origin()] = 100.0;
    const RealField skip = phase_on_lattice(ps);
    for (double x : skip.values()) CHECK(x == doctest::Approx(2.0));
    std::fill(ps.valid.begin(), ps.valid.end(), 0);
    const RealField none = phase_on_lattice(ps);
    for (double x : none.values()) CHECK(x == 0.0);
}

TEST_CASE("profiles") {
    GridSpec g(16, 8.0);

    SUBCASE("t = 0 gives the spectra") {
        auto e = random_ensemble(g, 0.0, 1);
        PhaseState ps(g, 1);
        const auto w = modified_profile(e, ps);
        REQUIRE(w.spectra.size() == 3);
        for (std::size_t j = 0; j < 3; ++j) CHECK(testing::max_abs_diff(w.spectra[j], to_frequency(e.orbitals()[j])) == 0.0);
        CHECK(w.occupations == std::vector<double>{0.7, 0.2, 0.1});
    }
    SUBCASE("unimodular phases keep the HS norm") {
        auto e = random_ensemble(g, 1.3, 1);
        const auto w = modified_profile(e, random_phase(g, 5));
        CHECK(profile_hs_norm(w) == doctest::Approx(hs_norm(e)).epsilon(1e-12));
        CHECK(profile_hs_norm(free_profile(e)) == doctest::Approx(hs_norm(e)).epsilon(1e-12));
    }
    SUBCASE("free flow leaves the free profile alone") {
        GridSpec big(32, 24.0);
        OrbitalEnsemble e(0.0, {1.0, 0.5},
                          {free_gaussian(big, 0.0, GaussianSpec{{1.0, 0.0}, 1.0}),
                           free_gaussian(big, 0.0, GaussianSpec{{0.5, 0.0}, 1.3, {1.0, 0.0, 0.0}, {0.0, 0.3, 0.0}})},
                          0);
        StepConfig free;
        free.dt = 0.1;
        free.sign = 0;
        const auto start = free_profile(e);
        const auto later = free_profile(evolve(e, free, EvolveOptions{.t_end = 2.0}));
        CHECK(profile_hs_distance(start, later) < 1e-10 * profile_hs_norm(start));
        for (std::size_t j = 0; j < 2; ++j) CHECK(testing::max_abs_diff(start.spectra[j], later.spectra[j]) < 1e-10);
    }
    SUBCASE("stale or mostly invalid phase state") {
        auto e = random_ensemble(g, 1.0, 1);
        PhaseState ps(g, 1);
        CHECK_THROWS_AS(modified_profile(e, ps), UsageError);
        ps.t_last = 1.0;
        for (std::size_t s = 0; s < ps.size() / 2 + 1; ++s) ps.valid[s] = 0;
        CHECK_THROWS_AS(modified_profile(e, ps), NumericalError);
    }
}

TEST_CASE("profile distance") {
    GridSpec g(8, 4.0);
    auto e = random_ensemble(g, 0.7, 1);
    const auto psi = random_phase(g, 9);
    const auto a = modified_profile(e, psi);

    CHECK(profile_hs_distance(a, a) < 1e-10 * profile_hs_norm(a));

    auto shifted_psi = psi;
    for (double& x : shifted_psi.values()) x += 1.234;
    CHECK(profile_hs_distance(a, modified_profile(e, shifted_psi)) < 1e-10 * profile_hs_norm(a));

    auto negated = a;
    for (auto& z : negated.spectra[1].values()) z = -z;
    CHECK(profile_hs_distance(a, negated) < 1e-10 * profile_hs_norm(a));

    // Against explicit kernels, including a rank change.
    const auto b = modified_profile(e, random_phase(g, 10));
    const ProfileEnsemble c{0.0, {0.5}, {b.spectra[2]}};
    for (const auto* other : {&b, &c}) {
        const double dense = dense_hs_distance(a.spectra, a.occupations, other->spectra, other->occupations);
        CHECK(dense > 1e-3);
        CHECK(std::abs(profile_hs_distance(a, *other) - dense) < 1e-10 * dense);
    }
}

TEST_CASE("density formula") {
    SUBCASE("refuses early times") {
        GridSpec g(8, 8.0);
        CHECK_THROWS_AS(density_formula_residual(random_ensemble(g, 0.5, 0)), UsageError);
    }
    SUBCASE("origin value without images") {
        GridSpec g(16, 12.0);
        auto e = random_ensemble(g, 2.0, 0);
        const RealField lead = density_leading_term(e, ResidualOptions{.periodic_images = false});
        const RealField d = antidiagonal_spectrum(e);
        const int c = g.n() / 2;
        CHECK(lead[g.index(c, c, c)] == doctest::Approx(d[0] / std::pow(8.0 * kPi, 3)).epsilon(1e-12));
        for (double x : lead.values()) CHECK(x >= 0.0);
    }
    SUBCASE("free gaussian") {
        GridSpec g(64, 96.0);
        GaussianSpec spec{{1.0, 0.0}, 1.0};
        auto at = [&](double t) { return OrbitalEnsemble(t, {1.0}, {free_gaussian(g, t, spec, true)}, 0); };
        const auto e10 = at(10.0);
        const double r10 = density_formula_residual(e10);
        CHECK(r10 <= 0.1 * lp_norm(density(e10), std::numeric_limits<double>::infinity()));
        const double r5 = density_formula_residual(at(5.0));
        CHECK(r10 * 1000.0 < r5 * 125.0);
    }
}

TEST_CASE("decay fit") {
    std::vector<double> t, cube, flat;
    for (int i = 0; i < 12; ++i) {
        t.push_back(2.0 * std::pow(10.0, i / 11.0));
        cube.push_back(5.0 * std::pow(t.back(), -3.0));
        flat.push_back(0.25);
    }
    const auto fit = decay_fit(t, cube, 2.0, 20.0);
    CHECK(fit.exponent == doctest::Approx(-3.0).epsilon(1e-10));
    CHECK(fit.intercept == doctest::Approx(std::log(5.0)).epsilon(1e-10));
    CHECK(fit.r2 == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(fit.points == 12);
    CHECK(std::abs(decay_fit(t, flat, 2.0, 20.0).exponent) < 1e-12);
    auto jitter = flat;
    for (std::size_t i = 0; i < jitter.size(); ++i) jitter[i] *= 1.0 + ((i % 3) - 1.0) * 1e-14;
    CHECK(decay_fit(t, jitter, 2.0, 20.0).r2 == 1.0);
    CHECK(std::abs(decay_fit(t, jitter, 2.0, 20.0).exponent) < 1e-12);
    CHECK_THROWS_AS(decay_fit(t, cube, 2.0, 3.0), UsageError);
    cube[4] = 0.0;
    CHECK_THROWS_AS(decay_fit(t, cube, 2.0, 20.0), UsageError);
    cube[4] = -1.0;
    CHECK_THROWS_AS(decay_fit(t, cube, 2.0, 20.0), UsageError);
    std::vector<double> shorter(t.begin(), t.end() - 1);
    CHECK_THROWS_AS(decay_fit(shorter, flat, 2.0, 20.0), UsageError);
}

TEST_CASE("free gaussian peak decays like t^-3") {
    GaussianSpec spec{{1.0, 0.0}, 1.0};
    std::vector<double> t, peak;
    for (int i = 0; i < 10; ++i) {
        t.push_back(2.0 * std::pow(10.0, i / 9.0));
        peak.push_back(free_gaussian_peak_density(t.back(), spec));
    }
    CHECK(decay_fit(t, peak, 2.0, 20.0).exponent == doctest::Approx(-3.0).epsilon(0.05 / 3.0));
}

TEST_CASE("extract_g") {
    GridSpec g(32, 32.0);
    const auto solver = CoulombSolver::for_wavenumbers(g);
    const RealField zero(g, Space::frequency);
    const RealField none = extract_g(zero, 1, solver);
    for (double x : none.values()) CHECK(x == 0.0);

    const double s = 0.6;
    RealField d(g, Space::frequency);
    for (int i = 0; i < g.n(); ++i)
        for (int j = 0; j < g.n(); ++j)
            for (int l = 0; l < g.n(); ++l) {
                const double k2 = g.wavenumber(i) * g.wavenumber(i) + g.wavenumber(j) * g.wavenumber(j) +
                                  g.wavenumber(l) * g.wavenumber(l);
                d[g.index(i, j, l)] = std::exp(-0.5 * k2 / (s * s));
            }
    const RealField plus = extract_g(d, 1, solver);
    const RealField minus = extract_g(d, -1, solver);
    for (std::size_t i = 0; i < plus.size(); ++i) CHECK(minus[i] == -plus[i]);
    const RealField off = extract_g(d, 0, solver);
    for (double x : off.values()) CHECK(x == 0.0);

    // The convolution of a Gaussian with 1/|k| is radial: (2 pi)^{3/2} s^3 erf(|k|/(s sqrt 2))/|k|.
    const double scale = 4.0 / std::pow(4.0 * kPi, 3) * std::pow(2.0 * kPi, 1.5) * s * s * s;
    for (int m : {0, 1, 3, 7}) {
        const double k = g.wavenumber(m);
        CHECK(plus[g.index(m, 0, 0)] == doctest::Approx(scale * gaussian_potential(k, s)).epsilon(1e-3));
    }
}

TEST_CASE("phase parameter fit") {
    GridSpec g(8, 4.0);
    PhaseState ps(g, 0, PhaseConfig{.k_stride = 2, .k_extent = 1.0});
    PhaseHistory history;
    for (int i = 0; i < 8; ++i) {
        const double t = 2.0 * std::pow(2.0, i / 2.0);
        ps.t_last = t;
        for (std::size_t s = 0; s < ps.size(); ++s) ps.psi[s] = 2.0 + 0.5 * std::log(t) + 0.01 * s;
        if (i == 5) ps.valid[3] = 0;
        history.append(ps);
    }
    const auto fit = fit_phase_parameters(history, 2.0, 40.0);
    CHECK(!fit.valid[3]);
    CHECK(std::isnan(fit.g[3]));
    for (std::size_t s = 0; s < ps.size(); ++s) {
        if (s == 3) continue;
        CHECK(fit.valid[s]);
        CHECK(fit.g[s] == doctest::Approx(0.5).epsilon(1e-10));
        CHECK(fit.h[s] == doctest::Approx(2.0 + 0.01 * s).epsilon(1e-10));
    }
    // Before the sample dropped out its fit is fine.
    CHECK(fit_phase_parameters(history, 2.0, 8.0).valid[3]);
    CHECK_THROWS_AS(fit_phase_parameters(history, 2.0, 5.0), UsageError);

    std::fill(ps.valid.begin(), ps.valid.end(), 0);
    PhaseHistory dead;
    for (int i = 0; i < 6; ++i) {
        ps.t_last = 1.0 + i;
        dead.append(ps);
    }
    CHECK_THROWS_AS(fit_phase_parameters(dead, 1.0, 6.0), UsageError);
}

TEST_CASE("diagnostics monitor") {
    GridSpec g(24, 20.0);
    std::vector<ScalarField> orbitals{free_gaussian(g, 0.0, GaussianSpec{{0.3, 0.0}, 1.0}),
                                      free_gaussian(g, 0.0, GaussianSpec{{0.3, 0.0}, 1.2, {1.0, 0.0, 0.0}, {0.0, 0.2, 0.0}})};
    OrbitalEnsemble e(0.0, {1.0, 0.5}, std::move(orbitals), 1);
    StepConfig cfg;
    cfg.dt = 0.05;
    cfg.sign = 1;
    cfg.coulomb = std::make_shared<CoulombSolver>(g);

    MonitorConfig mc;
    mc.dyadic_times = {1.0, 2.0};
    DiagnosticsMonitor monitor(e, cfg.coulomb, mc);
    std::vector<double> streamed;
    EvolveOptions opt{.t_end = 2.0, .schedule = {0.5, 1.0, 1.5, 2.0}};
    monitor.attach(opt, [&](const DiagnosticsRecord& r) { streamed.push_back(r.t); });
    const auto out = evolve(e, cfg, opt);

    const auto& records = monitor.records();
    REQUIRE(records.size() == 4);
    CHECK(streamed == std::vector<double>{0.5, 1.0, 1.5, 2.0});
    CHECK(std::isnan(records[0].densfml_residual));
    for (std::size_t i = 0; i < records.size(); ++i) {
        const auto& r = records[i];
        if (i > 0) {
            CHECK(r.t > records[i - 1].t);
            CHECK(std::isfinite(r.densfml_residual));
        }
        for (double x : record_values(r))
            if (std::isfinite(x)) CHECK(x >= 0.0);
        CHECK(r.rho_L1 == doctest::Approx(records[0].rho_L1).epsilon(1e-12));
        CHECK(r.V_Linf > 0.0);
        CHECK(r.gradV_Linf > 0.0);
        CHECK(r.profile_hs_change > 0.0);
    }
    CHECK(monitor.max_profile_norm_mismatch() < 1e-12);
    REQUIRE(monitor.dyadic_changes().size() == 1);
    CHECK(monitor.dyadic_changes()[0].s == 1.0);
    CHECK(monitor.d_sup_reference() == records[1].D_sup);
    CHECK(monitor.history().times.size() == 4);
    CHECK(monitor.phase().t_last == out.time());

    // Repulsive: the asymptotic coefficient is nonnegative.
    const auto coefficient = monitor.phase().asymptotic_coefficient(antidiagonal_spectrum(out));
    for (double x : coefficient) CHECK(x >= 0.0);
    CHECK(monitor.phase().method[monitor.phase().origin()] == PhaseMethod::asymptotic);
    CHECK(monitor.phase().psi[monitor.phase().origin()] > 0.0);

    const auto values = record_values(records[2]);
    CHECK(values.size() == record_columns().size());
    const auto back = record_from_values(values);
    CHECK(back.h2 == records[2].h2);
    CHECK(back.containment_fraction == records[2].containment_fraction);
    CHECK_THROWS_AS(record_from_values(std::span(values).first(3)), UsageError);
}
