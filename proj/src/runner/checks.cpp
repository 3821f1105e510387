#include "hartree/runner/checks.hpp"

#include <algorithm>
#include <cstdio>
#include <iomanip>
#include <numbers>
#include <ostream>
#include <random>
#include <sstream>

#include "hartree/oracle.hpp"

namespace hartree::runner {

namespace {

std::string fmt(double v, int digits = 4) {
    std::ostringstream s;
    s << std::setprecision(digits) << v;
    return s.str();
}

bool in_window(double t, std::array<double, 2> w) { return t >= w[0] * (1.0 - 1e-12) && t <= w[1] * (1.0 + 1e-12); }

ScalarField random_orbital(const GridSpec& g, std::mt19937_64& rng, double scale) {
    std::normal_distribution<double> normal;
    ScalarField f(g, Space::position);
    for (auto& z : f.values()) z = {scale * normal(rng), scale * normal(rng)};
    return f;
}

// Random test data fills the whole box, so its containment warnings are noise.
struct QuietContainment {
    WarningSink previous;
    QuietContainment() {
        previous = set_warning_sink([](std::string_view category, std::string_view message) {
            if (category != "containment") std::fprintf(stderr, "warning [%.*s]: %.*s\n", int(category.size()),
                                                        category.data(), int(message.size()), message.data());
        });
    }
    ~QuietContainment() { set_warning_sink(std::move(previous)); }
};

OrbitalEnsemble random_rank_three(std::uint64_t seed) {
    const GridSpec g(8, 4.0);
    std::mt19937_64 rng(seed);
    std::vector<ScalarField> orbitals;
    for (int j = 0; j < 3; ++j) orbitals.push_back(random_orbital(g, rng, 0.3));
    return OrbitalEnsemble(1.7, {1.0, 0.4, 0.1}, std::move(orbitals), -1);
}

RealField unit_gaussian_charge(const GridSpec& g, double sigma) {
    RealField rho(g, Space::position);
    const double norm = std::pow(2.0 * std::numbers::pi * sigma * sigma, -1.5);
    for (int i = 0; i < g.n(); ++i)
        for (int j = 0; j < g.n(); ++j)
            for (int l = 0; l < g.n(); ++l) {
                const double r2 = g.position(i) * g.position(i) + g.position(j) * g.position(j) +
                                  g.position(l) * g.position(l);
                rho[g.index(i, j, l)] = norm * std::exp(-0.5 * r2 / (sigma * sigma));
            }
    return rho;
}

}  // namespace

CheckResult make_check(std::string name, bool pass, std::string detail) {
    return {std::move(name), pass ? Verdict::pass : Verdict::fail, std::move(detail)};
}

CheckResult skipped(std::string name, std::string why) { return {std::move(name), Verdict::skip, std::move(why)}; }

std::string format_check(const CheckResult& c) {
    const char* verdict = c.verdict == Verdict::pass ? "PASS" : c.verdict == Verdict::fail ? "FAIL" : "SKIP";
    std::string out = "CHECK " + c.name + " " + verdict;
    if (!c.detail.empty()) out += " " + c.detail;
    return out;
}

void print_checks(std::ostream& out, const std::vector<CheckResult>& checks) {
    for (const auto& c : checks) out << format_check(c) << '\n';
}

// Exponents ------------------------------------------------------------------------

const std::vector<ExponentTarget>& exponent_targets() {
    static const std::vector<ExponentTarget> targets{
        {"rho_L1", 0.0, 0.02, false, true},          {"rho_L2", -1.5, 0.2, false, true},
        {"rho_Linf", -3.0, 0.3, false, true},        {"V_Linf", -1.0, 0.2, false, false},
        {"gradV_Linf", -2.0, 0.3, false, false},     {"densfml_residual", -3.2, 0.0, true, false},
    };
    return targets;
}

std::vector<ExponentRow> exponent_report(const CsvTable& table, std::array<double, 2> window) {
    const auto t = table.values("t");
    std::vector<ExponentRow> rows;
    for (const auto& target : exponent_targets()) {
        ExponentRow row{target, {}, {}};
        const auto v = table.values(target.column);
        std::vector<double> tw, vw;
        for (std::size_t i = 0; i < t.size(); ++i)
            if (in_window(t[i], window)) {
                tw.push_back(t[i]);
                vw.push_back(v[i]);
            }
        const std::string name = "exponent_" + target.column;
        if (!vw.empty() && std::all_of(vw.begin(), vw.end(), [](double x) { return x == 0.0; })) {
            row.check = skipped(name, "column is zero in the window");
            rows.push_back(row);
            continue;
        }
        try {
            row.fit = decay_fit(tw, vw, window[0], window[1]);
        } catch (const UsageError& e) {
            row.check = make_check(name, false, e.what());
            rows.push_back(row);
            continue;
        }
        bool pass = target.upper_bound ? row.fit.exponent <= target.target
                                       : std::abs(row.fit.exponent - target.target) <= target.tolerance;
        std::string detail = "exponent=" + fmt(row.fit.exponent) + " target=" +
                             (target.upper_bound ? "<=" + fmt(target.target) : fmt(target.target) + "+-" + fmt(target.tolerance));
        if (target.needs_r2) {
            pass = pass && row.fit.r2 >= kMinimumR2;
            detail += " r2=" + fmt(row.fit.r2, 6) + " (>=" + fmt(kMinimumR2) + ")";
        }
        row.check = make_check(name, pass, detail);
        rows.push_back(row);
    }
    return rows;
}

void print_exponent_table(std::ostream& out, const std::vector<ExponentRow>& rows) {
    out << std::left << std::setw(18) << "column" << std::setw(12) << "exponent" << std::setw(12) << "r2"
        << std::setw(8) << "points"
        << "target\n";
    for (const auto& r : rows) {
        out << std::setw(18) << r.target.column;
        if (r.fit.points > 0)
            out << std::setw(12) << fmt(r.fit.exponent) << std::setw(12) << fmt(r.fit.r2, 6) << std::setw(8)
                << r.fit.points;
        else
            out << std::setw(12) << "-" << std::setw(12) << "-" << std::setw(8) << 0;
        if (r.target.upper_bound)
            out << "<= " << r.target.target << '\n';
        else
            out << r.target.target << " +- " << r.target.tolerance << '\n';
    }
    out << std::right;
}

// Whole-run checks -----------------------------------------------------------------

CheckResult conservation_check(const RunEvidence& ev) {
    const auto& a = *ev.initial;
    const auto& b = *ev.final;
    const auto g0 = gram_matrix(a.orbitals(), a.orbitals());
    const auto g1 = gram_matrix(b.orbitals(), b.orbitals());
    double scale = 0.0, gram_drift = 0.0;
    for (std::size_t i = 0; i < g0.size(); ++i) {
        scale = std::max(scale, std::abs(g0[i]));
        gram_drift = std::max(gram_drift, std::abs(g1[i] - g0[i]));
    }
    gram_drift /= scale;
    double norm_drift = 0.0;
    for (std::size_t j = 0; j < a.rank(); ++j) {
        const double n0 = l2_norm(a.orbitals()[j]);
        norm_drift = std::max(norm_drift, std::abs(l2_norm(b.orbitals()[j]) - n0) / n0);
    }
    const double trace_drift = std::abs(b.trace() - a.trace()) / a.trace();
    double l1_drift = 0.0;
    const double l1 = lp_norm(density(a), 1.0);
    if (ev.monitor)
        for (const auto& r : ev.monitor->records()) l1_drift = std::max(l1_drift, std::abs(r.rho_L1 - l1) / l1);
    const bool pass = gram_drift <= 1e-10 && norm_drift <= 1e-10 && trace_drift <= 1e-8 && l1_drift <= 1e-8;
    return make_check("conservation", pass,
                      "orbital_norm=" + fmt(norm_drift, 3) + " gram=" + fmt(gram_drift, 3) + " (<=1e-10) trace=" +
                          fmt(trace_drift, 3) + " rho_L1=" + fmt(l1_drift, 3) + " (<=1e-8)");
}

CheckResult l1_constant_check(const std::vector<DiagnosticsRecord>& records) {
    if (records.empty()) return skipped("rho_L1_constant", "no records");
    double worst = 0.0;
    for (const auto& r : records) worst = std::max(worst, std::abs(r.rho_L1 - records.front().rho_L1));
    worst /= records.front().rho_L1;
    return make_check("rho_L1_constant", worst <= 1e-8, "relative=" + fmt(worst, 3) + " (<=1e-8)");
}

CheckResult overlap_check(const PhaseState& ps) {
    const double d = ps.overlap_discrepancy();
    if (std::isnan(d)) return skipped("phase_overlap", "no overlap window data");
    return make_check("phase_overlap", d <= 0.10,
                      "relative=" + fmt(d) + " origin=" + fmt(ps.overlap_discrepancy_origin()) + " (<=0.1)");
}

CheckResult dyadic_check(const DiagnosticsMonitor& monitor) {
    std::array<const DyadicChange*, 3> pairs{};
    for (const auto& c : monitor.dyadic_changes())
        for (int i = 0; i < 3; ++i)
            if (std::abs(c.s - 2.0 * std::pow(2.0, i)) < 1e-9) pairs[i] = &c;
    for (const auto* p : pairs)
        if (!p) return skipped("dyadic_profile", "needs records at t = 2, 4, 8, 16");
    const bool decreasing = pairs[0]->modified > pairs[1]->modified && pairs[1]->modified > pairs[2]->modified;
    const bool beats_free = pairs[2]->modified < pairs[2]->unmodified;
    std::string detail;
    for (const auto* p : pairs)
        detail += "s=" + fmt(p->s) + ":" + fmt(p->modified, 3) + "/" + fmt(p->unmodified, 3) + " ";
    detail += "(modified/unmodified)";
    return make_check("dyadic_profile", decreasing && beats_free, detail);
}

CheckResult profile_norm_check(const DiagnosticsMonitor& monitor) {
    if (monitor.records().empty()) return skipped("profile_norm", "no records");
    const double m = monitor.max_profile_norm_mismatch();
    return make_check("profile_norm", m <= 1e-12, "relative=" + fmt(m, 3) + " (<=1e-12)");
}

CheckResult d_sup_check(const DiagnosticsMonitor& monitor) {
    const double ref = monitor.d_sup_reference();
    if (std::isnan(ref)) return skipped("d_sup_bounded", "no record at t >= 1");
    double worst = 0.0;
    for (const auto& r : monitor.records())
        if (r.t >= 1.0) worst = std::max(worst, r.D_sup / ref);
    return make_check("d_sup_bounded", worst <= 1.5, "max_ratio=" + fmt(worst) + " (<=1.5)");
}

PhaseComparison compare_phase_coefficient(const DiagnosticsMonitor& monitor, const OrbitalEnsemble& final,
                                          std::array<double, 2> window) {
    const PhaseState& ps = monitor.phase();
    const GridSpec& grid = ps.grid();
    const auto fit = fit_phase_parameters(monitor.history(), window[0], window[1]);
    const RealField g = extract_g(antidiagonal_spectrum(final), ps.sign(), CoulombSolver::for_wavenumbers(grid));
    const double limit = grid.max_wavenumber() / 4.0 * (1.0 + 1e-12);
    auto index = [&](double k) {
        const int m = static_cast<int>(std::lround(k / grid.wavenumber_spacing()));
        return m >= 0 ? m : m + grid.n();
    };
    PhaseComparison out;
    out.min_fitted = std::numeric_limits<double>::infinity();
    double diff = 0.0, base = 0.0;
    for (std::size_t s = 0; s < ps.size(); ++s) {
        const Vec3 k = ps.wavenumber(s);
        if (!fit.valid[s] || std::hypot(k[0], k[1], k[2]) > limit) continue;
        const double formula = g[grid.index(index(k[0]), index(k[1]), index(k[2]))];
        diff += (fit.g[s] - formula) * (fit.g[s] - formula);
        base += formula * formula;
        out.min_fitted = std::min(out.min_fitted, fit.g[s]);
        ++out.samples;
        if (s == ps.origin()) {
            out.origin_fit = fit.g[s];
            out.origin_formula = formula;
        }
    }
    out.relative_l2 = base > 0.0 ? std::sqrt(diff / base) : std::numeric_limits<double>::quiet_NaN();
    return out;
}

CheckResult phase_coefficient_check(const RunEvidence& ev) {
    const char* name = "phase_coefficient";
    if (ev.final->interaction_sign() == 0) return skipped(name, "no interaction");
    std::size_t in = 0;
    for (double t : ev.monitor->history().times) in += in_window(t, ev.phase_fit_window) ? 1 : 0;
    if (in < 5) return skipped(name, "fewer than five records in the phase fit window");
    PhaseComparison c;
    try {
        c = compare_phase_coefficient(*ev.monitor, *ev.final, ev.phase_fit_window);
    } catch (const UsageError& e) {
        return make_check(name, false, e.what());
    }
    bool pass = c.samples > 0 && c.relative_l2 <= 0.2;
    std::string detail = "relative_l2=" + fmt(c.relative_l2) + " (<=0.2) samples=" + std::to_string(c.samples) +
                         " g_fit(0)=" + fmt(c.origin_fit) + " g(0)=" + fmt(c.origin_formula);
    if (ev.final->interaction_sign() > 0) {
        pass = pass && c.min_fitted >= 0.0;
        detail += " min_g_fit=" + fmt(c.min_fitted) + " (>=0)";
    }
    return make_check(name, pass, detail);
}

std::vector<CheckResult> run_checks(const RunEvidence& ev) {
    std::vector<CheckResult> out;
    out.push_back(conservation_check(ev));
    out.push_back(profile_norm_check(*ev.monitor));
    out.push_back(dyadic_check(*ev.monitor));
    out.push_back(d_sup_check(*ev.monitor));
    if (ev.final->interaction_sign() != 0) {
        out.push_back(overlap_check(ev.monitor->phase()));
        out.push_back(phase_coefficient_check(ev));
    }
    return out;
}

// Oracle and dense suites -----------------------------------------------------------

CheckResult dense_norm_check(std::uint64_t seed) {
    QuietContainment quiet;
    const auto e = random_rank_three(seed);
    const auto r = dense_crosscheck(e);
    const bool pass = r.max_norm_discrepancy() <= 1e-10 && r.min_eigenvalue >= -1e-10 && r.hermitian_error <= 1e-14 &&
                      r.density_error <= 1e-10;
    return make_check("dense_norms", pass,
                      "norm_discrepancy=" + fmt(r.max_norm_discrepancy(), 3) + " (<=1e-10) min_eigenvalue=" +
                          fmt(r.min_eigenvalue, 3) + " (>=-1e-10) hermitian=" + fmt(r.hermitian_error, 3));
}

CheckResult dense_distance_check(std::uint64_t seed) {
    QuietContainment quiet;
    const auto e = random_rank_three(seed);
    const GridSpec& g = e.grid();
    std::mt19937_64 rng(seed + 1);
    std::uniform_real_distribution<double> angle(-std::numbers::pi, std::numbers::pi);
    auto phase = [&] {
        RealField psi(g, Space::frequency);
        for (double& x : psi.values()) x = angle(rng);
        return psi;
    };
    const auto a = modified_profile(e, phase());
    const auto b = modified_profile(e, phase());
    const ProfileEnsemble c{e.time(), {0.3, 0.05}, {b.spectra[0], b.spectra[2]}};
    double worst = 0.0;
    for (const auto* other : {&b, &c}) {
        const double dense = dense_hs_distance(a.spectra, a.occupations, other->spectra, other->occupations);
        worst = std::max(worst, std::abs(profile_hs_distance(a, *other) - dense) / dense);
    }
    const double self = profile_hs_distance(a, a) / profile_hs_norm(a);
    return make_check("dense_profile_distance", worst <= 1e-10 && self <= 1e-10,
                      "relative=" + fmt(worst, 3) + " self=" + fmt(self, 3) + " (<=1e-10)");
}

CheckResult free_flow_check(int n, double length, double dt, double t) {
    const GridSpec g(n, length);
    const GaussianSpec spec{{1.0, 0.0}, 1.0, {0.5, 0.0, -0.5}, {}};
    OrbitalEnsemble e(0.0, {1.0}, {free_gaussian(g, 0.0, spec)}, 0);
    StepConfig free;
    free.dt = dt;
    free.sign = 0;
    EvolveOptions options;
    options.t_end = t;
    const auto out = evolve(e, free, options);
    const auto exact = free_gaussian(g, t, spec, true, 3);
    double worst = 0.0;
    for (std::size_t i = 0; i < exact.size(); ++i) worst = std::max(worst, std::abs(out.orbitals()[0][i] - exact[i]));
    return make_check("free_flow_oracle", worst <= 1e-8,
                      "max_abs_error=" + fmt(worst, 3) + " (<=1e-8) n=" + std::to_string(n) + " t=" + fmt(t));
}

CheckResult coulomb_oracle_check(int n, double length, double sigma) {
    const GridSpec g(n, length);
    const CoulombSolver solver(g);
    const RealField v = solver.hartree_potential(unit_gaussian_charge(g, sigma), 1);
    double worst = 0.0;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            for (int l = 0; l < n; ++l) {
                const double r = std::hypot(g.position(i), g.position(j), g.position(l));
                if (r > length / 4.0) continue;
                const double exact = gaussian_potential(r, sigma);
                worst = std::max(worst, std::abs(v[g.index(i, j, l)] - exact) / exact);
            }
    return make_check("coulomb_erf", worst <= 1e-4, "relative=" + fmt(worst, 3) + " (<=1e-4) on |x|<=L/4");
}

CheckResult coulomb_periodic_check(int n, double length, double sigma) {
    const GridSpec g(n, length);
    const RealField rho = unit_gaussian_charge(g, sigma);
    const RealField vf = CoulombSolver(g).hartree_potential(rho, 1);
    const RealField vp = CoulombSolver(g, CoulombMethod::periodic_multiplier).hartree_potential(rho, 1);
    const std::size_t c = g.index(n / 2, n / 2, n / 2);
    const double shifted = vp[c] + kCubicMadelung / length;
    const double rel = std::abs(shifted - vf[c]) / vf[c];
    return make_check("coulomb_periodic_center", rel <= 0.01,
                      "relative=" + fmt(rel, 3) + " (<=0.01) after the Madelung shift");
}

CheckResult coulomb_sign_check(int n, double length) {
    QuietContainment quiet;
    const GridSpec g(n, length);
    RealField rho(g, Space::position);
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (double& x : rho.values()) x = u(rng);
    const CoulombSolver solver(g);
    const RealField plus = solver.hartree_potential(rho, 1);
    const RealField minus = solver.hartree_potential(rho, -1);
    bool exact = true;
    for (std::size_t i = 0; i < plus.size(); ++i) exact = exact && minus[i] == -plus[i];
    return make_check("coulomb_sign", exact, exact ? "V(-) = -V(+) exactly" : "antisymmetry broken");
}

std::vector<CheckResult> crosscheck_suite(std::uint64_t seed) {
    return {dense_norm_check(seed),
            dense_distance_check(seed),
            free_flow_check(48, 24.0, 0.02, 1.0),
            coulomb_oracle_check(64, 16.0, 1.0),
            coulomb_periodic_check(64, 16.0, 1.0),
            coulomb_sign_check(32, 16.0)};
}

}  // namespace hartree::runner
