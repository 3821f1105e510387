#include "hartree/ensemble.hpp"

#include <algorithm>
#include <numeric>

namespace hartree {

OrbitalEnsemble::OrbitalEnsemble(double time, std::vector<double> occupations,
                                 std::vector<ScalarField> orbitals, int interaction_sign)
    : time_(time), sign_(interaction_sign) {
    if (occupations.empty()) throw UsageError("ensemble rank must be at least 1");
    if (occupations.size() != orbitals.size())
        throw UsageError("occupation and orbital counts differ");
    if (interaction_sign < -1 || interaction_sign > 1)
        throw UsageError("interaction sign must be -1, 0 or +1");
    for (double lambda : occupations) {
        if (!(lambda > 0.0) || !std::isfinite(lambda)) throw UsageError("occupations must be positive");
    }
    const GridSpec& grid = orbitals.front().grid();
    for (const auto& u : orbitals) {
        if (!(u.grid() == grid)) throw UsageError("orbitals live on different grids");
        u.require_space(Space::position, "OrbitalEnsemble");
    }

    std::vector<std::size_t> order(occupations.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return occupations[a] > occupations[b]; });
    occupations_.reserve(order.size());
    orbitals_.reserve(order.size());
    for (std::size_t idx : order) {
        occupations_.push_back(occupations[idx]);
        orbitals_.push_back(std::move(orbitals[idx]));
    }
    initial_trace_ = trace();
}

double OrbitalEnsemble::trace() const {
    double sum = 0.0;
    for (std::size_t j = 0; j < rank(); ++j) {
        const double norm = l2_norm(orbitals_[j]);
        sum += occupations_[j] * norm * norm;
    }
    return sum;
}

std::vector<Complex> gram_matrix(std::span<const ScalarField> a, std::span<const ScalarField> b) {
    std::vector<Complex> gram(a.size() * b.size());
    parallel_for(gram.size(), [&](std::size_t idx) {
        gram[idx] = inner_product(a[idx / b.size()], b[idx % b.size()]);
    });
    return gram;
}

double rank_form_overlap(std::span<const ScalarField> a, std::span<const double> wa,
                         std::span<const ScalarField> b, std::span<const double> wb) {
    const auto gram = gram_matrix(a, b);
    double sum = 0.0;
    for (std::size_t j = 0; j < a.size(); ++j)
        for (std::size_t l = 0; l < b.size(); ++l) sum += wa[j] * wb[l] * std::norm(gram[j * b.size() + l]);
    return sum;
}

GramNorm gram_weighted_norm(std::span<const ScalarField> fields, std::span<const double> occupations) {
    if (fields.empty()) throw UsageError("gram_weighted_norm: empty ensemble");
    if (fields.size() != occupations.size()) throw UsageError("gram_weighted_norm: size mismatch");
    GramNorm out;
    out.rank = fields.size();
    out.gram = gram_matrix(fields, fields);
    double sum = 0.0;
    for (std::size_t j = 0; j < out.rank; ++j)
        for (std::size_t l = 0; l < out.rank; ++l)
            sum += occupations[j] * occupations[l] * std::norm(out.at(j, l));
    out.value = std::sqrt(sum);
    return out;
}

RealField density(const OrbitalEnsemble& ensemble) {
    RealField rho(ensemble.grid(), Space::position);
    auto out = rho.values();
    for (std::size_t j = 0; j < ensemble.rank(); ++j) {
        const double lambda = ensemble.occupations()[j];
        auto u = ensemble.orbitals()[j].values();
        for (std::size_t i = 0; i < out.size(); ++i) out[i] += lambda * std::norm(u[i]);
    }
    return rho;
}

double hs_norm(const OrbitalEnsemble& ensemble) {
    return gram_weighted_norm(ensemble.orbitals(), ensemble.occupations()).value;
}

namespace {

std::vector<ScalarField> spectra_with(const OrbitalEnsemble& ensemble, const MultiplierTable* table) {
    std::vector<ScalarField> out(ensemble.orbitals().begin(), ensemble.orbitals().end());
    parallel_for(out.size(), [&](std::size_t j) {
        transform_to_frequency(out[j]);
        if (table) multiply_in_place(out[j], *table);
    });
    return out;
}

}  // namespace

double h2_norm(const OrbitalEnsemble& ensemble) {
    const auto smoothing = bessel_multiplier(ensemble.grid(), 2.0);
    const auto smoothed = spectra_with(ensemble, &smoothing);
    return gram_weighted_norm(smoothed, ensemble.occupations()).value;
}

std::vector<ScalarField> free_conjugated_spectra(const OrbitalEnsemble& ensemble) {
    if (ensemble.time() == 0.0) return spectra_with(ensemble, nullptr);
    // e^{+it|k|^2} is the free flow run backwards over time t.
    const auto unwind = free_flow_multiplier(ensemble.grid(), -ensemble.time());
    return spectra_with(ensemble, &unwind);
}

std::vector<ScalarField> free_conjugated_orbitals(const OrbitalEnsemble& ensemble) {
    if (ensemble.time() == 0.0) return {ensemble.orbitals().begin(), ensemble.orbitals().end()};
    auto spectra = free_conjugated_spectra(ensemble);
    parallel_for(spectra.size(), [&](std::size_t j) { transform_to_position(spectra[j]); });
    return spectra;
}

ScalarField weight_by_bracket_x(ScalarField field, double power) {
    field.require_space(Space::position, "weight_by_bracket_x");
    const auto& grid = field.grid();
    const int n = grid.n();
    for (int i = 0; i < n; ++i) {
        const double xi = grid.position(i);
        for (int j = 0; j < n; ++j) {
            const double xj = grid.position(j);
            for (int l = 0; l < n; ++l) {
                const double xl = grid.position(l);
                const double bracket2 = 1.0 + xi * xi + xj * xj + xl * xl;
                field[grid.index(i, j, l)] *= power == 2.0 ? bracket2 : std::pow(bracket2, 0.5 * power);
            }
        }
    }
    return field;
}

double a2_norm(const OrbitalEnsemble& ensemble) {
    auto profiles = free_conjugated_orbitals(ensemble);
    for (auto& v : profiles) check_containment(shell_fraction(v), "a2_norm profile");
    parallel_for(profiles.size(),
                 [&](std::size_t j) { profiles[j] = weight_by_bracket_x(std::move(profiles[j]), 2.0); });
    return gram_weighted_norm(profiles, ensemble.occupations()).value;
}

RealField antidiagonal_spectrum(std::span<const ScalarField> spectra, std::span<const double> occupations) {
    if (spectra.empty()) throw UsageError("antidiagonal_spectrum: empty ensemble");
    RealField d(spectra.front().grid(), Space::frequency);
    auto out = d.values();
    for (std::size_t j = 0; j < spectra.size(); ++j) {
        spectra[j].require_space(Space::frequency, "antidiagonal_spectrum");
        auto v = spectra[j].values();
        for (std::size_t i = 0; i < out.size(); ++i) out[i] += occupations[j] * std::norm(v[i]);
    }
    return d;
}

RealField antidiagonal_spectrum(const OrbitalEnsemble& ensemble) {
    // |e^{it|k|^2} u_hat|^2 = |u_hat|^2, so the free phase is never applied.
    const auto spectra = spectra_with(ensemble, nullptr);
    return antidiagonal_spectrum(spectra, ensemble.occupations());
}

double containment_fraction(const OrbitalEnsemble& ensemble) { return shell_fraction(density(ensemble)); }

}  // namespace hartree
