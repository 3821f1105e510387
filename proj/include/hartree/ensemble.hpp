#pragma once

#include <vector>

#include "hartree/spectral_grid.hpp"

namespace hartree {

/// Finite-rank density operator gamma = sum_j lambda_j |u_j><u_j| with
/// orbitals stored in position space. Orbitals need not be orthonormal.
class OrbitalEnsemble {
public:
    /// Sorts occupations (and their orbitals) in descending order. The
    /// interaction sign is +1 (repulsive), -1 (attractive) or 0 (w = 0).
    OrbitalEnsemble(double time, std::vector<double> occupations, std::vector<ScalarField> orbitals,
                    int interaction_sign);

    double time() const { return time_; }
    void set_time(double t) { time_ = t; }

    std::size_t rank() const { return occupations_.size(); }
    const GridSpec& grid() const { return orbitals_.front().grid(); }
    int interaction_sign() const { return sign_; }

    std::span<const double> occupations() const { return occupations_; }
    std::span<const ScalarField> orbitals() const { return orbitals_; }
    /// Mutable access for the propagator; orbitals must stay in position space.
    std::span<ScalarField> orbitals() { return orbitals_; }

    /// sum_j lambda_j ||u_j||^2.
    double trace() const;
    /// Trace recorded when the ensemble was built.
    double initial_trace() const { return initial_trace_; }

private:
    double time_;
    std::vector<double> occupations_;
    std::vector<ScalarField> orbitals_;
    int sign_;
    double initial_trace_;
};

/// Kernel L^2 norm of sum_j lambda_j f_j (x) conj(f_j(y)) together with the
/// Gram matrix <f_j, f_l> it was evaluated from.
struct GramNorm {
    double value = 0.0;
    std::size_t rank = 0;
    std::vector<Complex> gram;  // row-major rank x rank

    Complex at(std::size_t j, std::size_t l) const { return gram[j * rank + l]; }
};

/// Gram matrix <a_j, b_l> (fields in a common space and grid).
std::vector<Complex> gram_matrix(std::span<const ScalarField> a, std::span<const ScalarField> b);

/// sum_{j,l} wa_j wb_l |<a_j, b_l>|^2 - the kernel inner product of two
/// rank-form operators.
double rank_form_overlap(std::span<const ScalarField> a, std::span<const double> wa,
                         std::span<const ScalarField> b, std::span<const double> wb);

GramNorm gram_weighted_norm(std::span<const ScalarField> fields, std::span<const double> occupations);

/// rho(x) = sum_j lambda_j |u_j(x)|^2.
RealField density(const OrbitalEnsemble& ensemble);

double hs_norm(const OrbitalEnsemble& ensemble);
/// Uses <nabla>^2 u_j, i.e. the multiplier (1 + |k|^2).
double h2_norm(const OrbitalEnsemble& ensemble);

/// v_j = e^{-it Laplacian} u_j, returned in frequency space
/// (v_hat_j = e^{it|k|^2} u_hat_j).
std::vector<ScalarField> free_conjugated_spectra(const OrbitalEnsemble& ensemble);
/// Same orbitals in position space.
std::vector<ScalarField> free_conjugated_orbitals(const OrbitalEnsemble& ensemble);

/// <x>^power u on the centered lattice.
ScalarField weight_by_bracket_x(ScalarField field, double power);

/// ||<x>^2 <y>^2 mu||_{L^2} for the free-conjugated operator mu.
double a2_norm(const OrbitalEnsemble& ensemble);

/// D(t,k) = mu_hat(t,k,-k) = sum_j lambda_j |u_hat_j(t,k)|^2 (frequency space).
RealField antidiagonal_spectrum(const OrbitalEnsemble& ensemble);
RealField antidiagonal_spectrum(std::span<const ScalarField> spectra, std::span<const double> occupations);

/// Mass fraction of the ensemble density in the outer 10% shell.
double containment_fraction(const OrbitalEnsemble& ensemble);

}  // namespace hartree
