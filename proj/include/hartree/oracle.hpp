#pragma once

#include "hartree/ensemble.hpp"

namespace hartree {

/// A exp(-|x - x0|^2 / (2 sigma^2)) exp(i xi.x).
struct GaussianSpec {
    Complex amplitude{1.0, 0.0};
    double sigma = 1.0;
    Vec3 center{};
    Vec3 boost{};

    void validate() const;
};

/// Closed-form e^{it Laplacian} of the Gaussian at one point:
///   A (sigma^2 / s)^{3/2} exp(-|x - x0 - 2 xi t|^2 / (2 s)) exp(i xi.x - i |xi|^2 t),
/// with s = sigma^2 + 2it and the principal branch of the power.
Complex free_gaussian_value(double t, const GaussianSpec& spec, const Vec3& x);

/// Samples the closed form on the position lattice. With periodic_images the
/// solution for the box-periodized initial data is returned instead
/// (separable image sum, |m| <= images per axis).
ScalarField free_gaussian(const GridSpec& grid, double t, const GaussianSpec& spec, bool periodic_images = false,
                          int images = 2);

/// sup |u(t)|^2 = |A|^2 (sigma^2 / sqrt(sigma^4 + 4 t^2))^3.
double free_gaussian_peak_density(double t, const GaussianSpec& spec);

/// Potential of a unit Gaussian charge of width sigma: erf(r / (sigma sqrt 2)) / r.
double gaussian_potential(double r, double sigma);

struct DenseReport {
    double hs_gram = 0.0, hs_dense = 0.0;
    double h2_gram = 0.0, h2_dense = 0.0;
    double a2_gram = 0.0, a2_dense = 0.0;
    double density_error = 0.0;    // max |rho - diag gamma|
    double hermitian_error = 0.0;  // max |gamma - gamma^*|
    double min_eigenvalue = 0.0;
    double max_eigenvalue = 0.0;

    /// Largest relative gram-vs-dense norm discrepancy.
    double max_norm_discrepancy() const;
};

/// Assembles the n^3 x n^3 kernel of the ensemble (n^3 <= 512) and evaluates
/// every norm directly. Fourier operators are built from explicit DFT sums.
DenseReport dense_crosscheck(const OrbitalEnsemble& e);

/// HS distance between sum_j wa_j |a_j><a_j| and sum_l wb_l |b_l><b_l| from
/// explicitly assembled kernels (fields in one space, n^3 <= 512).
double dense_hs_distance(std::span<const ScalarField> a, std::span<const double> wa, std::span<const ScalarField> b,
                         std::span<const double> wb);

}  // namespace hartree
