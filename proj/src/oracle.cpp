#include "hartree/oracle.hpp"

#include <Eigen/Dense>
#include <numbers>
#include <unsupported/Eigen/KroneckerProduct>

namespace hartree {

namespace {

constexpr double kPi = std::numbers::pi;
using Matrix = Eigen::MatrixXcd;

// One-axis factor of the boosted free Gaussian (without the amplitude).
Complex axis_factor(double t, double sigma, double x0, double xi, double x) {
    const Complex s{sigma * sigma, 2.0 * t};
    const double shift = x - x0 - 2.0 * xi * t;
    return std::sqrt(sigma * sigma / s) * std::exp(-shift * shift / (2.0 * s)) *
           std::polar(1.0, xi * x - xi * xi * t);
}

}  // namespace

void GaussianSpec::validate() const {
    if (!(sigma > 0.0) || !std::isfinite(sigma)) throw UsageError("Gaussian width must be positive");
}

Complex free_gaussian_value(double t, const GaussianSpec& spec, const Vec3& x) {
    spec.validate();
    Complex value = spec.amplitude;
    for (int a = 0; a < 3; ++a) value *= axis_factor(t, spec.sigma, spec.center[a], spec.boost[a], x[a]);
    return value;
}

ScalarField free_gaussian(const GridSpec& grid, double t, const GaussianSpec& spec, bool periodic_images,
                          int images) {
    spec.validate();
    const int n = grid.n();
    const int reach = periodic_images ? images : 0;
    std::array<std::vector<Complex>, 3> factors;
    for (int a = 0; a < 3; ++a) {
        factors[a].resize(n);
        for (int i = 0; i < n; ++i) {
            Complex sum{};
            for (int m = -reach; m <= reach; ++m)
                sum += axis_factor(t, spec.sigma, spec.center[a], spec.boost[a], grid.position(i) + m * grid.length());
            factors[a][i] = sum;
        }
    }
    ScalarField out(grid, Space::position);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            const Complex ij = spec.amplitude * factors[0][i] * factors[1][j];
            for (int l = 0; l < n; ++l) out[grid.index(i, j, l)] = ij * factors[2][l];
        }
    return out;
}

double free_gaussian_peak_density(double t, const GaussianSpec& spec) {
    spec.validate();
    const double s2 = spec.sigma * spec.sigma;
    return std::norm(spec.amplitude) * std::pow(s2 / std::sqrt(s2 * s2 + 4.0 * t * t), 3);
}

double gaussian_potential(double r, double sigma) {
    if (!(sigma > 0.0)) throw UsageError("Gaussian width must be positive");
    const double a = 1.0 / (sigma * std::sqrt(2.0));
    const double z = a * r;
    if (z < 1e-3) {
        const double z2 = z * z;
        return 2.0 * a / std::sqrt(kPi) * (1.0 - z2 / 3.0 + z2 * z2 / 10.0 - z2 * z2 * z2 / 42.0);
    }
    return std::erf(z) / r;
}

// Dense machinery ------------------------------------------------------------

namespace {

void require_small(const GridSpec& grid) {
    if (grid.size() > 512) throw UsageError("dense crosscheck needs n^3 <= 512");
}

// (1/n) sum_m f(k_m) e^{i k_m (x - x')} on one axis.
Matrix axis_operator(const GridSpec& grid, const std::function<Complex(double)>& f) {
    const int n = grid.n();
    Matrix m = Matrix::Zero(n, n);
    for (int x = 0; x < n; ++x)
        for (int y = 0; y < n; ++y) {
            Complex sum{};
            for (int j = 0; j < n; ++j) {
                const double k = grid.wavenumber(j);
                sum += f(k) * std::polar(1.0, k * (x - y) * grid.spacing());
            }
            m(x, y) = sum / static_cast<double>(n);
        }
    return m;
}

Matrix kron3(const Matrix& a, const Matrix& b, const Matrix& c) {
    return Eigen::kroneckerProduct(a, Eigen::kroneckerProduct(b, c).eval()).eval();
}

Matrix kernel_matrix(std::span<const ScalarField> fields, std::span<const double> weights) {
    const auto size = static_cast<Eigen::Index>(fields.front().size());
    Matrix k = Matrix::Zero(size, size);
    for (std::size_t j = 0; j < fields.size(); ++j) {
        Eigen::VectorXcd u(size);
        for (Eigen::Index i = 0; i < size; ++i) u(i) = fields[j][static_cast<std::size_t>(i)];
        k += weights[j] * u * u.adjoint();
    }
    return k;
}

double measure(const GridSpec& grid, Space space) {
    return space == Space::position ? grid.cell_volume() : 1.0 / grid.box_volume();
}

double relative(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

}  // namespace

double DenseReport::max_norm_discrepancy() const {
    return std::max({relative(hs_gram, hs_dense), relative(h2_gram, h2_dense), relative(a2_gram, a2_dense)});
}

DenseReport dense_crosscheck(const OrbitalEnsemble& e) {
    const GridSpec& grid = e.grid();
    require_small(grid);
    const double h3 = grid.cell_volume();
    const Matrix gamma = kernel_matrix(e.orbitals(), e.occupations());

    DenseReport report;
    report.hs_gram = hs_norm(e);
    report.h2_gram = h2_norm(e);
    report.a2_gram = a2_norm(e);

    report.hs_dense = gamma.norm() * h3;

    const int n = grid.n();
    const Matrix identity1 = Matrix::Identity(n, n);
    const Matrix second = axis_operator(grid, [](double k) { return Complex{k * k, 0.0}; });
    const Matrix bessel = kron3(identity1, identity1, identity1) + kron3(second, identity1, identity1) +
                          kron3(identity1, second, identity1) + kron3(identity1, identity1, second);
    report.h2_dense = (bessel * gamma * bessel.adjoint()).norm() * h3;

    const double t = e.time();
    const Matrix flow1 = axis_operator(grid, [t](double k) { return std::polar(1.0, t * k * k); });
    const Matrix flow = kron3(flow1, flow1, flow1);
    const Matrix mu = flow * gamma * flow.adjoint();
    Eigen::VectorXd weight(static_cast<Eigen::Index>(grid.size()));
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            for (int l = 0; l < n; ++l) {
                const double r2 = grid.position(i) * grid.position(i) + grid.position(j) * grid.position(j) +
                                  grid.position(l) * grid.position(l);
                weight(static_cast<Eigen::Index>(grid.index(i, j, l))) = 1.0 + r2;
            }
    report.a2_dense = (weight.asDiagonal() * mu * weight.asDiagonal()).norm() * h3;

    const RealField rho = density(e);
    for (std::size_t i = 0; i < rho.size(); ++i) {
        const auto idx = static_cast<Eigen::Index>(i);
        report.density_error = std::max(report.density_error, std::abs(gamma(idx, idx) - rho[i]));
    }
    report.hermitian_error = (gamma - gamma.adjoint()).cwiseAbs().maxCoeff();

    Eigen::SelfAdjointEigenSolver<Matrix> solver(gamma * h3, Eigen::EigenvaluesOnly);
    report.min_eigenvalue = solver.eigenvalues().minCoeff();
    report.max_eigenvalue = solver.eigenvalues().maxCoeff();
    return report;
}

double dense_hs_distance(std::span<const ScalarField> a, std::span<const double> wa, std::span<const ScalarField> b,
                         std::span<const double> wb) {
    if (a.empty() || b.empty()) throw UsageError("dense_hs_distance: empty ensemble");
    const GridSpec& grid = a.front().grid();
    require_small(grid);
    const Space space = a.front().space();
    for (const auto* group : {&a, &b})
        for (const auto& f : *group)
            if (!(f.grid() == grid) || f.space() != space) throw UsageError("dense_hs_distance: layout mismatch");
    const Matrix diff = kernel_matrix(a, wa) - kernel_matrix(b, wb);
    return diff.norm() * measure(grid, space);
}

}  // namespace hartree
