#include "hartree/coulomb.hpp"

#include <algorithm>

#include "hartree/fft.hpp"

namespace hartree {

namespace {

constexpr double kPi = std::numbers::pi;

// Wavenumber of half-spectrum or full-axis index `idx` on a lattice of N
// points with spacing dk; the Nyquist index maps to zero.
double doubled_wavenumber(int idx, int N, double dk) {
    if (idx == N / 2) return 0.0;
    return (idx < N / 2 ? idx : idx - N) * dk;
}

}  // namespace

CoulombMethod parse_coulomb_method(std::string_view text) {
    if (text == "freespace_doubling" || text == "freespace") return CoulombMethod::freespace_doubling;
    if (text == "periodic_multiplier" || text == "periodic") return CoulombMethod::periodic_multiplier;
    throw UsageError("unknown coulomb method '" + std::string(text) + "'");
}

std::string to_string(CoulombMethod method) {
    return method == CoulombMethod::freespace_doubling ? "freespace_doubling" : "periodic_multiplier";
}

CoulombSolver::CoulombSolver(GridSpec grid, CoulombMethod method) : grid_(grid), method_(method) {
    if (method_ != CoulombMethod::freespace_doubling) return;

    const int n = grid_.n();
    const double h = grid_.spacing();
    const int m = 2 * n + 1;
    const double radius = std::sqrt(3.0) * grid_.length();
    const double dk = 2.0 * kPi / (4.0 * n * h);

    // Truncated kernel transform on the octant of the 4n-point lattice.
    RealBuffer samples(static_cast<std::size_t>(m) * m * m);
    parallel_for(static_cast<std::size_t>(m), [&](std::size_t a) {
        const double ka = a * dk;
        for (int b = 0; b < m; ++b) {
            const double kb = b * dk;
            for (int c = 0; c < m; ++c) {
                const double kc = c * dk;
                const double k2 = ka * ka + kb * kb + kc * kc;
                double value;
                if (k2 == 0.0) {
                    value = 2.0 * kPi * radius * radius;
                } else {
                    const double half = 0.5 * radius * std::sqrt(k2);
                    const double s = std::sin(half);
                    // 1 - cos(x) = 2 sin^2(x/2) avoids cancellation at small k.
                    value = 8.0 * kPi * s * s / k2;
                }
                samples[(a * m + b) * m + c] = value;
            }
        }
    });
    fft::cosine_type1(m, samples.data());

    const double scale = 1.0 / (std::pow(4.0 * n, 3) * h * h * h);
    const int t = n + 1;
    table_.assign(static_cast<std::size_t>(t) * t * t, 0.0);
    for (int a = 0; a < t; ++a)
        for (int b = 0; b < t; ++b)
            for (int c = 0; c < t; ++c)
                table_[(static_cast<std::size_t>(a) * t + b) * t + c] =
                    samples[(static_cast<std::size_t>(a) * m + b) * m + c] * scale;
    samples = RealBuffer();

    doubled_ = 2 * n;
    const int N = doubled_;
    RealBuffer kernel(static_cast<std::size_t>(N) * N * N);
    auto fold = [&](int i) { return i <= n ? i : N - i; };
    for (int i = 0; i < N; ++i)
        for (int j = 0; j < N; ++j)
            for (int l = 0; l < N; ++l)
                kernel[(static_cast<std::size_t>(i) * N + j) * N + l] = green(fold(i), fold(j), fold(l));

    ComplexBuffer spectrum(fft::half_spectrum_size(N));
    fft::forward_real(N, kernel.data(), spectrum.data());
    // The kernel is even, so its spectrum is real. Fold in the c2r
    // normalization and the h^3 quadrature weight.
    const double weight = h * h * h / (static_cast<double>(N) * N * N);
    kernel_spectrum_.resize(spectrum.size());
    for (std::size_t i = 0; i < spectrum.size(); ++i) kernel_spectrum_[i] = spectrum[i].real() * weight;
}

CoulombSolver CoulombSolver::for_wavenumbers(const GridSpec& grid) {
    return CoulombSolver(GridSpec(grid.n(), grid.n() * grid.wavenumber_spacing()));
}

double CoulombSolver::green(int di, int dj, int dl) const {
    if (method_ != CoulombMethod::freespace_doubling) throw UsageError("green: free-space method only");
    const int n = grid_.n();
    di = std::abs(di);
    dj = std::abs(dj);
    dl = std::abs(dl);
    if (di > n || dj > n || dl > n) throw UsageError("green: displacement outside the kernel table");
    const int t = n + 1;
    return table_[(static_cast<std::size_t>(di) * t + dj) * t + dl];
}

void CoulombSolver::solve_freespace(const RealField& rho, Workspace& ws, bool whole_box) const {
    const int n = grid_.n();
    const int N = doubled_;
    ws.padded.resize(static_cast<std::size_t>(N) * N * N);
    ws.spectrum.resize(fft::half_spectrum_size(N));
    ws.scratch.resize(ws.spectrum.size());
    // Only lines inside the physical block are read by the pruned transform.
    auto src = rho.values();
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            const auto from = src.begin() + grid_.index(i, j, 0);
            const auto to = ws.padded.begin() + (static_cast<std::size_t>(i) * N + j) * N;
            std::copy_n(from, n, to);
            std::fill(to + n, to + N, 0.0);
        }
    fft::forward_real_corner(N, n, ws.padded.data(), ws.spectrum.data());
    for (std::size_t i = 0; i < ws.spectrum.size(); ++i) ws.scratch[i] = ws.spectrum[i] * kernel_spectrum_[i];
    if (whole_box)
        fft::backward_real(N, ws.scratch.data(), ws.padded.data());
    else
        fft::backward_real_corner(N, n, ws.scratch.data(), ws.padded.data());
}

RealField CoulombSolver::extract_physical(const Workspace& ws, int sign) const {
    const int n = grid_.n();
    const int N = doubled_;
    RealField out(grid_, Space::position);
    auto dst = out.values();
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            const std::size_t from = (static_cast<std::size_t>(i) * N + j) * N;
            const std::size_t to = grid_.index(i, j, 0);
            for (int l = 0; l < n; ++l) dst[to + l] = sign * ws.padded[from + l];
        }
    return out;
}

namespace {

void require_rho(const GridSpec& grid, const RealField& rho, int sign) {
    if (!(rho.grid() == grid)) throw UsageError("hartree_potential: grid mismatch");
    if (rho.space() != Space::position) throw UsageError("hartree_potential expects a position-space density");
    if (sign < -1 || sign > 1) throw UsageError("interaction sign must be -1, 0 or +1");
}

ScalarField periodic_spectrum(const RealField& rho) {
    auto spectrum = to_frequency(to_complex(rho));
    const auto& grid = rho.grid();
    const int n = grid.n();
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            for (int l = 0; l < n; ++l) {
                const double k2 = grid.wavenumber(i) * grid.wavenumber(i) +
                                  grid.wavenumber(j) * grid.wavenumber(j) +
                                  grid.wavenumber(l) * grid.wavenumber(l);
                spectrum[grid.index(i, j, l)] *= k2 == 0.0 ? 0.0 : 4.0 * kPi / k2;
            }
    return spectrum;
}

}  // namespace

RealField CoulombSolver::hartree_potential(const RealField& rho, int sign, Workspace& ws) const {
    require_rho(grid_, rho, sign);
    if (sign == 0) return RealField(grid_, Space::position);
    check_containment(shell_fraction(rho), "hartree_potential density");
    if (method_ == CoulombMethod::periodic_multiplier) {
        auto v = real_part(to_position(periodic_spectrum(rho)), 1e-10);
        if (sign < 0)
            for (double& x : v.values()) x = -x;
        return v;
    }
    solve_freespace(rho, ws);
    return extract_physical(ws, sign);
}

RealField CoulombSolver::doubled_potential(const RealField& rho) const {
    require_rho(grid_, rho, 1);
    if (method_ != CoulombMethod::freespace_doubling) throw UsageError("doubled_potential: free-space method only");
    Workspace ws;
    solve_freespace(rho, ws, true);
    return RealField(GridSpec(doubled_, 2.0 * grid_.length()), Space::position, std::move(ws.padded));
}

RealField CoulombSolver::convolve(const RealField& rho, Workspace& ws) const {
    require_rho(grid_, rho, 1);
    if (method_ != CoulombMethod::freespace_doubling) throw UsageError("convolve: free-space method only");
    solve_freespace(rho, ws);
    return extract_physical(ws, 1);
}

RealField CoulombSolver::hartree_potential(const RealField& rho, int sign) const {
    Workspace ws;
    return hartree_potential(rho, sign, ws);
}

RealField CoulombSolver::hartree_potential(const ScalarField& rho, int sign) const {
    rho.require_space(Space::position, "hartree_potential");
    return hartree_potential(real_part(rho, 1e-12), sign);
}

PotentialNorms CoulombSolver::potential_norms(const RealField& rho, int sign, Workspace& ws) const {
    require_rho(grid_, rho, sign);
    if (sign == 0) return {};
    if (method_ == CoulombMethod::periodic_multiplier) {
        auto v = real_part(to_position(periodic_spectrum(rho)), 1e-10);
        return potential_decay_norms(v);
    }

    solve_freespace(rho, ws);
    const int n = grid_.n();
    const int N = doubled_;
    PotentialNorms out;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            for (int l = 0; l < n; ++l)
                out.sup = std::max(out.sup, std::abs(ws.padded[(static_cast<std::size_t>(i) * N + j) * N + l]));

    const double dk = kPi / grid_.length();  // doubled box has side 2L
    const int half = N / 2 + 1;
    RealBuffer grad2(grid_.size(), 0.0);
    for (int axis = 0; axis < 3; ++axis) {
        ws.scratch.resize(ws.spectrum.size());
        for (int i = 0; i < N; ++i)
            for (int j = 0; j < N; ++j)
                for (int l = 0; l < half; ++l) {
                    const int along = axis == 0 ? i : (axis == 1 ? j : l);
                    const std::size_t idx = (static_cast<std::size_t>(i) * N + j) * half + l;
                    ws.scratch[idx] = ws.spectrum[idx] * kernel_spectrum_[idx] * Complex{0.0, doubled_wavenumber(along, N, dk)};
                }
        fft::backward_real_corner(N, n, ws.scratch.data(), ws.padded.data());
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                for (int l = 0; l < n; ++l) {
                    const double g = ws.padded[(static_cast<std::size_t>(i) * N + j) * N + l];
                    grad2[grid_.index(i, j, l)] += g * g;
                }
    }
    for (double g2 : grad2) out.gradient_sup = std::max(out.gradient_sup, g2);
    out.gradient_sup = std::sqrt(out.gradient_sup);
    return out;
}

PotentialNorms CoulombSolver::potential_norms(const RealField& rho, int sign) const {
    Workspace ws;
    return potential_norms(rho, sign, ws);
}

PotentialNorms potential_decay_norms(const RealField& potential) {
    if (potential.space() != Space::position)
        throw UsageError("potential_decay_norms expects a position-space potential");
    PotentialNorms out;
    out.sup = lp_norm(potential, std::numeric_limits<double>::infinity());
    const auto spectrum = to_frequency(to_complex(potential));
    RealBuffer grad2(potential.size(), 0.0);
    for (int axis = 0; axis < 3; ++axis) {
        auto g = to_position(apply_multiplier(spectrum, gradient_multiplier(potential.grid(), axis)));
        auto v = g.values();
        for (std::size_t i = 0; i < v.size(); ++i) grad2[i] += v[i].real() * v[i].real();
    }
    for (double g2 : grad2) out.gradient_sup = std::max(out.gradient_sup, g2);
    out.gradient_sup = std::sqrt(out.gradient_sup);
    return out;
}

RealField frequency_to_centered(const RealField& field, const GridSpec& k_grid) {
    if (field.space() != Space::frequency) throw UsageError("frequency_to_centered expects a frequency field");
    const int n = field.grid().n();
    if (k_grid.n() != n) throw UsageError("frequency_to_centered: lattice size mismatch");
    RealField out(k_grid, Space::position);
    auto wrap = [n](int c) { return (c + n / 2) % n; };
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            for (int l = 0; l < n; ++l)
                out[k_grid.index(i, j, l)] = field[field.grid().index(wrap(i), wrap(j), wrap(l))];
    return out;
}

RealField centered_to_frequency(const RealField& field, const GridSpec& grid) {
    if (field.space() != Space::position) throw UsageError("centered_to_frequency expects a centered field");
    const int n = field.grid().n();
    if (grid.n() != n) throw UsageError("centered_to_frequency: lattice size mismatch");
    RealField out(grid, Space::frequency);
    auto wrap = [n](int c) { return (c + n / 2) % n; };
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            for (int l = 0; l < n; ++l)
                out[grid.index(wrap(i), wrap(j), wrap(l))] = field[field.grid().index(i, j, l)];
    return out;
}

RealField coulomb_transform(const RealField& spectrum, const CoulombSolver& k_solver) {
    if (spectrum.space() != Space::frequency) throw UsageError("coulomb_transform expects a frequency field");
    const auto& grid = spectrum.grid();
    const auto& kg = k_solver.grid();
    const double expected = grid.n() * grid.wavenumber_spacing();
    if (kg.n() != grid.n() || std::abs(kg.length() - expected) > 1e-12 * expected)
        throw UsageError("coulomb_transform: solver does not match the wavenumber lattice");
    if (k_solver.method() != CoulombMethod::freespace_doubling)
        throw UsageError("coulomb_transform requires the free-space method");
    check_containment(shell_fraction(spectrum), "coulomb_transform momentum density");
    auto centered = frequency_to_centered(spectrum, kg);
    CoulombSolver::Workspace ws;
    return centered_to_frequency(k_solver.convolve(centered, ws), grid);
}

}  // namespace hartree
