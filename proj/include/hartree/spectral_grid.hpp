#pragma once

#include <cmath>
#include <functional>
#include <numbers>
#include <optional>
#include <span>

#include "hartree/common.hpp"

namespace hartree {

/// Cubic periodic box of side L with n points per axis, centered on the
/// origin: x_i = -L/2 + i*h. The dual lattice is k_m = 2*pi*m/L with
/// m in [-n/2, n/2-1], stored in FFT order (m >= 0 first).
class GridSpec {
public:
    GridSpec(int n, double length);

    int n() const { return n_; }
    double length() const { return length_; }
    double spacing() const { return length_ / n_; }
    double cell_volume() const {
        const double h = spacing();
        return h * h * h;
    }
    double box_volume() const { return length_ * length_ * length_; }
    double wavenumber_spacing() const { return 2.0 * std::numbers::pi / length_; }
    /// Magnitude of the Nyquist wavenumber, pi/h.
    double max_wavenumber() const { return std::numbers::pi / spacing(); }
    std::size_t size() const { return static_cast<std::size_t>(n_) * n_ * n_; }

    double position(int i) const { return -0.5 * length_ + i * spacing(); }
    int mode(int j) const { return j < n_ / 2 ? j : j - n_; }
    double wavenumber(int j) const { return mode(j) * wavenumber_spacing(); }
    bool is_nyquist(int j) const { return j == n_ / 2; }

    std::size_t index(int i, int j, int l) const {
        return (static_cast<std::size_t>(i) * n_ + j) * n_ + l;
    }

    bool operator==(const GridSpec&) const = default;

private:
    int n_;
    double length_;
};

enum class Space { position, frequency };

const char* to_string(Space space);

/// Complex field on a GridSpec. The space tag always reflects the last
/// transform applied.
class ScalarField {
public:
    ScalarField(GridSpec grid, Space space);
    ScalarField(GridSpec grid, Space space, ComplexBuffer values);

    /// Samples fn at every position-lattice point.
    static ScalarField sample(const GridSpec& grid, const std::function<Complex(const Vec3&)>& fn);

    const GridSpec& grid() const { return grid_; }
    Space space() const { return space_; }
    std::size_t size() const { return values_.size(); }

    std::span<Complex> values() { return values_; }
    std::span<const Complex> values() const { return values_; }
    Complex& operator[](std::size_t i) { return values_[i]; }
    const Complex& operator[](std::size_t i) const { return values_[i]; }

    void require_space(Space expected, const char* operation) const;

    // Used by the transforms; callers go through to_frequency / to_position.
    void retag(Space space) { space_ = space; }

private:
    GridSpec grid_;
    Space space_;
    ComplexBuffer values_;
};

/// Real field (densities, potentials, momentum densities).
class RealField {
public:
    RealField(GridSpec grid, Space space);
    RealField(GridSpec grid, Space space, RealBuffer values);

    const GridSpec& grid() const { return grid_; }
    Space space() const { return space_; }
    std::size_t size() const { return values_.size(); }

    std::span<double> values() { return values_; }
    std::span<const double> values() const { return values_; }
    double& operator[](std::size_t i) { return values_[i]; }
    const double& operator[](std::size_t i) const { return values_[i]; }

private:
    GridSpec grid_;
    Space space_;
    RealBuffer values_;
};

// Transforms ---------------------------------------------------------------
// Convention: u_hat(k) = integral of exp(-i k.x) u(x) dx. Discretely the
// forward map is h^3 times the DFT (with the phase of the centered box), the
// inverse is L^-3 times the inverse DFT.

ScalarField to_frequency(ScalarField field);
ScalarField to_position(ScalarField field);
void transform_to_frequency(ScalarField& field);
void transform_to_position(ScalarField& field);

ScalarField to_complex(const RealField& field);
/// Real part; throws UsageError when the imaginary residue exceeds tol
/// relative to max(1, max |Re|).
RealField real_part(const ScalarField& field, double tol = 1e-12);

// Multipliers --------------------------------------------------------------

using WavenumberFunction = std::function<Complex(const Vec3& k)>;

/// Precomputed pointwise multiplier on the frequency lattice (FFT order).
class MultiplierTable {
public:
    MultiplierTable(GridSpec grid, ComplexBuffer values);
    static MultiplierTable from_function(const GridSpec& grid, const WavenumberFunction& fn);

    const GridSpec& grid() const { return grid_; }
    std::span<const Complex> values() const { return values_; }

private:
    GridSpec grid_;
    ComplexBuffer values_;
};

ScalarField apply_multiplier(ScalarField field, const WavenumberFunction& multiplier);
ScalarField apply_multiplier(ScalarField field, const MultiplierTable& table);
void multiply_in_place(ScalarField& field, const MultiplierTable& table);

/// exp(-i tau |k|^2): the free flow e^{i tau Laplacian} over time tau.
MultiplierTable free_flow_multiplier(const GridSpec& grid, double tau);
/// i k_axis with the Nyquist plane zeroed (keeps real fields real).
MultiplierTable gradient_multiplier(const GridSpec& grid, int axis);
/// <k>^s = (1 + |k|^2)^(s/2).
MultiplierTable bessel_multiplier(const GridSpec& grid, double s);

// Quadratures --------------------------------------------------------------

/// p must be 1, 2 or infinity. L^1 and L^2 use the h^3 (position) or
/// (2*pi)^-3 dk^3 = L^-3 (frequency) weight.
double lp_norm(const RealField& field, double p);
double lp_norm(const ScalarField& field, double p);

/// <a, b> = integral conj(a) b, in either space (both fields must agree).
Complex inner_product(const ScalarField& a, const ScalarField& b);
double l2_norm(const ScalarField& field);

// Interpolation ------------------------------------------------------------

/// Trilinear interpolation at a physical point (position space) or a
/// wavenumber (frequency space). Returns nullopt outside the lattice hull;
/// frequency lattices exclude the unpaired Nyquist plane.
std::optional<double> interpolate(const RealField& field, const Vec3& point);
std::optional<Complex> interpolate(const ScalarField& field, const Vec3& point);

// Containment --------------------------------------------------------------

inline constexpr double kContainmentThreshold = 1e-6;

/// Fraction of the total of `weights` lying in the outer 10% shell of the
/// box, i.e. where some centered coordinate exceeds 0.4 of the box side.
double shell_fraction(const RealField& weights);
double shell_fraction(const ScalarField& field);  // uses |u|^2

/// Emits a containment warning when fraction > kContainmentThreshold.
bool check_containment(double fraction, std::string_view what);

}  // namespace hartree
