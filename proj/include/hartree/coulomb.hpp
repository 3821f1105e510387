#pragma once

#include <string>
#include <string_view>

#include "hartree/spectral_grid.hpp"

namespace hartree {

enum class CoulombMethod { freespace_doubling, periodic_multiplier };

CoulombMethod parse_coulomb_method(std::string_view text);
std::string to_string(CoulombMethod method);

/// Madelung constant of the simple cubic lattice with neutralizing
/// background: a periodic zero-mean potential sits alpha*Q/L below the
/// isolated one near a localized charge Q.
inline constexpr double kCubicMadelung = 2.8372974794806;

struct PotentialNorms {
    double sup = 0.0;           // ||V||_inf
    double gradient_sup = 0.0;  // || |grad V| ||_inf
};

/// Solves V = sign * |x|^-1 * rho on a GridSpec.
///
/// The free-space method convolves with a kernel table on the doubled grid.
/// The table is the band-limited version of |x|^-1 truncated beyond the box
/// diagonal R = sqrt(3) L, whose transform 4 pi (1 - cos(R|k|)) / |k|^2 is
/// smooth; it is sampled on a 4x refined wavenumber lattice and reduced to
/// real space with a 3D DCT-I. Entry (0,0,0) is the regularized origin value.
/// The periodic method uses the multiplier 4 pi / |k|^2 with k = 0 dropped.
class CoulombSolver {
public:
    explicit CoulombSolver(GridSpec grid, CoulombMethod method = CoulombMethod::freespace_doubling);

    /// Solver whose "position" lattice is the wavenumber lattice of `grid`
    /// (n points, spacing 2 pi / L), used for convolutions in k.
    static CoulombSolver for_wavenumbers(const GridSpec& grid);

    const GridSpec& grid() const { return grid_; }
    CoulombMethod method() const { return method_; }

    /// Kernel sample at lattice displacement (di, dj, dl), |d| <= n per axis.
    /// Free-space method only; symmetric under d -> -d by construction.
    double green(int di, int dj, int dl) const;
    double origin_value() const { return green(0, 0, 0); }

    /// Scratch buffers for repeated solves on one thread.
    struct Workspace {
        RealBuffer padded;
        ComplexBuffer spectrum;
        ComplexBuffer scratch;
    };

    RealField hartree_potential(const RealField& rho, int sign) const;
    RealField hartree_potential(const RealField& rho, int sign, Workspace& ws) const;
    /// Complex input must be real up to 1e-12 (UsageError otherwise).
    RealField hartree_potential(const ScalarField& rho, int sign) const;
    /// Periodic potential on the doubled grid GridSpec(2n, 2L); the physical
    /// box occupies the index block [0, n)^3. Free-space method only.
    RealField doubled_potential(const RealField& rho) const;
    /// |x|^-1 * rho with the kernel table, without containment checks.
    RealField convolve(const RealField& rho, Workspace& ws) const;

    /// Sup norms of V and grad V, with the gradient taken by the spectral
    /// multiplier i k on the lattice the potential was solved on (the doubled
    /// grid for the free-space method, so box edges are not differentiated).
    PotentialNorms potential_norms(const RealField& rho, int sign) const;
    PotentialNorms potential_norms(const RealField& rho, int sign, Workspace& ws) const;

private:
    void solve_freespace(const RealField& rho, Workspace& ws, bool whole_box = false) const;
    RealField extract_physical(const Workspace& ws, int sign) const;

    GridSpec grid_;
    CoulombMethod method_;
    int doubled_ = 0;
    RealBuffer table_;            // K(d) for d in [0, n]^3
    RealBuffer kernel_spectrum_;  // real half spectrum of the doubled kernel
};

/// Sup norms from V alone, gradient via the box multiplier i k (Nyquist
/// zeroed). Accurate when V is smooth across the periodic box.
PotentialNorms potential_decay_norms(const RealField& potential);

/// (|.|^-1 * D)(k) for a momentum density on the frequency lattice: D is
/// treated as a position field on k_solver's lattice with kernel exactly
/// 1/|k| (no 4 pi). Warns when D has mass near the wavenumber boundary.
RealField coulomb_transform(const RealField& spectrum, const CoulombSolver& k_solver);

/// Reorders an FFT-ordered frequency field into the centered position layout
/// of the matching wavenumber lattice and back.
RealField frequency_to_centered(const RealField& field, const GridSpec& k_grid);
RealField centered_to_frequency(const RealField& field, const GridSpec& grid);

}  // namespace hartree
