#pragma once

#include <string>

#include "hartree/common.hpp"

// Thin, thread-safe cache of FFTW plans for cubic n^3 row-major arrays.
// Transforms here are unnormalized; physical scalings live in spectral_grid.
namespace hartree::fft {

enum class Effort { estimate, measure };

/// Planner rigor for plans created after the call. Plans already cached keep
/// the effort they were created with.
void set_effort(Effort effort);
Effort effort();

bool import_wisdom(const std::string& path);
void export_wisdom(const std::string& path);

/// Drops every cached plan (tests use this to switch effort).
void clear_plans();

void forward(int n, Complex* data);   // in place, e^{-i...}
void backward(int n, Complex* data);  // in place, e^{+i...}

/// Real input of n^3, half-spectrum output of n*n*(n/2+1). Input preserved.
void forward_real(int n, const double* in, Complex* out);
/// Half-spectrum input (destroyed) to n^3 real output.
void backward_real(int n, Complex* in, double* out);

/// forward_real for input supported in the corner block [0, m)^3 of the
/// n^3 array. Lines with a first or middle index >= m are never read; the
/// rest must be zero past m. Skips the 1D transforms of all-zero lines.
void forward_real_corner(int n, int m, const double* in, Complex* out);
/// backward_real that only produces lines with first and middle index < m.
void backward_real_corner(int n, int m, Complex* in, double* out);

/// 3D DCT-I (FFTW REDFT00) in place on an m^3 array, m >= 2.
void cosine_type1(int m, double* data);

inline std::size_t half_spectrum_size(int n) {
    return static_cast<std::size_t>(n) * n * (n / 2 + 1);
}

}  // namespace hartree::fft
