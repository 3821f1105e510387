#pragma once

#include <random>
#include <string>
#include <vector>

#include "hartree/spectral_grid.hpp"

namespace testing {

using hartree::Complex;
using hartree::GridSpec;
using hartree::ScalarField;
using hartree::Vec3;

inline ScalarField random_field(const GridSpec& grid, unsigned seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal;
    ScalarField f(grid, hartree::Space::position);
    for (auto& z : f.values()) z = {normal(rng), normal(rng)};
    return f;
}

/// exp(-|x-c|^2 / (2 sigma^2) + i xi.x), unnormalized.
inline ScalarField gaussian(const GridSpec& grid, double sigma, Vec3 center = {}, Vec3 boost = {}) {
    return ScalarField::sample(grid, [&](const Vec3& x) {
        double r2 = 0.0, phase = 0.0;
        for (int a = 0; a < 3; ++a) {
            r2 += (x[a] - center[a]) * (x[a] - center[a]);
            phase += boost[a] * x[a];
        }
        return std::polar(std::exp(-0.5 * r2 / (sigma * sigma)), phase);
    });
}

inline double max_abs_diff(const ScalarField& a, const ScalarField& b) {
    double d = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
    return d;
}

/// Collects warnings for the lifetime of the object.
struct WarningCapture {
    std::vector<std::string> categories;
    WarningCapture() {
        hartree::set_warning_sink(
            [this](std::string_view category, std::string_view) { categories.emplace_back(category); });
    }
    ~WarningCapture() {
        hartree::set_warning_sink([](std::string_view, std::string_view) {});
    }
    bool saw(const std::string& category) const {
        for (const auto& c : categories)
            if (c == category) return true;
        return false;
    }
};

}  // namespace testing
