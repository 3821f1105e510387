#include "hartree/spectral_grid.hpp"

#include <algorithm>
#include <limits>
#include <sstream>

#include "hartree/fft.hpp"

namespace hartree {

GridSpec::GridSpec(int n, double length) : n_(n), length_(length) {
    if (n <= 0 || n % 2 != 0) throw UsageError("grid size n must be a positive even integer");
    if (!(length > 0.0) || !std::isfinite(length)) throw UsageError("box length must be positive");
}

const char* to_string(Space space) { return space == Space::position ? "position" : "frequency"; }

ScalarField::ScalarField(GridSpec grid, Space space)
    : grid_(grid), space_(space), values_(grid.size(), Complex{}) {}

ScalarField::ScalarField(GridSpec grid, Space space, ComplexBuffer values)
    : grid_(grid), space_(space), values_(std::move(values)) {
    if (values_.size() != grid_.size()) throw UsageError("field storage does not match grid size");
}

ScalarField ScalarField::sample(const GridSpec& grid, const std::function<Complex(const Vec3&)>& fn) {
    ScalarField out(grid, Space::position);
    const int n = grid.n();
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            for (int l = 0; l < n; ++l)
                out[grid.index(i, j, l)] = fn({grid.position(i), grid.position(j), grid.position(l)});
    return out;
}

void ScalarField::require_space(Space expected, const char* operation) const {
    if (space_ != expected) {
        std::ostringstream msg;
        msg << operation << " expects a " << to_string(expected) << "-space field, got "
            << to_string(space_);
        throw UsageError(msg.str());
    }
}

RealField::RealField(GridSpec grid, Space space)
    : grid_(grid), space_(space), values_(grid.size(), 0.0) {}

RealField::RealField(GridSpec grid, Space space, RealBuffer values)
    : grid_(grid), space_(space), values_(std::move(values)) {
    if (values_.size() != grid_.size()) throw UsageError("field storage does not match grid size");
}

// Transforms -----------------------------------------------------------------

namespace {

// (-1)^(i+j+l) times `scale`, applied in one sweep. For even n this is the
// phase exp(i k_m L/2) of the centered box on either side of the DFT.
void scale_with_parity(ScalarField& field, double scale) {
    const int n = field.grid().n();
    auto v = field.values();
    std::size_t idx = 0;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            double s = ((i + j) & 1) ? -scale : scale;
            for (int l = 0; l < n; ++l, ++idx) {
                v[idx] *= s;
                s = -s;
            }
        }
}

}  // namespace

void transform_to_frequency(ScalarField& field) {
    field.require_space(Space::position, "to_frequency");
    fft::forward(field.grid().n(), field.values().data());
    scale_with_parity(field, field.grid().cell_volume());
    field.retag(Space::frequency);
}

void transform_to_position(ScalarField& field) {
    field.require_space(Space::frequency, "to_position");
    scale_with_parity(field, 1.0 / field.grid().box_volume());
    fft::backward(field.grid().n(), field.values().data());
    field.retag(Space::position);
}

ScalarField to_frequency(ScalarField field) {
    transform_to_frequency(field);
    return field;
}

ScalarField to_position(ScalarField field) {
    transform_to_position(field);
    return field;
}

ScalarField to_complex(const RealField& field) {
    ScalarField out(field.grid(), field.space());
    auto src = field.values();
    auto dst = out.values();
    for (std::size_t i = 0; i < src.size(); ++i) dst[i] = src[i];
    return out;
}

RealField real_part(const ScalarField& field, double tol) {
    RealField out(field.grid(), field.space());
    double max_re = 0.0, max_im = 0.0;
    auto src = field.values();
    auto dst = out.values();
    for (std::size_t i = 0; i < src.size(); ++i) {
        dst[i] = src[i].real();
        max_re = std::max(max_re, std::abs(src[i].real()));
        max_im = std::max(max_im, std::abs(src[i].imag()));
    }
    if (max_im > tol * std::max(1.0, max_re)) {
        std::ostringstream msg;
        msg << "field is not real: imaginary residue " << max_im;
        throw UsageError(msg.str());
    }
    return out;
}

// Multipliers ------------------------------------------------------------------

MultiplierTable::MultiplierTable(GridSpec grid, ComplexBuffer values)
    : grid_(grid), values_(std::move(values)) {
    if (values_.size() != grid_.size()) throw UsageError("multiplier table does not match grid size");
}

MultiplierTable MultiplierTable::from_function(const GridSpec& grid, const WavenumberFunction& fn) {
    ComplexBuffer values(grid.size());
    const int n = grid.n();
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            for (int l = 0; l < n; ++l)
                values[grid.index(i, j, l)] =
                    fn({grid.wavenumber(i), grid.wavenumber(j), grid.wavenumber(l)});
    return MultiplierTable(grid, std::move(values));
}

void multiply_in_place(ScalarField& field, const MultiplierTable& table) {
    field.require_space(Space::frequency, "apply_multiplier");
    if (!(field.grid() == table.grid())) throw UsageError("multiplier grid mismatch");
    auto v = field.values();
    auto m = table.values();
    for (std::size_t i = 0; i < v.size(); ++i) v[i] *= m[i];
}

ScalarField apply_multiplier(ScalarField field, const MultiplierTable& table) {
    multiply_in_place(field, table);
    return field;
}

ScalarField apply_multiplier(ScalarField field, const WavenumberFunction& multiplier) {
    field.require_space(Space::frequency, "apply_multiplier");
    const auto& grid = field.grid();
    const int n = grid.n();
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            for (int l = 0; l < n; ++l)
                field[grid.index(i, j, l)] *=
                    multiplier({grid.wavenumber(i), grid.wavenumber(j), grid.wavenumber(l)});
    return field;
}

MultiplierTable free_flow_multiplier(const GridSpec& grid, double tau) {
    return MultiplierTable::from_function(grid, [tau](const Vec3& k) {
        const double k2 = k[0] * k[0] + k[1] * k[1] + k[2] * k[2];
        return std::polar(1.0, -tau * k2);
    });
}

MultiplierTable gradient_multiplier(const GridSpec& grid, int axis) {
    if (axis < 0 || axis > 2) throw UsageError("gradient axis must be 0, 1 or 2");
    ComplexBuffer values(grid.size());
    const int n = grid.n();
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            for (int l = 0; l < n; ++l) {
                const int along = axis == 0 ? i : (axis == 1 ? j : l);
                values[grid.index(i, j, l)] =
                    grid.is_nyquist(along) ? Complex{} : Complex{0.0, grid.wavenumber(along)};
            }
    return MultiplierTable(grid, std::move(values));
}

MultiplierTable bessel_multiplier(const GridSpec& grid, double s) {
    return MultiplierTable::from_function(grid, [s](const Vec3& k) {
        const double k2 = k[0] * k[0] + k[1] * k[1] + k[2] * k[2];
        return Complex{std::pow(1.0 + k2, 0.5 * s), 0.0};
    });
}

// Quadratures --------------------------------------------------------------------

namespace {

double measure(const GridSpec& grid, Space space) {
    return space == Space::position ? grid.cell_volume() : 1.0 / grid.box_volume();
}

}  // namespace

double lp_norm(const RealField& field, double p) {
    auto v = field.values();
    if (p == 1.0) {
        double sum = 0.0;
        for (double x : v) sum += std::abs(x);
        return sum * measure(field.grid(), field.space());
    }
    if (p == 2.0) {
        double sum = 0.0;
        for (double x : v) sum += x * x;
        return std::sqrt(sum * measure(field.grid(), field.space()));
    }
    if (p == std::numeric_limits<double>::infinity()) {
        double best = 0.0;
        for (double x : v) best = std::max(best, std::abs(x));
        return best;
    }
    throw UsageError("lp_norm supports p in {1, 2, infinity}");
}

double lp_norm(const ScalarField& field, double p) { return lp_norm(real_part(field), p); }

Complex inner_product(const ScalarField& a, const ScalarField& b) {
    if (!(a.grid() == b.grid())) throw UsageError("inner_product: grid mismatch");
    if (a.space() != b.space()) throw UsageError("inner_product: space mismatch");
    auto x = a.values();
    auto y = b.values();
    Complex sum{};
    for (std::size_t i = 0; i < x.size(); ++i) sum += std::conj(x[i]) * y[i];
    return sum * measure(a.grid(), a.space());
}

double l2_norm(const ScalarField& field) {
    double sum = 0.0;
    for (const auto& z : field.values()) sum += std::norm(z);
    return std::sqrt(sum * measure(field.grid(), field.space()));
}

// Interpolation ------------------------------------------------------------------

namespace {

struct Stencil {
    std::array<int, 3> lo;      // lattice coordinate of the lower corner
    std::array<double, 3> w;    // weight of the upper corner per axis
};

// Lattice coordinates run over [first, last]. Returns nullopt outside.
std::optional<Stencil> locate(const Vec3& frac, double first, double last) {
    Stencil s{};
    for (int a = 0; a < 3; ++a) {
        const double f = frac[a];
        if (!(f >= first && f <= last)) return std::nullopt;
        double base = std::floor(f);
        if (base >= last) base = last - 1.0;
        s.lo[a] = static_cast<int>(base);
        s.w[a] = f - base;
    }
    return s;
}

template <typename T, typename Field>
std::optional<T> trilinear(const Field& field, const Vec3& point) {
    const auto& grid = field.grid();
    const int n = grid.n();
    Vec3 frac;
    std::optional<Stencil> stencil;
    if (field.space() == Space::position) {
        const double h = grid.spacing();
        for (int a = 0; a < 3; ++a) frac[a] = (point[a] + 0.5 * grid.length()) / h;
        stencil = locate(frac, 0.0, n - 1.0);
    } else {
        const double dk = grid.wavenumber_spacing();
        for (int a = 0; a < 3; ++a) frac[a] = point[a] / dk;
        stencil = locate(frac, -(n / 2) + 1.0, n / 2 - 1.0);
    }
    if (!stencil) return std::nullopt;
    auto storage = [&](int c) {
        if (field.space() == Space::position) return c;
        return c < 0 ? c + n : c;
    };
    T acc{};
    for (int di = 0; di < 2; ++di) {
        const double wi = di ? stencil->w[0] : 1.0 - stencil->w[0];
        if (wi == 0.0) continue;
        const int i = storage(stencil->lo[0] + di);
        for (int dj = 0; dj < 2; ++dj) {
            const double wj = dj ? stencil->w[1] : 1.0 - stencil->w[1];
            if (wj == 0.0) continue;
            const int j = storage(stencil->lo[1] + dj);
            for (int dl = 0; dl < 2; ++dl) {
                const double wl = dl ? stencil->w[2] : 1.0 - stencil->w[2];
                if (wl == 0.0) continue;
                const int l = storage(stencil->lo[2] + dl);
                acc += (wi * wj * wl) * field[grid.index(i, j, l)];
            }
        }
    }
    return acc;
}

}  // namespace

std::optional<double> interpolate(const RealField& field, const Vec3& point) {
    return trilinear<double>(field, point);
}

std::optional<Complex> interpolate(const ScalarField& field, const Vec3& point) {
    return trilinear<Complex>(field, point);
}

// Containment --------------------------------------------------------------------

namespace {

template <typename Weight>
double shell_fraction_impl(const GridSpec& grid, Space space, Weight weight) {
    const int n = grid.n();
    // Centered lattice coordinate in units of the box side, in [-1/2, 1/2).
    auto centered = [&](int idx) {
        const int c = space == Space::position ? idx - n / 2 : grid.mode(idx);
        return std::abs(static_cast<double>(c) / n);
    };
    double total = 0.0, shell = 0.0;
    for (int i = 0; i < n; ++i) {
        const double ci = centered(i);
        for (int j = 0; j < n; ++j) {
            const double cij = std::max(ci, centered(j));
            for (int l = 0; l < n; ++l) {
                const double w = weight(grid.index(i, j, l));
                total += w;
                if (std::max(cij, centered(l)) > 0.4) shell += w;
            }
        }
    }
    return total > 0.0 ? shell / total : 0.0;
}

}  // namespace

double shell_fraction(const RealField& weights) {
    auto v = weights.values();
    return shell_fraction_impl(weights.grid(), weights.space(),
                               [&](std::size_t i) { return std::abs(v[i]); });
}

double shell_fraction(const ScalarField& field) {
    auto v = field.values();
    return shell_fraction_impl(field.grid(), field.space(),
                               [&](std::size_t i) { return std::norm(v[i]); });
}

bool check_containment(double fraction, std::string_view what) {
    if (fraction <= kContainmentThreshold) return true;
    std::ostringstream msg;
    msg << what << ": " << fraction << " of the mass lies in the outer 10% shell";
    warn("containment", msg.str());
    return false;
}

}  // namespace hartree
