#include "hartree/scattering.hpp"

#include <Eigen/Dense>
#include <numbers>
#include <sstream>

namespace hartree {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

bool same_time(double a, double b) { return std::abs(a - b) <= 1e-9 * std::max(1.0, std::abs(b)); }

}  // namespace

// Records ---------------------------------------------------------------------

const std::vector<std::string>& record_columns() {
    static const std::vector<std::string> columns{
        "t",  "rho_L1", "rho_L2", "rho_Linf", "V_Linf",           "gradV_Linf",        "hs",
        "h2", "a2",     "D_sup",  "densfml_residual", "profile_hs_change", "mu_hs_change", "containment_fraction"};
    return columns;
}

std::vector<double> record_values(const DiagnosticsRecord& r) {
    return {r.t,  r.rho_L1, r.rho_L2, r.rho_Linf,         r.V_Linf,           r.gradV_Linf,   r.hs,
            r.h2, r.a2,     r.D_sup,  r.densfml_residual, r.profile_hs_change, r.mu_hs_change, r.containment_fraction};
}

DiagnosticsRecord record_from_values(std::span<const double> v) {
    if (v.size() != record_columns().size()) throw UsageError("record needs one value per column");
    DiagnosticsRecord r;
    r.t = v[0];
    r.rho_L1 = v[1];
    r.rho_L2 = v[2];
    r.rho_Linf = v[3];
    r.V_Linf = v[4];
    r.gradV_Linf = v[5];
    r.hs = v[6];
    r.h2 = v[7];
    r.a2 = v[8];
    r.D_sup = v[9];
    r.densfml_residual = v[10];
    r.profile_hs_change = v[11];
    r.mu_hs_change = v[12];
    r.containment_fraction = v[13];
    return r;
}

// Phase correction ----------------------------------------------------------------

namespace {

GridSpec coarse_grid_for(const GridSpec& grid, const PhaseConfig& c) {
    if (c.k_stride < 1) throw UsageError("phase sample stride must be at least 1");
    if (grid.n() % (2 * c.k_stride) != 0) throw UsageError("grid size must be divisible by twice the phase stride");
    return GridSpec(grid.n() / c.k_stride, grid.length() / c.k_stride);
}

}  // namespace

PhaseState::PhaseState(const GridSpec& grid, int sign, PhaseConfig config)
    : grid_(grid), sign_(sign), config_(config), coarse_grid_(coarse_grid_for(grid, config)) {
    if (sign < -1 || sign > 1) throw UsageError("interaction sign must be -1, 0 or +1");
    if (!(config_.k_extent > 0.0 && config_.k_extent <= 1.0)) throw UsageError("phase k_extent must lie in (0, 1]");
    if (!(config_.t1 > 0.0) || !(config_.overlap_end >= config_.t1)) throw UsageError("invalid phase regime times");
    const int n = grid.n();
    const int stride = config_.k_stride;
    const double reach = std::min(config_.k_extent * n / 2.0 + 1e-9, n / 2.0 - 1.0);
    const int max_mode = stride * static_cast<int>(std::floor(reach / stride));
    first_mode_ = -max_mode;
    axis_count_ = 2 * max_mode / stride + 1;
    const std::size_t count = static_cast<std::size_t>(axis_count_) * axis_count_ * axis_count_;
    psi.assign(count, 0.0);
    valid.assign(count, 1);
    method.assign(count, PhaseMethod::none);
    overlap_direct.assign(count, 0.0);
    overlap_asymptotic.assign(count, 0.0);
    overlap_valid.assign(count, 1);
    if (sign_ != 0) k_solver_ = std::make_shared<CoulombSolver>(CoulombSolver::for_wavenumbers(coarse_grid_));
}

Vec3 PhaseState::wavenumber(std::size_t s) const {
    const std::size_t c2 = static_cast<std::size_t>(axis_count_) * axis_count_;
    const int a = static_cast<int>(s / c2);
    const int b = static_cast<int>((s / axis_count_) % axis_count_);
    const int c = static_cast<int>(s % axis_count_);
    const double dk = grid_.wavenumber_spacing();
    return {mode(a) * dk, mode(b) * dk, mode(c) * dk};
}

double PhaseState::invalid_fraction() const {
    std::size_t bad = 0;
    for (auto v : valid) bad += v ? 0 : 1;
    return static_cast<double>(bad) / static_cast<double>(valid.size());
}

double PhaseState::overlap_discrepancy() const {
    double diff = 0.0, base = 0.0;
    for (std::size_t s = 0; s < size(); ++s) {
        if (!overlap_valid[s] || !valid[s]) continue;
        diff += (overlap_direct[s] - overlap_asymptotic[s]) * (overlap_direct[s] - overlap_asymptotic[s]);
        base += overlap_direct[s] * overlap_direct[s];
    }
    return base > 0.0 ? std::sqrt(diff / base) : kNaN;
}

double PhaseState::overlap_discrepancy_origin() const {
    const std::size_t s = origin();
    if (overlap_direct[s] == 0.0) return kNaN;
    return std::abs(overlap_direct[s] - overlap_asymptotic[s]) / std::abs(overlap_direct[s]);
}

std::vector<double> PhaseState::asymptotic_coefficient(const RealField& momentum_density) const {
    std::vector<double> out(size(), 0.0);
    if (sign_ == 0) return out;
    if (!(momentum_density.grid() == grid_) || momentum_density.space() != Space::frequency)
        throw UsageError("asymptotic_coefficient expects D on the phase grid");
    const int n = grid_.n();
    const int stride = config_.k_stride;
    const int nc = coarse_grid_.n();
    auto full_index = [n](int m) { return m >= 0 ? m : m + n; };
    RealField coarse(coarse_grid_, Space::frequency);
    for (int i = 0; i < nc; ++i)
        for (int j = 0; j < nc; ++j)
            for (int l = 0; l < nc; ++l)
                coarse[coarse_grid_.index(i, j, l)] =
                    momentum_density[grid_.index(full_index(stride * coarse_grid_.mode(i)),
                                                 full_index(stride * coarse_grid_.mode(j)),
                                                 full_index(stride * coarse_grid_.mode(l)))];
    const RealField conv = coulomb_transform(coarse, *k_solver_);
    const double scale = sign_ * 4.0 / std::pow(4.0 * kPi, 3);
    auto coarse_index = [nc](int m) { return m >= 0 ? m : m + nc; };
    for (int a = 0; a < axis_count_; ++a)
        for (int b = 0; b < axis_count_; ++b)
            for (int c = 0; c < axis_count_; ++c)
                out[index(a, b, c)] =
                    scale * conv[coarse_grid_.index(coarse_index(mode(a) / stride), coarse_index(mode(b) / stride),
                                                    coarse_index(mode(c) / stride))];
    return out;
}

void accumulate_phase(PhaseState& ps, const RealField& potential, const RealField& momentum_density, double t_start,
                      double dt) {
    const PhaseConfig& cfg = ps.config();
    const double t_mid = t_start + 0.5 * dt;
    const bool direct = t_mid <= cfg.t1;
    const bool overlap = !direct && t_mid <= cfg.overlap_end;
    const double limit = cfg.invalid_fraction * ps.grid().length();

    std::vector<double> direct_values;
    std::vector<std::uint8_t> direct_ok;
    if (direct || overlap) {
        if (potential.space() != Space::position || !(potential.grid() == ps.grid()))
            throw UsageError("accumulate_phase: potential layout mismatch");
        direct_values.assign(ps.size(), 0.0);
        direct_ok.assign(ps.size(), 1);
        for (std::size_t s = 0; s < ps.size(); ++s) {
            const Vec3 k = ps.wavenumber(s);
            const Vec3 x{2.0 * t_mid * k[0], 2.0 * t_mid * k[1], 2.0 * t_mid * k[2]};
            if (std::max({std::abs(x[0]), std::abs(x[1]), std::abs(x[2])}) > limit) {
                direct_ok[s] = 0;
                continue;
            }
            const auto v = interpolate(potential, x);
            if (!v) {
                direct_ok[s] = 0;
                continue;
            }
            direct_values[s] = *v;
        }
    }

    if (direct) {
        for (std::size_t s = 0; s < ps.size(); ++s) {
            if (!direct_ok[s]) ps.valid[s] = 0;
            if (!ps.valid[s]) continue;
            ps.psi[s] += dt * direct_values[s];
            ps.method[s] = PhaseMethod::direct;
        }
    } else {
        const auto g = ps.asymptotic_coefficient(momentum_density);
        for (std::size_t s = 0; s < ps.size(); ++s) {
            const double increment = dt * g[s] / t_mid;
            if (overlap) {
                if (!direct_ok[s]) ps.overlap_valid[s] = 0;
                ps.overlap_direct[s] += dt * direct_values[s];
                ps.overlap_asymptotic[s] += increment;
            }
            if (!ps.valid[s]) continue;
            ps.psi[s] += increment;
            ps.method[s] = PhaseMethod::asymptotic;
        }
    }
    ps.t_last = t_start + dt;
}

double phase_difference(const PhaseState& ps, std::size_t k, std::size_t p) {
    return ps.psi.at(k) - ps.psi.at(ps.mirror(p));
}

RealField phase_on_lattice(const PhaseState& ps) {
    const GridSpec& grid = ps.grid();
    const int n = grid.n();
    const int count = ps.axis_count();
    const double stride = ps.config().k_stride;
    struct AxisStencil {
        int lo;
        int hi;
        double w;  // weight of hi
    };
    std::vector<AxisStencil> axis(n);
    for (int i = 0; i < n; ++i) {
        double f = (grid.mode(i) - ps.first_mode()) / stride;
        f = std::clamp(f, 0.0, static_cast<double>(count - 1));
        const int lo = std::min(static_cast<int>(std::floor(f)), count - 1);
        const int hi = std::min(lo + 1, count - 1);
        axis[i] = {lo, hi, f - lo};
    }
    RealField out(grid, Space::frequency);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            for (int l = 0; l < n; ++l) {
                double acc = 0.0, weight = 0.0;
                for (int di = 0; di < 2; ++di) {
                    const double wi = di ? axis[i].w : 1.0 - axis[i].w;
                    if (wi == 0.0) continue;
                    const int a = di ? axis[i].hi : axis[i].lo;
                    for (int dj = 0; dj < 2; ++dj) {
                        const double wj = dj ? axis[j].w : 1.0 - axis[j].w;
                        if (wj == 0.0) continue;
                        const int b = dj ? axis[j].hi : axis[j].lo;
                        for (int dl = 0; dl < 2; ++dl) {
                            const double wl = dl ? axis[l].w : 1.0 - axis[l].w;
                            if (wl == 0.0) continue;
                            const int c = dl ? axis[l].hi : axis[l].lo;
                            const std::size_t s = ps.index(a, b, c);
                            if (!ps.valid[s]) continue;
                            const double w = wi * wj * wl;
                            acc += w * ps.psi[s];
                            weight += w;
                        }
                    }
                }
                if (weight == 0.0) {
                    // Sitting on an invalid sample: fall back to the valid corners of its cell.
                    for (int a : {axis[i].lo, std::min(axis[i].lo + 1, count - 1)})
                        for (int b : {axis[j].lo, std::min(axis[j].lo + 1, count - 1)})
                            for (int c : {axis[l].lo, std::min(axis[l].lo + 1, count - 1)}) {
                                const std::size_t s = ps.index(a, b, c);
                                if (!ps.valid[s]) continue;
                                acc += ps.psi[s];
                                weight += 1.0;
                            }
                }
                out[grid.index(i, j, l)] = weight > 0.0 ? acc / weight : 0.0;
            }
    return out;
}

// Profiles -------------------------------------------------------------------------

ProfileEnsemble free_profile(const OrbitalEnsemble& e) {
    ProfileEnsemble p;
    p.t = e.time();
    p.occupations.assign(e.occupations().begin(), e.occupations().end());
    p.spectra = free_conjugated_spectra(e);
    return p;
}

namespace {

ProfileEnsemble with_phase(ProfileEnsemble p, const RealField& psi) {
    if (psi.space() != Space::frequency) throw UsageError("phase must live on the frequency lattice");
    ComplexBuffer factor(psi.size());
    for (std::size_t i = 0; i < factor.size(); ++i) factor[i] = std::polar(1.0, psi[i]);
    parallel_for(p.spectra.size(), [&](std::size_t j) {
        if (!(p.spectra[j].grid() == psi.grid())) throw UsageError("phase grid mismatch");
        auto w = p.spectra[j].values();
        for (std::size_t i = 0; i < w.size(); ++i) w[i] *= factor[i];
    });
    return p;
}

void check_phase_usable(const OrbitalEnsemble& e, const PhaseState& ps) {
    if (!same_time(ps.t_last, e.time())) {
        std::ostringstream msg;
        msg << "phase state is at t = " << ps.t_last << " but the ensemble is at t = " << e.time();
        throw UsageError(msg.str());
    }
    if (ps.invalid_fraction() > 0.5) throw NumericalError("more than half of the phase samples are invalid");
}

}  // namespace

ProfileEnsemble modified_profile(const OrbitalEnsemble& e, const RealField& psi_on_lattice) {
    return with_phase(free_profile(e), psi_on_lattice);
}

ProfileEnsemble modified_profile(const OrbitalEnsemble& e, const PhaseState& ps) {
    check_phase_usable(e, ps);
    return modified_profile(e, phase_on_lattice(ps));
}

double profile_hs_norm(const ProfileEnsemble& p) { return gram_weighted_norm(p.spectra, p.occupations).value; }

double profile_hs_distance(const ProfileEnsemble& a, const ProfileEnsemble& b) {
    // A - B = V W V* with V = [a b] and W = diag(wa, -wb). With V = Q R
    // (Gram-Schmidt, two passes), ||A - B||_HS = ||R W R*||_F. Working on the
    // vectors avoids the cancellation in ||A||^2 + ||B||^2 - 2<A, B>.
    const std::size_t ra = a.spectra.size(), rb = b.spectra.size();
    if (ra == 0 || rb == 0) throw UsageError("profile_hs_distance: empty profile");
    if (a.occupations.size() != ra || b.occupations.size() != rb)
        throw UsageError("profile_hs_distance: occupation count mismatch");
    const auto m = static_cast<Eigen::Index>(ra + rb);
    Eigen::VectorXd w(m);
    for (std::size_t j = 0; j < ra; ++j) w(j) = a.occupations[j];
    for (std::size_t j = 0; j < rb; ++j) w(ra + j) = -b.occupations[j];

    std::vector<ScalarField> basis;
    Eigen::MatrixXcd r = Eigen::MatrixXcd::Zero(m, m);
    for (Eigen::Index c = 0; c < m; ++c) {
        const auto col = static_cast<std::size_t>(c);
        ScalarField v = col < ra ? a.spectra[col] : b.spectra[col - ra];
        if (!(v.grid() == a.spectra.front().grid()) || v.space() != a.spectra.front().space())
            throw UsageError("profile_hs_distance: layout mismatch");
        for (int pass = 0; pass < 2; ++pass)
            for (std::size_t q = 0; q < basis.size(); ++q) {
                const Complex coeff = inner_product(basis[q], v);
                r(static_cast<Eigen::Index>(q), c) += coeff;
                auto x = v.values();
                auto y = basis[q].values();
                for (std::size_t i = 0; i < x.size(); ++i) x[i] -= coeff * y[i];
            }
        const double norm = l2_norm(v);
        if (!(norm > 0.0)) continue;
        r(static_cast<Eigen::Index>(basis.size()), c) = norm;
        for (auto& z : v.values()) z /= norm;
        basis.push_back(std::move(v));
    }
    return (r * w.asDiagonal() * r.adjoint()).norm();
}

// Density formula ------------------------------------------------------------------

namespace {

using Matrix = Eigen::MatrixXcd;
using RowMajor = Eigen::Matrix<Complex, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// One axis of the stationary-phase map v -> (4 pi t)^{-1/2} sum_m
// e^{i x'^2/4t} v_hat(x'/2t), x' = x + mL, as an n x n matrix.
Matrix leading_axis_operator(const GridSpec& grid, double t, bool images) {
    const int n = grid.n();
    const double h = grid.spacing();
    const double L = grid.length();
    const double k_max = grid.max_wavenumber();
    const int reach = images ? static_cast<int>(std::ceil((2.0 * t * k_max + 0.5 * L) / L)) : 0;
    const double scale = h / std::sqrt(4.0 * kPi * t);
    Matrix a = Matrix::Zero(n, n);
    for (int i = 0; i < n; ++i)
        for (int m = -reach; m <= reach; ++m) {
            const double x = grid.position(i) + m * L;
            const double k = x / (2.0 * t);
            if (std::abs(k) > k_max) continue;
            const Complex chirp = std::polar(scale, x * x / (4.0 * t));
            for (int y = 0; y < n; ++y) a(i, y) += chirp * std::polar(1.0, -k * grid.position(y));
        }
    return a;
}

// out = (A x A x A) v for a row-major n^3 array.
void apply_separable(const Matrix& a, std::span<Complex> v) {
    const auto n = a.rows();
    const auto n2 = n * n;
    // Axis 0: v viewed as n x n^2.
    Eigen::Map<RowMajor> x0(v.data(), n, n2);
    RowMajor tmp = a * x0;
    x0 = tmp;
    // Axis 1: each slab i is n x n over (j, l).
    for (Eigen::Index i = 0; i < n; ++i) {
        Eigen::Map<RowMajor> slab(v.data() + i * n2, n, n);
        RowMajor s = a * slab;
        slab = s;
    }
    // Axis 2: v viewed as n^2 x n.
    Eigen::Map<RowMajor> x2(v.data(), n2, n);
    RowMajor t2 = x2 * a.transpose();
    x2 = t2;
}

}  // namespace

RealField density_leading_term(const OrbitalEnsemble& e, const ResidualOptions& options) {
    const double t = e.time();
    if (!(t > 0.0)) throw UsageError("density leading term needs t > 0");
    const Matrix a = leading_axis_operator(e.grid(), t, options.periodic_images);
    auto profiles = free_conjugated_orbitals(e);
    parallel_for(profiles.size(), [&](std::size_t j) { apply_separable(a, profiles[j].values()); });
    RealField lead(e.grid(), Space::position);
    auto out = lead.values();
    for (std::size_t j = 0; j < profiles.size(); ++j) {
        const double lambda = e.occupations()[j];
        auto w = profiles[j].values();
        for (std::size_t i = 0; i < out.size(); ++i) out[i] += lambda * std::norm(w[i]);
    }
    return lead;
}

double density_formula_residual(const OrbitalEnsemble& e, const ResidualOptions& options) {
    const double t = e.time();
    if (t < 1.0) throw UsageError("density formula residual is defined for t >= 1 only");
    const GridSpec& grid = e.grid();
    const RealField rho = density(e);
    const RealField lead = density_leading_term(e, options);
    const int n = grid.n();
    const double bound = 2.0 * t * grid.max_wavenumber();
    std::vector<std::uint8_t> inside(n);
    for (int i = 0; i < n; ++i) inside[i] = options.periodic_images || std::abs(grid.position(i)) <= bound;
    double worst = 0.0;
    for (int i = 0; i < n; ++i) {
        if (!inside[i]) continue;
        for (int j = 0; j < n; ++j) {
            if (!inside[j]) continue;
            for (int l = 0; l < n; ++l) {
                if (!inside[l]) continue;
                const std::size_t idx = grid.index(i, j, l);
                worst = std::max(worst, std::abs(rho[idx] - lead[idx]));
            }
        }
    }
    return worst;
}

// Fits -----------------------------------------------------------------------------

DecayFit decay_fit(std::span<const double> t, std::span<const double> values, double t_a, double t_b) {
    if (t.size() != values.size()) throw UsageError("decay_fit: series lengths differ");
    std::vector<double> x, y;
    for (std::size_t i = 0; i < t.size(); ++i) {
        if (t[i] < t_a * (1.0 - 1e-12) || t[i] > t_b * (1.0 + 1e-12)) continue;
        if (!(values[i] > 0.0)) {
            std::ostringstream msg;
            msg << "decay_fit: nonpositive value " << values[i] << " at t = " << t[i];
            throw UsageError(msg.str());
        }
        x.push_back(std::log(t[i]));
        y.push_back(std::log(values[i]));
    }
    if (x.size() < 5) throw UsageError("decay_fit needs at least five points in the window");
    const double count = static_cast<double>(x.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= count;
    my /= count;
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (!(sxx > 0.0)) throw UsageError("decay_fit: window holds a single time");
    DecayFit fit;
    fit.exponent = sxy / sxx;
    fit.intercept = my - fit.exponent * mx;
    // A series flat to roundoff (log-space spread below 1e-9) is a perfect fit.
    fit.r2 = syy > 1e-18 * count ? (sxy * sxy) / (sxx * syy) : 1.0;
    fit.points = x.size();
    return fit;
}

RealField extract_g(const RealField& momentum_density, int sign, const CoulombSolver& k_solver) {
    if (sign < -1 || sign > 1) throw UsageError("interaction sign must be -1, 0 or +1");
    if (sign == 0) return RealField(momentum_density.grid(), Space::frequency);
    RealField g = coulomb_transform(momentum_density, k_solver);
    const double scale = sign * 4.0 / std::pow(4.0 * kPi, 3);
    for (double& x : g.values()) x *= scale;
    return g;
}

void PhaseHistory::append(const PhaseState& ps) {
    times.push_back(ps.t_last);
    std::vector<double> row(ps.size());
    for (std::size_t s = 0; s < row.size(); ++s) row[s] = ps.valid[s] ? ps.psi[s] : kNaN;
    psi.push_back(std::move(row));
}

PhaseFit fit_phase_parameters(const PhaseHistory& history, double t_a, double t_b) {
    std::vector<std::size_t> rows;
    for (std::size_t r = 0; r < history.times.size(); ++r)
        if (history.times[r] >= t_a * (1.0 - 1e-12) && history.times[r] <= t_b * (1.0 + 1e-12)) rows.push_back(r);
    if (rows.size() < 5) throw UsageError("fit_phase_parameters needs at least five record times in the window");
    const std::size_t count = history.psi[rows.front()].size();
    double mx = 0.0;
    for (auto r : rows) mx += std::log(history.times[r]);
    mx /= static_cast<double>(rows.size());
    double sxx = 0.0;
    for (auto r : rows) sxx += (std::log(history.times[r]) - mx) * (std::log(history.times[r]) - mx);

    PhaseFit fit;
    fit.g.assign(count, kNaN);
    fit.h.assign(count, kNaN);
    fit.valid.assign(count, 0);
    std::size_t good = 0;
    for (std::size_t s = 0; s < count; ++s) {
        double my = 0.0;
        bool ok = true;
        for (auto r : rows) {
            const double y = history.psi[r][s];
            if (!std::isfinite(y)) {
                ok = false;
                break;
            }
            my += y;
        }
        if (!ok) continue;
        my /= static_cast<double>(rows.size());
        double sxy = 0.0;
        for (auto r : rows) sxy += (std::log(history.times[r]) - mx) * (history.psi[r][s] - my);
        fit.g[s] = sxy / sxx;
        fit.h[s] = my - fit.g[s] * mx;
        fit.valid[s] = 1;
        ++good;
    }
    if (good == 0) throw UsageError("fit_phase_parameters: every sample is invalid");
    return fit;
}

// Monitor --------------------------------------------------------------------------

DiagnosticsMonitor::DiagnosticsMonitor(const OrbitalEnsemble& initial, std::shared_ptr<const CoulombSolver> coulomb,
                                       MonitorConfig config)
    : coulomb_(std::move(coulomb)),
      config_(std::move(config)),
      sign_(initial.interaction_sign()),
      phase_(initial.grid(), initial.interaction_sign(), config_.phase) {
    if (sign_ != 0 && !coulomb_) throw UsageError("interacting monitor needs a Coulomb solver");
    phase_.t_last = initial.time();
    reset_reference(initial);
}

void DiagnosticsMonitor::reset_reference(const OrbitalEnsemble& e) {
    auto free = free_profile(e);
    previous_modified_ = with_phase(free, phase_on_lattice(phase_));
    previous_free_ = std::move(free);
}

void DiagnosticsMonitor::on_step(const StepContext& ctx) {
    accumulate_phase(phase_, ctx.potential, ctx.momentum_density, ctx.t_start, ctx.dt);
    phase_.t_last = ctx.ensemble.time();
}

DiagnosticsRecord DiagnosticsMonitor::on_record(const OrbitalEnsemble& e) {
    constexpr double inf = std::numeric_limits<double>::infinity();
    DiagnosticsRecord r;
    r.t = e.time();
    const RealField rho = density(e);
    r.rho_L1 = lp_norm(rho, 1.0);
    r.rho_L2 = lp_norm(rho, 2.0);
    r.rho_Linf = lp_norm(rho, inf);
    if (sign_ != 0) {
        const auto norms = coulomb_->potential_norms(rho, sign_, workspace_);
        r.V_Linf = norms.sup;
        r.gradV_Linf = norms.gradient_sup;
    }
    r.hs = hs_norm(e);
    r.h2 = h2_norm(e);
    r.a2 = a2_norm(e);
    const RealField d = antidiagonal_spectrum(e);
    r.D_sup = lp_norm(d, inf);
    if (r.t >= 1.0) r.densfml_residual = density_formula_residual(e, config_.residual);
    r.containment_fraction = shell_fraction(rho);

    check_phase_usable(e, phase_);
    auto free = free_profile(e);
    auto modified = with_phase(free, phase_on_lattice(phase_));
    r.profile_hs_change = profile_hs_distance(modified, *previous_modified_);
    r.mu_hs_change = profile_hs_distance(free, *previous_free_);
    if (r.hs > 0.0)
        max_profile_mismatch_ = std::max(max_profile_mismatch_, std::abs(profile_hs_norm(modified) - r.hs) / r.hs);

    for (double s : config_.dyadic_times) {
        if (!same_time(s, r.t)) continue;
        if (dyadic_modified_ && same_time(2.0 * dyadic_time_, r.t))
            dyadic_.push_back({dyadic_time_, profile_hs_distance(modified, *dyadic_modified_),
                               profile_hs_distance(free, *dyadic_free_)});
        dyadic_modified_ = modified;
        dyadic_free_ = free;
        dyadic_time_ = r.t;
    }
    if (r.t >= 1.0 && std::isnan(d_sup_reference_)) d_sup_reference_ = r.D_sup;

    previous_modified_ = std::move(modified);
    previous_free_ = std::move(free);
    history_.append(phase_);
    records_.push_back(r);
    return r;
}

void DiagnosticsMonitor::attach(EvolveOptions& options, std::function<void(const DiagnosticsRecord&)> sink) {
    options.on_step = [this](const StepContext& ctx) { on_step(ctx); };
    options.on_record = [this, sink = std::move(sink)](const OrbitalEnsemble& e) {
        const auto r = on_record(e);
        if (sink) sink(r);
    };
}

}  // namespace hartree
