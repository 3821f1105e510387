#pragma once

#include <cstdint>
#include <limits>
#include <memory>
#include <optional>

#include "hartree/coulomb.hpp"
#include "hartree/propagator.hpp"

namespace hartree {

// Records ---------------------------------------------------------------------

/// One time slice of every monitored quantity.
struct DiagnosticsRecord {
    double t = 0.0;
    double rho_L1 = 0.0;
    double rho_L2 = 0.0;
    double rho_Linf = 0.0;
    double V_Linf = 0.0;
    double gradV_Linf = 0.0;
    double hs = 0.0;
    double h2 = 0.0;
    double a2 = 0.0;
    double D_sup = 0.0;
    double densfml_residual = std::numeric_limits<double>::quiet_NaN();
    double profile_hs_change = 0.0;
    double mu_hs_change = 0.0;
    double containment_fraction = 0.0;
};

/// Column names in declaration order.
const std::vector<std::string>& record_columns();
std::vector<double> record_values(const DiagnosticsRecord& r);
DiagnosticsRecord record_from_values(std::span<const double> values);

// Phase correction ------------------------------------------------------------

enum class PhaseMethod : std::uint8_t { none, direct, asymptotic };

struct PhaseConfig {
    int k_stride = 2;       // sample every k_stride-th lattice mode per axis
    double k_extent = 0.5;  // samples satisfy |k|_inf <= k_extent * k_max
    double t1 = 1.0;        // direct regime for step midpoints t <= t1
    double overlap_end = 2.0;
    double invalid_fraction = 0.45;  // direct sample invalid once |2tk|_inf > this * L
};

/// Psi(t, k) = integral_0^t V(s, 2sk) ds on a cubic sublattice of wavenumbers.
/// Direct regime: midpoint rule with V interpolated at 2sk. Asymptotic regime:
/// V(s, 2sk) ~ +-4 (4 pi)^-3 / s * (|.|^-1 * D(s))(k), with D restricted to the
/// sample stride so the convolution runs on the sample lattice itself.
class PhaseState {
public:
    PhaseState(const GridSpec& grid, int sign, PhaseConfig config = {});

    const GridSpec& grid() const { return grid_; }
    int sign() const { return sign_; }
    const PhaseConfig& config() const { return config_; }

    std::size_t size() const { return psi.size(); }
    int axis_count() const { return axis_count_; }
    int first_mode() const { return first_mode_; }
    /// Lattice mode of sample index a along one axis.
    int mode(int a) const { return first_mode_ + config_.k_stride * a; }
    std::size_t index(int a, int b, int c) const {
        return (static_cast<std::size_t>(a) * axis_count_ + b) * axis_count_ + c;
    }
    Vec3 wavenumber(std::size_t s) const;
    /// Index of the sample at k = 0.
    std::size_t origin() const { return index(axis_count_ / 2, axis_count_ / 2, axis_count_ / 2); }
    /// Index of the sample at -k.
    std::size_t mirror(std::size_t s) const { return size() - 1 - s; }

    double invalid_fraction() const;
    /// ||direct - asymptotic|| / ||direct|| of the increments collected on
    /// (t1, overlap_end], over samples valid in both; NaN before any overlap.
    double overlap_discrepancy() const;
    /// Same, at the k = 0 sample only.
    double overlap_discrepancy_origin() const;

    /// Sample lattice used by the asymptotic regime (spacing k_stride * dk).
    const GridSpec& coarse_grid() const { return coarse_grid_; }

    std::vector<double> psi;
    std::vector<std::uint8_t> valid;
    std::vector<PhaseMethod> method;
    std::vector<double> overlap_direct;
    std::vector<double> overlap_asymptotic;
    std::vector<std::uint8_t> overlap_valid;
    double t_last = 0.0;

    /// g(s, k) = +-4 (4 pi)^-3 (|.|^-1 * D)(k) at every sample.
    std::vector<double> asymptotic_coefficient(const RealField& momentum_density) const;

private:
    GridSpec grid_;
    int sign_;
    PhaseConfig config_;
    int axis_count_ = 0;
    int first_mode_ = 0;
    GridSpec coarse_grid_;
    std::shared_ptr<const CoulombSolver> k_solver_;
};

/// Adds the increment of one propagator step [t_start, t_start + dt] given
/// the step's potential and momentum density.
void accumulate_phase(PhaseState& ps, const RealField& potential, const RealField& momentum_density,
                      double t_start, double dt);

/// Phi(t, k, p) = Psi(t, k) - Psi(t, -p) for samples k and p.
double phase_difference(const PhaseState& ps, std::size_t k, std::size_t p);

/// Psi interpolated (trilinear over valid samples, clamped to the sample
/// hull) at every point of the frequency lattice.
RealField phase_on_lattice(const PhaseState& ps);

// Profiles ---------------------------------------------------------------------

/// w_hat_j = e^{i Psi} e^{it|k|^2} u_hat_j (Psi = 0 gives the free profile).
struct ProfileEnsemble {
    double t = 0.0;
    std::vector<double> occupations;
    std::vector<ScalarField> spectra;
};

/// Errors: more than half of the samples invalid, or ps.t_last != e.time().
ProfileEnsemble modified_profile(const OrbitalEnsemble& e, const PhaseState& ps);
ProfileEnsemble modified_profile(const OrbitalEnsemble& e, const RealField& psi_on_lattice);
ProfileEnsemble free_profile(const OrbitalEnsemble& e);

double profile_hs_norm(const ProfileEnsemble& p);
/// ||A - B||_HS via a QR factorization of the joint orbital set.
double profile_hs_distance(const ProfileEnsemble& a, const ProfileEnsemble& b);

// Density formula ---------------------------------------------------------------

struct ResidualOptions {
    /// Sum the stationary-phase term over periodic images of x, matching the
    /// torus the dynamics lives on. Off gives the bare whole-space formula.
    bool periodic_images = true;
};

/// Leading term rho_lead(x) = sum_j lambda_j |(4 pi i t)^{-3/2} sum_m
/// e^{i|x+Lm|^2/4t} v_hat_j((x+Lm)/2t)|^2, with v_hat evaluated exactly
/// (trigonometric sum) inside the k-box and zero outside. Without images
/// this is (4 pi t)^-3 D(t, x/2t).
RealField density_leading_term(const OrbitalEnsemble& e, const ResidualOptions& options = {});

/// sup_x |rho - rho_lead| over points whose rescaled wavenumber x/2t lies in
/// the k-box (every point when images are summed). Refuses t < 1.
double density_formula_residual(const OrbitalEnsemble& e, const ResidualOptions& options = {});

// Fits ------------------------------------------------------------------------

struct DecayFit {
    double exponent = 0.0;
    double intercept = 0.0;  // log value at t = 1
    double r2 = 0.0;
    std::size_t points = 0;
};

/// Least squares of log(value) against log(t) for t in [t_a, t_b]; needs at
/// least five points, all values positive. r2 is 1 for a series that is
/// constant to roundoff.
DecayFit decay_fit(std::span<const double> t, std::span<const double> values, double t_a, double t_b);

/// g(k) = sign * 4 (4 pi)^-3 (|.|^-1 * D)(k) on the full frequency lattice.
RealField extract_g(const RealField& momentum_density, int sign, const CoulombSolver& k_solver);

/// Psi samples at record times.
struct PhaseHistory {
    std::vector<double> times;
    std::vector<std::vector<double>> psi;  // NaN marks an invalid sample

    void append(const PhaseState& ps);
};

struct PhaseFit {
    std::vector<double> g;  // slope against log t (NaN when excluded)
    std::vector<double> h;  // intercept
    std::vector<std::uint8_t> valid;
};

/// Per-sample regression Psi = h + g log t over record times in [t_a, t_b].
PhaseFit fit_phase_parameters(const PhaseHistory& history, double t_a, double t_b);

// Monitor ---------------------------------------------------------------------

struct MonitorConfig {
    PhaseConfig phase;
    ResidualOptions residual;
    /// Times whose consecutive pairs give the dyadic profile differences.
    std::vector<double> dyadic_times{2.0, 4.0, 8.0, 16.0};
};

struct DyadicChange {
    double s = 0.0;  // pair (s, 2s)
    double modified = 0.0;
    double unmodified = 0.0;
};

/// Evolve companion: accumulates Psi every step and builds a record at each
/// scheduled time. Also tracks dyadic profile differences and the largest
/// profile-vs-gamma HS mismatch seen.
class DiagnosticsMonitor {
public:
    DiagnosticsMonitor(const OrbitalEnsemble& initial, std::shared_ptr<const CoulombSolver> coulomb,
                       MonitorConfig config = {});

    void on_step(const StepContext& ctx);
    DiagnosticsRecord on_record(const OrbitalEnsemble& e);

    /// Hooks into evolve options; records go to `sink` as they are made.
    void attach(EvolveOptions& options, std::function<void(const DiagnosticsRecord&)> sink = {});

    const PhaseState& phase() const { return phase_; }
    PhaseState& phase() { return phase_; }
    const std::vector<DiagnosticsRecord>& records() const { return records_; }
    const PhaseHistory& history() const { return history_; }
    PhaseHistory& history() { return history_; }
    const std::vector<DyadicChange>& dyadic_changes() const { return dyadic_; }
    double max_profile_norm_mismatch() const { return max_profile_mismatch_; }
    /// D_sup at the first record at or after t = 1 (NaN before).
    double d_sup_reference() const { return d_sup_reference_; }

    /// Restores the previous-record profiles after a resume.
    void reset_reference(const OrbitalEnsemble& e);

private:
    std::shared_ptr<const CoulombSolver> coulomb_;
    MonitorConfig config_;
    int sign_;
    PhaseState phase_;
    PhaseHistory history_;
    std::vector<DiagnosticsRecord> records_;
    std::optional<ProfileEnsemble> previous_modified_;
    std::optional<ProfileEnsemble> previous_free_;
    std::optional<ProfileEnsemble> dyadic_modified_;
    std::optional<ProfileEnsemble> dyadic_free_;
    double dyadic_time_ = 0.0;
    std::vector<DyadicChange> dyadic_;
    double max_profile_mismatch_ = 0.0;
    double d_sup_reference_ = std::numeric_limits<double>::quiet_NaN();
    CoulombSolver::Workspace workspace_;
};

}  // namespace hartree
