#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <istream>
#include <map>
#include <string>

#include "hartree/fft.hpp"
#include "hartree/oracle.hpp"
#include "hartree/scattering.hpp"

namespace hartree::runner {

struct OrbitalConfig {
    std::string id;
    double occupation = 1.0;
    GaussianSpec gaussian;
    /// Without an explicit amplitude the orbital is scaled to unit L2 norm.
    bool normalize = true;
};

/// Everything one experiment needs. Parsed from flat `key = value` text:
///
///     grid.n = 64
///     grid.L = 48
///     time.dt = 0.01
///     time.t_end = 20
///     time.output = 40            # log-spaced count, or a list: 1, 2.5, 5
///     interaction.sign = +1
///     orbital.a.occupation = 1
///     orbital.a.center = 0, 0, 0
///
/// Unknown keys are errors.
struct RunConfig {
    int n = 64;
    double length = 48.0;
    double dt = 0.01;
    double t_end = 20.0;
    int output_count = 40;
    std::vector<double> output_times;  // overrides output_count when non-empty

    int sign = 1;
    CoulombMethod coulomb = CoulombMethod::freespace_doubling;

    std::vector<OrbitalConfig> orbitals;
    std::filesystem::path initial_snapshot;
    double initial_trace = 0.0;  // > 0 rescales the occupations to this trace

    PhaseConfig phase;
    std::array<double, 2> fit_window{2.0, 20.0};
    std::array<double, 2> phase_fit_window{5.0, 20.0};

    std::filesystem::path output_dir = "out";
    double snapshot_every = 0.0;  // 0: final snapshot only
    bool resume = false;

    std::uint64_t seed = 1;
    fft::Effort planner = fft::Effort::estimate;
    bool checks = true;

    /// Record times: the explicit list, or output_count log-spaced times in
    /// [min(0.1, t_end), t_end] joined with the dyadic times, the snapshot
    /// times and t_end, all snapped to multiples of dt.
    std::vector<double> schedule() const;

    /// Throws ConfigError on inconsistent values.
    void validate() const;
};

/// Raw `key = value` pairs; `#` starts a comment. Duplicate keys are errors.
std::map<std::string, std::string> parse_key_values(std::istream& in, const std::string& source);

RunConfig parse_config(std::istream& in, const std::string& source = "<config>");
RunConfig load_config(const std::filesystem::path& path);

/// Applies HARTREE_OUTPUT_DIR and HARTREE_THREADS.
void apply_environment(RunConfig& config);

/// Builds the t = 0 ensemble from the Gaussian list (not from a snapshot).
OrbitalEnsemble initial_ensemble(const RunConfig& config);

}  // namespace hartree::runner
