#pragma once

#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>

#include "hartree/runner/checks.hpp"
#include "hartree/runner/config.hpp"

namespace hartree::runner {

enum ExitCode : int { kOk = 0, kConfigError = 1, kNumericalFailure = 2, kIoError = 3 };

struct RunOutcome {
    std::optional<OrbitalEnsemble> initial;
    std::optional<OrbitalEnsemble> final;
    std::unique_ptr<DiagnosticsMonitor> monitor;
    std::vector<ExponentRow> exponents;
    std::vector<CheckResult> checks;
};

/// Files written under config.output_dir:
///   diagnostics.csv       one row per record time
///   snapshot_<step>.hsc   at snapshot times and at t_end
///   phase_history.bin     Psi at every record time
///   summary.txt           fits and checks
///   failure_<step>.hsc    last finite state, on a numerical failure
///   fftw.wisdom           with fft.planner = measure
///
/// `resume_from` continues from a snapshot: CSV rows and phase history past
/// its time are dropped and replaced. Progress goes to `log` when given.
RunOutcome execute(const RunConfig& config, const std::optional<std::filesystem::path>& resume_from = std::nullopt,
                   std::ostream* log = nullptr);

/// Latest snapshot_*.hsc in a directory, if any.
std::optional<std::filesystem::path> latest_snapshot(const std::filesystem::path& dir);

// CLI verbs: each maps exceptions to exit codes and prints to out/err.
int run_command(const std::filesystem::path& config, std::ostream& out, std::ostream& err);
int resume_command(const std::filesystem::path& snapshot, const std::filesystem::path& config, std::ostream& out,
                   std::ostream& err);
int report_command(const std::filesystem::path& csv, std::array<double, 2> window, std::ostream& out,
                   std::ostream& err);
int crosscheck_command(std::uint64_t seed, std::ostream& out, std::ostream& err);

}  // namespace hartree::runner
