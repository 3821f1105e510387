#pragma once

#include <array>
#include <iosfwd>
#include <string>
#include <vector>

#include "hartree/runner/io.hpp"

namespace hartree::runner {

enum class Verdict { pass, fail, skip };

struct CheckResult {
    std::string name;
    Verdict verdict = Verdict::fail;
    std::string detail;

    bool passed() const { return verdict == Verdict::pass; }
};

CheckResult make_check(std::string name, bool pass, std::string detail);
CheckResult skipped(std::string name, std::string why);
/// "CHECK <name> PASS|FAIL|SKIP <detail>"
std::string format_check(const CheckResult& c);
void print_checks(std::ostream& out, const std::vector<CheckResult>& checks);

// Exponents ------------------------------------------------------------------------

/// Fitted exponent must lie in [target - tolerance, target + tolerance], or
/// at or below `target` when `upper_bound` is set.
struct ExponentTarget {
    std::string column;
    double target = 0.0;
    double tolerance = 0.0;
    bool upper_bound = false;
    bool needs_r2 = false;  // also require r2 >= 0.98
};

const std::vector<ExponentTarget>& exponent_targets();
inline constexpr double kMinimumR2 = 0.98;

struct ExponentRow {
    ExponentTarget target;
    DecayFit fit;
    CheckResult check;
};

/// Fits every targeted column over the window. Columns identically zero in
/// the window (w = 0 runs) are skipped.
std::vector<ExponentRow> exponent_report(const CsvTable& table, std::array<double, 2> window);
void print_exponent_table(std::ostream& out, const std::vector<ExponentRow>& rows);

// Whole-run checks -----------------------------------------------------------------

struct RunEvidence {
    const OrbitalEnsemble* initial = nullptr;
    const OrbitalEnsemble* final = nullptr;
    const DiagnosticsMonitor* monitor = nullptr;
    std::array<double, 2> phase_fit_window{5.0, 20.0};
};

CheckResult conservation_check(const RunEvidence& ev);
CheckResult l1_constant_check(const std::vector<DiagnosticsRecord>& records);
CheckResult overlap_check(const PhaseState& ps);
CheckResult dyadic_check(const DiagnosticsMonitor& monitor);
CheckResult profile_norm_check(const DiagnosticsMonitor& monitor);
CheckResult d_sup_check(const DiagnosticsMonitor& monitor);

struct PhaseComparison {
    double relative_l2 = 0.0;      // ||g_fit - g_formula|| / ||g_formula||
    double min_fitted = 0.0;       // smallest g_fit over the compared samples
    double origin_fit = 0.0;
    double origin_formula = 0.0;
    std::size_t samples = 0;
};

/// Regressed g against g from the final D, over valid samples with
/// |k| <= k_max / 4.
PhaseComparison compare_phase_coefficient(const DiagnosticsMonitor& monitor, const OrbitalEnsemble& final,
                                          std::array<double, 2> window);
CheckResult phase_coefficient_check(const RunEvidence& ev);

std::vector<CheckResult> run_checks(const RunEvidence& ev);

// Oracle and dense suites -----------------------------------------------------------

CheckResult dense_norm_check(std::uint64_t seed);
CheckResult dense_distance_check(std::uint64_t seed);
CheckResult free_flow_check(int n, double length, double dt, double t);
CheckResult coulomb_oracle_check(int n, double length, double sigma);
CheckResult coulomb_periodic_check(int n, double length, double sigma);
CheckResult coulomb_sign_check(int n, double length);

std::vector<CheckResult> crosscheck_suite(std::uint64_t seed);

}  // namespace hartree::runner
