#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "hartree/scattering.hpp"

namespace hartree::runner {

// Snapshots ----------------------------------------------------------------------

/// Binary layout, little-endian:
///   "HSC1", version u32, n u32, L f64, t f64, rank u32, sign i8,
///   rank x (lambda f64, n^3 x (re f64, im f64) row-major position values),
///   optional: count u32, count x (kx, ky, kz, psi) f64; psi NaN = invalid.
struct PhaseSamples {
    std::vector<Vec3> k;
    std::vector<double> psi;
};

struct Snapshot {
    OrbitalEnsemble ensemble;
    std::optional<PhaseSamples> phase;
};

inline constexpr std::uint32_t kSnapshotVersion = 1;

std::string encode_snapshot(const Snapshot& s);
Snapshot decode_snapshot(std::string_view bytes);

void write_snapshot(const std::filesystem::path& path, const Snapshot& s);
Snapshot read_snapshot(const std::filesystem::path& path);

PhaseSamples phase_samples(const PhaseState& ps);
/// Copies psi and validity into ps; the sample layouts must agree.
void restore_phase(PhaseState& ps, const PhaseSamples& samples);

/// Phase history: "HPH1", sample count u32, then per record t f64 and the
/// psi row (NaN = invalid).
void write_phase_history(const std::filesystem::path& path, const PhaseHistory& h);
PhaseHistory read_phase_history(const std::filesystem::path& path);

// Diagnostics CSV ---------------------------------------------------------------------

inline constexpr const char* kCsvSchema = "# hartree-diagnostics v1";

struct CsvTable {
    std::vector<std::string> columns;
    std::vector<std::vector<double>> rows;

    /// Throws ConfigError naming the column when it is absent.
    std::size_t column(const std::string& name) const;
    std::vector<double> values(const std::string& name) const;
};

void write_csv_header(std::ostream& out);
void write_csv_row(std::ostream& out, const DiagnosticsRecord& r);
/// Throws ConfigError on a wrong schema line, ragged rows or bad numbers.
CsvTable read_csv(std::istream& in);
CsvTable read_csv(const std::filesystem::path& path);
/// Checks that every record column is present.
void require_record_columns(const CsvTable& table);

}  // namespace hartree::runner
