#include "hartree/runner/io.hpp"

#include <bit>
#include <charconv>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace hartree::runner {

static_assert(std::endian::native == std::endian::little, "snapshot I/O assumes a little-endian host");

namespace {

constexpr char kMagic[4] = {'H', 'S', 'C', '1'};
constexpr char kHistoryMagic[4] = {'H', 'P', 'H', '1'};

template <class T>
void put(std::string& out, T value) {
    char bytes[sizeof(T)];
    std::memcpy(bytes, &value, sizeof(T));
    out.append(bytes, sizeof(T));
}

class Reader {
public:
    explicit Reader(std::string_view bytes) : bytes_(bytes) {}

    template <class T>
    T get() {
        if (remaining() < sizeof(T)) throw IoError("snapshot truncated");
        T value;
        std::memcpy(&value, bytes_.data() + pos_, sizeof(T));
        pos_ += sizeof(T);
        return value;
    }
    void expect(const char (&magic)[4]) {
        if (remaining() < 4 || std::memcmp(bytes_.data() + pos_, magic, 4) != 0) throw IoError("bad magic bytes");
        pos_ += 4;
    }
    std::size_t remaining() const { return bytes_.size() - pos_; }

private:
    std::string_view bytes_;
    std::size_t pos_ = 0;
};

std::string slurp(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::ostringstream buffer;
    buffer << in.rdbuf();
    if (in.bad()) throw IoError("cannot read " + path.string());
    return buffer.str();
}

void spill(const std::filesystem::path& path, const std::string& bytes) {
    const auto tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot write " + tmp);
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        if (!out) throw IoError("cannot write " + tmp);
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw IoError("cannot move " + tmp + " to " + path.string() + ": " + ec.message());
}

}  // namespace

std::string encode_snapshot(const Snapshot& s) {
    const auto& e = s.ensemble;
    const GridSpec& grid = e.grid();
    std::string out;
    out.reserve(64 + e.rank() * (8 + grid.size() * 16));
    out.append(kMagic, 4);
    put<std::uint32_t>(out, kSnapshotVersion);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(grid.n()));
    put<double>(out, grid.length());
    put<double>(out, e.time());
    put<std::uint32_t>(out, static_cast<std::uint32_t>(e.rank()));
    put<std::int8_t>(out, static_cast<std::int8_t>(e.interaction_sign()));
    for (std::size_t j = 0; j < e.rank(); ++j) {
        put<double>(out, e.occupations()[j]);
        const auto& u = e.orbitals()[j];
        if (u.space() != Space::position) throw UsageError("snapshot orbitals must be in position space");
        for (const Complex& z : u.values()) {
            put<double>(out, z.real());
            put<double>(out, z.imag());
        }
    }
    if (s.phase) {
        if (s.phase->k.size() != s.phase->psi.size()) throw UsageError("phase samples: size mismatch");
        put<std::uint32_t>(out, static_cast<std::uint32_t>(s.phase->k.size()));
        for (std::size_t i = 0; i < s.phase->k.size(); ++i) {
            for (double c : s.phase->k[i]) put<double>(out, c);
            put<double>(out, s.phase->psi[i]);
        }
    }
    return out;
}

Snapshot decode_snapshot(std::string_view bytes) {
    Reader in(bytes);
    in.expect(kMagic);
    const auto version = in.get<std::uint32_t>();
    if (version != kSnapshotVersion) throw IoError("unsupported snapshot version " + std::to_string(version));
    const auto n = in.get<std::uint32_t>();
    const auto length = in.get<double>();
    const auto t = in.get<double>();
    const auto rank = in.get<std::uint32_t>();
    const auto sign = in.get<std::int8_t>();
    if (n < 2 || n % 2 != 0 || n > 4096 || !(length > 0.0) || rank == 0 || sign < -1 || sign > 1)
        throw IoError("snapshot header is inconsistent");
    const GridSpec grid(static_cast<int>(n), length);
    if (in.remaining() < rank * (8 + grid.size() * 16)) throw IoError("snapshot truncated");
    std::vector<double> occupations;
    std::vector<ScalarField> orbitals;
    for (std::uint32_t j = 0; j < rank; ++j) {
        occupations.push_back(in.get<double>());
        ScalarField u(grid, Space::position);
        for (auto& z : u.values()) {
            const double re = in.get<double>();
            z = {re, in.get<double>()};
        }
        orbitals.push_back(std::move(u));
    }
    for (std::size_t j = 1; j < occupations.size(); ++j)
        if (occupations[j] > occupations[j - 1]) throw IoError("snapshot occupations are not sorted");
    Snapshot s{OrbitalEnsemble(t, std::move(occupations), std::move(orbitals), sign), std::nullopt};
    if (in.remaining() > 0) {
        const auto count = in.get<std::uint32_t>();
        if (in.remaining() != static_cast<std::size_t>(count) * 32) throw IoError("phase block has the wrong length");
        PhaseSamples p;
        for (std::uint32_t i = 0; i < count; ++i) {
            Vec3 k;
            for (double& c : k) c = in.get<double>();
            p.k.push_back(k);
            p.psi.push_back(in.get<double>());
        }
        s.phase = std::move(p);
    }
    return s;
}

void write_snapshot(const std::filesystem::path& path, const Snapshot& s) { spill(path, encode_snapshot(s)); }

Snapshot read_snapshot(const std::filesystem::path& path) { return decode_snapshot(slurp(path)); }

PhaseSamples phase_samples(const PhaseState& ps) {
    PhaseSamples p;
    for (std::size_t s = 0; s < ps.size(); ++s) {
        p.k.push_back(ps.wavenumber(s));
        p.psi.push_back(ps.valid[s] ? ps.psi[s] : std::numeric_limits<double>::quiet_NaN());
    }
    return p;
}

void restore_phase(PhaseState& ps, const PhaseSamples& samples) {
    if (samples.k.size() != ps.size()) throw ConfigError("snapshot phase samples do not match scattering settings");
    for (std::size_t s = 0; s < ps.size(); ++s) {
        const Vec3 k = ps.wavenumber(s);
        for (int a = 0; a < 3; ++a)
            if (std::abs(k[a] - samples.k[s][a]) > 1e-12 * std::max(1.0, std::abs(k[a])))
                throw ConfigError("snapshot phase samples do not match scattering settings");
        const double v = samples.psi[s];
        ps.valid[s] = std::isnan(v) ? 0 : 1;
        ps.psi[s] = std::isnan(v) ? 0.0 : v;
        ps.method[s] = PhaseMethod::none;
    }
}

void write_phase_history(const std::filesystem::path& path, const PhaseHistory& h) {
    std::string out;
    out.append(kHistoryMagic, 4);
    const std::size_t count = h.psi.empty() ? 0 : h.psi.front().size();
    put<std::uint32_t>(out, static_cast<std::uint32_t>(count));
    for (std::size_t r = 0; r < h.times.size(); ++r) {
        put<double>(out, h.times[r]);
        for (double v : h.psi[r]) put<double>(out, v);
    }
    spill(path, out);
}

PhaseHistory read_phase_history(const std::filesystem::path& path) {
    const std::string bytes = slurp(path);
    Reader in(bytes);
    in.expect(kHistoryMagic);
    const auto count = in.get<std::uint32_t>();
    const std::size_t row = 8 * (static_cast<std::size_t>(count) + 1);
    if (in.remaining() % row != 0) throw IoError("phase history has a partial record");
    PhaseHistory h;
    while (in.remaining() > 0) {
        h.times.push_back(in.get<double>());
        std::vector<double> psi(count);
        for (double& v : psi) v = in.get<double>();
        h.psi.push_back(std::move(psi));
    }
    return h;
}

// CSV --------------------------------------------------------------------------------

std::size_t CsvTable::column(const std::string& name) const {
    for (std::size_t i = 0; i < columns.size(); ++i)
        if (columns[i] == name) return i;
    throw ConfigError("CSV schema error: missing column " + name);
}

std::vector<double> CsvTable::values(const std::string& name) const {
    const std::size_t c = column(name);
    std::vector<double> out;
    out.reserve(rows.size());
    for (const auto& r : rows) out.push_back(r[c]);
    return out;
}

void write_csv_header(std::ostream& out) {
    out << kCsvSchema << '\n';
    const auto& columns = record_columns();
    for (std::size_t i = 0; i < columns.size(); ++i) out << (i ? "," : "") << columns[i];
    out << '\n';
}

void write_csv_row(std::ostream& out, const DiagnosticsRecord& r) {
    const auto values = record_values(r);
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (i) out << ',';
        if (std::isnan(values[i])) {
            out << "nan";
        } else {
            char buffer[32];
            const auto res = std::to_chars(buffer, buffer + sizeof buffer, values[i]);
            out.write(buffer, res.ptr - buffer);
        }
    }
    out << '\n';
}

CsvTable read_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || line != kCsvSchema) throw ConfigError("CSV schema error: expected '" + std::string(kCsvSchema) + "'");
    if (!std::getline(in, line) || line.empty()) throw ConfigError("CSV schema error: missing column header");
    CsvTable table;
    {
        std::stringstream header(line);
        std::string name;
        while (std::getline(header, name, ',')) {
            if (name.empty()) throw ConfigError("CSV schema error: empty column name");
            table.columns.push_back(name);
        }
    }
    int number = 2;
    while (std::getline(in, line)) {
        ++number;
        if (line.empty()) continue;
        std::vector<double> row;
        std::stringstream fields(line);
        std::string cell;
        while (std::getline(fields, cell, ',')) {
            if (cell == "nan") {
                row.push_back(std::numeric_limits<double>::quiet_NaN());
                continue;
            }
            double v = 0.0;
            const auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
            if (res.ec != std::errc() || res.ptr != cell.data() + cell.size())
                throw ConfigError("CSV line " + std::to_string(number) + ": bad number '" + cell + "'");
            row.push_back(v);
        }
        if (!line.empty() && line.back() == ',') row.push_back(std::numeric_limits<double>::quiet_NaN());
        if (row.size() != table.columns.size())
            throw ConfigError("CSV line " + std::to_string(number) + ": expected " +
                              std::to_string(table.columns.size()) + " fields");
        table.rows.push_back(std::move(row));
    }
    return table;
}

CsvTable read_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    return read_csv(in);
}

void require_record_columns(const CsvTable& table) {
    for (const auto& name : record_columns()) table.column(name);
}

}  // namespace hartree::runner
