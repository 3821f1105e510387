#include <fstream>
#include <sstream>

#include "doctest.h"
#include "hartree/runner/run.hpp"
#include "helpers.hpp"

using namespace hartree;
using namespace hartree::runner;
namespace fs = std::filesystem;

namespace {

const char* kSmallConfig = R"(
grid.n = 16
grid.L = 16
time.dt = 0.05
time.t_end = 1
time.output = 6
interaction.sign = +1
initial.trace = 0.02
orbital.a.occupation = 1
orbital.a.sigma = 1
orbital.b.occupation = 0.5
orbital.b.sigma = 1.2
orbital.b.center = 1, 0, -0.5
orbital.b.boost = 0, 0.2, 0
scattering.k_extent = 1.0
output.snapshot_every = 0.5
)";

RunConfig parse(const std::string& text) {
    std::istringstream in(text);
    return parse_config(in, "test");
}

/// Fresh scratch directory per test.
fs::path scratch(const std::string& name) {
    const auto dir = fs::temp_directory_path() / ("hartree_test_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

fs::path write_config(const fs::path& dir, const std::string& text) {
    const auto path = dir / "run.cfg";
    std::ofstream(path) << text << "output.dir = " << (dir / "out").string() << "\n";
    return path;
}

}  // namespace

TEST_CASE("config parsing") {
    const auto c = parse(kSmallConfig);
    CHECK(c.n == 16);
    CHECK(c.length == 16.0);
    CHECK(c.sign == 1);
    CHECK(c.output_count == 6);
    REQUIRE(c.orbitals.size() == 2);
    CHECK(c.orbitals[1].gaussian.center == Vec3{1.0, 0.0, -0.5});
    CHECK(c.orbitals[1].gaussian.boost[1] == 0.2);
    CHECK(c.orbitals[0].normalize);
    CHECK(c.phase.k_extent == 1.0);
    CHECK(c.snapshot_every == 0.5);
    CHECK(c.planner == fft::Effort::estimate);

    std::string text = kSmallConfig;
    text.replace(text.find("time.output = 6"), 15, "time.output = 0.5, 1.0");
    const auto listed = parse(text + "coulomb.method = periodic\n" +
                              "orbital.c.amplitude = 0.5, 0.1\norbital.c.sigma = 2\n" + "fft.planner = measure\n");
    CHECK(listed.output_times == std::vector<double>{0.5, 1.0});
    CHECK(listed.coulomb == CoulombMethod::periodic_multiplier);
    CHECK_FALSE(listed.orbitals[2].normalize);
    CHECK(listed.orbitals[2].gaussian.amplitude == Complex{0.5, 0.1});

    const auto e = initial_ensemble(c);
    CHECK(e.trace() == doctest::Approx(0.02).epsilon(1e-12));
    CHECK(e.occupations()[0] / e.occupations()[1] == doctest::Approx(2.0));
    CHECK(l2_norm(e.orbitals()[0]) == doctest::Approx(1.0).epsilon(1e-12));

    for (const char* bad : {"grid.m = 3\n", "grid.n = 16\ngrid.n = 16\n", "grid.L = abc\n", "grid.n\n",
                            "time.t_end = 1.025\n", "interaction.sign = 2\n", "orbital.a.radius = 1\n",
                            "initial.snapshot = x.hsc\n", "scattering.k_stride = 3\n", "output.resume = maybe\n",
                            "time.output = 0.5, 0.3\n", "scattering.fit_window = 5, 2\n", "time.dt = -1\n"}) {
        std::string text = kSmallConfig;
        // Later duplicates of existing keys are also errors; replace instead where needed.
        if (std::string(bad).starts_with("time.t_end")) text.replace(text.find("time.t_end = 1"), 14, "");
        if (std::string(bad).starts_with("interaction.sign")) text.replace(text.find("interaction.sign = +1"), 21, "");
        if (std::string(bad).starts_with("time.output")) text.replace(text.find("time.output = 6"), 15, "");
        if (std::string(bad).starts_with("time.dt")) text.replace(text.find("time.dt = 0.05"), 14, "");
        CAPTURE(bad);
        CHECK_THROWS_AS(parse(text + bad), ConfigError);
    }
    CHECK_THROWS_AS(parse("grid.n = 16\n"), ConfigError);  // no initial data
}

TEST_CASE("record schedule") {
    auto c = parse(kSmallConfig);
    c.t_end = 20.0;
    c.output_count = 30;
    c.snapshot_every = 0.0;
    const auto s = c.schedule();
    CHECK(s.back() == doctest::Approx(20.0));
    for (std::size_t i = 1; i < s.size(); ++i) CHECK(s[i] > s[i - 1]);
    for (double t : s) CHECK(std::abs(t / c.dt - std::round(t / c.dt)) < 1e-9);
    for (double d : {1.0, 2.0, 4.0, 8.0, 16.0})
        CHECK(std::any_of(s.begin(), s.end(), [&](double t) { return std::abs(t - d) < 1e-12; }));
    std::size_t in_window = 0;
    for (double t : s) in_window += (t >= 2.0 && t <= 20.0) ? 1 : 0;
    CHECK(in_window >= 10);

    c.t_end = 0.0;
    CHECK(c.schedule().empty());
}

TEST_CASE("snapshot round trip") {
    const auto c = parse(kSmallConfig);
    auto e = initial_ensemble(c);
    e.set_time(0.35);
    PhaseState ps(e.grid(), 1, c.phase);
    for (std::size_t s = 0; s < ps.size(); ++s) ps.psi[s] = 0.01 * static_cast<double>(s);
    ps.valid[5] = 0;
    const Snapshot snap{e, phase_samples(ps)};
    const std::string bytes = encode_snapshot(snap);
    CHECK(bytes.substr(0, 4) == "HSC1");
    const auto back = decode_snapshot(bytes);
    CHECK(encode_snapshot(back) == bytes);
    CHECK(back.ensemble.time() == 0.35);
    CHECK(back.ensemble.interaction_sign() == 1);
    CHECK(testing::max_abs_diff(back.ensemble.orbitals()[1], e.orbitals()[1]) == 0.0);
    REQUIRE(back.phase);
    CHECK(std::isnan(back.phase->psi[5]));

    PhaseState restored(e.grid(), 1, c.phase);
    restore_phase(restored, *back.phase);
    CHECK(restored.valid[5] == 0);
    CHECK(restored.psi[7] == ps.psi[7]);
    PhaseState other(e.grid(), 1, PhaseConfig{.k_stride = 1});
    CHECK_THROWS_AS(restore_phase(other, *back.phase), ConfigError);

    const Snapshot plain{e, std::nullopt};
    CHECK_FALSE(decode_snapshot(encode_snapshot(plain)).phase);
    CHECK(encode_snapshot(decode_snapshot(encode_snapshot(plain))) == encode_snapshot(plain));

    CHECK_THROWS_AS(decode_snapshot(bytes.substr(0, bytes.size() / 2)), IoError);
    CHECK_THROWS_AS(decode_snapshot(bytes.substr(0, bytes.size() - 3)), IoError);
    CHECK_THROWS_AS(decode_snapshot("HSC2" + bytes.substr(4)), IoError);

    const auto dir = scratch("snapshot");
    write_snapshot(dir / "a.hsc", snap);
    CHECK(read_file(dir / "a.hsc") == bytes);
    CHECK_THROWS_AS(read_snapshot(dir / "missing.hsc"), IoError);
}

TEST_CASE("diagnostics csv") {
    std::stringstream io;
    write_csv_header(io);
    DiagnosticsRecord r;
    r.t = 0.1;
    r.rho_L1 = 1.0 / 3.0;
    r.hs = 2e-300;
    write_csv_row(io, r);
    const auto table = read_csv(io);
    require_record_columns(table);
    REQUIRE(table.rows.size() == 1);
    CHECK(table.values("rho_L1")[0] == r.rho_L1);  // shortest round-trip formatting
    CHECK(table.values("hs")[0] == r.hs);
    CHECK(std::isnan(table.values("densfml_residual")[0]));
    CHECK(table.columns == record_columns());

    std::istringstream wrong_schema("# hartree-diagnostics v0\nt\n1\n");
    CHECK_THROWS_AS(read_csv(wrong_schema), ConfigError);
    std::istringstream ragged(std::string(kCsvSchema) + "\nt,hs\n1,2\n3\n");
    CHECK_THROWS_AS(read_csv(ragged), ConfigError);
    std::istringstream garbage(std::string(kCsvSchema) + "\nt,hs\n1,x2\n");
    CHECK_THROWS_AS(read_csv(garbage), ConfigError);
    std::istringstream partial(std::string(kCsvSchema) + "\nt,hs\n1,2\n");
    const auto p = read_csv(partial);
    CHECK_THROWS_AS(require_record_columns(p), ConfigError);
    CHECK_THROWS_AS(p.values("rho_L2"), ConfigError);
}

TEST_CASE("exponent report on exact power laws") {
    CsvTable table;
    table.columns = record_columns();
    for (int i = 0; i < 15; ++i) {
        DiagnosticsRecord r;
        r.t = 0.5 * std::pow(50.0, i / 14.0);
        r.rho_L1 = 0.02;
        r.rho_L2 = std::pow(r.t, -1.5);
        r.rho_Linf = 3.0 * std::pow(r.t, -3.0);
        r.V_Linf = std::pow(r.t, -1.0);
        r.gradV_Linf = std::pow(r.t, -2.0);
        r.densfml_residual = std::pow(r.t, -3.5);
        table.rows.push_back(record_values(r));
    }
    const auto rows = exponent_report(table, {2.0, 20.0});
    REQUIRE(rows.size() == exponent_targets().size());
    CHECK(rows[0].fit.exponent == doctest::Approx(0.0));
    CHECK(rows[2].fit.exponent == doctest::Approx(-3.0).epsilon(1e-12));
    CHECK(rows[5].fit.exponent == doctest::Approx(-3.5).epsilon(1e-12));
    for (const auto& r : rows) CHECK(r.check.passed());

    // Free runs have no potential: those rows are skipped, not failed.
    for (auto& row : table.rows) row[4] = row[5] = 0.0;
    const auto free = exponent_report(table, {2.0, 20.0});
    CHECK(free[3].check.verdict == Verdict::skip);
    CHECK(free[0].check.passed());
    // Too few points in the window fail with a reason.
    const auto narrow = exponent_report(table, {2.0, 3.0});
    CHECK(narrow[1].check.verdict == Verdict::fail);
    CHECK(format_check(narrow[1].check).starts_with("CHECK exponent_rho_L2 FAIL"));
}

TEST_CASE("report command") {
    const auto dir = scratch("report");
    std::ostringstream out, err;
    CHECK(report_command(dir / "missing.csv", {2.0, 20.0}, out, err) == kIoError);
    std::ofstream(dir / "bad.csv") << kCsvSchema << "\nt,rho_L1\n1,2\n";
    CHECK(report_command(dir / "bad.csv", {2.0, 20.0}, out, err) == kConfigError);
    CHECK(err.str().find("missing column") != std::string::npos);
    std::ofstream(dir / "junk.csv") << "hello\n";
    CHECK(report_command(dir / "junk.csv", {2.0, 20.0}, out, err) == kConfigError);
}

TEST_CASE("run with t_end = 0 writes only the header") {
    const auto dir = scratch("empty");
    std::string text = kSmallConfig;
    text.replace(text.find("time.t_end = 1"), 14, "time.t_end = 0");
    std::ostringstream out, err;
    CHECK(run_command(write_config(dir, text), out, err) == kOk);
    const std::string csv = read_file(dir / "out" / "diagnostics.csv");
    std::stringstream expected;
    write_csv_header(expected);
    CHECK(csv == expected.str());
}

TEST_CASE("exit codes") {
    const auto dir = scratch("exit");
    std::ostringstream out, err;
    std::ofstream(dir / "broken.cfg") << "grid.n = 16\nbogus = 1\n";
    CHECK(run_command(dir / "broken.cfg", out, err) == kConfigError);

    // A snapshot holding a NaN is a numerical failure, with the state dumped.
    auto c = parse(kSmallConfig);
    auto e = initial_ensemble(c);
    e.orbitals()[0][100] = Complex{std::nan(""), 0.0};
    write_snapshot(dir / "nan.hsc", Snapshot{e, std::nullopt});
    std::string text = kSmallConfig;
    text = text.substr(0, text.find("orbital.a")) + "initial.snapshot = " + (dir / "nan.hsc").string() + "\n";
    CHECK(run_command(write_config(dir, text), out, err) == kNumericalFailure);
    bool dumped = false;
    for (const auto& entry : fs::directory_iterator(dir / "out"))
        dumped = dumped || entry.path().filename().string().starts_with("failure_");
    CHECK(dumped);

    CHECK(resume_command(dir / "none.hsc", write_config(dir, kSmallConfig), out, err) == kIoError);
}

TEST_CASE("runs are deterministic and resumable") {
    const auto a = scratch("run_a");
    const auto b = scratch("run_b");
    std::ostringstream out, err;
    REQUIRE(run_command(write_config(a, kSmallConfig), out, err) == kOk);
    REQUIRE(run_command(write_config(b, kSmallConfig), out, err) == kOk);
    const std::string csv = read_file(a / "out" / "diagnostics.csv");
    CHECK(csv == read_file(b / "out" / "diagnostics.csv"));
    CHECK(fs::exists(a / "out" / "summary.txt"));
    CHECK(fs::exists(a / "out" / "phase_history.bin"));
    const auto latest = latest_snapshot(a / "out");
    REQUIRE(latest);
    CHECK(latest->filename() == "snapshot_000000020.hsc");

    // Resume a fresh copy from the midpoint snapshot.
    const auto c = scratch("run_c");
    const auto config = write_config(c, kSmallConfig);
    REQUIRE(resume_command(a / "out" / "snapshot_000000010.hsc", config, out, err) == kOk);
    const auto whole = read_csv(a / "out" / "diagnostics.csv");
    const auto tail = read_csv(c / "out" / "diagnostics.csv");
    REQUIRE(!tail.rows.empty());
    std::size_t matched = 0;
    for (const auto& row : tail.rows) {
        for (const auto& ref : whole.rows) {
            if (ref[0] != row[0]) continue;
            ++matched;
            for (std::size_t i = 0; i < row.size(); ++i) {
                if (std::isnan(ref[i])) {
                    CHECK(std::isnan(row[i]));
                    continue;
                }
                CAPTURE(record_columns()[i]);
                CHECK(std::abs(row[i] - ref[i]) <= 1e-10 * std::max(1.0, std::abs(ref[i])));
            }
        }
    }
    CHECK(matched == tail.rows.size());
    CHECK(tail.rows.front()[0] > 0.5);

    // Resuming inside the original directory keeps the earlier rows.
    REQUIRE(resume_command(a / "out" / "snapshot_000000010.hsc", write_config(a, kSmallConfig), out, err) == kOk);
    const auto again = read_file(a / "out" / "diagnostics.csv");
    CHECK(read_csv(a / "out" / "diagnostics.csv").rows.size() == whole.rows.size());
    CHECK(again == csv);

    // output.resume picks up the latest snapshot by itself.
    REQUIRE(run_command(write_config(b, std::string(kSmallConfig) + "output.resume = true\n"), out, err) == kOk);
    CHECK(out.str().find("resuming from") != std::string::npos);
}

TEST_CASE("crosscheck suite") {
    std::ostringstream out, err;
    CHECK(crosscheck_command(3, out, err) == kOk);
    CHECK(out.str().find("FAIL") == std::string::npos);
    CHECK(out.str().find("CHECK dense_norms PASS") != std::string::npos);
}
