#include "hartree/runner/run.hpp"

#include <chrono>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

namespace hartree::runner {

namespace fs = std::filesystem;

namespace {

std::string snapshot_name(std::int64_t step) {
    std::ostringstream s;
    s << "snapshot_" << std::setw(9) << std::setfill('0') << step << ".hsc";
    return s.str();
}

bool later(double t, double t0) { return t > t0 + 1e-9 * std::max(1.0, std::abs(t0)); }

/// Rows of an existing CSV up to t0, or nothing when the file is absent.
std::vector<std::vector<double>> kept_rows(const fs::path& csv, double t0) {
    if (!fs::exists(csv)) return {};
    const auto table = read_csv(csv);
    require_record_columns(table);
    const std::size_t tc = table.column("t");
    std::vector<std::vector<double>> rows;
    for (const auto& r : table.rows)
        if (!later(r[tc], t0)) rows.push_back(r);
    return rows;
}

void write_summary(std::ostream& out, const RunConfig& c, const RunOutcome& o) {
    out << "grid n=" << c.n << " L=" << c.length << " dt=" << c.dt << " t_end=" << c.t_end << " sign=" << c.sign
        << " rank=" << o.final->rank() << '\n';
    out << "fit window [" << c.fit_window[0] << ", " << c.fit_window[1] << "]\n";
    print_exponent_table(out, o.exponents);
    if (o.monitor) {
        for (const auto& d : o.monitor->dyadic_changes())
            out << "dyadic s=" << d.s << " modified=" << d.modified << " unmodified=" << d.unmodified << '\n';
    }
    for (const auto& r : o.exponents) out << format_check(r.check) << '\n';
    print_checks(out, o.checks);
}

}  // namespace

std::optional<fs::path> latest_snapshot(const fs::path& dir) {
    if (!fs::is_directory(dir)) return std::nullopt;
    std::optional<fs::path> best;
    for (const auto& entry : fs::directory_iterator(dir)) {
        const auto name = entry.path().filename().string();
        if (!name.starts_with("snapshot_") || entry.path().extension() != ".hsc") continue;
        if (!best || name > best->filename().string()) best = entry.path();
    }
    return best;
}

RunOutcome execute(const RunConfig& config, const std::optional<fs::path>& resume_from, std::ostream* log) {
    config.validate();
    const fs::path dir = config.output_dir;
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());

    fft::set_effort(config.planner);
    const fs::path wisdom = dir / "fftw.wisdom";
    if (config.planner == fft::Effort::measure) fft::import_wisdom(wisdom.string());

    // Starting state.
    std::optional<Snapshot> start;
    if (resume_from)
        start = read_snapshot(*resume_from);
    else if (!config.initial_snapshot.empty())
        start = read_snapshot(config.initial_snapshot);
    OrbitalEnsemble e0 = start ? start->ensemble : initial_ensemble(config);
    const GridSpec grid(config.n, config.length);
    if (!(e0.grid() == grid)) throw ConfigError("snapshot grid does not match grid.n / grid.L");
    if (e0.interaction_sign() != config.sign) throw ConfigError("snapshot interaction sign does not match the config");
    const double t0 = e0.time();
    if (resume_from && !start->phase) throw ConfigError("resume snapshot has no phase block");
    step_index(t0, config.dt);  // the start must sit on the dt lattice

    std::shared_ptr<const CoulombSolver> solver;
    if (config.sign != 0) solver = std::make_shared<CoulombSolver>(grid, config.coulomb);

    RunOutcome outcome;
    outcome.initial = e0;
    MonitorConfig mc;
    mc.phase = config.phase;
    outcome.monitor = std::make_unique<DiagnosticsMonitor>(e0, solver, mc);
    auto& monitor = *outcome.monitor;
    if (start && start->phase) {
        restore_phase(monitor.phase(), *start->phase);
        monitor.phase().t_last = t0;
        monitor.reset_reference(e0);
    }

    const fs::path csv_path = dir / "diagnostics.csv";
    const fs::path history_path = dir / "phase_history.bin";
    std::vector<std::vector<double>> previous_rows;
    if (resume_from) {
        previous_rows = kept_rows(csv_path, t0);
        if (fs::exists(history_path)) {
            auto h = read_phase_history(history_path);
            PhaseHistory kept;
            for (std::size_t r = 0; r < h.times.size(); ++r)
                if (!later(h.times[r], t0) && h.psi[r].size() == monitor.phase().size()) {
                    kept.times.push_back(h.times[r]);
                    kept.psi.push_back(std::move(h.psi[r]));
                }
            monitor.history() = std::move(kept);
        }
    }
    std::ofstream csv(csv_path, std::ios::trunc);
    if (!csv) throw IoError("cannot write " + csv_path.string());
    write_csv_header(csv);
    for (const auto& row : previous_rows) {
        write_csv_row(csv, record_from_values(row));
    }
    csv.flush();

    StepConfig step;
    step.dt = config.dt;
    step.sign = config.sign;
    step.coulomb = solver;

    EvolveOptions opt;
    opt.t_end = config.t_end;
    for (double t : config.schedule())
        if (later(t, t0)) opt.schedule.push_back(t);
    const std::int64_t snapshot_stride =
        config.snapshot_every > 0.0 ? std::llround(config.snapshot_every / config.dt) : 0;
    const std::int64_t last_step = std::llround(config.t_end / config.dt);
    const auto clock = std::chrono::steady_clock::now();

    auto save = [&](const OrbitalEnsemble& e, const fs::path& path) {
        write_snapshot(path, Snapshot{e, phase_samples(monitor.phase())});
    };
    monitor.attach(opt, [&](const DiagnosticsRecord& r) {
        write_csv_row(csv, r);
        csv.flush();
        if (!csv) throw IoError("cannot write " + csv_path.string());
        if (log) {
            const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - clock).count();
            *log << "t=" << r.t << " rho_Linf=" << r.rho_Linf << " hs=" << r.hs << " [" << std::fixed
                 << std::setprecision(1) << elapsed << "s]" << std::defaultfloat << std::setprecision(6) << std::endl;
        }
    });
    auto record = opt.on_record;
    opt.on_record = [&](const OrbitalEnsemble& e) {
        record(e);
        const std::int64_t s = step_index(e.time(), config.dt);
        write_phase_history(history_path, monitor.history());
        if ((snapshot_stride > 0 && s % snapshot_stride == 0) || s == last_step)
            save(e, dir / snapshot_name(s));
    };
    opt.on_failure = [&](const OrbitalEnsemble& e, const std::string& why) {
        const auto path = dir / ("failure_" + snapshot_name(step_index(e.time(), config.dt)).substr(9));
        try {
            write_snapshot(path, Snapshot{e, std::nullopt});
        } catch (const IoError&) {
        }
        if (log) *log << "numerical failure at t=" << e.time() << ": " << why << "; state dumped to " << path << '\n';
    };

    outcome.final = evolve(e0, step, opt);
    if (opt.schedule.empty()) save(*outcome.final, dir / snapshot_name(std::llround(outcome.final->time() / config.dt)));
    if (config.planner == fft::Effort::measure) fft::export_wisdom(wisdom.string());

    // Summary.
    if (config.checks && !opt.schedule.empty()) {
        csv.close();
        const auto table = read_csv(csv_path);
        outcome.exponents = exponent_report(table, config.fit_window);
        RunEvidence ev{&*outcome.initial, &*outcome.final, &monitor, config.phase_fit_window};
        outcome.checks = run_checks(ev);
    }
    std::ofstream summary(dir / "summary.txt", std::ios::trunc);
    if (!summary) throw IoError("cannot write summary");
    write_summary(summary, config, outcome);
    if (log) write_summary(*log, config, outcome);
    return outcome;
}

namespace {

template <class F>
int guarded(std::ostream& err, F&& body) {
    try {
        return body();
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << '\n';
        return kConfigError;
    } catch (const NumericalError& e) {
        err << "numerical failure: " << e.what() << '\n';
        return kNumericalFailure;
    } catch (const IoError& e) {
        err << "I/O error: " << e.what() << '\n';
        return kIoError;
    } catch (const fs::filesystem_error& e) {
        err << "I/O error: " << e.what() << '\n';
        return kIoError;
    } catch (const UsageError& e) {
        err << "config error: " << e.what() << '\n';
        return kConfigError;
    }
}

}  // namespace

int run_command(const fs::path& config_path, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        auto config = load_config(config_path);
        apply_environment(config);
        std::optional<fs::path> from;
        if (config.resume) from = latest_snapshot(config.output_dir);
        if (from) out << "resuming from " << from->string() << '\n';
        execute(config, from, &out);
        return kOk;
    });
}

int resume_command(const fs::path& snapshot, const fs::path& config_path, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        auto config = load_config(config_path);
        apply_environment(config);
        if (!fs::exists(snapshot)) throw IoError("snapshot not found: " + snapshot.string());
        execute(config, snapshot, &out);
        return kOk;
    });
}

int report_command(const fs::path& csv, std::array<double, 2> window, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        if (!(window[0] > 0.0) || !(window[1] > window[0])) throw ConfigError("fit window must satisfy 0 < a < b");
        const auto table = read_csv(csv);
        require_record_columns(table);
        const auto rows = exponent_report(table, window);
        out << "fit window [" << window[0] << ", " << window[1] << "]\n";
        print_exponent_table(out, rows);
        for (const auto& r : rows) out << format_check(r.check) << '\n';
        return kOk;
    });
}

int crosscheck_command(std::uint64_t seed, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        const auto checks = crosscheck_suite(seed);
        print_checks(out, checks);
        for (const auto& c : checks)
            if (c.verdict == Verdict::fail) return static_cast<int>(kNumericalFailure);
        return static_cast<int>(kOk);
    });
}

}  // namespace hartree::runner
