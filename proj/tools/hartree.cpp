#include <iostream>

#include "CLI11.hpp"
#include "hartree/runner/run.hpp"

namespace runner = hartree::runner;

int main(int argc, char** argv) {
    CLI::App app{"Finite-rank Hartree simulator with Coulomb interaction and scattering diagnostics"};
    app.require_subcommand(1);

    std::string config_path, snapshot_path, csv_path;
    std::vector<double> window{2.0, 20.0};
    std::uint64_t seed = 1;

    auto* run = app.add_subcommand("run", "Run an experiment from a config file");
    run->add_option("config", config_path, "Config file")->required()->check(CLI::ExistingFile);

    auto* resume = app.add_subcommand("resume", "Continue a run from a snapshot");
    resume->add_option("snapshot", snapshot_path, "Snapshot file")->required();
    resume->add_option("config", config_path, "Config file")->required()->check(CLI::ExistingFile);

    auto* report = app.add_subcommand("report", "Fit decay exponents from a diagnostics CSV");
    report->add_option("csv", csv_path, "Diagnostics CSV")->required();
    report->add_option("--window", window, "Fit window t_a t_b")->expected(2);

    auto* crosscheck = app.add_subcommand("crosscheck", "Run the oracle and dense-kernel suites");
    crosscheck->add_option("--seed", seed, "Seed for the random ensembles");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? runner::kOk : runner::kConfigError;
    }

    if (*run) return runner::run_command(config_path, std::cout, std::cerr);
    if (*resume) return runner::resume_command(snapshot_path, config_path, std::cout, std::cerr);
    if (*report) return runner::report_command(csv_path, {window[0], window[1]}, std::cout, std::cerr);
    return runner::crosscheck_command(seed, std::cout, std::cerr);
}
