#pragma once

#include <cstdint>
#include <memory>
#include <optional>

#include "hartree/coulomb.hpp"
#include "hartree/ensemble.hpp"

namespace hartree {

struct StepConfig {
    double dt = 0.01;
    std::shared_ptr<const CoulombSolver> coulomb;  // may be null when sign == 0
    int sign = +1;
    /// Replaces the self-consistent potential (reversibility tests).
    std::optional<RealField> frozen_potential;
};

/// What a per-step hook sees. The ensemble is read-only and already at
/// t_start + dt; potential and momentum_density belong to the half-kinetic
/// state the potential kick was computed from.
struct StepContext {
    std::int64_t step = 0;  // index of the step's end time in units of dt
    double t_start = 0.0;
    double dt = 0.0;
    const RealField& potential;
    const RealField& momentum_density;
    const OrbitalEnsemble& ensemble;
};

using StepHook = std::function<void(const StepContext&)>;

/// Strang split step: half kinetic, potential from the half-stepped density,
/// full potential kick, half kinetic. Owns its multiplier table and solver
/// workspace, so repeated steps allocate nothing.
class Propagator {
public:
    explicit Propagator(StepConfig config);

    const StepConfig& config() const { return config_; }

    /// Advances e by dt in place and sets its time to t_end_of_step.
    /// When a hook is given, D of the half-stepped state is computed for it.
    void step(OrbitalEnsemble& e, double t_end_of_step, std::int64_t step_index = 0,
              const StepHook* hook = nullptr);

private:
    StepConfig config_;
    MultiplierTable half_kinetic_;
    CoulombSolver::Workspace workspace_;
    RealField potential_;
    RealField momentum_density_;
};

OrbitalEnsemble strang_step(OrbitalEnsemble e, const StepConfig& config);

struct EvolveOptions {
    double t_end = 0.0;
    /// Record times in (t0, t_end], strictly increasing, multiples of dt.
    std::vector<double> schedule;
    StepHook on_step;
    std::function<void(const OrbitalEnsemble&)> on_record;
    /// Called with the last finite state before a NumericalError is thrown.
    std::function<void(const OrbitalEnsemble&, const std::string&)> on_failure;
};

/// Steps from e0.time() to t_end. Times are step_index * dt, so splitting a
/// run into pieces on the same dt grid reproduces it bit for bit. Throws
/// NumericalError on a non-finite density.
OrbitalEnsemble evolve(OrbitalEnsemble e0, const StepConfig& config, const EvolveOptions& options);

/// Nearest step index for time t; throws UsageError unless t is a multiple
/// of dt within 1e-9.
std::int64_t step_index(double t, double dt);

struct EnergyParts {
    double kinetic = 0.0;
    double potential = 0.0;
    double total() const { return kinetic + potential; }
};

/// sum_j lambda_j ||grad u_j||^2 + (1/2) integral V rho.
EnergyParts energy_parts(const OrbitalEnsemble& e, const StepConfig& config);
double energy(const OrbitalEnsemble& e, const StepConfig& config);

}  // namespace hartree
