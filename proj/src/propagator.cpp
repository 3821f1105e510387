#include "hartree/propagator.hpp"

#include <sstream>

namespace hartree {

namespace {

void validate(const StepConfig& c, const GridSpec& grid) {
    if (!(c.dt != 0.0) || !std::isfinite(c.dt)) throw UsageError("time step must be finite and nonzero");
    if (c.sign < -1 || c.sign > 1) throw UsageError("interaction sign must be -1, 0 or +1");
    if (c.frozen_potential) {
        if (!(c.frozen_potential->grid() == grid)) throw UsageError("frozen potential grid mismatch");
        return;
    }
    if (c.sign != 0) {
        if (!c.coulomb) throw UsageError("interacting step needs a Coulomb solver");
        if (!(c.coulomb->grid() == grid)) throw UsageError("Coulomb solver grid mismatch");
    }
}

GridSpec config_grid(const StepConfig& c) {
    if (c.frozen_potential) return c.frozen_potential->grid();
    if (c.coulomb) return c.coulomb->grid();
    return GridSpec(2, 1.0);  // placeholder until the first step
}

}  // namespace

Propagator::Propagator(StepConfig config)
    : config_(std::move(config)),
      half_kinetic_(free_flow_multiplier(config_grid(config_), 0.5 * config_.dt)),
      potential_(config_grid(config_), Space::position),
      momentum_density_(config_grid(config_), Space::frequency) {}

void Propagator::step(OrbitalEnsemble& e, double t_end_of_step, std::int64_t step_index, const StepHook* hook) {
    const GridSpec& grid = e.grid();
    if (!(half_kinetic_.grid() == grid)) {
        half_kinetic_ = free_flow_multiplier(grid, 0.5 * config_.dt);
        potential_ = RealField(grid, Space::position);
        momentum_density_ = RealField(grid, Space::frequency);
    }
    validate(config_, grid);
    auto orbitals = e.orbitals();
    const double t_start = e.time();

    // (a) half kinetic.
    parallel_for(orbitals.size(), [&](std::size_t j) {
        transform_to_frequency(orbitals[j]);
        multiply_in_place(orbitals[j], half_kinetic_);
    });
    if (hook) {
        auto d = momentum_density_.values();
        std::fill(d.begin(), d.end(), 0.0);
        for (std::size_t j = 0; j < orbitals.size(); ++j) {
            const double lambda = e.occupations()[j];
            auto u = orbitals[j].values();
            for (std::size_t i = 0; i < d.size(); ++i) d[i] += lambda * std::norm(u[i]);
        }
    }
    parallel_for(orbitals.size(), [&](std::size_t j) { transform_to_position(orbitals[j]); });

    // (b) potential from the half-stepped density.
    const bool kicked = config_.frozen_potential || config_.sign != 0;
    if (config_.frozen_potential) {
        potential_ = *config_.frozen_potential;
    } else if (config_.sign != 0) {
        const RealField rho = density(e);
        double mass = 0.0;
        for (double r : rho.values()) mass += r;
        if (!std::isfinite(mass)) {
            std::ostringstream msg;
            msg << "non-finite density at t = " << t_start;
            throw NumericalError(msg.str());
        }
        potential_ = config_.coulomb->hartree_potential(rho, config_.sign, workspace_);
    } else {
        auto v = potential_.values();
        std::fill(v.begin(), v.end(), 0.0);
    }

    // (c) full kick, (d) half kinetic.
    ComplexBuffer kick;
    if (kicked) {
        kick.resize(grid.size());
        auto v = potential_.values();
        for (std::size_t i = 0; i < kick.size(); ++i) kick[i] = std::polar(1.0, -config_.dt * v[i]);
    }
    parallel_for(orbitals.size(), [&](std::size_t j) {
        if (kicked) {
            auto u = orbitals[j].values();
            for (std::size_t i = 0; i < u.size(); ++i) u[i] *= kick[i];
        }
        transform_to_frequency(orbitals[j]);
        multiply_in_place(orbitals[j], half_kinetic_);
        transform_to_position(orbitals[j]);
    });
    e.set_time(t_end_of_step);

    if (hook) (*hook)(StepContext{step_index, t_start, config_.dt, potential_, momentum_density_, e});
}

OrbitalEnsemble strang_step(OrbitalEnsemble e, const StepConfig& config) {
    Propagator p(config);
    p.step(e, e.time() + config.dt);
    return e;
}

std::int64_t step_index(double t, double dt) {
    if (!(dt > 0.0)) throw UsageError("time step must be positive");
    const double steps = t / dt;
    const auto k = static_cast<std::int64_t>(std::llround(steps));
    if (std::abs(k * dt - t) > 1e-9 * std::max(1.0, std::abs(t))) {
        std::ostringstream msg;
        msg << "time " << t << " is not a multiple of dt = " << dt;
        throw UsageError(msg.str());
    }
    return k;
}

namespace {

bool all_finite(const OrbitalEnsemble& e) {
    for (const auto& u : e.orbitals())
        for (const auto& z : u.values())
            if (!std::isfinite(z.real()) || !std::isfinite(z.imag())) return false;
    return true;
}

}  // namespace

OrbitalEnsemble evolve(OrbitalEnsemble e0, const StepConfig& config, const EvolveOptions& options) {
    if (!(config.dt > 0.0)) throw UsageError("evolve needs dt > 0");
    const std::int64_t first = step_index(e0.time(), config.dt);
    e0.set_time(first * config.dt);
    if (options.t_end < e0.time()) throw UsageError("t_end precedes the initial time");
    const std::int64_t last = step_index(options.t_end, config.dt);

    std::vector<std::int64_t> records;
    double previous = -std::numeric_limits<double>::infinity();
    for (double t : options.schedule) {
        if (!(t > previous)) throw UsageError("output schedule must be strictly increasing");
        if (!(t > 0.0) || t > options.t_end * (1.0 + 1e-12)) throw UsageError("output schedule must lie in (0, t_end]");
        previous = t;
        const std::int64_t k = step_index(t, config.dt);
        if (k > first) records.push_back(k);
    }

    Propagator propagator(config);
    const StepHook* hook = options.on_step ? &options.on_step : nullptr;
    auto next_record = records.begin();
    OrbitalEnsemble last_good = e0;
    const std::int64_t check_every = 50;
    for (std::int64_t k = first + 1; k <= last; ++k) {
        try {
            propagator.step(e0, k * config.dt, k, hook);
        } catch (const NumericalError& err) {
            if (options.on_failure) options.on_failure(last_good, err.what());
            throw;
        }
        const bool recording = next_record != records.end() && *next_record == k;
        if ((k - first) % check_every == 0 || recording || k == last) {
            if (!all_finite(e0)) {
                std::ostringstream msg;
                msg << "non-finite orbital values by t = " << k * config.dt;
                if (options.on_failure) options.on_failure(last_good, msg.str());
                throw NumericalError(msg.str());
            }
            if (options.on_failure) last_good = e0;
        }
        if (recording) {
            if (options.on_record) options.on_record(e0);
            ++next_record;
        }
    }
    return e0;
}

EnergyParts energy_parts(const OrbitalEnsemble& e, const StepConfig& config) {
    const GridSpec& grid = e.grid();
    EnergyParts parts;
    for (std::size_t j = 0; j < e.rank(); ++j) {
        const auto uhat = to_frequency(e.orbitals()[j]);
        double sum = 0.0;
        const int n = grid.n();
        for (int a = 0; a < n; ++a)
            for (int b = 0; b < n; ++b)
                for (int c = 0; c < n; ++c) {
                    const double k2 = grid.wavenumber(a) * grid.wavenumber(a) +
                                      grid.wavenumber(b) * grid.wavenumber(b) +
                                      grid.wavenumber(c) * grid.wavenumber(c);
                    sum += k2 * std::norm(uhat[grid.index(a, b, c)]);
                }
        parts.kinetic += e.occupations()[j] * sum / grid.box_volume();
    }
    if (config.sign == 0 && !config.frozen_potential) return parts;

    const RealField rho = density(e);
    RealField v = config.frozen_potential ? *config.frozen_potential
                                          : (validate(config, grid), config.coulomb->hartree_potential(rho, config.sign));
    double sum = 0.0;
    for (std::size_t i = 0; i < rho.size(); ++i) sum += v[i] * rho[i];
    parts.potential = 0.5 * sum * grid.cell_volume();
    return parts;
}

double energy(const OrbitalEnsemble& e, const StepConfig& config) { return energy_parts(e, config).total(); }

}  // namespace hartree
