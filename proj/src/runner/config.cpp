#include "hartree/runner/config.hpp"

#include <algorithm>
#include <charconv>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

namespace hartree::runner {

namespace {

std::string trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split_list(const std::string& value) {
    std::vector<std::string> out;
    std::string token;
    for (char c : value + ",") {
        if (c == ',' || c == ' ' || c == '\t') {
            if (!token.empty()) out.push_back(token);
            token.clear();
        } else {
            token += c;
        }
    }
    return out;
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const std::string& why) {
    throw ConfigError(key + " = '" + value + "': " + why);
}

double to_double(const std::string& key, const std::string& value) {
    double out = 0.0;
    const char* end = value.data() + value.size();
    const char* begin = value.data();
    if (!value.empty() && value.front() == '+') ++begin;
    const auto [ptr, ec] = std::from_chars(begin, end, out);
    if (ec != std::errc() || ptr != end || !std::isfinite(out)) bad_value(key, value, "expected a finite number");
    return out;
}

long long to_integer(const std::string& key, const std::string& value) {
    long long out = 0;
    const char* end = value.data() + value.size();
    const char* begin = value.data();
    if (!value.empty() && value.front() == '+') ++begin;
    const auto [ptr, ec] = std::from_chars(begin, end, out);
    if (ec != std::errc() || ptr != end) bad_value(key, value, "expected an integer");
    return out;
}

bool to_bool(const std::string& key, const std::string& value) {
    if (value == "true" || value == "yes" || value == "1" || value == "on") return true;
    if (value == "false" || value == "no" || value == "0" || value == "off") return false;
    bad_value(key, value, "expected true or false");
}

std::vector<double> to_doubles(const std::string& key, const std::string& value) {
    std::vector<double> out;
    for (const auto& token : split_list(value)) out.push_back(to_double(key, token));
    return out;
}

Vec3 to_vec3(const std::string& key, const std::string& value) {
    const auto v = to_doubles(key, value);
    if (v.size() != 3) bad_value(key, value, "expected three numbers");
    return {v[0], v[1], v[2]};
}

std::array<double, 2> to_window(const std::string& key, const std::string& value) {
    const auto v = to_doubles(key, value);
    if (v.size() != 2 || !(v[0] > 0.0) || !(v[1] > v[0])) bad_value(key, value, "expected a window 0 < a < b");
    return {v[0], v[1]};
}

std::int64_t snap(double t, double dt) { return std::max<std::int64_t>(1, std::llround(t / dt)); }

}  // namespace

std::map<std::string, std::string> parse_key_values(std::istream& in, const std::string& source) {
    std::map<std::string, std::string> out;
    std::string line;
    int number = 0;
    while (std::getline(in, line)) {
        ++number;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        const std::string body = trim(line);
        if (body.empty()) continue;
        const auto eq = body.find('=');
        const std::string where = source + ":" + std::to_string(number);
        if (eq == std::string::npos) throw ConfigError(where + ": expected 'key = value'");
        std::string key = trim(std::string_view(body).substr(0, eq));
        std::string value = trim(std::string_view(body).substr(eq + 1));
        if (key.empty()) throw ConfigError(where + ": empty key");
        if (value.empty()) throw ConfigError(where + ": empty value for " + key);
        if (!out.emplace(key, value).second) throw ConfigError(where + ": duplicate key " + key);
    }
    return out;
}

RunConfig parse_config(std::istream& in, const std::string& source) {
    const auto pairs = parse_key_values(in, source);
    RunConfig c;
    std::map<std::string, OrbitalConfig> orbitals;
    std::set<std::string> amplitude_given;

    for (const auto& [key, value] : pairs) {
        if (key == "grid.n") {
            c.n = static_cast<int>(to_integer(key, value));
        } else if (key == "grid.L") {
            c.length = to_double(key, value);
        } else if (key == "time.dt") {
            c.dt = to_double(key, value);
        } else if (key == "time.t_end") {
            c.t_end = to_double(key, value);
        } else if (key == "time.output") {
            const auto tokens = split_list(value);
            if (tokens.size() == 1 && tokens[0].find_first_of(".eE") == std::string::npos) {
                c.output_count = static_cast<int>(to_integer(key, value));
                c.output_times.clear();
            } else {
                c.output_times = to_doubles(key, value);
            }
        } else if (key == "interaction.sign") {
            c.sign = static_cast<int>(to_integer(key, value));
        } else if (key == "coulomb.method" || key == "interaction.coulomb.method") {
            try {
                c.coulomb = parse_coulomb_method(value);
            } catch (const UsageError& e) {
                bad_value(key, value, e.what());
            }
        } else if (key == "initial.snapshot") {
            c.initial_snapshot = value;
        } else if (key == "initial.trace") {
            c.initial_trace = to_double(key, value);
        } else if (key == "scattering.k_stride") {
            c.phase.k_stride = static_cast<int>(to_integer(key, value));
        } else if (key == "scattering.k_extent") {
            c.phase.k_extent = to_double(key, value);
        } else if (key == "scattering.t1_cutoff") {
            c.phase.t1 = to_double(key, value);
        } else if (key == "scattering.overlap_end") {
            c.phase.overlap_end = to_double(key, value);
        } else if (key == "scattering.fit_window") {
            c.fit_window = to_window(key, value);
        } else if (key == "scattering.phase_fit_window") {
            c.phase_fit_window = to_window(key, value);
        } else if (key == "output.dir") {
            c.output_dir = value;
        } else if (key == "output.snapshot_every") {
            c.snapshot_every = to_double(key, value);
        } else if (key == "output.resume") {
            c.resume = to_bool(key, value);
        } else if (key == "seed") {
            c.seed = static_cast<std::uint64_t>(to_integer(key, value));
        } else if (key == "fft.planner") {
            if (value == "estimate")
                c.planner = fft::Effort::estimate;
            else if (value == "measure")
                c.planner = fft::Effort::measure;
            else
                bad_value(key, value, "expected estimate or measure");
        } else if (key == "checks.enabled") {
            c.checks = to_bool(key, value);
        } else if (key.starts_with("orbital.")) {
            const auto dot = key.find('.', 8);
            if (dot == std::string::npos) throw ConfigError("malformed orbital key " + key);
            const std::string id = key.substr(8, dot - 8);
            const std::string field = key.substr(dot + 1);
            auto& o = orbitals[id];
            o.id = id;
            if (field == "occupation") {
                o.occupation = to_double(key, value);
            } else if (field == "sigma") {
                o.gaussian.sigma = to_double(key, value);
            } else if (field == "center") {
                o.gaussian.center = to_vec3(key, value);
            } else if (field == "boost") {
                o.gaussian.boost = to_vec3(key, value);
            } else if (field == "amplitude") {
                const auto v = to_doubles(key, value);
                if (v.empty() || v.size() > 2) bad_value(key, value, "expected re or re, im");
                o.gaussian.amplitude = {v[0], v.size() == 2 ? v[1] : 0.0};
                amplitude_given.insert(id);
            } else {
                throw ConfigError("unknown orbital field " + key);
            }
        } else {
            throw ConfigError("unknown key " + key);
        }
    }
    for (auto& [id, o] : orbitals) {
        o.normalize = !amplitude_given.contains(id);
        c.orbitals.push_back(o);
    }
    c.validate();
    return c;
}

RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config " + path.string());
    auto c = parse_config(in, path.string());
    if (!c.initial_snapshot.empty() && c.initial_snapshot.is_relative())
        c.initial_snapshot = path.parent_path() / c.initial_snapshot;
    if (!c.initial_snapshot.empty() && !std::filesystem::exists(c.initial_snapshot))
        throw ConfigError("initial snapshot not found: " + c.initial_snapshot.string());
    return c;
}

void RunConfig::validate() const {
    if (n < 4 || n % 2 != 0) throw ConfigError("grid.n must be even and at least 4");
    if (!(length > 0.0)) throw ConfigError("grid.L must be positive");
    if (!(dt > 0.0)) throw ConfigError("time.dt must be positive");
    if (!(t_end >= 0.0)) throw ConfigError("time.t_end must be nonnegative");
    if (std::abs(t_end / dt - std::round(t_end / dt)) > 1e-9 * std::max(1.0, t_end / dt))
        throw ConfigError("time.t_end must be a multiple of time.dt");
    if (output_times.empty() && output_count < 1) throw ConfigError("time.output count must be positive");
    double previous = 0.0;
    for (double t : output_times) {
        if (!(t > previous) || t > t_end * (1.0 + 1e-12))
            throw ConfigError("time.output list must increase within (0, t_end]");
        if (std::abs(t / dt - std::round(t / dt)) > 1e-9 * std::max(1.0, t / dt))
            throw ConfigError("time.output times must be multiples of time.dt");
        previous = t;
    }
    if (sign < -1 || sign > 1) throw ConfigError("interaction.sign must be -1, 0 or +1");
    if (orbitals.empty() == initial_snapshot.empty())
        throw ConfigError("give either orbital.* entries or initial.snapshot");
    for (const auto& o : orbitals) {
        if (!(o.occupation > 0.0)) throw ConfigError("orbital." + o.id + ".occupation must be positive");
        if (!(o.gaussian.sigma > 0.0)) throw ConfigError("orbital." + o.id + ".sigma must be positive");
    }
    if (initial_trace < 0.0) throw ConfigError("initial.trace must be nonnegative");
    if (phase.k_stride < 1 || n % (2 * phase.k_stride) != 0)
        throw ConfigError("scattering.k_stride must divide grid.n / 2");
    if (!(phase.k_extent > 0.0 && phase.k_extent <= 1.0)) throw ConfigError("scattering.k_extent must lie in (0, 1]");
    if (!(phase.t1 > 0.0) || phase.overlap_end < phase.t1)
        throw ConfigError("scattering.t1_cutoff must be positive and not after overlap_end");
    if (snapshot_every < 0.0) throw ConfigError("output.snapshot_every must be nonnegative");
    if (snapshot_every > 0.0 &&
        std::abs(snapshot_every / dt - std::round(snapshot_every / dt)) > 1e-9 * std::max(1.0, snapshot_every / dt))
        throw ConfigError("output.snapshot_every must be a multiple of time.dt");
}

std::vector<double> RunConfig::schedule() const {
    if (t_end == 0.0) return {};
    const std::int64_t last = std::llround(t_end / dt);
    std::set<std::int64_t> steps{last};
    if (!output_times.empty()) {
        steps.clear();
        for (double t : output_times) steps.insert(std::llround(t / dt));
    } else {
        const double lo = std::min(0.1, t_end);
        for (int i = 0; i < output_count; ++i) {
            const double f = output_count == 1 ? 1.0 : static_cast<double>(i) / (output_count - 1);
            steps.insert(std::min(last, snap(lo * std::pow(t_end / lo, f), dt)));
        }
        for (double s : MonitorConfig{}.dyadic_times)
            if (s <= t_end) steps.insert(snap(s, dt));
        steps.insert(std::min(last, snap(1.0, dt)));
    }
    if (snapshot_every > 0.0) {
        const std::int64_t every = std::llround(snapshot_every / dt);
        for (std::int64_t s = every; s <= last; s += every) steps.insert(s);
    }
    std::vector<double> out;
    for (auto s : steps)
        if (s >= 1 && s <= last) out.push_back(static_cast<double>(s) * dt);
    return out;
}

void apply_environment(RunConfig& config) {
    if (const char* dir = std::getenv("HARTREE_OUTPUT_DIR"); dir && *dir) config.output_dir = dir;
    if (const char* threads = std::getenv("HARTREE_THREADS"); threads && *threads) {
        const auto count = to_integer("HARTREE_THREADS", threads);
        if (count < 1) throw ConfigError("HARTREE_THREADS must be positive");
        set_thread_count(static_cast<int>(count));
    }
}

OrbitalEnsemble initial_ensemble(const RunConfig& config) {
    if (config.orbitals.empty()) throw ConfigError("no orbitals configured");
    const GridSpec grid(config.n, config.length);
    std::vector<double> occupations;
    std::vector<ScalarField> fields;
    for (const auto& o : config.orbitals) {
        auto u = free_gaussian(grid, 0.0, o.gaussian);
        if (o.normalize) {
            const double norm = l2_norm(u);
            for (auto& z : u.values()) z /= norm;
        }
        occupations.push_back(o.occupation);
        fields.push_back(std::move(u));
    }
    if (config.initial_trace > 0.0) {
        double trace = 0.0;
        for (std::size_t j = 0; j < fields.size(); ++j) trace += occupations[j] * std::pow(l2_norm(fields[j]), 2);
        for (double& l : occupations) l *= config.initial_trace / trace;
    }
    return OrbitalEnsemble(0.0, std::move(occupations), std::move(fields), config.sign);
}

}  // namespace hartree::runner
