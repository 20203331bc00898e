#include "cli/config.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <sstream>
#include <type_traits>

#include <json.hpp>

#include "kslab/operators.hpp"
#include "kslab/profiles.hpp"

namespace kslab::cli {

namespace {

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return {};
    const auto b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

double B1_of(double b) { return std::abs(std::log(b)) / std::sqrt(b); }

void flatten(const nlohmann::json& j, const std::string& prefix, RawConfig& out) {
    if (j.is_object()) {
        for (auto it = j.begin(); it != j.end(); ++it)
            flatten(it.value(), prefix.empty() ? it.key() : prefix + "." + it.key(), out);
        return;
    }
    if (prefix.empty()) throw ConfigError("JSON configuration must be an object");
    if (j.is_array()) {
        std::string joined;
        for (const auto& e : j) {
            if (!joined.empty()) joined += ",";
            joined += e.is_string() ? e.get<std::string>() : e.dump();
        }
        out[prefix] = joined;
    } else if (j.is_string()) {
        out[prefix] = j.get<std::string>();
    } else {
        out[prefix] = j.dump();
    }
}

struct Reader {
    const RawConfig& raw;
    std::vector<Violation>& bad;

    const std::string* find(const std::string& key) const {
        auto it = raw.find(key);
        return it == raw.end() ? nullptr : &it->second;
    }
    void num(const std::string& key, double& dst) const {
        if (auto s = find(key)) {
            char* end = nullptr;
            const double x = std::strtod(s->c_str(), &end);
            if (s->empty() || *end != '\0' || !std::isfinite(x))
                bad.push_back({key, "not a finite number: '" + *s + "'"});
            else
                dst = x;
        }
    }
    void num(const std::string& key, std::optional<double>& dst) const {
        if (find(key)) {
            double x = 0.0;
            const std::size_t before = bad.size();
            num(key, x);
            if (bad.size() == before) dst = x;
        }
    }
    template <class Int>
    void integer(const std::string& key, Int& dst) const {
        if (auto s = find(key)) {
            std::istringstream is(*s);
            long long x = 0;
            if (!(is >> x) || !is.eof() || (x < 0 && std::is_unsigned_v<Int>))
                bad.push_back({key, "not an integer: '" + *s + "'"});
            else
                dst = static_cast<Int>(x);
        }
    }
    void str(const std::string& key, std::string& dst) const {
        if (auto s = find(key)) dst = *s;
    }
    void boolean(const std::string& key, bool& dst) const {
        if (auto s = find(key)) {
            if (*s == "true" || *s == "1" || *s == "yes")
                dst = true;
            else if (*s == "false" || *s == "0" || *s == "no")
                dst = false;
            else
                bad.push_back({key, "not a boolean: '" + *s + "'"});
        }
    }
    void list(const std::string& key, std::vector<double>& dst) const {
        if (auto s = find(key)) {
            std::string body = *s;
            for (char& c : body)
                if (c == '[' || c == ']' || c == ';') c = ',';
            std::vector<double> out;
            std::stringstream ss(body);
            std::string item;
            while (std::getline(ss, item, ',')) {
                item = trim(item);
                if (item.empty()) continue;
                char* end = nullptr;
                const double x = std::strtod(item.c_str(), &end);
                if (*end != '\0' || !std::isfinite(x)) {
                    bad.push_back({key, "not a number list: '" + *s + "'"});
                    return;
                }
                out.push_back(x);
            }
            if (out.empty()) bad.push_back({key, "empty list"});
            else dst = std::move(out);
        }
    }
};

// Degeneracy of <Phi_{0,M}, Lambda Q> measured on the grid Phi_M is built on.
std::optional<Violation> check_M(double M, const std::string& key) {
    if (!(M > 1.0)) return Violation{key, "M too small: M = " + std::to_string(M) + " must exceed 1"};
    const GridPtr g = RadialGrid::make(phi_grid_spec(M));
    const double p = std::abs(pairing(Phi0(g, M), lambda_Q_pair(g)));
    if (p < phi_pairing_floor()) {
        std::ostringstream os;
        os << "M too small: |<Phi_0M, Lambda Q>| = " << p << " is below the degeneracy floor "
           << phi_pairing_floor() << " (M = " << M << ")";
        return Violation{key, os.str()};
    }
    return std::nullopt;
}

void check_b(double b, const std::string& key, std::vector<Violation>& out) {
    if (!(b > 0)) {
        out.push_back({key, "b must be positive"});
    } else if (b > kProfileBMax) {
        std::ostringstream os;
        os << "b too large: " << key << " = " << b << " exceeds " << kProfileBMax;
        out.push_back({key, os.str()});
    }
}

void check_r_max(const RunConfig& cfg, double b, std::vector<Violation>& out) {
    if (!cfg.grid.r_max || !(b > 0) || b > kProfileBMax) return;
    const double need = 4.0 * B1_of(b);
    if (*cfg.grid.r_max < need) {
        std::ostringstream os;
        os << "r_max < 4 B1: grid.r_max = " << *cfg.grid.r_max << " but 4 B1(" << b << ") = " << need;
        out.push_back({"grid.r_max", os.str()});
    }
}

}  // namespace

const std::vector<std::string>& known_keys() {
    static const std::vector<std::string> keys = {
        "grid.h0", "grid.stretch", "grid.r_max", "grid.order",
        "profile.b0", "profile.M",
        "solver.frame", "solver.ds_init", "solver.ds_max", "solver.db_rel_max", "solver.transport_cfl",
        "solver.lambda_stop", "solver.b_stop_ratio", "solver.s_max", "solver.t_max", "solver.max_steps",
        "perturbation.delta", "perturbation.seed", "perturbation.count",
        "output.dir", "output.name", "output.cadence", "output.fields",
        "sweep.b0", "sweep.jobs",
        "spectral.M", "spectral.h0", "spectral.coercivity_r_max",
        "verify.b", "verify.M", "verify.R",
    };
    return keys;
}

RawConfig parse_key_value(const std::string& text, const std::string& origin) {
    RawConfig out;
    std::istringstream is(text);
    std::string line, section;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (auto h = line.find('#'); h != std::string::npos) line.erase(h);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') throw ConfigError(origin + ":" + std::to_string(lineno) + ": unterminated section");
            section = trim(line.substr(1, line.size() - 2));
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected key = value");
        std::string key = trim(line.substr(0, eq));
        if (key.empty()) throw ConfigError(origin + ":" + std::to_string(lineno) + ": empty key");
        if (!section.empty() && key.find('.') == std::string::npos) key = section + "." + key;
        out[key] = trim(line.substr(eq + 1));
    }
    return out;
}

RawConfig parse_json_config(const std::string& text, const std::string& origin) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(origin + ": " + e.what());
    }
    RawConfig out;
    flatten(j, "", out);
    return out;
}

RawConfig load_raw_config(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw ConfigError("configuration file not found: " + path);
    std::stringstream ss;
    ss << is.rdbuf();
    const std::string text = ss.str();
    const std::string body = trim(text);
    const bool json = (path.size() >= 5 && path.substr(path.size() - 5) == ".json") || (!body.empty() && body.front() == '{');
    return json ? parse_json_config(text, path) : parse_key_value(text, path);
}

void apply_override(RawConfig& raw, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || trim(assignment.substr(0, eq)).empty())
        throw ConfigError("override must be key=value: '" + assignment + "'");
    raw[trim(assignment.substr(0, eq))] = trim(assignment.substr(eq + 1));
}

RunConfig parse_run_config(const RawConfig& raw, std::vector<Violation>& violations) {
    RunConfig c;
    const auto& keys = known_keys();
    for (const auto& [k, v] : raw)
        if (std::find(keys.begin(), keys.end(), k) == keys.end()) violations.push_back({k, "unknown key"});
    const Reader r{raw, violations};
    r.num("grid.h0", c.grid.h0);
    r.num("grid.stretch", c.grid.stretch);
    r.num("grid.r_max", c.grid.r_max);
    r.integer("grid.order", c.grid.order);
    r.num("profile.b0", c.profile.b0);
    r.num("profile.M", c.profile.M);
    r.str("solver.frame", c.solver.frame);
    r.num("solver.ds_init", c.solver.ds_init);
    r.num("solver.ds_max", c.solver.ds_max);
    r.num("solver.db_rel_max", c.solver.db_rel_max);
    r.num("solver.transport_cfl", c.solver.transport_cfl);
    r.num("solver.lambda_stop", c.solver.lambda_stop);
    r.num("solver.b_stop_ratio", c.solver.b_stop_ratio);
    r.num("solver.s_max", c.solver.s_max);
    r.num("solver.t_max", c.solver.t_max);
    r.integer("solver.max_steps", c.solver.max_steps);
    r.num("perturbation.delta", c.perturbation.delta);
    r.integer("perturbation.seed", c.perturbation.seed);
    r.integer("perturbation.count", c.perturbation.count);
    r.str("output.dir", c.output.dir);
    r.str("output.name", c.output.name);
    r.integer("output.cadence", c.output.cadence);
    r.boolean("output.fields", c.output.fields);
    r.list("sweep.b0", c.sweep.b0);
    r.integer("sweep.jobs", c.sweep.jobs);
    r.list("spectral.M", c.spectral.M);
    r.num("spectral.h0", c.spectral.h0);
    r.num("spectral.coercivity_r_max", c.spectral.coercivity_r_max);
    r.list("verify.b", c.verify.b);
    r.list("verify.M", c.verify.M);
    r.num("verify.R", c.verify.R);
    return c;
}

std::vector<Violation> validate(const RunConfig& cfg, Command cmd) {
    std::vector<Violation> out;
    const auto& g = cfg.grid;
    if (g.h0 && !(*g.h0 > 0)) out.push_back({"grid.h0", "must be positive"});
    if (g.stretch && !(*g.stretch >= 0)) out.push_back({"grid.stretch", "must be non-negative"});
    if (g.order < 2 || g.order > 12 || g.order % 2) out.push_back({"grid.order", "must be even, between 2 and 12"});
    if (cfg.output.name.find('/') != std::string::npos || cfg.output.name == "..")
        out.push_back({"output.name", "must be a plain directory name"});

    auto dynamics_checks = [&] {
        const auto& s = cfg.solver;
        if (s.frame != "rescaled" && s.frame != "physical")
            out.push_back({"solver.frame", "must be 'rescaled' or 'physical'"});
        if (!(s.ds_init > 0)) out.push_back({"solver.ds_init", "must be positive"});
        if (!(s.ds_max >= s.ds_init)) out.push_back({"solver.ds_max", "must be at least solver.ds_init"});
        if (!(s.db_rel_max > 0)) out.push_back({"solver.db_rel_max", "must be positive"});
        if (!(s.transport_cfl > 0)) out.push_back({"solver.transport_cfl", "must be positive"});
        if (!(s.lambda_stop >= 0 && s.lambda_stop < 1)) out.push_back({"solver.lambda_stop", "must lie in [0, 1)"});
        if (!(s.b_stop_ratio >= 0 && s.b_stop_ratio < 1)) out.push_back({"solver.b_stop_ratio", "must lie in [0, 1)"});
        if (!(s.s_max > 0)) out.push_back({"solver.s_max", "must be positive"});
        if (!(s.t_max > 0)) out.push_back({"solver.t_max", "must be positive"});
        if (s.max_steps < 1) out.push_back({"solver.max_steps", "must be at least 1"});
        if (s.lambda_stop == 0 && s.b_stop_ratio == 0 && s.s_max >= 1e300 && s.t_max >= 1e300)
            out.push_back({"solver", "no stopping rule: set lambda_stop, b_stop_ratio, s_max or t_max"});
        if (!(cfg.perturbation.delta >= 0 && cfg.perturbation.delta < 1))
            out.push_back({"perturbation.delta", "must lie in [0, 1)"});
        if (cfg.perturbation.count < 1) out.push_back({"perturbation.count", "must be at least 1"});
        if (cfg.output.cadence < 1) out.push_back({"output.cadence", "must be at least 1"});
        if (auto v = check_M(cfg.profile.M, "profile.M")) out.push_back(*v);
    };

    switch (cmd) {
        case Command::ProfileBuild:
            check_b(cfg.profile.b0, "profile.b0", out);
            check_r_max(cfg, cfg.profile.b0, out);
            break;
        case Command::Spectral: {
            const auto Ms = cfg.spectral.M.empty() ? std::vector<double>{cfg.profile.M} : cfg.spectral.M;
            for (double M : Ms)
                if (auto v = check_M(M, cfg.spectral.M.empty() ? "profile.M" : "spectral.M")) out.push_back(*v);
            if (!(cfg.spectral.h0 > 0)) out.push_back({"spectral.h0", "must be positive"});
            if (!(cfg.spectral.coercivity_r_max > 10)) out.push_back({"spectral.coercivity_r_max", "must exceed 10"});
            break;
        }
        case Command::Simulate:
            check_b(cfg.profile.b0, "profile.b0", out);
            check_r_max(cfg, cfg.profile.b0, out);
            dynamics_checks();
            break;
        case Command::Sweep: {
            const auto bs = cfg.sweep.b0.empty() ? std::vector<double>{cfg.profile.b0} : cfg.sweep.b0;
            for (double b : bs) {
                check_b(b, cfg.sweep.b0.empty() ? "profile.b0" : "sweep.b0", out);
                check_r_max(cfg, b, out);
            }
            if (cfg.sweep.jobs < 0) out.push_back({"sweep.jobs", "must be non-negative"});
            dynamics_checks();
            break;
        }
        case Command::Verify:
            for (double b : cfg.verify.b) check_b(b, "verify.b", out);
            if (cfg.verify.b.size() < 2) out.push_back({"verify.b", "needs at least two values for a slope"});
            for (double M : cfg.verify.M)
                if (auto v = check_M(M, "verify.M")) out.push_back(*v);
            if (!(cfg.verify.R > 10)) out.push_back({"verify.R", "must exceed 10"});
            break;
    }
    return out;
}

std::string violations_json(const std::vector<Violation>& violations) {
    nlohmann::ordered_json j;
    j["error"] = "invalid configuration";
    j["violations"] = nlohmann::ordered_json::array();
    for (const auto& v : violations) j["violations"].push_back({{"key", v.key}, {"message", v.message}});
    return j.dump(2);
}

std::string output_root(const RunConfig& cfg) {
    if (const char* env = std::getenv("KSLAB_OUT"); env && *env) return env;
    return cfg.output.dir;
}

}  // namespace kslab::cli
