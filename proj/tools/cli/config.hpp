#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace kslab::cli {

// Flat "section.key" -> raw value, as read from a key=value or JSON file.
using RawConfig = std::map<std::string, std::string>;

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Reads a key=value file ("section.key = value", or bare keys under a
// "[section]" header; '#' starts a comment) or a JSON document whose nested
// objects are flattened to dotted keys. Throws ConfigError if the file is
// missing or malformed.
RawConfig load_raw_config(const std::string& path);
RawConfig parse_key_value(const std::string& text, const std::string& origin = "<string>");
RawConfig parse_json_config(const std::string& text, const std::string& origin = "<string>");

// "key=value" overrides, applied last.
void apply_override(RawConfig& raw, const std::string& assignment);

struct GridConfig {
    std::optional<double> h0, stretch, r_max;
    int order = 6;
};

struct ProfileConfig {
    double b0 = 1e-2;
    double M = 20.0;
};

struct SolverConfig {
    std::string frame = "rescaled";
    double ds_init = 0.02;
    double ds_max = 0.5;
    double db_rel_max = 1e-3;
    double transport_cfl = 0.05;
    double lambda_stop = 0.0;
    double b_stop_ratio = 0.5;
    double s_max = 1e4;
    double t_max = 1e300;
    int max_steps = 200000;
};

struct PerturbationConfig {
    double delta = 0.0;
    std::uint64_t seed = 0;
    int count = 1;
};

struct OutputConfig {
    std::string dir = "kslab_out";
    std::string name;  // empty: per-command default
    int cadence = 5;
    bool fields = true;
};

struct SweepConfig {
    std::vector<double> b0;  // empty: profile.b0 only
    int jobs = 0;            // 0: hardware concurrency
};

struct SpectralConfig {
    std::vector<double> M;   // empty: profile.M only
    double h0 = 0.1;
    double coercivity_r_max = 100.0;
};

struct VerifyConfig {
    std::vector<double> b = {1e-3, 1e-4, 1e-5, 1e-6, 1e-7};
    std::vector<double> M = {50, 100, 200, 400};
    double R = 1000.0;
};

struct RunConfig {
    GridConfig grid;
    ProfileConfig profile;
    SolverConfig solver;
    PerturbationConfig perturbation;
    OutputConfig output;
    SweepConfig sweep;
    SpectralConfig spectral;
    VerifyConfig verify;
};

struct Violation {
    std::string key;
    std::string message;
};

// Converts the raw map; unknown keys and unparsable values become violations.
RunConfig parse_run_config(const RawConfig& raw, std::vector<Violation>& violations);

enum class Command { ProfileBuild, Spectral, Simulate, Sweep, Verify };

// Checks module preconditions for the command; returns every violated one.
std::vector<Violation> validate(const RunConfig& cfg, Command cmd);

// Machine-readable error document for a rejected configuration.
std::string violations_json(const std::vector<Violation>& violations);

// Output root: KSLAB_OUT if set, else output.dir.
std::string output_root(const RunConfig& cfg);

// Every key parse_run_config understands.
const std::vector<std::string>& known_keys();

}  // namespace kslab::cli
