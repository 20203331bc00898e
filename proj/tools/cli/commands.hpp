#pragma once

#include <iosfwd>
#include <string>

#include <json.hpp>

#include "cli/config.hpp"
#include "kslab/diagnostics.hpp"
#include "kslab/dynamics.hpp"
#include "kslab/operators.hpp"
#include "kslab/profiles.hpp"

namespace kslab::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 1;   // missing/invalid configuration, IO
inline constexpr int kExitFailure = 2;  // bound-report or run failure

using Json = nlohmann::ordered_json;

enum class Suite { Hardy, LogHLS, Profiles, Spectral };
Suite parse_suite(const std::string& name);  // throws ConfigError
std::string suite_name(Suite s);

// Each command validates nothing itself (see validate()), writes into
// <output root>/<run name> and returns an exit code. Progress goes to log.
int cmd_profile_build(const RunConfig& cfg, std::ostream& log);
int cmd_spectral(const RunConfig& cfg, std::ostream& log);
int cmd_simulate(const RunConfig& cfg, std::ostream& log);
int cmd_sweep(const RunConfig& cfg, std::ostream& log);
int cmd_verify(const RunConfig& cfg, Suite suite, std::ostream& log);

// Pieces shared with the tests.
EvolveConfig evolve_config(const RunConfig& cfg);
Json config_json(const RunConfig& cfg);
Json profile_json(const ProfileFamily& fam);
Json run_summary_json(const RunConfig& cfg, const EvolveConfig& ec, const EvolveResult& res);

}  // namespace kslab::cli
