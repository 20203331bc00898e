#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "cli/commands.hpp"
#include "cli/config.hpp"

using namespace kslab::cli;

namespace {

struct Invocation {
    std::string config_path;
    std::vector<std::string> overrides;
    bool quiet = false;
};

void add_common(CLI::App* sub, Invocation& inv) {
    sub->add_option("-c,--config", inv.config_path, "key=value or JSON configuration file");
    sub->add_option("-s,--set", inv.overrides, "override a key, e.g. --set profile.b0=1e-4");
    sub->add_flag("-q,--quiet", inv.quiet, "suppress progress messages");
}

int run(Command cmd, const Invocation& inv, const std::function<int(const RunConfig&, std::ostream&)>& body) {
    RawConfig raw;
    try {
        if (!inv.config_path.empty()) raw = load_raw_config(inv.config_path);
        for (const auto& o : inv.overrides) apply_override(raw, o);
    } catch (const ConfigError& e) {
        std::cerr << "kslab: " << e.what() << '\n';
        return kExitConfig;
    }
    std::vector<Violation> violations;
    const RunConfig cfg = parse_run_config(raw, violations);
    const auto more = validate(cfg, cmd);
    violations.insert(violations.end(), more.begin(), more.end());
    if (!violations.empty()) {
        std::cerr << violations_json(violations) << '\n';
        return kExitConfig;
    }
    std::ostream null_stream(nullptr);
    try {
        return body(cfg, inv.quiet ? null_stream : std::cerr);
    } catch (const std::exception& e) {
        std::cerr << "kslab: " << e.what() << '\n';
        return kExitFailure;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Radial Keller-Segel blow-up lab"};
    app.require_subcommand(1);
    Invocation inv;

    auto* profile = app.add_subcommand("profile", "approximate blow-up profiles");
    profile->require_subcommand(1);
    auto* build = profile->add_subcommand("build", "build the profile family for profile.b0");
    add_common(build, inv);
    std::string b_flag;
    build->add_option("--b", b_flag, "shorthand for --set profile.b0=<val>");

    auto* spectral = app.add_subcommand("spectral", "linearized operator reports");
    spectral->require_subcommand(1);
    auto* check = spectral->add_subcommand("check", "Phi_M directions and coercivity constants");
    add_common(check, inv);

    auto* simulate = app.add_subcommand("simulate", "evolve from the profile at profile.b0");
    add_common(simulate, inv);

    auto* sweep = app.add_subcommand("sweep", "runs over sweep.b0 and perturbation.count seeds");
    add_common(sweep, inv);

    auto* verify = app.add_subcommand("verify-bounds", "inequality and bound suites");
    add_common(verify, inv);
    std::string suite = "hardy";
    verify->add_option("--suite", suite, "hardy, loghls, profiles or spectral")
        ->check(CLI::IsMember({"hardy", "loghls", "profiles", "spectral"}));

    CLI11_PARSE(app, argc, argv);

    if (build->parsed()) {
        if (!b_flag.empty()) inv.overrides.push_back("profile.b0=" + b_flag);
        return run(Command::ProfileBuild, inv, cmd_profile_build);
    }
    if (check->parsed()) return run(Command::Spectral, inv, cmd_spectral);
    if (simulate->parsed()) return run(Command::Simulate, inv, cmd_simulate);
    if (sweep->parsed()) return run(Command::Sweep, inv, cmd_sweep);
    if (verify->parsed()) {
        const Suite s = parse_suite(suite);
        return run(Command::Verify, inv, [s](const RunConfig& cfg, std::ostream& log) { return cmd_verify(cfg, s, log); });
    }
    return kExitConfig;
}
