#include "cli/commands.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <mutex>
#include <numbers>
#include <ostream>
#include <sstream>
#include <thread>

#include "kslab/ground_state.hpp"
#include "kslab/io.hpp"

namespace kslab::cli {

namespace fs = std::filesystem;

namespace {

constexpr double kPi = std::numbers::pi;

double B1_of(double b) { return std::abs(std::log(b)) / std::sqrt(b); }

fs::path run_dir(const RunConfig& cfg, const std::string& fallback) {
    fs::path dir = fs::path(output_root(cfg)) / (cfg.output.name.empty() ? fallback : cfg.output.name);
    fs::create_directories(dir);
    return dir;
}

void write_json(const fs::path& path, const Json& j) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
    os << j.dump(2) << '\n';
}

// One named pass/fail check; the list decides the exit code.
struct Checks {
    Json rows = Json::array();
    bool ok = true;

    void add(const std::string& name, double value, const std::string& target, bool pass) {
        rows.push_back({{"name", name}, {"value", value}, {"target", target}, {"pass", pass}});
        ok = ok && pass;
    }
};

double slope_loglog(const std::vector<double>& x, const std::vector<double>& y) {
    std::vector<double> lx, ly;
    for (std::size_t i = 0; i < x.size(); ++i) {
        lx.push_back(std::log(x[i]));
        ly.push_back(std::log(std::abs(y[i])));
    }
    return windowed_slope(lx, ly, static_cast<int>(lx.size())).front();
}

Json laws_json(const LawReport& l) {
    return {{"first_record", l.first},
            {"lambda_ratio_max_dev", l.lambda_ratio_max_dev},
            {"b_law_min", l.b_law_min},
            {"b_law_max", l.b_law_max},
            {"b_law_start", l.b_law_start},
            {"b_law_end", l.b_law_end},
            {"lambda43_rate_min", l.lambda43_rate_min},
            {"deformation_max", l.deformation_max},
            {"lambda_ok", l.lambda_ok},
            {"b_law_ok", l.b_law_ok},
            {"lambda43_ok", l.lambda43_ok}};
}

Json coercivity_json(const CoercivityResult& c) {
    return {{"delta0", c.delta},
            {"delta0_log_weighted", c.delta_log_weighted},
            {"unconstrained_min", c.unconstrained_min},
            {"dimension", c.dimension}};
}

}  // namespace

Suite parse_suite(const std::string& name) {
    if (name == "hardy") return Suite::Hardy;
    if (name == "loghls") return Suite::LogHLS;
    if (name == "profiles") return Suite::Profiles;
    if (name == "spectral") return Suite::Spectral;
    throw ConfigError("unknown suite '" + name + "' (hardy, loghls, profiles, spectral)");
}

std::string suite_name(Suite s) {
    switch (s) {
        case Suite::Hardy: return "hardy";
        case Suite::LogHLS: return "loghls";
        case Suite::Profiles: return "profiles";
        case Suite::Spectral: return "spectral";
    }
    return "";
}

Json config_json(const RunConfig& c) {
    auto opt = [](const std::optional<double>& x) { return x ? Json(*x) : Json(nullptr); };
    return {
        {"grid", {{"h0", opt(c.grid.h0)}, {"stretch", opt(c.grid.stretch)}, {"r_max", opt(c.grid.r_max)}, {"order", c.grid.order}}},
        {"profile", {{"b0", c.profile.b0}, {"M", c.profile.M}}},
        {"solver",
         {{"frame", c.solver.frame},
          {"ds_init", c.solver.ds_init},
          {"ds_max", c.solver.ds_max},
          {"db_rel_max", c.solver.db_rel_max},
          {"transport_cfl", c.solver.transport_cfl},
          {"lambda_stop", c.solver.lambda_stop},
          {"b_stop_ratio", c.solver.b_stop_ratio},
          {"s_max", c.solver.s_max},
          {"t_max", c.solver.t_max},
          {"max_steps", c.solver.max_steps}}},
        {"perturbation", {{"delta", c.perturbation.delta}, {"seed", c.perturbation.seed}, {"count", c.perturbation.count}}},
        {"output", {{"name", c.output.name}, {"cadence", c.output.cadence}, {"fields", c.output.fields}}},
        {"sweep", {{"b0", c.sweep.b0}, {"jobs", c.sweep.jobs}}},
        {"spectral", {{"M", c.spectral.M}, {"h0", c.spectral.h0}, {"coercivity_r_max", c.spectral.coercivity_r_max}}},
        {"verify", {{"b", c.verify.b}, {"M", c.verify.M}, {"R", c.verify.R}}},
    };
}

Json profile_json(const ProfileFamily& f) {
    const auto& rad = f.rad;
    const auto& rg = rad.regions;
    const auto& n = f.error.norms;
    const auto& bd = f.bounds;
    const Json norm_report = {{"psi1_L2", n.psi1_L2},
                              {"L1_over_Q", n.L1_over_Q},
                              {"grad_psi2_weighted", n.grad_psi2_weighted},
                              {"L2_sq", n.L2_sq},
                              {"Q_gradM1_sq", n.Q_gradM1_sq},
                              {"grad_psi2_L2", n.grad_psi2_L2},
                              {"degenerate_flux", n.degenerate_flux}};
    return {
        {"b", f.b},
        {"B0", f.B0},
        {"B1", f.B1},
        {"c_b", rad.c_b},
        {"beta", rad.beta},
        {"norm_report", norm_report},
        {"grid", {{"nodes", f.grid->size()}, {"r_max", f.grid->r_max()}, {"order", f.grid->order()}}},
        {"radiation",
         {{"c_b", rad.c_b},
          {"c_b_log_b_over_2", rad.c_b * std::abs(std::log(f.b)) / 2.0},
          {"c_b_quadratic_root", rad.c_b_quadratic_root},
          {"c1", rad.c1},
          {"c2", rad.c2},
          {"beta", rad.beta}}},
        {"regions",
         {{"core_residual", rg.core_residual},
          {"outer_residual", rg.outer_residual},
          {"outer_mass_residual", rg.outer_mass_residual},
          {"mid_sigma1_const", rg.mid_sigma1_const},
          {"mid_sigma2_const", rg.mid_sigma2_const},
          {"mid_mass_deviation", rg.mid_mass_deviation}}},
        {"bounds",
         {{"T1_tail", bd.T1_tail},
          {"S1_tail", bd.S1_tail},
          {"m2_inner", bd.m2_inner},
          {"m2_mid", bd.m2_mid},
          {"m2_outer", bd.m2_outer},
          {"T2_mid", bd.T2_mid},
          {"S2_growth", bd.S2_growth}}},
    };
}

EvolveConfig evolve_config(const RunConfig& c) {
    EvolveConfig e;
    e.b0 = c.profile.b0;
    e.M = c.profile.M;
    if (c.grid.h0) e.h0 = *c.grid.h0;
    if (c.grid.stretch) e.stretch = *c.grid.stretch;
    if (c.grid.r_max) e.r_max = *c.grid.r_max;
    e.order = c.grid.order;
    e.frame = c.solver.frame == "physical" ? Frame::Physical : Frame::Rescaled;
    e.ds_init = c.solver.ds_init;
    e.ds_max = c.solver.ds_max;
    e.db_rel_max = c.solver.db_rel_max;
    e.transport_cfl = c.solver.transport_cfl;
    e.lambda_stop = c.solver.lambda_stop;
    e.b_stop_ratio = c.solver.b_stop_ratio;
    e.s_max = c.solver.s_max;
    e.t_max = c.solver.t_max;
    e.max_steps = c.solver.max_steps;
    e.cadence = c.output.cadence;
    e.delta = c.perturbation.delta;
    e.seed = c.perturbation.seed;
    return e;
}

Json run_summary_json(const RunConfig& cfg, const EvolveConfig& ec, const EvolveResult& res) {
    Json j;
    j["seed"] = ec.seed;
    j["b0"] = ec.b0;
    j["delta"] = ec.delta;
    const GridSpec gs = evolve_grid_spec(ec);
    j["grid"] = {{"r_max", gs.r_max}, {"h0", gs.h0}, {"stretch", gs.stretch}, {"order", gs.order}};
    j["termination"] = res.termination;
    j["blew_up"] = res.blew_up;
    j["failed"] = res.failed;
    j["steps"] = res.steps;
    j["records"] = res.series.size();
    j["mass_drift"] = res.mass_drift;
    j["max_energy_increase"] = res.max_energy_increase;
    j["min_density"] = res.min_density;
    j["rejected_perturbations"] = res.rejected_perturbations;
    if (!res.series.empty()) {
        const auto& r = res.series.records.back();
        j["final"] = {{"t", r.t}, {"s", r.s}, {"lambda", r.lambda}, {"b", r.b}, {"b_hat", r.b_hat},
                      {"free_energy", r.free_energy}};
    }
    j["laws"] = laws_json(res.laws);
    if (res.series.size() >= 3 && !res.failed) {
        const RateFit fit = fit_rate_law(res.series);
        j["rate_fit"] = {{"s_law_fitted", fit.s_law_fitted},
                         {"s_law_accepted", fit.s_law_accepted},
                         {"note", fit.note},
                         {"coefficient", fit.coefficient},
                         {"lambda_slope", fit.lambda_slope},
                         {"proxy_min", fit.proxy_min},
                         {"proxy_max", fit.proxy_max}};
    }
    j["config"] = config_json(cfg);
    return j;
}

int cmd_profile_build(const RunConfig& cfg, std::ostream& log) {
    const double b = cfg.profile.b0;
    ProfileOptions opt;
    opt.h0 = cfg.grid.h0.value_or(opt.h0);
    opt.stretch = cfg.grid.stretch.value_or(opt.stretch);
    opt.order = cfg.grid.order;
    if (cfg.grid.r_max) opt.r_max_over_B1 = *cfg.grid.r_max / B1_of(b);
    log << "building profiles for b = " << b << '\n';
    const ProfileFamily fam = build_profile_family(b, opt);
    const fs::path dir = run_dir(cfg, "profile");

    Json j = profile_json(fam);
    Checks checks;
    const auto& rg = fam.rad.regions;
    checks.add("c_b_positive", fam.rad.c_b, "> 0", fam.rad.c_b > 0);
    checks.add("core_matching", rg.core_residual, "<= 1e-6", rg.core_residual <= 1e-6);
    checks.add("outer_matching", rg.outer_residual, "<= 1e-6", rg.outer_residual <= 1e-6);
    const auto& bd = fam.bounds;
    for (double x : {bd.T1_tail, bd.S1_tail, bd.m2_inner, bd.m2_mid, bd.m2_outer, bd.T2_mid, bd.S2_growth,
                     rg.mid_sigma1_const, rg.mid_sigma2_const, rg.mid_mass_deviation}) {
        if (!std::isfinite(x)) {
            checks.add("bound_constants_finite", x, "finite", false);
            break;
        }
    }
    j["checks"] = checks.rows;
    j["pass"] = checks.ok;
    j["config"] = config_json(cfg);
    write_json(dir / "profile.json", j);

    if (cfg.output.fields) {
        const auto& L = fam.loc;
        write_fields_csv(*fam.grid,
                         {{"T1", fam.one.T1.values},
                          {"S1_grad", fam.one.S1_grad.values},
                          {"T2", fam.two.T2.values},
                          {"S2_grad", fam.two.S2_grad.values},
                          {"Sigma1", fam.rad.Sigma1.values},
                          {"Sigma2_grad", fam.rad.Sigma2_grad.values},
                          {"Qb_tilde", L.Qb_tilde.values},
                          {"Pb_tilde", L.Pb_tilde.values},
                          {"Pb_tilde_grad", L.Pb_tilde_grad.values},
                          {"Psi1", fam.error.Psi1.values},
                          {"Psi2_grad", fam.error.Psi2_grad.values}},
                         (dir / "profile.csv").string());
        // One file per field as well, for plotting scripts that want them apart.
        const std::vector<std::pair<std::string, const RadialField*>> single = {
            {"T1", &fam.one.T1},   {"S1grad", &fam.one.S1_grad},   {"T2", &fam.two.T2},
            {"S2grad", &fam.two.S2_grad}, {"Psi1", &fam.error.Psi1}, {"Psi2grad", &fam.error.Psi2_grad}};
        for (const auto& [name, field] : single)
            write_fields_csv(*fam.grid, {{name, field->values}}, (dir / (name + ".csv")).string());
    }
    log << "wrote " << dir.string() << '\n';
    return checks.ok ? kExitOk : kExitFailure;
}

int cmd_spectral(const RunConfig& cfg, std::ostream& log) {
    const auto Ms = cfg.spectral.M.empty() ? std::vector<double>{cfg.profile.M} : cfg.spectral.M;
    const double h0 = cfg.spectral.h0;
    const fs::path dir = run_dir(cfg, "spectral");
    Checks checks;
    Json j;

    const GridPtr gm = RadialGrid::make(coercivity_grid_spec(cfg.spectral.coercivity_r_max, h0, 0.8 * h0));
    log << "coercivity of M on " << gm->size() << " nodes\n";
    const CoercivityResult cm = coercivity_M(gm);
    j["coercivity_M"] = coercivity_json(cm);
    checks.add("delta0_M_positive", cm.delta, "> 0", cm.delta > 0);
    const KernelGap kg = kernel_gap(gm);
    j["kernel"] = {{"sigma_min", kg.sigma_min}, {"sigma_next", kg.sigma_next}, {"ratio", kg.ratio},
                   {"overlap_LambdaQ", kg.kernel_overlap}};

    Json dirs = Json::array();
    for (double M : Ms) {
        log << "Phi_M and coercivity of L for M = " << M << '\n';
        const GridPtr g = RadialGrid::make(phi_grid_spec(M));
        const PhiMDirections d = build_Phi_M(g, M);
        const auto& r = d.report;
        const GridPtr gl = RadialGrid::make(coercivity_grid_spec(50.0 * M, h0, 0.8 * h0));
        const CoercivityResult cl = coercivity_L(gl, M);
        Json cj = coercivity_json(cl);
        cj["delta0_normalized"] = cl.delta * M * M / std::pow(std::log(M), 2);
        const double ortho = std::abs(r.PhiM_T1 / r.Phi0_T1);
        dirs.push_back({{"M", M},
                        {"c_M", r.c_M},
                        {"Phi0_T1", r.Phi0_T1},
                        {"Phi0_LambdaQ", r.Phi0_LambdaQ},
                        {"PhiM_T1", r.PhiM_T1},
                        {"PhiM_T1_relative", ortho},
                        {"PhiM_LambdaQ", r.PhiM_LambdaQ},
                        {"PhiM_LambdaQ_over_logM", r.PhiM_LambdaQ / std::log(M)},
                        {"coercivity_L", cj}});
        checks.add("orthogonality_M=" + format_number(M), ortho, "< 1e-6", ortho < 1e-6);
        checks.add("delta0_L_positive_M=" + format_number(M), cl.delta, "> 0", cl.delta > 0);
    }
    j["directions"] = dirs;
    j["checks"] = checks.rows;
    j["pass"] = checks.ok;
    j["config"] = config_json(cfg);
    write_json(dir / "spectral.json", j);
    log << "wrote " << dir.string() << '\n';
    return checks.ok ? kExitOk : kExitFailure;
}

int cmd_simulate(const RunConfig& cfg, std::ostream& log) {
    const EvolveConfig ec = evolve_config(cfg);
    const fs::path dir = run_dir(cfg, "simulate");
    log << "simulating from b0 = " << ec.b0 << ", seed " << ec.seed << '\n';
    const EvolveResult res = evolve(ec);
    write_timeseries_csv(res.series, (dir / "timeseries.csv").string());
    write_json(dir / "summary.json", run_summary_json(cfg, ec, res));
    if (cfg.output.fields) {
        const GridPtr grid = RadialGrid::make(evolve_grid_spec(ec));
        const FieldPair P0 = initial_data(ec, grid);
        write_fields_csv(*grid, {{"u", P0.density.values}, {"dv_dr", P0.chem_gradient.values}},
                         (dir / "initial_fields.csv").string());
    }
    log << "termination: " << res.termination << "; wrote " << dir.string() << '\n';
    return res.failed ? kExitFailure : kExitOk;
}

int cmd_sweep(const RunConfig& cfg, std::ostream& log) {
    struct Job {
        std::string name;
        EvolveConfig ec;
        Json summary;
        bool ok = false;
    };
    const auto bs = cfg.sweep.b0.empty() ? std::vector<double>{cfg.profile.b0} : cfg.sweep.b0;
    std::vector<Job> jobs;
    for (double b : bs)
        for (int k = 0; k < cfg.perturbation.count; ++k) {
            Job job;
            job.ec = evolve_config(cfg);
            job.ec.b0 = b;
            job.ec.seed = cfg.perturbation.seed + static_cast<std::uint64_t>(k);
            char name[32];
            std::snprintf(name, sizeof name, "job_%03zu", jobs.size());
            job.name = name;
            jobs.push_back(std::move(job));
        }
    const fs::path dir = run_dir(cfg, "sweep");

    std::mutex log_mutex;
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < jobs.size(); i = next++) {
            Job& job = jobs[i];
            const fs::path jd = dir / job.name;
            {
                std::lock_guard lock(log_mutex);
                log << job.name << ": b0 = " << job.ec.b0 << ", seed " << job.ec.seed << '\n';
            }
            try {
                fs::create_directories(jd);
                const EvolveResult res = evolve(job.ec);
                write_timeseries_csv(res.series, (jd / "timeseries.csv").string());
                RunConfig jc = cfg;
                jc.profile.b0 = job.ec.b0;
                jc.perturbation.seed = job.ec.seed;
                jc.perturbation.count = 1;
                job.summary = run_summary_json(jc, job.ec, res);
                write_json(jd / "summary.json", job.summary);
                job.ok = !res.failed;
            } catch (const std::exception& e) {
                job.summary = {{"seed", job.ec.seed}, {"b0", job.ec.b0}, {"error", e.what()}};
                job.ok = false;
            }
        }
    };
    const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
    const std::size_t n_workers =
        std::min<std::size_t>(jobs.size(), cfg.sweep.jobs > 0 ? static_cast<std::size_t>(cfg.sweep.jobs) : hw);
    std::vector<std::thread> pool;
    for (std::size_t w = 1; w < n_workers; ++w) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();

    Json merged;
    Json list = Json::array();
    int failed = 0;
    double dev_lo = INFINITY, dev_hi = -INFINITY, end_lo = INFINITY, end_hi = -INFINITY;
    for (const auto& job : jobs) {
        Json e = {{"name", job.name}, {"status", job.ok ? "ok" : "failed"}};
        for (const auto& [k, v] : job.summary.items())
            if (k != "config") e[k] = v;
        list.push_back(e);
        if (!job.ok) {
            ++failed;
            continue;
        }
        const auto& l = job.summary["laws"];
        if (!l["lambda_ratio_max_dev"].is_number() || !l["b_law_end"].is_number()) continue;
        dev_lo = std::min(dev_lo, l["lambda_ratio_max_dev"].get<double>());
        dev_hi = std::max(dev_hi, l["lambda_ratio_max_dev"].get<double>());
        end_lo = std::min(end_lo, l["b_law_end"].get<double>());
        end_hi = std::max(end_hi, l["b_law_end"].get<double>());
    }
    merged["jobs_total"] = jobs.size();
    merged["jobs_failed"] = failed;
    if (static_cast<std::size_t>(failed) < jobs.size())
        merged["law_spread"] = {{"lambda_ratio_max_dev", {dev_lo, dev_hi}}, {"b_law_end", {end_lo, end_hi}}};
    merged["jobs"] = list;
    merged["config"] = config_json(cfg);
    write_json(dir / "merged_summary.json", merged);
    log << jobs.size() - failed << "/" << jobs.size() << " jobs completed; wrote " << dir.string() << '\n';
    return failed ? kExitFailure : kExitOk;
}

namespace {

Json verify_hardy(const RunConfig& cfg, Checks& checks) {
    struct Member {
        std::string name;
        double (*f)(double);
        std::vector<std::string> entries;  // those the weights admit
    };
    const std::vector<Member> battery = {
        {"r exp(-r)", [](double r) { return r * std::exp(-r); }, {"power", "log_ball", "log_exterior"}},
        {"r^3 exp(-r^2)", [](double r) { return r * r * r * std::exp(-r * r); },
         {"power", "log_ball", "log_exterior", "log_level1", "log_level2", "log_level3"}},
    };
    const double alpha = 0.0, gamma = 1.0, R = 10.0;
    const std::array<double, 2> h0s = {0.02, 0.01};
    Json out = Json::array();
    for (const auto& m : battery) {
        std::array<HardyReport, 2> reps;
        for (std::size_t k = 0; k < 2; ++k) {
            const GridPtr g = RadialGrid::make(GridSpec{h0s[k], 10.0, 0.02, 60.0, 6});
            reps[k] = check_hardy_suite(make_field(g, m.f, Parity::Even), alpha, gamma, R);
        }
        Json jm = {{"function", m.name}, {"alpha", alpha}, {"gamma", gamma}, {"R", R}};
        Json entries = Json::array();
        for (const auto& e : reps[1].entries) {
            const HardyEntry& coarse = reps[0].at(e.name);
            const double change = std::abs(e.constant - coarse.constant) / std::abs(e.constant);
            const bool checked = std::find(m.entries.begin(), m.entries.end(), e.name) != m.entries.end();
            entries.push_back({{"name", e.name}, {"constant", e.constant}, {"constant_coarse", coarse.constant},
                               {"refinement_change", change}, {"holds", e.holds && coarse.holds}, {"checked", checked}});
            if (checked) {
                checks.add(m.name + " " + e.name + " holds", e.constant, "finite", e.holds && coarse.holds);
                checks.add(m.name + " " + e.name + " stable", change, "< 0.02", change < 0.02);
            }
        }
        jm["entries"] = entries;
        out.push_back(jm);
    }

    const GridPtr g = RadialGrid::make(GridSpec{0.02, 10.0, 0.02, cfg.verify.R, 6});
    const std::vector<std::pair<std::string, double (*)(double)>> rt = {
        {"1/(1+r^2)", [](double r) { return 1.0 / (1.0 + r * r); }},
        {"exp(-r^2)", [](double r) { return std::exp(-r * r); }},
        {"r^2 exp(-r)", [](double r) { return r * r * std::exp(-r); }},
    };
    Json round = Json::array();
    for (const auto& [name, f] : rt) {
        const double err = poisson_roundtrip_error(make_field(g, f, Parity::Even));
        round.push_back({{"function", name}, {"error", err}});
        checks.add("poisson roundtrip " + name, err, "< 1e-4", err < 1e-4);
    }
    return {{"hardy", out}, {"poisson_roundtrip", round}};
}

Json verify_loghls(const RunConfig& cfg, Checks& checks) {
    const GridPtr g = RadialGrid::make(GridSpec{0.02, 10.0, 0.02, cfg.verify.R, 6});
    struct Member {
        std::string name;
        std::function<double(double)> f;
        bool q_family;
    };
    auto q = [](double c, double lam) {
        return [c, lam](double r) { return c * lam * lam * closed::Q(lam * r); };
    };
    const std::vector<Member> battery = {
        {"Q", q(1.0, 1.0), true},
        {"Q at scale 1/2", q(1.0, 0.5), true},
        {"Q at scale 2", q(1.0, 2.0), true},
        {"0.6 Q", q(0.6, 1.0), true},
        {"1.5 Q at scale 3", q(1.5, 3.0), true},
        {"gaussian", [](double r) { return std::exp(-r * r); }, false},
        {"exponential", [](double r) { return std::exp(-r); }, false},
        {"ring", [](double r) { return std::exp(-(r - 3.0) * (r - 3.0)); }, false},
        {"(1+r^2)^-3", [](double r) { return std::pow(1.0 + r * r, -3.0); }, false},
        {"modulated", [](double r) { return (1.5 + std::cos(2.0 * r)) * std::exp(-r * r / 4.0); }, false},
    };
    Json out = Json::array();
    for (const auto& m : battery) {
        const LogHLSReport rep = check_logHLS(make_field(g, m.f, Parity::Even));
        const double rel = std::abs(rep.margin) / std::abs(rep.rhs);
        out.push_back({{"function", m.name}, {"mass", rep.mass}, {"lhs", rep.lhs}, {"rhs", rep.rhs},
                       {"margin", rep.margin}, {"q_family", m.q_family}});
        checks.add(m.name + " margin", rep.margin, ">= -1e-6", rep.margin >= -1e-6);
        if (m.q_family) checks.add(m.name + " attains the bound", rel, "|margin/rhs| < 1e-4", rel < 1e-4);
    }
    return {{"members", out}};
}

Json verify_profiles(const RunConfig& cfg, Checks& checks) {
    std::vector<double> bs = cfg.verify.b;
    std::sort(bs.begin(), bs.end(), std::greater<>());
    std::vector<double> p1, g2, fl;
    Json rows = Json::array();
    double prev_dev = INFINITY;
    for (double b : bs) {
        const ProfileFamily f = build_profile_family(b);
        const auto& n = f.error.norms;
        p1.push_back(n.psi1_L2);
        g2.push_back(n.grad_psi2_L2);
        fl.push_back(n.degenerate_flux);
        const double cb = f.rad.c_b * std::abs(std::log(b)) / 2.0;
        const Json pj = profile_json(f);
        rows.push_back({{"b", b}, {"c_b_log_b_over_2", cb}, {"norms", pj["norm_report"]}, {"bounds", pj["bounds"]}});
        if (b <= 1e-4) {
            const std::string tag = "b=" + format_number(b);
            checks.add("c_b law " + tag, cb, "[0.8, 1.2]", cb >= 0.8 && cb <= 1.2);
            const double dev = std::abs(cb - 1.0);
            checks.add("c_b toward 1 " + tag, dev, "decreasing", dev < prev_dev);
            prev_dev = dev;
        }
    }
    const double s1 = slope_loglog(bs, p1), s2 = slope_loglog(bs, g2), s3 = slope_loglog(bs, fl);
    checks.add("slope int |Psi1|^2", s1, "5 +- 0.5", std::abs(s1 - 5.0) <= 0.5);
    checks.add("slope int |grad Psi2|^2", s2, "4 +- 0.5", std::abs(s2 - 4.0) <= 0.5);
    checks.add("slope degenerate flux", s3, "2 +- 0.3", std::abs(s3 - 2.0) <= 0.3);
    return {{"families", rows}, {"slopes", {{"psi1_L2", s1}, {"grad_psi2_L2", s2}, {"degenerate_flux", s3}}}};
}

Json verify_spectral(const RunConfig& cfg, Checks& checks) {
    Json out;
    std::array<double, 2> dM{};
    const std::array<double, 2> h0s = {0.1, 0.05};
    for (std::size_t k = 0; k < 2; ++k)
        dM[k] = coercivity_M(RadialGrid::make(coercivity_grid_spec(100.0, h0s[k], 0.8 * h0s[k]))).delta;
    out["delta0_M"] = dM;
    checks.add("delta0_M positive", dM[1], "> 0", dM[0] > 0 && dM[1] > 0);
    checks.add("delta0_M refinement", std::abs(dM[1] / dM[0] - 1.0), "< 0.2", std::abs(dM[1] / dM[0] - 1.0) < 0.2);

    Json rows = Json::array();
    double norm_min = INFINITY;
    for (double M : cfg.verify.M) {
        const std::string tag = "M=" + format_number(M);
        const PhiMDirections d = build_Phi_M(RadialGrid::make(phi_grid_spec(M)), M);
        const double ortho = std::abs(d.report.PhiM_T1 / d.report.Phi0_T1);
        const double ratio = d.report.PhiM_LambdaQ / std::log(M) / (-32.0 * kPi);
        std::array<double, 2> dL{};
        for (std::size_t k = 0; k < 2; ++k)
            dL[k] = coercivity_L(RadialGrid::make(coercivity_grid_spec(50.0 * M, h0s[k], 0.8 * h0s[k])), M).delta;
        const double norm = dL[1] * M * M / std::pow(std::log(M), 2);
        norm_min = std::min(norm_min, norm);
        rows.push_back({{"M", M}, {"PhiM_T1_relative", ortho}, {"PhiM_LambdaQ_over_minus32pi_logM", ratio},
                        {"delta0_L", dL}, {"delta0_L_normalized", norm}});
        checks.add("orthogonality " + tag, ortho, "< 1e-6", ortho < 1e-6);
        checks.add("pairing/(-32 pi log M) " + tag, ratio, "1 +- 0.1", std::abs(ratio - 1.0) <= 0.1);
        checks.add("delta0_L positive " + tag, dL[1], "> 0", dL[0] > 0 && dL[1] > 0);
        checks.add("delta0_L refinement " + tag, std::abs(dL[1] / dL[0] - 1.0), "< 0.2",
                   std::abs(dL[1] / dL[0] - 1.0) < 0.2);
    }
    out["directions"] = rows;
    out["delta0_L_normalized_min"] = norm_min;
    return out;
}

}  // namespace

int cmd_verify(const RunConfig& cfg, Suite suite, std::ostream& log) {
    const std::string name = suite_name(suite);
    const fs::path dir = run_dir(cfg, "verify_" + name);
    log << "verifying suite " << name << '\n';
    Checks checks;
    Json j;
    j["suite"] = name;
    switch (suite) {
        case Suite::Hardy: j["report"] = verify_hardy(cfg, checks); break;
        case Suite::LogHLS: j["report"] = verify_loghls(cfg, checks); break;
        case Suite::Profiles: j["report"] = verify_profiles(cfg, checks); break;
        case Suite::Spectral: j["report"] = verify_spectral(cfg, checks); break;
    }
    j["checks"] = checks.rows;
    j["pass"] = checks.ok;
    j["config"] = config_json(cfg);
    write_json(dir / ("verify_" + name + ".json"), j);
    int failed = 0;
    for (const auto& r : checks.rows)
        if (!r["pass"].get<bool>()) {
            ++failed;
            log << "FAIL " << r["name"].get<std::string>() << ": " << r["value"].dump() << " (target "
                << r["target"].get<std::string>() << ")\n";
        }
    log << checks.rows.size() - failed << "/" << checks.rows.size() << " checks passed; wrote " << dir.string() << '\n';
    return checks.ok ? kExitOk : kExitFailure;
}

}  // namespace kslab::cli
