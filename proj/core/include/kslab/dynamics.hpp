#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "kslab/operators.hpp"
#include "kslab/profiles.hpp"
#include "kslab/radial_grid.hpp"
#include "kslab/timeseries.hpp"

namespace kslab {

// Physical: y = r, s = t. Rescaled: y = r/lambda with lambda carried as a gauge
// fixed by keeping the density at the origin constant.
enum class Frame { Physical, Rescaled };

struct FlowOptions {
    Frame frame = Frame::Rescaled;
    bool coupling = true;       // false drops m'n/r (heat flow for m)
    double newton_tol = 1e-11;  // on the max-norm of the Newton update, relative
    int newton_max = 12;
    double positivity_tol = 1e-10;  // relative to max u
};

// Partial-mass state (m, n) with m' = r u and n = r dv/dr, in the frame's
// variable y; BDF2 history rides along.
struct FlowState {
    double t = 0.0;
    double s = 0.0;
    double log_lambda = 0.0;  // gauge scale; zero in the physical frame
    FieldPair pair;           // PartialMass representation
    double mass = 0.0;        // 2 pi m(y_max), held fixed by the boundary condition
    double density_at_origin = 0.0;  // gauge target in the rescaled frame
    double gauge_rate = 0.0;  // d log lambda / ds over the last step
    double min_density = 0.0;
    bool positivity_lost = false;
    int steps = 0;

    std::vector<double> prev_m, prev_n;
    double prev_log_lambda = 0.0, prev_t = 0.0, prev_ds = 0.0;

    GridPtr grid() const { return pair.grid(); }
};

FlowState make_flow_state(const FieldPair& initial, Frame frame);

struct PartialMassRate {
    RadialField dm;
    RadialField dn;
};

// m_s = m'' - m'/y + m' n/y + a y m',  n_s = (n-m)'' - (n-m)'/y + a y n'
// with a = d log lambda/ds (zero in the physical frame).
PartialMassRate rhs_partial_mass(const FieldPair& pair, double a = 0.0, bool coupling = true);

// Implicit BDF2 solver (BDF1 for the first step) with Newton on the banded
// Jacobian. The outer boundary keeps m fixed (zero mass flux) and n' = 0.
class FlowSolver {
public:
    FlowSolver(GridPtr grid, FlowOptions opt = {});
    // Advances in place; throws std::runtime_error if Newton fails.
    void step(FlowState& state, double ds) const;
    const FlowOptions& options() const { return opt_; }

private:
    struct Row {
        std::vector<std::pair<std::size_t, double>> d1, d2;
    };
    GridPtr grid_;
    FlowOptions opt_;
    std::vector<Row> rows_;
};

FlowState step(const FlowState& state, double ds, const FlowOptions& opt = {});

// Density (m'/y) of a partial-mass state, origin value m''(0).
RadialField density_of(const FlowState& state);
// Primitive (u, dv/dy) view of the state.
FieldPair primitive_of(const FlowState& state);

// Free energy of the physical fields represented by the state (rescaled
// values plus the exact scaling shift in log lambda).
double physical_free_energy(const FlowState& state);

// Shared pieces for decomposing states on one grid.
class ModulationContext {
public:
    ModulationContext(GridPtr grid, double M);

    GridPtr grid() const { return grid_; }
    double M() const { return M_; }
    const PhiMDirections& phi() const { return phi_; }
    const LevelOne& level_one() const { return one_; }
    // (Q~_b, d_r P~_b) on the grid; memoised.
    const FieldPair& profile(double b) const;

private:
    GridPtr grid_;
    double M_;
    LevelOne one_;
    PhiMDirections phi_;
    mutable std::map<double, FieldPair> cache_;
};

struct ModulationState {
    double lambda = 1.0;  // total scale: gauge times mu
    double mu = 1.0;      // scale relative to the state's frame
    double b = 0.0;
    double b_hat = 0.0;
    double s = 0.0;
    std::array<double, 2> residuals{};  // <E, Phi_M>, <E, L* Phi_M>
    double residual_scale = 0.0;        // |<Lambda Q, Phi_M>|
    double jacobian_det = 0.0;          // d(F1,F2)/d(log mu, b)
    int iterations = 0;
    FieldPair eps_pair;                 // E on the state's grid
    FieldPair modulated;                // mu^2 u(mu y), mu v'(mu y)
};

struct DecomposeOptions {
    double tol = 1e-12;   // on |F| / |<Lambda Q, Phi_M>|
    int max_iter = 30;
    double b_step = 1e-4; // relative finite-difference step in b
};

// Solves <W_mu - Q~_b, Phi_M> = <W_mu - Q~_b, L* Phi_M> = 0 for (mu, b) by
// damped Newton. Throws std::runtime_error on divergence or a singular Jacobian.
ModulationState decompose(const FieldPair& primitive_state, const ModulationContext& ctx, double b_guess,
                          double mu_guess = 1.0, const DecomposeOptions& opt = {});
ModulationState decompose(const FlowState& state, const ModulationContext& ctx, double b_guess,
                          double mu_guess = 1.0, const DecomposeOptions& opt = {});

// F(b_hat) = <W - Q~_{b_hat}, L* Phi_{0, 1/sqrt(b_hat)}>.
double lift_residual(const FieldPair& modulated, const ModulationContext& ctx, double b_hat);
// Root of F near mod.b (toms748); F(b) = 0 returns b.
double lift_b(const ModulationState& mod, const ModulationContext& ctx);

struct EvolveConfig {
    double b0 = 1e-2;
    double lambda0 = 1.0;
    double M = 20.0;
    double h0 = 0.05;
    double stretch = 0.03;
    double r_max = 0.0;          // 0: automatic, see evolve_grid_spec
    int order = 6;
    Frame frame = Frame::Rescaled;

    double ds_init = 0.02;
    double ds_max = 0.5;
    double db_rel_max = 1e-3;    // per-step relative change of b
    double transport_cfl = 0.05; // |a| ds per step
    int cadence = 5;             // steps between decompositions and records

    double lambda_stop = 0.0;    // stop once lambda < lambda_stop (0: off)
    double b_stop_ratio = 0.5;   // stop once b < ratio b0 (0: off)
    double s_max = 1e4;
    double t_max = 1e300;
    int max_steps = 200000;

    double mass_factor = 1.0;    // initial data scaled by this factor
    bool modulation = true;      // decompose along the run
    double delta = 0.0;          // relative size of the random perturbation
    std::uint64_t seed = 0;
};

struct LawReport {
    std::size_t first = 0;            // first record after the transient
    double lambda_ratio_max_dev = 0;  // max |(-lambda_s/lambda)/b - 1|
    double b_law_min = 0, b_law_max = 0, b_law_start = 0, b_law_end = 0;
    double lambda43_rate_min = 0;     // min of -(lambda^{4/3})_t over the final third
    double deformation_max = 0;       // max |b - b_hat| |log b| / b
    bool lambda_ok = false, b_law_ok = false, lambda43_ok = false;
};

// Windowed law measurements; the first transient_fraction of records is skipped
// for the pointwise lambda check.
LawReport measure_laws(const TimeSeries& series, int window = 9, double transient_fraction = 0.2);

struct EvolveResult {
    TimeSeries series;
    std::string termination;
    bool blew_up = false;             // lambda < lambda_stop reached
    bool failed = false;              // decomposition or solver failure
    double mass_drift = 0.0;          // max relative deviation from the initial mass
    double max_energy_increase = 0.0; // max (E_{k+1} - E_k)/|E_k|
    double min_density = 0.0;
    int steps = 0;
    double perturbation_size = 0.0;
    int rejected_perturbations = 0;
    LawReport laws;
};

GridSpec evolve_grid_spec(const EvolveConfig& cfg);

// Initial data lambda0^-2 (Q~_{b0} + eps0)(r/lambda0) on the frame's grid,
// with eps0 a seeded smooth perturbation of relative size delta (resampled
// while it would make the density non-positive).
FieldPair initial_data(const EvolveConfig& cfg, GridPtr grid, int* rejected = nullptr);

EvolveResult evolve(const EvolveConfig& cfg);
EvolveResult evolve(const EvolveConfig& cfg, const ModulationContext& ctx);

struct StabilityReport {
    int runs = 0;
    int blew_up = 0;
    std::vector<LawReport> laws;
    double lambda_dev_spread = 0.0;   // max - min of lambda_ratio_max_dev
    double b_law_end_spread = 0.0;
    bool subcritical_blew_up = false;
    double subcritical_lambda_min = 0.0;
    std::string subcritical_termination;
};

// n perturbed reruns (seeds seed+1 ... seed+n) plus a subcritical control
// started from 0.9 Q without modulation.
StabilityReport stability_probe(const EvolveConfig& cfg, int n_perturbations, double subcritical_s_max = 200.0);

}  // namespace kslab
