#include "kslab/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <stdexcept>

#include <Eigen/Sparse>
#include <Eigen/SparseLU>
#include <boost/math/tools/toms748_solve.hpp>

#include "kslab/diagnostics.hpp"
#include "kslab/ground_state.hpp"

namespace kslab {

namespace {

constexpr double kPi = std::numbers::pi;
using Vec = std::vector<double>;

RadialField field(GridPtr g, Vec v, Parity p) { return RadialField{std::move(g), std::move(v), p}; }

double B1_of(double b) { return std::abs(std::log(b)) / std::sqrt(b); }

double apply_row(const std::vector<std::pair<std::size_t, double>>& row, const Vec& f) {
    double acc = 0.0;
    for (const auto& [j, w] : row) acc += w * f[j];
    return acc;
}

// W(y) = (mu^2 u(mu y), mu g(mu y)); beyond the grid u = 0 and g keeps its 1/y tail.
FieldPair rescale_pair(const FieldPair& p, double mu) {
    const GridPtr grid = p.grid();
    const auto& g = *grid;
    const std::size_t n = g.size();
    const double R = g.r_max();
    Vec xs, u(n, 0.0), gv(n, 0.0);
    xs.reserve(n);
    for (std::size_t i = 0; i < n && mu * g.r(i) <= R; ++i) xs.push_back(mu * g.r(i));
    const Vec ui = g.interpolate(p.density.values, Parity::Even, xs);
    const Vec gi = g.interpolate(p.chem_gradient.values, Parity::Odd, xs);
    const double tail = p.chem_gradient.values.back() * R;
    for (std::size_t i = 0; i < n; ++i) {
        if (i < xs.size()) {
            u[i] = mu * mu * ui[i];
            gv[i] = mu * gi[i];
        } else {
            gv[i] = mu * tail / (mu * g.r(i));
        }
    }
    return {field(grid, std::move(u), Parity::Even), field(grid, std::move(gv), Parity::Odd),
            Representation::Primitive};
}

FieldPair difference(const FieldPair& a, const FieldPair& b) {
    FieldPair out = a;
    for (std::size_t i = 0; i < out.density.size(); ++i) {
        out.density.values[i] -= b.density[i];
        out.chem_gradient.values[i] -= b.chem_gradient[i];
    }
    return out;
}

}  // namespace

FlowState make_flow_state(const FieldPair& initial, Frame frame) {
    FlowState st;
    st.pair = to_partial_mass(initial);
    const auto& g = *st.grid();
    st.mass = 2.0 * kPi * st.pair.density.values.back();
    st.density_at_origin = g.derivative(st.pair.density.values, Parity::Even, 2)[0];
    st.min_density = st.density_at_origin;
    (void)frame;
    return st;
}

PartialMassRate rhs_partial_mass(const FieldPair& pair, double a, bool coupling) {
    if (pair.representation != Representation::PartialMass)
        throw std::invalid_argument("rhs_partial_mass: state must be in partial-mass form");
    const auto& g = *pair.grid();
    const Vec& m = pair.density.values;
    const Vec& nn = pair.chem_gradient.values;
    const Vec dm = g.derivative(m, Parity::Even, 1), d2m = g.derivative(m, Parity::Even, 2);
    const Vec dn = g.derivative(nn, Parity::Even, 1), d2n = g.derivative(nn, Parity::Even, 2);
    Vec fm(g.size(), 0.0), fn(g.size(), 0.0);
    for (std::size_t i = 1; i < g.size(); ++i) {
        const double y = g.r(i);
        fm[i] = d2m[i] - dm[i] / y + (coupling ? dm[i] * nn[i] / y : 0.0) + a * y * dm[i];
        fn[i] = (d2n[i] - d2m[i]) - (dn[i] - dm[i]) / y + a * y * dn[i];
    }
    return {field(pair.grid(), std::move(fm), Parity::Even), field(pair.grid(), std::move(fn), Parity::Even)};
}

FlowSolver::FlowSolver(GridPtr grid, FlowOptions opt) : grid_(std::move(grid)), opt_(opt) {
    rows_.resize(grid_->size());
    for (std::size_t i = 0; i < grid_->size(); ++i) {
        rows_[i].d1 = grid_->derivative_row(i, Parity::Even, 1);
        rows_[i].d2 = grid_->derivative_row(i, Parity::Even, 2);
    }
}

void FlowSolver::step(FlowState& st, double ds) const {
    if (st.pair.representation != Representation::PartialMass)
        throw std::invalid_argument("FlowSolver::step: state must be in partial-mass form");
    if (!(ds > 0)) throw std::invalid_argument("FlowSolver::step: ds must be positive");
    const auto& g = *grid_;
    const std::size_t n = g.size();
    const bool rescaled = opt_.frame == Frame::Rescaled;
    const double c = opt_.coupling ? 1.0 : 0.0;

    // Variable-step BDF2: x+ - a1 x + a2 x- = beta ds f(x+).
    double a1 = 1.0, a2 = 0.0, beta = 1.0;
    const bool bdf2 = !st.prev_m.empty() && st.prev_ds > 0;
    if (bdf2) {
        const double w = ds / st.prev_ds;
        a1 = (1 + w) * (1 + w) / (1 + 2 * w);
        a2 = w * w / (1 + 2 * w);
        beta = (1 + w) / (1 + 2 * w);
    }
    const Vec& m0 = st.pair.density.values;
    const Vec& n0 = st.pair.chem_gradient.values;
    Vec base_m(n), base_n(n);
    for (std::size_t i = 0; i < n; ++i) {
        base_m[i] = a1 * m0[i] - (bdf2 ? a2 * st.prev_m[i] : 0.0);
        base_n[i] = a1 * n0[i] - (bdf2 ? a2 * st.prev_n[i] : 0.0);
    }
    const double h = beta * ds;

    // Unknowns: m_1..m_{n-2}, n_1..n_{n-1}, and a in the rescaled frame.
    const std::size_t nm = n - 2, nnn = n - 1;
    const std::size_t K = nm + nnn + (rescaled ? 1 : 0);
    auto im = [](std::size_t i) { return static_cast<int>(i - 1); };
    auto in = [nm](std::size_t i) { return static_cast<int>(nm + i - 1); };
    const int ia = static_cast<int>(nm + nnn);

    Vec m = m0, nv = n0;
    double a = rescaled ? st.gauge_rate : 0.0;
    Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>> lu;
    bool pattern_done = false;
    std::vector<Eigen::Triplet<double>> trip;
    Eigen::VectorXd R(static_cast<Eigen::Index>(K));
    bool converged = false;
    for (int it = 0; it < opt_.newton_max; ++it) {
        trip.clear();
        for (std::size_t i = 1; i + 1 < n; ++i) {
            const double y = g.r(i);
            const auto& row = rows_[i];
            const double dm = apply_row(row.d1, m), d2m = apply_row(row.d2, m);
            const double dn = apply_row(row.d1, nv), d2n = apply_row(row.d2, nv);
            const double fm = d2m - dm / y + c * dm * nv[i] / y + a * y * dm;
            const double fn = (d2n - d2m) - (dn - dm) / y + a * y * dn;
            R[im(i)] = m[i] - base_m[i] - h * fm;
            R[in(i)] = nv[i] - base_n[i] - h * fn;
            const double cm1 = -1.0 / y + c * nv[i] / y + a * y;
            const double cn1 = -1.0 / y + a * y;
            trip.emplace_back(im(i), im(i), 1.0);
            trip.emplace_back(in(i), in(i), 1.0);
            for (const auto& [j, w] : row.d2) {
                if (j >= 1 && j + 1 < n) {
                    trip.emplace_back(im(i), im(j), -h * w);
                    trip.emplace_back(in(i), im(j), h * w);
                }
                if (j >= 1) trip.emplace_back(in(i), in(j), -h * w);
            }
            for (const auto& [j, w] : row.d1) {
                if (j >= 1 && j + 1 < n) {
                    trip.emplace_back(im(i), im(j), -h * w * cm1);
                    trip.emplace_back(in(i), im(j), -h * w / y);
                }
                if (j >= 1) trip.emplace_back(in(i), in(j), -h * w * cn1);
            }
            trip.emplace_back(im(i), in(i), -h * c * dm / y);
            if (rescaled) {
                trip.emplace_back(im(i), ia, -h * y * dm);
                trip.emplace_back(in(i), ia, -h * y * dn);
            }
        }
        // n' = 0 at the outer node.
        R[in(n - 1)] = apply_row(rows_[n - 1].d1, nv);
        for (const auto& [j, w] : rows_[n - 1].d1)
            if (j >= 1) trip.emplace_back(in(n - 1), in(j), w);
        if (rescaled) {
            // Gauge: u(0) = m''(0) stays at its initial value.
            R[ia] = apply_row(rows_[0].d2, m) - st.density_at_origin;
            for (const auto& [j, w] : rows_[0].d2)
                if (j >= 1 && j + 1 < n) trip.emplace_back(ia, im(j), w);
        }
        Eigen::SparseMatrix<double> J(static_cast<Eigen::Index>(K), static_cast<Eigen::Index>(K));
        J.setFromTriplets(trip.begin(), trip.end());
        if (!pattern_done) {
            lu.analyzePattern(J);
            pattern_done = true;
        }
        lu.factorize(J);
        if (lu.info() != Eigen::Success) throw std::runtime_error("FlowSolver::step: Jacobian factorisation failed");
        const Eigen::VectorXd dx = lu.solve(-R);
        if (lu.info() != Eigen::Success || !dx.allFinite()) throw std::runtime_error("FlowSolver::step: linear solve failed");
        double dmax = 0.0, xmax = 1.0;
        for (std::size_t i = 1; i + 1 < n; ++i) {
            m[i] += dx[im(i)];
            dmax = std::max(dmax, std::abs(dx[im(i)]));
            xmax = std::max(xmax, std::abs(m[i]));
        }
        for (std::size_t i = 1; i < n; ++i) {
            nv[i] += dx[in(i)];
            dmax = std::max(dmax, std::abs(dx[in(i)]));
            xmax = std::max(xmax, std::abs(nv[i]));
        }
        if (rescaled) a += dx[ia];
        if (dmax <= opt_.newton_tol * xmax) {
            converged = true;
            break;
        }
    }
    if (!converged) throw std::runtime_error("FlowSolver::step: Newton iteration did not converge");

    const double l_new = rescaled ? a1 * st.log_lambda - (bdf2 ? a2 * st.prev_log_lambda : 0.0) + h * a : 0.0;
    const double t_new = a1 * st.t - (bdf2 ? a2 * st.prev_t : 0.0) + h * std::exp(2.0 * l_new);

    st.prev_m = m0;
    st.prev_n = n0;
    st.prev_log_lambda = st.log_lambda;
    st.prev_t = st.t;
    st.prev_ds = ds;
    st.pair.density.values = std::move(m);
    st.pair.chem_gradient.values = std::move(nv);
    st.log_lambda = l_new;
    st.t = t_new;
    st.s += ds;
    st.gauge_rate = a;
    ++st.steps;

    const RadialField u = density_of(st);
    double umin = u[0], umax = 0.0;
    for (double x : u.values) {
        umin = std::min(umin, x);
        umax = std::max(umax, std::abs(x));
    }
    st.min_density = umin;
    if (umin < -opt_.positivity_tol * umax) st.positivity_lost = true;
}

FlowState step(const FlowState& state, double ds, const FlowOptions& opt) {
    FlowState out = state;
    FlowSolver(state.grid(), opt).step(out, ds);
    return out;
}

RadialField density_of(const FlowState& state) { return to_primitive(state.pair).density; }

FieldPair primitive_of(const FlowState& state) { return to_primitive(state.pair); }

double physical_free_energy(const FlowState& state) {
    const double E = free_energy(primitive_of(state), 1e-6).free_energy;
    // u = lambda^-2 U(r/lambda), v = V(r/lambda) + N log lambda with N = n(y_max).
    const double mass = state.mass;
    const double N = state.pair.chem_gradient.values.back();
    return E + state.log_lambda * (-2.0 * mass + mass * N - kPi * N * N);
}

ModulationContext::ModulationContext(GridPtr grid, double M)
    : grid_(std::move(grid)), M_(M), one_(build_T1S1(grid_)), phi_(build_Phi_M(grid_, M)) {}

const FieldPair& ModulationContext::profile(double b) const {
    auto it = cache_.find(b);
    if (it != cache_.end()) return it->second;
    if (cache_.size() > 64) cache_.clear();
    const Radiation rad = build_radiation(one_, b);
    const LevelTwo two = build_T2S2(one_, rad);
    const Localized loc = localize(one_, two, b);
    return cache_.emplace(b, FieldPair{loc.Qb_tilde, loc.Pb_tilde_grad, Representation::Primitive}).first->second;
}

ModulationState decompose(const FieldPair& state_in, const ModulationContext& ctx, double b_guess, double mu_guess,
                          const DecomposeOptions& opt) {
    if (!(b_guess > 0)) throw std::invalid_argument("decompose: b guess must be positive");
    const FieldPair P = to_primitive(state_in);
    const auto& phi = ctx.phi();
    const double scale = std::abs(phi.report.PhiM_LambdaQ);

    auto eval = [&](double l, double b, FieldPair* W_out = nullptr) {
        FieldPair W = rescale_pair(P, std::exp(l));
        const FieldPair E = difference(W, ctx.profile(b));
        std::array<double, 2> F{pairing(E, phi.Phi_M), pairing(E, phi.Lstar_Phi_M)};
        if (W_out) *W_out = std::move(W);
        return F;
    };
    auto norm = [scale](const std::array<double, 2>& F) { return std::hypot(F[0], F[1]) / scale; };
    auto jacobian = [&](double l, double b, double& det) {
        const double hl = 1e-6, hb = opt.b_step * b;
        const auto Fl1 = eval(l + hl, b), Fl0 = eval(l - hl, b);
        const auto Fb1 = eval(l, b + hb), Fb0 = eval(l, b - hb);
        std::array<double, 4> J{(Fl1[0] - Fl0[0]) / (2 * hl), (Fb1[0] - Fb0[0]) / (2 * hb),
                                (Fl1[1] - Fl0[1]) / (2 * hl), (Fb1[1] - Fb0[1]) / (2 * hb)};
        det = J[0] * J[3] - J[1] * J[2];
        return J;
    };

    double l = std::log(mu_guess), b = b_guess;
    auto F = eval(l, b);
    int it = 0;
    double det = 0.0;
    for (; it < opt.max_iter && norm(F) > opt.tol; ++it) {
        const auto J = jacobian(l, b, det);
        if (!(std::abs(det) > 1e-12 * scale * scale / b))
            throw std::runtime_error("decompose: singular modulation Jacobian (M too small?)");
        const double dl = -(J[3] * F[0] - J[1] * F[1]) / det;
        const double db = -(-J[2] * F[0] + J[0] * F[1]) / det;
        double t = 1.0;
        const double f0 = norm(F);
        for (;;) {
            const double bt = b + t * db;
            if (bt > 0.0) {
                const auto Ft = eval(l + t * dl, bt);
                if (norm(Ft) < f0 || t < 1e-3) {
                    l += t * dl;
                    b = bt;
                    F = Ft;
                    break;
                }
            }
            t *= 0.5;
            if (t < 1e-6) throw std::runtime_error("decompose: damped Newton stalled");
        }
        if (!std::isfinite(b) || b > 1.0) throw std::runtime_error("decompose: Newton diverged");
    }
    if (norm(F) > opt.tol) throw std::runtime_error("decompose: Newton did not converge");

    ModulationState mod;
    mod.mu = std::exp(l);
    mod.lambda = mod.mu;
    mod.b = b;
    mod.b_hat = b;
    mod.iterations = it;
    mod.residuals = F;
    mod.residual_scale = scale;
    jacobian(l, b, det);
    mod.jacobian_det = det;
    eval(l, b, &mod.modulated);
    mod.eps_pair = difference(mod.modulated, ctx.profile(b));
    return mod;
}

ModulationState decompose(const FlowState& state, const ModulationContext& ctx, double b_guess, double mu_guess,
                          const DecomposeOptions& opt) {
    ModulationState mod = decompose(state.pair, ctx, b_guess, mu_guess, opt);
    mod.lambda = std::exp(state.log_lambda) * mod.mu;
    mod.s = state.s;
    return mod;
}

double lift_residual(const FieldPair& modulated, const ModulationContext& ctx, double b_hat) {
    const FieldPair E = difference(modulated, ctx.profile(b_hat));
    return pairing(E, Lstar_Phi0(ctx.grid(), 1.0 / std::sqrt(b_hat)));
}

double lift_b(const ModulationState& mod, const ModulationContext& ctx) {
    const double b = mod.b;
    if (!(b > 0)) throw std::invalid_argument("lift_b: b must be positive");
    auto f = [&](double x) { return lift_residual(mod.modulated, ctx, x); };
    const double fb = f(b);
    if (fb == 0.0) return b;
    double lo = b, hi = b, flo = fb, fhi = fb;
    double factor = 1.05;
    for (int k = 0; k < 12 && (flo > 0) == (fhi > 0); ++k) {
        lo = b / factor;
        hi = b * factor;
        flo = f(lo);
        fhi = f(hi);
        if ((flo > 0) != (fb > 0)) {
            hi = b;
            fhi = fb;
        } else if ((fhi > 0) != (fb > 0)) {
            lo = b;
            flo = fb;
        }
        factor *= 1.5;
    }
    if ((flo > 0) == (fhi > 0)) throw std::runtime_error("lift_b: could not bracket the root");
    std::uintmax_t iters = 100;
    const auto [x0, x1] = boost::math::tools::toms748_solve(f, lo, hi, flo, fhi,
                                                            boost::math::tools::eps_tolerance<double>(46), iters);
    return 0.5 * (x0 + x1);
}

GridSpec evolve_grid_spec(const EvolveConfig& cfg) {
    GridSpec spec;
    spec.h0 = cfg.h0;
    spec.stretch = cfg.stretch;
    spec.order = cfg.order;
    spec.r_uniform = 10.0;
    // In physical space the zero-flux wall at y_max moves inward like lambda and
    // sweeps the Q tail into an unresolved boundary layer; that mass scales like
    // (lambda y_max)^-2, so the wall sits far out. It also keeps the initial far
    // field, cut off near 2 B1 and drifting outward like 1/lambda, off the wall.
    spec.r_max = cfg.r_max > 0 ? cfg.r_max : std::max({400.0 * B1_of(cfg.b0), 5.0 * B1_of(cfg.b0 / 4.0), 4.0 * cfg.M});
    if (cfg.frame == Frame::Physical && cfg.r_max <= 0) spec.r_max *= std::max(1.0, cfg.lambda0);
    return spec;
}

FieldPair initial_data(const EvolveConfig& cfg, GridPtr grid, int* rejected) {
    if (!(cfg.b0 > 0)) throw std::invalid_argument("initial data: b0 must be positive");
    if (cfg.b0 > kProfileBMax) throw std::invalid_argument("initial data: b0 above the profile regime");
    if (!(cfg.lambda0 > 0)) throw std::invalid_argument("initial data: lambda0 must be positive");
    const auto& g = *grid;
    const std::size_t n = g.size();
    const LevelOne one = build_T1S1(grid);
    const Radiation rad = build_radiation(one, cfg.b0);
    const LevelTwo two = build_T2S2(one, rad);
    const Localized loc = localize(one, two, cfg.b0);

    Vec u(n), gv(n);
    if (cfg.frame == Frame::Rescaled || cfg.lambda0 == 1.0) {
        u = loc.Qb_tilde.values;
        gv = loc.Pb_tilde_grad.values;
    } else {
        // Beyond the grid the localised profile is exactly (Q, phi_Q').
        const double L = cfg.lambda0;
        for (std::size_t i = 0; i < n; ++i) {
            const double y = g.r(i) / L;
            const bool inside = y <= g.r_max();
            u[i] = (inside ? loc.Qb_tilde.at(y) : closed::Q(y)) / (L * L);
            gv[i] = (inside ? loc.Pb_tilde_grad.at(y) : closed::dphi_Q(y)) / L;
        }
    }
    for (std::size_t i = 0; i < n; ++i) {
        u[i] *= cfg.mass_factor;
        gv[i] *= cfg.mass_factor;
    }
    int rej = 0;
    if (cfg.delta > 0) {
        std::mt19937_64 rng(cfg.seed);
        std::uniform_real_distribution<double> centre(0.0, 5.0), width(0.5, 2.0);
        std::normal_distribution<double> amp(0.0, 1.0);
        auto bumps = [&]() {
            Vec w(n, 0.0);
            for (int k = 0; k < 4; ++k) {
                const double c0 = centre(rng), w0 = width(rng), a0 = amp(rng);
                for (std::size_t i = 0; i < n; ++i) {
                    const double z = (g.r(i) - c0) / w0;
                    w[i] += a0 * std::exp(-z * z);
                }
            }
            double wmax = 0.0;
            for (double x : w) wmax = std::max(wmax, std::abs(x));
            for (auto& x : w) x /= wmax;
            return w;
        };
        for (;;) {
            const Vec wu = bumps(), wg = bumps();
            bool positive = true;
            for (std::size_t i = 0; i < n && positive; ++i) positive = u[i] * (1.0 + cfg.delta * wu[i]) > 0.0;
            if (!positive) {
                if (++rej > 1000) throw std::runtime_error("initial data: perturbation keeps violating positivity");
                continue;
            }
            for (std::size_t i = 0; i < n; ++i) {
                u[i] *= 1.0 + cfg.delta * wu[i];
                gv[i] *= 1.0 + cfg.delta * wg[i];
            }
            break;
        }
    }
    if (rejected) *rejected = rej;
    return {field(grid, std::move(u), Parity::Even), field(grid, std::move(gv), Parity::Odd), Representation::Primitive};
}

LawReport measure_laws(const TimeSeries& series, int window, double transient_fraction) {
    LawReport rep;
    const auto& rec = series.records;
    const std::size_t n = rec.size();
    if (n < 3) return rep;
    const Vec lr = lambda_rate(series, window);
    const Vec law = b_hat_law(series, window);
    rep.first = std::min(n - 1, static_cast<std::size_t>(std::ceil(transient_fraction * static_cast<double>(n))));
    for (std::size_t i = rep.first; i < n; ++i)
        rep.lambda_ratio_max_dev = std::max(rep.lambda_ratio_max_dev, std::abs(lr[i] / rec[i].b - 1.0));
    rep.b_law_min = *std::min_element(law.begin(), law.end());
    rep.b_law_max = *std::max_element(law.begin(), law.end());
    rep.b_law_start = law.front();
    rep.b_law_end = law.back();
    rep.lambda43_rate_min = std::numeric_limits<double>::infinity();
    for (std::size_t i = (2 * n) / 3; i < n; ++i)
        rep.lambda43_rate_min = std::min(rep.lambda43_rate_min, 4.0 / 3.0 * std::pow(rec[i].lambda, -2.0 / 3.0) * lr[i]);
    for (const auto& r : rec)
        rep.deformation_max = std::max(rep.deformation_max, std::abs(r.b - r.b_hat) * std::abs(std::log(r.b)) / r.b);
    rep.lambda_ok = rep.lambda_ratio_max_dev <= 0.2;
    rep.b_law_ok = rep.b_law_min >= -3.0 && rep.b_law_max <= -1.0 &&
                   std::abs(rep.b_law_end + 2.0) < std::abs(rep.b_law_start + 2.0);
    rep.lambda43_ok = rep.lambda43_rate_min > 0.0;
    return rep;
}

namespace {

EvolveResult run(const EvolveConfig& cfg, GridPtr grid, const ModulationContext* ctx) {
    if (!(cfg.b0 > 0)) throw std::invalid_argument("evolve: b0 must be positive");
    if (cfg.cadence < 1) throw std::invalid_argument("evolve: cadence must be at least 1");
    EvolveResult res;
    const FieldPair P0 = initial_data(cfg, grid, &res.rejected_perturbations);
    res.perturbation_size = cfg.delta;
    FlowState st = make_flow_state(P0, cfg.frame);
    if (cfg.frame == Frame::Rescaled) st.log_lambda = std::log(cfg.lambda0);
    const FlowSolver solver(grid, FlowOptions{cfg.frame});
    const double mass0 = integrate(density_of(st)).value;

    double b_guess = cfg.b0;
    double mu_guess = cfg.frame == Frame::Rescaled ? 1.0 : cfg.lambda0;
    auto record = [&]() -> bool {
        TimeRecord r;
        r.t = st.t;
        r.s = st.s;
        r.gauge_rate = st.gauge_rate;
        r.min_density = st.min_density;
        r.mass = integrate(density_of(st)).value;
        r.lambda = std::exp(st.log_lambda);
        try {
            r.free_energy = physical_free_energy(st);
        } catch (const std::exception&) {
            r.free_energy = std::numeric_limits<double>::quiet_NaN();
        }
        if (ctx) {
            try {
                const ModulationState mod = decompose(st, *ctx, b_guess, mu_guess);
                r.lambda = mod.lambda;
                r.b = mod.b;
                r.b_hat = lift_b(mod, *ctx);
                r.residual_phi = mod.residuals[0];
                r.residual_lstar_phi = mod.residuals[1];
                const FieldPair E2 = apply_L(mod.eps_pair);
                r.E2_norm = std::sqrt(norm_XQ_sq(E2));
                r.lyapunov = quadratic_M(E2);
                b_guess = mod.b;
                mu_guess = mod.mu;
            } catch (const std::exception& e) {
                res.failed = true;
                res.termination = std::string("decomposition failed: ") + e.what();
                return false;
            }
        }
        res.series.records.push_back(r);
        return true;
    };

    if (!record()) return res;
    double ds = cfg.ds_init;
    res.termination = "step limit";
    while (st.steps < cfg.max_steps) {
        for (int k = 0; k < cfg.cadence; ++k) {
            double cap = std::min(cfg.ds_max, st.prev_ds > 0 ? 1.25 * st.prev_ds : ds);
            if (st.gauge_rate != 0.0) cap = std::min(cap, cfg.transport_cfl / std::abs(st.gauge_rate));
            const auto& rec = res.series.records;
            if (ctx && rec.size() >= 2) {
                const auto& r1 = rec[rec.size() - 1];
                const auto& r0 = rec[rec.size() - 2];
                const double bs = std::abs(r1.b - r0.b) / std::max(r1.s - r0.s, 1e-300);
                if (bs > 0) cap = std::min(cap, cfg.db_rel_max * r1.b / bs);
            }
            ds = cap;
            bool done = false;
            for (int attempt = 0; attempt < 6 && !done; ++attempt) {
                FlowState trial = st;
                try {
                    solver.step(trial, ds);
                    st = std::move(trial);
                    done = true;
                } catch (const std::runtime_error&) {
                    ds *= 0.5;
                }
            }
            if (!done) {
                res.failed = true;
                res.termination = "time step failed";
                break;
            }
        }
        if (res.failed) break;
        if (!record()) break;
        const auto& r = res.series.records.back();
        if (cfg.lambda_stop > 0 && r.lambda < cfg.lambda_stop) {
            res.blew_up = true;
            res.termination = "lambda below lambda_stop";
            break;
        }
        if (ctx && cfg.b_stop_ratio > 0 && r.b < cfg.b_stop_ratio * cfg.b0) {
            res.termination = "b below b_stop_ratio b0";
            break;
        }
        if (st.s >= cfg.s_max) {
            res.termination = "s_max reached";
            break;
        }
        if (st.t >= cfg.t_max) {
            res.termination = "t_max reached";
            break;
        }
    }
    res.steps = st.steps;
    res.min_density = std::numeric_limits<double>::infinity();
    const auto& rec = res.series.records;
    for (std::size_t i = 0; i < rec.size(); ++i) {
        res.mass_drift = std::max(res.mass_drift, std::abs(rec[i].mass - mass0) / mass0);
        res.min_density = std::min(res.min_density, rec[i].min_density);
        if (i > 0)
            res.max_energy_increase = std::max(res.max_energy_increase, (rec[i].free_energy - rec[i - 1].free_energy) /
                                                                            std::abs(rec[i - 1].free_energy));
    }
    if (ctx) res.laws = measure_laws(res.series);
    return res;
}

}  // namespace

EvolveResult evolve(const EvolveConfig& cfg) {
    const GridPtr grid = RadialGrid::make(evolve_grid_spec(cfg));
    if (!cfg.modulation) return run(cfg, grid, nullptr);
    const ModulationContext ctx(grid, cfg.M);
    return run(cfg, grid, &ctx);
}

EvolveResult evolve(const EvolveConfig& cfg, const ModulationContext& ctx) {
    return run(cfg, ctx.grid(), cfg.modulation ? &ctx : nullptr);
}

StabilityReport stability_probe(const EvolveConfig& cfg, int n_perturbations, double subcritical_s_max) {
    StabilityReport rep;
    const GridPtr grid = RadialGrid::make(evolve_grid_spec(cfg));
    const ModulationContext ctx(grid, cfg.M);
    double dev_lo = 1e300, dev_hi = -1e300, end_lo = 1e300, end_hi = -1e300;
    for (int k = 1; k <= n_perturbations; ++k) {
        EvolveConfig c = cfg;
        c.seed = cfg.seed + static_cast<std::uint64_t>(k);
        const EvolveResult r = evolve(c, ctx);
        ++rep.runs;
        if (r.blew_up) ++rep.blew_up;
        rep.laws.push_back(r.laws);
        dev_lo = std::min(dev_lo, r.laws.lambda_ratio_max_dev);
        dev_hi = std::max(dev_hi, r.laws.lambda_ratio_max_dev);
        end_lo = std::min(end_lo, r.laws.b_law_end);
        end_hi = std::max(end_hi, r.laws.b_law_end);
    }
    if (rep.runs > 0) {
        rep.lambda_dev_spread = dev_hi - dev_lo;
        rep.b_law_end_spread = end_hi - end_lo;
    }
    EvolveConfig sub = cfg;
    sub.mass_factor = 0.9;
    sub.modulation = false;
    sub.delta = 0.0;
    sub.b_stop_ratio = 0.0;
    sub.s_max = subcritical_s_max;
    const EvolveResult r = run(sub, grid, nullptr);
    rep.subcritical_blew_up = r.blew_up;
    rep.subcritical_termination = r.termination;
    rep.subcritical_lambda_min = std::numeric_limits<double>::infinity();
    for (const auto& x : r.series.records) rep.subcritical_lambda_min = std::min(rep.subcritical_lambda_min, x.lambda);
    return rep;
}

}  // namespace kslab
