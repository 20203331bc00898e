#include "kslab/operators.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "kslab/cutoff.hpp"
#include "kslab/ground_state.hpp"
#include "kslab/profiles.hpp"

namespace kslab {

namespace {

using Vec = std::vector<double>;
constexpr double kTwoPi = 2.0 * std::numbers::pi;

FieldPair primitive(const FieldPair& p) {
    return p.representation == Representation::Primitive ? p : to_primitive(p);
}

RadialField field(const GridPtr& g, Vec v, Parity p) { return RadialField{g, std::move(v), p}; }

struct Derivs {
    Vec e1, e2, g1, g2;
};

Derivs derivs(const FieldPair& e) {
    const auto& g = *e.grid();
    return {g.derivative(e.density.values, Parity::Even, 1), g.derivative(e.density.values, Parity::Even, 2),
            g.derivative(e.chem_gradient.values, Parity::Odd, 1),
            g.derivative(e.chem_gradient.values, Parity::Odd, 2)};
}

// Gradient of the radial Laplacian of a potential with gradient g.
double grad_lap(const Derivs& d, const Vec& g, double r, std::size_t i) {
    return d.g2[i] + d.g1[i] / r - g[i] / (r * r);
}

}  // namespace

FieldPair to_partial_mass(const FieldPair& p) {
    if (p.representation == Representation::PartialMass) return p;
    const auto& g = *p.grid();
    FieldPair out{partial_mass(p.density), p.chem_gradient, Representation::PartialMass};
    out.chem_gradient.parity = Parity::Even;
    for (std::size_t i = 0; i < g.size(); ++i) out.chem_gradient.values[i] *= g.r(i);
    return out;
}

FieldPair to_primitive(const FieldPair& p) {
    if (p.representation == Representation::Primitive) return p;
    const auto& g = *p.grid();
    const Vec dm = g.derivative(p.density.values, Parity::Even, 1);
    const Vec d2m = g.derivative(p.density.values, Parity::Even, 2);
    Vec u(g.size()), v(g.size(), 0.0);
    u[0] = d2m[0];
    for (std::size_t i = 1; i < g.size(); ++i) {
        u[i] = dm[i] / g.r(i);
        v[i] = p.chem_gradient[i] / g.r(i);
    }
    return {field(p.grid(), std::move(u), Parity::Even), field(p.grid(), std::move(v), Parity::Odd),
            Representation::Primitive};
}

double pairing(const FieldPair& a_in, const FieldPair& b_in) {
    const FieldPair a = primitive(a_in), b = primitive(b_in);
    const auto& w = a.grid()->quad_weights();
    double s = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i)
        s += w[i] * (a.density[i] * b.density[i] + a.chem_gradient[i] * b.chem_gradient[i]);
    return kTwoPi * s;
}

double norm_XQ_sq(const FieldPair& a_in) {
    const FieldPair a = primitive(a_in);
    const auto& g = *a.grid();
    const auto& w = g.quad_weights();
    double s = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i)
        s += w[i] * (a.density[i] * a.density[i] / closed::Q(g.r(i)) + a.chem_gradient[i] * a.chem_gradient[i]);
    return kTwoPi * s;
}

double quadratic_M(const FieldPair& u_in) {
    const FieldPair u = primitive(u_in);
    const auto& g = *u.grid();
    const auto& w = g.quad_weights();
    const Vec m = g.cumulative_r(u.density.values, Parity::Even);
    double s = 0.0;
    for (std::size_t i = 1; i < w.size(); ++i) {
        const double gv = u.chem_gradient[i];
        s += w[i] * (u.density[i] * u.density[i] / closed::Q(g.r(i)) + gv * gv - 2.0 * gv * m[i] / g.r(i));
    }
    s += w[0] * u.density[0] * u.density[0] / closed::Q(0.0);
    return kTwoPi * s;
}

FieldPair project_out(const FieldPair& u_in, const std::vector<FieldPair>& constraints) {
    FieldPair u = primitive(u_in);
    const std::size_t k = constraints.size();
    if (k == 0) return u;
    const auto& g = *u.grid();
    std::vector<FieldPair> riesz;
    for (const auto& c_in : constraints) {
        FieldPair c = primitive(c_in);
        for (std::size_t i = 0; i < g.size(); ++i) c.density.values[i] *= closed::Q(g.r(i));
        riesz.push_back(std::move(c));
    }
    Eigen::MatrixXd G(k, k);
    Eigen::VectorXd rhs(k);
    for (std::size_t a = 0; a < k; ++a) {
        rhs(a) = pairing(u, constraints[a]);
        for (std::size_t b = 0; b < k; ++b) G(a, b) = pairing(riesz[b], constraints[a]);
    }
    const Eigen::VectorXd alpha = G.colPivHouseholderQr().solve(rhs);
    for (std::size_t b = 0; b < k; ++b)
        for (std::size_t i = 0; i < g.size(); ++i) {
            u.density.values[i] -= alpha(b) * riesz[b].density[i];
            u.chem_gradient.values[i] -= alpha(b) * riesz[b].chem_gradient[i];
        }
    return u;
}

FieldPair lambda_Q_pair(GridPtr grid) {
    return {make_field(grid, closed::LambdaQ, Parity::Even), make_field(grid, closed::dphi_LambdaQ, Parity::Odd),
            Representation::Primitive};
}

FieldPair zero_pair(GridPtr grid) {
    return {field(grid, Vec(grid->size(), 0.0), Parity::Even), field(grid, Vec(grid->size(), 0.0), Parity::Odd),
            Representation::Primitive};
}

FieldPair apply_M(const FieldPair& e_in) {
    const FieldPair e = primitive(e_in);
    const GridPtr grid = e.grid();
    const auto& g = *grid;
    const RadialField v = potential_from_gradient(e.chem_gradient, Normalization::Decay);
    const Vec m = g.cumulative_r(e.density.values, Parity::Even);
    FieldPair out = zero_pair(grid);
    for (std::size_t i = 0; i < g.size(); ++i) {
        const double r = g.r(i);
        out.density.values[i] = e.density[i] / closed::Q(r) + v[i];
        out.chem_gradient.values[i] = i == 0 ? 0.0 : e.chem_gradient[i] - m[i] / r;
    }
    return out;
}

FieldPair apply_L(const FieldPair& e_in) {
    const FieldPair e = primitive(e_in);
    const auto& g = *e.grid();
    const Derivs d = derivs(e);
    const Vec& eps = e.density.values;
    const Vec& gr = e.chem_gradient.values;
    FieldPair out = zero_pair(e.grid());
    out.density.values[0] = 2.0 * d.e2[0] + closed::Q(0.0) * (eps[0] + 2.0 * d.g1[0]);
    for (std::size_t i = 1; i < g.size(); ++i) {
        const double r = g.r(i);
        const double q = closed::Q(r);
        out.density.values[i] = d.e2[i] + d.e1[i] / r + q * eps[i] + closed::dphi_Q(r) * d.e1[i] +
                                q * (d.g1[i] + gr[i] / r) + closed::dQ(r) * gr[i];
        out.chem_gradient.values[i] = grad_lap(d, gr, r, i) - d.e1[i];
    }
    return out;
}

FieldPair apply_Lstar(const FieldPair& e_in) {
    const FieldPair e = primitive(e_in);
    const auto& g = *e.grid();
    const Derivs d = derivs(e);
    const Vec& gr = e.chem_gradient.values;
    FieldPair out = zero_pair(e.grid());
    out.density.values[0] = 2.0 * d.e2[0] + 2.0 * d.g1[0];
    for (std::size_t i = 1; i < g.size(); ++i) {
        const double r = g.r(i);
        out.density.values[i] =
            d.e2[i] + d.e1[i] / r + closed::Q_log_derivative(r) * d.e1[i] + d.g1[i] + gr[i] / r;
        out.chem_gradient.values[i] = grad_lap(d, gr, r, i) - closed::Q(r) * d.e1[i];
    }
    return out;
}

FieldPair apply_A(const FieldPair& e_in) {
    const FieldPair e = primitive(e_in);
    const auto& g = *e.grid();
    const Vec e1 = g.derivative(e.density.values, Parity::Even, 1);
    const Vec m = g.cumulative_r(e.density.values, Parity::Even);
    FieldPair out = zero_pair(e.grid());
    out.density.parity = Parity::Odd;
    for (std::size_t i = 1; i < g.size(); ++i) {
        const double r = g.r(i);
        out.density.values[i] = e1[i] + closed::dphi_Q(r) * e.density[i] + closed::Q(r) * e.chem_gradient[i];
        out.chem_gradient.values[i] = e.chem_gradient[i] - m[i] / r;
    }
    return out;
}

FieldPair Phi0(GridPtr grid, double B) {
    FieldPair out = zero_pair(grid);
    for (std::size_t i = 1; i < grid->size(); ++i) {
        const double r = grid->r(i);
        const double chi = cutoff(r, B);
        out.density.values[i] = chi * r * r;
        out.chem_gradient.values[i] = -4.0 * std::log1p(r * r) * chi / r;
    }
    return out;
}

FieldPair Lstar_Phi0(GridPtr grid, double B) {
    FieldPair out = zero_pair(grid);
    out.density.values[0] = -4.0;
    for (std::size_t i = 1; i < grid->size(); ++i) {
        const double r = grid->r(i);
        const Jet3 c = cutoff_jet(r, B);
        const double s = 1.0 + r * r;
        const double l = std::log1p(r * r);
        const double de = c.d1 * r * r + 2.0 * r * c.v;
        const double d2e = c.d2 * r * r + 4.0 * r * c.d1 + 2.0 * c.v;
        const double lap_eta = -8.0 * c.v / s - 4.0 * l * c.d1 / r;
        const double grad_lap_eta =
            -16.0 * c.d1 / s + 16.0 * r * c.v / (s * s) - 4.0 * l * (c.d2 / r - c.d1 / (r * r));
        out.density.values[i] = d2e + de / r + closed::Q_log_derivative(r) * de + lap_eta;
        out.chem_gradient.values[i] = grad_lap_eta - closed::Q(r) * de;
    }
    return out;
}

RadialField Phi0_potential(GridPtr grid, double B) {
    return potential_from_gradient(Phi0(grid, B).chem_gradient, Normalization::ValueAtZero);
}

double phi_pairing_floor() { return 32.0 * std::numbers::pi * std::log(4.0); }

GridSpec phi_grid_spec(double M, double h0, double stretch) {
    GridSpec s;
    s.h0 = h0;
    s.stretch = stretch;
    s.r_max = 50.0 * M;
    return s;
}

PhiMDirections build_Phi_M(GridPtr grid, double M) {
    if (grid->r_max() < 4.0 * M) throw std::invalid_argument("build_Phi_M: grid must reach at least 4M");
    const FieldPair p0 = Phi0(grid, M);
    const FieldPair lp0 = Lstar_Phi0(grid, M);
    const LevelOne one = build_T1S1(grid);
    const FieldPair t1{one.T1, one.S1_grad, Representation::Primitive};
    const FieldPair lq = lambda_Q_pair(grid);

    PhiMDirections out;
    PhiMReport& rep = out.report;
    rep.M = M;
    rep.Phi0_T1 = pairing(p0, t1);
    rep.Phi0_LambdaQ = pairing(p0, lq);
    if (std::abs(rep.Phi0_LambdaQ) < phi_pairing_floor())
        throw std::invalid_argument("M too small: <Phi_0,M, Lambda Q> is degenerate");
    rep.c_M = -rep.Phi0_T1 / rep.Phi0_LambdaQ;

    const FieldPair llp0 = apply_Lstar(lp0);
    out.Phi_M = p0;
    out.Lstar_Phi_M = lp0;
    for (std::size_t i = 0; i < grid->size(); ++i) {
        out.Phi_M.density.values[i] += rep.c_M * lp0.density[i];
        out.Phi_M.chem_gradient.values[i] += rep.c_M * lp0.chem_gradient[i];
        out.Lstar_Phi_M.density.values[i] += rep.c_M * llp0.density[i];
        out.Lstar_Phi_M.chem_gradient.values[i] += rep.c_M * llp0.chem_gradient[i];
    }
    rep.PhiM_T1 = pairing(out.Phi_M, t1);
    rep.PhiM_LambdaQ = pairing(out.Phi_M, lq);
    return out;
}

GridSpec coercivity_grid_spec(double r_max, double h0, double stretch) {
    GridSpec s;
    s.h0 = h0;
    s.stretch = stretch;
    s.r_max = r_max;
    return s;
}

namespace {

// Discrete unknowns x = (u_0..u_{N-1}, g_1..g_{N-1}); g_0 = 0 by parity.
struct DenseSpace {
    std::size_t n = 0;
    std::size_t dim = 0;
    Eigen::VectorXd norm_w;   // diagonal X_Q metric
    Eigen::MatrixXd energy;   // <M x, x>

    explicit DenseSpace(const RadialGrid& g) : n(g.size()), dim(2 * g.size() - 1) {
        const auto& w = g.quad_weights();
        norm_w.resize(dim);
        energy = Eigen::MatrixXd::Zero(dim, dim);
        // Partial-mass matrix column by column.
        Eigen::MatrixXd C(n, n);
        Vec unit(n, 0.0);
        for (std::size_t j = 0; j < n; ++j) {
            unit[j] = 1.0;
            const Vec col = g.cumulative_r(unit, Parity::Even);
            for (std::size_t i = 0; i < n; ++i) C(i, j) = col[i];
            unit[j] = 0.0;
        }
        for (std::size_t i = 0; i < n; ++i) {
            const double uq = kTwoPi * w[i] / closed::Q(g.r(i));
            norm_w(i) = uq;
            energy(i, i) = uq;
        }
        for (std::size_t i = 1; i < n; ++i) {
            const std::size_t gi = n + i - 1;
            norm_w(gi) = kTwoPi * w[i];
            energy(gi, gi) = kTwoPi * w[i];
            for (std::size_t j = 0; j < n; ++j) {
                const double c = -kTwoPi * w[i] * C(i, j) / g.r(i);
                energy(gi, j) += c;
                energy(j, gi) += c;
            }
        }
    }

    // Coefficients of the functional x -> <x, c>.
    Eigen::VectorXd functional(const FieldPair& c_in, const RadialGrid& g) const {
        const FieldPair c = primitive(c_in);
        const auto& w = g.quad_weights();
        Eigen::VectorXd f(dim);
        for (std::size_t i = 0; i < n; ++i) f(i) = kTwoPi * w[i] * c.density[i];
        for (std::size_t i = 1; i < n; ++i) f(n + i - 1) = kTwoPi * w[i] * c.chem_gradient[i];
        return f;
    }

    // Minimal generalised Rayleigh quotient x'Ex / x'Nx over {f_k' x = 0}.
    double constrained_min(const std::vector<Eigen::VectorXd>& fs, const Eigen::VectorXd& metric) const {
        const Eigen::VectorXd s = metric.cwiseSqrt();
        const Eigen::VectorXd sinv = s.cwiseInverse();
        const Eigen::MatrixXd K = sinv.asDiagonal() * energy * sinv.asDiagonal();
        Eigen::MatrixXd Z;
        if (fs.empty()) {
            Z = Eigen::MatrixXd::Identity(dim, dim);
        } else {
            Eigen::MatrixXd F(dim, fs.size());
            for (std::size_t k = 0; k < fs.size(); ++k) F.col(k) = sinv.asDiagonal() * fs[k];
            Eigen::HouseholderQR<Eigen::MatrixXd> qr(F);
            const Eigen::MatrixXd Qfull = qr.householderQ() * Eigen::MatrixXd::Identity(dim, dim);
            Z = Qfull.rightCols(dim - fs.size());
        }
        const Eigen::MatrixXd R = Z.transpose() * K * Z;
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(R, Eigen::EigenvaluesOnly);
        if (es.info() != Eigen::Success) throw std::runtime_error("coercivity: eigensolve did not converge");
        return es.eigenvalues()(0);
    }

    Eigen::VectorXd log_metric(const RadialGrid& g) const {
        Eigen::VectorXd m = norm_w;
        for (std::size_t i = 1; i < n; ++i) {
            const double l = 1.0 + std::abs(std::log(g.r(i)));
            m(n + i - 1) /= l * l;
        }
        return m;
    }
};

FieldPair mass_functional(GridPtr grid) {
    FieldPair c = zero_pair(grid);
    for (auto& v : c.density.values) v = 1.0;
    return c;
}

}  // namespace

CoercivityResult coercivity_M(GridPtr grid) {
    const auto& g = *grid;
    const DenseSpace sp(g);
    const Eigen::VectorXd fm = sp.functional(mass_functional(grid), g);
    const Eigen::VectorXd fl = sp.functional(lambda_Q_pair(grid), g);
    CoercivityResult res;
    res.dimension = static_cast<int>(sp.dim);
    res.delta = sp.constrained_min({fm, fl}, sp.norm_w);
    res.delta_log_weighted = sp.constrained_min({fm, fl}, sp.log_metric(g));
    res.unconstrained_min = sp.constrained_min({fm}, sp.norm_w);
    return res;
}

CoercivityResult coercivity_L(GridPtr grid, double M) {
    const auto& g = *grid;
    const PhiMDirections dirs = build_Phi_M(grid, M);
    const DenseSpace sp(g);
    const Eigen::VectorXd fm = sp.functional(mass_functional(grid), g);
    const Eigen::VectorXd fp = sp.functional(dirs.Phi_M, g);
    CoercivityResult res;
    res.dimension = static_cast<int>(sp.dim);
    res.delta = sp.constrained_min({fm, fp}, sp.norm_w);
    res.delta_log_weighted = sp.constrained_min({fm, fp}, sp.log_metric(g));
    res.unconstrained_min = sp.constrained_min({fm}, sp.norm_w);
    return res;
}

double lyapunov_functional(const FieldPair& e) { return quadratic_M(apply_L(e)); }

KernelGap kernel_gap(GridPtr grid) {
    const auto& g = *grid;
    const std::size_t n = g.size();
    const std::size_t dim = 2 * n - 1;
    Eigen::VectorXd s(dim);
    const auto& w = g.quad_weights();
    for (std::size_t i = 0; i < n; ++i) s(i) = std::sqrt(kTwoPi * w[i] / closed::Q(g.r(i)));
    for (std::size_t i = 1; i < n; ++i) s(n + i - 1) = std::sqrt(kTwoPi * w[i]);
    // Columns of the discrete L on unit inputs, plus the two fluxes A(e) at
    // r_max; requiring zero flux removes the growing modes that only exist on
    // a truncated domain and keeps the X_Q-regular sector.
    Eigen::MatrixXd L(dim, dim);
    Eigen::MatrixXd flux(2, dim);
    FieldPair e = zero_pair(grid);
    for (std::size_t j = 0; j < dim; ++j) {
        double& slot = j < n ? e.density.values[j] : e.chem_gradient.values[j - n + 1];
        slot = 1.0;
        const FieldPair le = apply_L(e);
        for (std::size_t i = 0; i < n; ++i) L(i, j) = le.density[i];
        for (std::size_t i = 1; i < n; ++i) L(n + i - 1, j) = le.chem_gradient[i];
        const FieldPair ae = apply_A(e);
        flux(0, j) = ae.density[n - 1];
        flux(1, j) = ae.chem_gradient[n - 1];
        slot = 0.0;
    }
    const Eigen::VectorXd sinv = s.cwiseInverse();
    Eigen::MatrixXd K(dim + 2, dim);
    K.topRows(dim) = s.asDiagonal() * L * sinv.asDiagonal();
    const double row_scale = K.topRows(dim).rowwise().norm().maxCoeff();
    for (int k = 0; k < 2; ++k) {
        const Eigen::RowVectorXd row = flux.row(k) * sinv.asDiagonal();
        K.row(static_cast<Eigen::Index>(dim) + k) = row * (row_scale / row.norm());
    }
    Eigen::BDCSVD<Eigen::MatrixXd> svd(K, Eigen::ComputeThinV);
    const Eigen::VectorXd sv = svd.singularValues();
    KernelGap out;
    out.sigma_min = sv(dim - 1);
    out.sigma_next = sv(dim - 2);
    out.ratio = out.sigma_min / out.sigma_next;
    const Eigen::VectorXd kv = svd.matrixV().col(dim - 1);
    const FieldPair lq = lambda_Q_pair(grid);
    Eigen::VectorXd lqv(dim);
    for (std::size_t i = 0; i < n; ++i) lqv(i) = s(i) * lq.density[i];
    for (std::size_t i = 1; i < n; ++i) lqv(n + i - 1) = s(n + i - 1) * lq.chem_gradient[i];
    out.kernel_overlap = std::abs(kv.dot(lqv)) / (kv.norm() * lqv.norm());
    return out;
}

}  // namespace kslab
