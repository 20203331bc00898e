#include "kslab/profiles.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include "kslab/cutoff.hpp"
#include "kslab/ground_state.hpp"
#include "kslab/operators.hpp"

namespace kslab {

namespace {

using Vec = std::vector<double>;

RadialField field(const GridPtr& g, Vec v, Parity p) { return RadialField{g, std::move(v), p}; }

// (t^4 + 4 t^2 log t - 1)/t, the weight multiplying psi0 in the inversion of L0.
double psi1_kernel(double t) { return (t * t * t * t + 4.0 * t * t * std::log(t) - 1.0) / t; }

struct CutoffSamples {
    Vec v, d1, d2;
};

CutoffSamples sample_cutoff(const RadialGrid& g, double R) {
    CutoffSamples c;
    c.v.resize(g.size());
    c.d1.resize(g.size());
    c.d2.resize(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) {
        const Jet3 j = cutoff_jet(g.r(i), R);
        c.v[i] = j.v;
        c.d1[i] = j.d1;
        c.d2[i] = j.d2;
    }
    return c;
}

// v / r for an even v vanishing at the origin; the value at r = 0 is set to
// the supplied limit.
Vec over_r(const RadialGrid& g, const Vec& v, double at_zero = 0.0) {
    Vec out(v.size());
    out[0] = at_zero;
    for (std::size_t i = 1; i < v.size(); ++i) out[i] = v[i] / g.r(i);
    return out;
}

void require_regular_source(const RadialField& f, const char* who) {
    if (f.parity != Parity::Even) throw std::invalid_argument(std::string(who) + ": source must be even");
    double scale = 0.0;
    for (double v : f.values) scale = std::max(scale, std::abs(v));
    if (std::abs(f.values[0]) > 1e-8 * std::max(scale, 1e-300))
        throw std::invalid_argument(std::string(who) + ": source does not vanish at the origin");
}

double max_abs_ratio(const RadialGrid& g, const Vec& num, const std::function<double(double)>& den, double lo,
                     double hi) {
    double best = 0.0;
    for (std::size_t i = 1; i < g.size(); ++i) {
        const double r = g.r(i);
        if (r < lo || r > hi) continue;
        const double d = den(r);
        if (d > 0.0) best = std::max(best, std::abs(num[i]) / d);
    }
    return best;
}

}  // namespace

FieldJet invert_L0_jet(const RadialField& f) {
    require_regular_source(f, "invert_L0");
    const auto& g = *f.grid;
    Vec A = g.cumulative(f.values, Parity::Even, psi1_kernel);
    Vec B = g.cumulative_r(f.values, Parity::Even);
    const std::size_t n = g.size();
    Vec m(n), dm(n), d2m(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double r = g.r(i);
        const double a = -0.5 * A[i];
        const double b = 0.5 * B[i];
        m[i] = a * closed::psi0(r) + b * closed::psi1(r);
        dm[i] = a * closed::dpsi0(r) + b * closed::dpsi1(r);
        d2m[i] = i == 0 ? 0.0
                        : (1.0 / r + closed::Q_log_derivative(r)) * dm[i] - closed::Q(r) * m[i] + f.values[i];
    }
    m[0] = 0.0;
    dm[0] = 0.0;
    return {field(f.grid, std::move(m), Parity::Even), field(f.grid, std::move(dm), Parity::Odd),
            field(f.grid, std::move(d2m), Parity::Even)};
}

RadialField invert_L0(const RadialField& f) { return invert_L0_jet(f).v; }

FieldJet invert_L1_jet(const RadialField& f, double c) {
    require_regular_source(f, "invert_L1");
    const auto& g = *f.grid;
    const Vec I1 = g.cumulative_r(f.values, Parity::Even);
    const Vec I2 = g.cumulative(f.values, Parity::Even, [](double t) { return 1.0 / t; });
    const std::size_t n = g.size();
    Vec d(n), dd(n), d2d(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double r = g.r(i);
        d[i] = 0.5 * (-I1[i] + r * r * I2[i]) + c * r * r;
        dd[i] = r * I2[i] + 2.0 * c * r;
        d2d[i] = I2[i] + f.values[i] + 2.0 * c;
    }
    return {field(f.grid, std::move(d), Parity::Even), field(f.grid, std::move(dd), Parity::Odd),
            field(f.grid, std::move(d2d), Parity::Even)};
}

RadialField invert_L1(const RadialField& f, double c) { return invert_L1_jet(f, c).v; }

namespace {

FieldJet add(const FieldJet& a, const FieldJet& b, double sb = 1.0) {
    FieldJet out = a;
    for (std::size_t i = 0; i < a.v.size(); ++i) {
        out.v.values[i] += sb * b.v.values[i];
        out.d1.values[i] += sb * b.d1.values[i];
        out.d2.values[i] += sb * b.d2.values[i];
    }
    return out;
}

FieldJet scale(const FieldJet& a, double s) {
    FieldJet out = a;
    for (std::size_t i = 0; i < a.v.size(); ++i) {
        out.v.values[i] *= s;
        out.d1.values[i] *= s;
        out.d2.values[i] *= s;
    }
    return out;
}

}  // namespace

LevelOne build_T1S1(GridPtr grid) {
    const auto& g = *grid;
    // d1 = -2 log(1+r^2) solves L1 d1 = r n0' with c = -2. The closed form is
    // used because the quadrature route carries an r^2-amplified error at large r.
    LevelOne one;
    one.d1 = {make_field(grid, closed::d1, Parity::Even), make_field(grid, closed::dd1, Parity::Odd),
              make_field(grid, closed::d2d1, Parity::Even)};
    Vec f1(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) {
        const double r = g.r(i);
        f1[i] = r * closed::dm0(r) - closed::Q(r) * one.d1.v[i];
    }
    one.m1 = invert_L0_jet(field(grid, std::move(f1), Parity::Even));
    one.n1 = add(one.m1, one.d1);
    one.T1 = field(grid, over_r(g, one.m1.d1.values, one.m1.d2[0]), Parity::Even);
    one.S1_grad = field(grid, over_r(g, one.n1.v.values), Parity::Odd);
    return one;
}

Radiation build_radiation(const LevelOne& one, double b) {
    const GridPtr grid = one.T1.grid;
    const auto& g = *grid;
    const std::size_t n = g.size();
    Radiation rad;
    rad.b = b;
    rad.B0 = 1.0 / std::sqrt(b);
    const double R4 = rad.B0 / 4.0;
    const double R3 = 3.0 * rad.B0;
    const CutoffSamples chi = sample_cutoff(g, R4);
    const CutoffSamples chi3 = sample_cutoff(g, R3);
    const Vec psi0 = g.sample(closed::psi0);
    const auto inv_t = [](double t) { return 1.0 / t; };

    Vec psi0_chi(n), psi0_omchi(n), psi0_chim1(n);
    for (std::size_t i = 0; i < n; ++i) {
        psi0_chi[i] = psi0[i] * chi.v[i];
        psi0_omchi[i] = psi0[i] * (1.0 - chi.v[i]);
        psi0_chim1[i] = -psi0_omchi[i];
    }
    const double R = g.r_max();
    const double beta2 = g.cumulative(psi0_omchi, Parity::Even, inv_t).back() + 0.5 / (1.0 + R * R);
    const Vec I_tpsi_chi = g.cumulative_r(psi0_chi, Parity::Even);
    const double beta3 = I_tpsi_chi.back();
    rad.c1 = beta3;  // tau^3/(1+tau^2)^2 = tau psi0

    // D = d_Sigma / c_b = d1 + Delta D, with Delta D vanishing for r <= B0/4.
    const Vec Ia = g.cumulative_r(psi0_chim1, Parity::Even);
    const Vec Ib = g.cumulative(psi0_chim1, Parity::Even, inv_t);
    const Vec Ic = g.cumulative(psi0_chi, Parity::Even, inv_t);
    Vec dD(n), D(n), Dp(n), Dpp(n), c2_integrand(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double r = g.r(i);
        const double tail = (1.0 - chi3.v[i]) * (beta2 * r * r + beta3);
        dD[i] = 4.0 * (-Ia[i] + r * r * Ib[i] + tail);
        D[i] = one.d1.v[i] + dD[i];
        Dp[i] = 4.0 * (2.0 * r * Ic[i] - r - chi3.d1[i] * (beta2 * r * r + beta3) +
                       (1.0 - chi3.v[i]) * 2.0 * beta2 * r);
        Dpp[i] = 4.0 * (2.0 * Ic[i] + 2.0 * psi0_chi[i] - 1.0 - chi3.d2[i] * (beta2 * r * r + beta3) -
                        4.0 * beta2 * r * chi3.d1[i] + (1.0 - chi3.v[i]) * 2.0 * beta2);
        c2_integrand[i] = i == 0 ? 0.0 : psi0[i] * D[i] / (r * r);
    }
    rad.c2 = g.cumulative_r(c2_integrand, Parity::Even).back();
    rad.c_b = 1.0 / (rad.c1 - rad.c2);
    const double disc = rad.c1 * rad.c1 - 4.0 * rad.c2;
    if (std::abs(rad.c2) < 1e-14 * rad.c1)
        rad.c_b_quadratic_root = 1.0 / rad.c1;
    else if (disc >= 0.0)
        rad.c_b_quadratic_root = (rad.c1 - std::sqrt(disc)) / (2.0 * rad.c2);
    else
        rad.c_b_quadratic_root = std::numeric_limits<double>::quiet_NaN();
    const double cb = rad.c_b;

    rad.d_Sigma = {field(grid, D, Parity::Even), field(grid, Dp, Parity::Odd), field(grid, Dpp, Parity::Even)};
    rad.d_Sigma = scale(rad.d_Sigma, cb);

    // Source of L0 for m_Sigma, split as c_b f1 + delta_f.
    Vec delta_f(n), f_sigma(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double r = g.r(i);
        const double q = i == 0 ? 0.0 : dD[i] / (r * r);
        delta_f[i] = 8.0 * cb * psi0[i] * ((chi.v[i] - 1.0) - q);
        f_sigma[i] = i == 0 ? 0.0 : 8.0 * cb * psi0[i] * (chi.v[i] - D[i] / (r * r));
    }
    rad.beta[0] = 0.5 * g.cumulative(f_sigma, Parity::Even, psi1_kernel).back();
    rad.beta[1] = beta2;
    rad.beta[2] = beta3;
    const double beta1 = rad.beta[0];

    FieldJet dm = invert_L0_jet(field(grid, std::move(delta_f), Parity::Even));
    for (std::size_t i = 0; i < n; ++i) {
        const double r = g.r(i);
        const double p0 = psi0[i], p1 = closed::dpsi0(r), p2 = closed::d2psi0(r);
        dm.v.values[i] += beta1 * (1.0 - chi3.v[i]) * p0;
        dm.d1.values[i] += beta1 * (-chi3.d1[i] * p0 + (1.0 - chi3.v[i]) * p1);
        dm.d2.values[i] += beta1 * (-chi3.d2[i] * p0 - 2.0 * chi3.d1[i] * p1 + (1.0 - chi3.v[i]) * p2);
    }
    rad.delta_m_Sigma = dm.v;
    rad.m_Sigma = add(dm, scale(one.m1, cb));

    rad.Sigma1 = field(grid, over_r(g, rad.m_Sigma.d1.values, rad.m_Sigma.d2[0]), Parity::Even);
    Vec s2(n);
    for (std::size_t i = 0; i < n; ++i) s2[i] = rad.d_Sigma.v[i] + rad.m_Sigma.v[i];
    rad.Sigma2_grad = field(grid, over_r(g, s2), Parity::Odd);

    // Regional identities.
    RegionCheck& rc = rad.regions;
    const double B0 = rad.B0;
    const double logb = std::abs(std::log(b));
    double core_scale = 0.0, core_err = 0.0, out_scale = 0.0, out_err = 0.0;
    for (std::size_t i = 1; i < n; ++i) {
        const double r = g.r(i);
        if (r <= R4) {
            const double e1 = std::abs(rad.Sigma1[i] - cb * one.T1[i]);
            const double e2 = std::abs(rad.Sigma2_grad[i] - cb * one.S1_grad[i]);
            core_err = std::max({core_err, e1, e2});
            core_scale = std::max({core_scale, std::abs(cb * one.T1[i]), std::abs(cb * one.S1_grad[i])});
        } else if (r >= 6.0 * B0) {
            const double t1 = 4.0 * closed::dpsi1(r) / r;
            const double t2 = 4.0 * closed::psi1(r) / r;
            out_err = std::max({out_err, std::abs(rad.Sigma1[i] - t1), std::abs(rad.Sigma2_grad[i] - t2)});
            rc.outer_mass_residual =
                std::max(rc.outer_mass_residual, std::abs(rad.m_Sigma.v[i] - 4.0 * closed::psi1(r)));
        } else {
            rc.mid_sigma1_const = std::max(rc.mid_sigma1_const, std::abs(rad.Sigma1[i]) * logb * r * r);
            rc.mid_sigma2_const = std::max(rc.mid_sigma2_const, std::abs(rad.Sigma2_grad[i]) * r);
            rc.mid_mass_deviation =
                std::max(rc.mid_mass_deviation, std::abs(rad.m_Sigma.v[i] - 4.0 * closed::psi1(r)));
        }
    }
    for (std::size_t i = 0; i < n; ++i)
        out_scale = std::max({out_scale, std::abs(rad.Sigma1[i]), std::abs(rad.Sigma2_grad[i])});
    rc.core_residual = core_scale > 0.0 ? core_err / core_scale : 0.0;
    rc.outer_residual = out_scale > 0.0 ? out_err / out_scale : 0.0;
    return rad;
}

LevelTwo build_T2S2(const LevelOne& one, const Radiation& rad) {
    const GridPtr grid = one.T1.grid;
    const auto& g = *grid;
    const std::size_t n = g.size();
    Vec fd(n), gb(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double r = g.r(i);
        fd[i] = r * one.n1.d1[i] - rad.d_Sigma.v[i];
    }
    LevelTwo two;
    two.d2 = invert_L1_jet(field(grid, std::move(fd), Parity::Even), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const double r = g.r(i);
        const double mp = one.m1.d1[i];
        const double nonlin = i == 0 ? 0.0 : mp * one.n1.v[i] / r;
        const double msig2 = r * mp - nonlin - rad.m_Sigma.v[i];
        gb[i] = -(closed::Q(r) * two.d2.v[i] - msig2);
    }
    two.m2 = invert_L0_jet(field(grid, std::move(gb), Parity::Even));
    two.n2 = add(two.m2, two.d2);
    two.T2 = field(grid, over_r(g, two.m2.d1.values, two.m2.d2[0]), Parity::Even);
    two.S2_grad = field(grid, over_r(g, two.n2.v.values), Parity::Odd);
    return two;
}

Localized localize(const LevelOne& one, const LevelTwo& two, double b) {
    const GridPtr grid = one.T1.grid;
    const auto& g = *grid;
    const double B0 = 1.0 / std::sqrt(b);
    const double B1 = std::abs(std::log(b)) * B0;
    if (g.r_max() < 2.0 * B1) throw std::invalid_argument("localize: cut-off support exceeds the grid");
    const std::size_t n = g.size();
    Localized loc;
    Vec q(n), p(n), t1(n), t2(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double r = g.r(i);
        const double c1 = cutoff(r, B1);
        const double c0 = cutoff(r, B0 / 4.0);
        q[i] = closed::Q(r) + c1 * (b * one.T1[i] + b * b * two.T2[i]);
        p[i] = closed::dphi_Q(r) + c1 * (b * one.S1_grad[i] + b * b * two.S2_grad[i]);
        t1[i] = c0 * one.T1[i];
        t2[i] = c0 * one.S1_grad[i];
    }
    loc.Qb_tilde = field(grid, std::move(q), Parity::Even);
    loc.Pb_tilde_grad = field(grid, std::move(p), Parity::Odd);
    loc.Pb_tilde = potential_from_gradient(loc.Pb_tilde_grad, Normalization::ValueAtZero);
    loc.breveT1 = field(grid, std::move(t1), Parity::Even);
    loc.breveT2_grad = field(grid, std::move(t2), Parity::Odd);
    return loc;
}

ProfileError profile_error(const LevelOne& one, const Radiation& rad, const LevelTwo& two, double b) {
    const GridPtr grid = one.T1.grid;
    const auto& g = *grid;
    const std::size_t n = g.size();
    const double B0 = 1.0 / std::sqrt(b);
    const double B1 = std::abs(std::log(b)) * B0;
    const double cb = rad.c_b;
    const CutoffSamples chi = sample_cutoff(g, B1);
    const CutoffSamples chi4 = sample_cutoff(g, B0 / 4.0);

    // Localisation defects for level i: dm = m~ - m, dn = n~ - n.
    struct Defect {
        Vec dm, dm1, dm2, dn, dn1, dn2, mt1, nt, nt1;
    };
    auto defect = [&](const FieldJet& m, const FieldJet& nn) {
        Defect d;
        d.dm1.resize(n);
        d.dm2.resize(n);
        d.dn.resize(n);
        d.dn1.resize(n);
        d.dn2.resize(n);
        d.mt1.resize(n);
        d.nt.resize(n);
        d.nt1.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            const double c = chi.v[i] - 1.0;
            d.dm1[i] = c * m.d1[i];
            d.dm2[i] = chi.d1[i] * m.d1[i] + c * m.d2[i];
            d.dn[i] = c * nn.v[i];
            d.dn1[i] = chi.d1[i] * nn.v[i] + c * nn.d1[i];
            d.dn2[i] = chi.d2[i] * nn.v[i] + 2.0 * chi.d1[i] * nn.d1[i] + c * nn.d2[i];
            d.mt1[i] = chi.v[i] * m.d1[i];
            d.nt[i] = chi.v[i] * nn.v[i];
            d.nt1[i] = chi.d1[i] * nn.v[i] + chi.v[i] * nn.d1[i];
        }
        d.dm = g.cumulative_1(d.dm1, Parity::Odd);
        return d;
    };
    const Defect e1 = defect(one.m1, one.n1);
    const Defect e2 = defect(two.m2, two.n2);

    // A(m, n) = m'' - m'/r + (m0' n + m' m0)/r, the linearisation at (m0, n0).
    auto Aop = [&](const Defect& d, std::size_t i) {
        if (i == 0) return 0.0;
        const double r = g.r(i);
        return d.dm2[i] - d.dm1[i] / r + (closed::dm0(r) * d.dn[i] + d.dm1[i] * closed::m0(r)) / r;
    };
    auto L1op = [&](const Defect& d, std::size_t i) {
        if (i == 0) return 0.0;
        const double r = g.r(i);
        return (d.dn2[i] - d.dm2[i]) - (d.dn1[i] - d.dm1[i]) / r;
    };

    Vec P(n), corr(n), omega(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double r = g.r(i);
        const double inv_r = i == 0 ? 0.0 : 1.0 / r;
        const double K1 = Aop(e1, i);
        const double K2 = -rad.delta_m_Sigma[i] + Aop(e2, i) +
                          (e1.mt1[i] * e1.nt[i] - one.m1.d1[i] * one.n1.v[i]) * inv_r - r * e1.dm1[i];
        const double K3 = (e1.mt1[i] * e2.nt[i] + e2.mt1[i] * e1.nt[i]) * inv_r - r * e2.mt1[i];
        const double K4 = e2.mt1[i] * e2.nt[i] * inv_r;
        P[i] = b * K1 + b * b * K2 + b * b * b * K3 + b * b * b * b * K4;
        corr[i] = b * b * cb * (chi4.v[i] - 1.0) * one.m1.d1[i];
        omega[i] = b * L1op(e1, i) + b * b * (-rad.d_Sigma.v[i] + L1op(e2, i) - r * e1.dn1[i]) +
                   b * b * b * (-r * e2.nt1[i]) + b * b * cb * chi4.v[i] * one.n1.v[i];
    }
    const Vec dP = g.derivative(P, Parity::Even, 1);
    const Vec d2P = g.derivative(P, Parity::Even, 2);
    Vec psi1(n), psi2(n, 0.0);
    psi1[0] = d2P[0];
    for (std::size_t i = 1; i < n; ++i) {
        psi1[i] = (dP[i] + corr[i]) / g.r(i);
        psi2[i] = omega[i] / g.r(i);
    }

    ProfileError out;
    out.Psi1 = field(grid, std::move(psi1), Parity::Even);
    out.Psi2_grad = field(grid, std::move(psi2), Parity::Odd);

    // Norms. Beyond r_max the error is the Lambda Q pair scaled by -b.
    const double two_pi = 2.0 * std::numbers::pi;
    const auto& w = g.quad_weights();
    const double R = g.r_max();
    const Vec& e = out.Psi1.values;
    const Vec& gr = out.Psi2_grad.values;
    const Vec de = g.derivative(e, Parity::Even, 1);
    const Vec d2e = g.derivative(e, Parity::Even, 2);
    const Vec dg = g.derivative(gr, Parity::Odd, 1);
    Vec eq(n);
    for (std::size_t i = 0; i < n; ++i) eq[i] = e[i] / closed::Q(g.r(i));
    const Vec deq = g.derivative(eq, Parity::Even, 1);
    NormReport& nr = out.norms;
    for (std::size_t i = 0; i < n; ++i) {
        const double r = g.r(i);
        const double q = closed::Q(r);
        const double lap_e = i == 0 ? 2.0 * d2e[0] : d2e[i] + de[i] / r;
        const double lap_eta = i == 0 ? 2.0 * dg[0] : dg[i] + gr[i] / r;
        const double L1 = lap_e + e[i] * q + de[i] * closed::dphi_Q(r) + q * lap_eta + closed::dQ(r) * gr[i];
        const double L2 = lap_eta - e[i];
        const double gm = deq[i] + gr[i];
        nr.psi1_L2 += w[i] * e[i] * e[i];
        nr.L1_over_Q += w[i] * L1 * L1 / q;
        nr.grad_psi2_weighted += w[i] * gr[i] * gr[i] / (1.0 + r * r);
        nr.L2_sq += w[i] * L2 * L2;
        nr.Q_gradM1_sq += w[i] * q * gm * gm;
        nr.grad_psi2_L2 += w[i] * gr[i] * gr[i];
    }
    const double b2 = b * b;
    nr.psi1_L2 = two_pi * (nr.psi1_L2 + 256.0 * b2 / (6.0 * std::pow(R, 6)));
    nr.L1_over_Q *= two_pi;
    nr.grad_psi2_weighted = two_pi * (nr.grad_psi2_weighted + 64.0 * b2 / (6.0 * std::pow(R, 6)));
    nr.L2_sq *= two_pi;
    nr.Q_gradM1_sq *= two_pi;
    nr.grad_psi2_L2 = two_pi * (nr.grad_psi2_L2 + 16.0 * b2 / std::pow(R, 4));

    // <L Psi, Phi_{0,B0}> = <Psi, L* Phi_{0,B0}>.
    const FieldPair lp = Lstar_Phi0(grid, B0);
    nr.degenerate_flux = pairing(FieldPair{out.Psi1, out.Psi2_grad}, lp);
    return out;
}

BoundConstants measure_bounds(const LevelOne& one, const LevelTwo& two, double b) {
    const auto& g = *one.T1.grid;
    const double B0 = 1.0 / std::sqrt(b);
    const double B1 = std::abs(std::log(b)) * B0;
    const double logb = std::abs(std::log(b));
    const double inf = std::numeric_limits<double>::infinity();
    BoundConstants c;
    c.T1_tail = max_abs_ratio(g, one.T1.values, [](double r) { return r * r / (1.0 + r * r * r * r); }, 0.0, inf);
    c.S1_tail = max_abs_ratio(g, one.S1_grad.values, [](double r) { return r / (1.0 + r * r); }, 0.0, inf);
    c.m2_inner = max_abs_ratio(g, two.m2.v.values, [](double r) { return r * r * r * r; }, 0.0, 1.0);
    const auto mid = [&](double r) { return (1.0 + std::abs(std::log(r * std::sqrt(b)))) / logb; };
    c.m2_mid = max_abs_ratio(g, two.m2.v.values, [&](double r) { return r * r * mid(r); }, 1.0, 6.0 * B0);
    c.m2_outer = max_abs_ratio(g, two.m2.v.values, [&](double) { return 1.0 / (b * logb); }, 6.0 * B0, 2.0 * B1);
    c.T2_mid = max_abs_ratio(g, two.T2.values, mid, 1.0, 6.0 * B0);
    c.S2_growth = max_abs_ratio(g, two.S2_grad.values,
                                [](double r) { return r * (1.0 + std::abs(std::log(r))); }, 1.0, 2.0 * B1);
    return c;
}

GridSpec profile_grid_spec(double b, const ProfileOptions& opt) {
    const double B1 = std::abs(std::log(b)) / std::sqrt(b);
    GridSpec s;
    s.h0 = opt.h0;
    s.stretch = opt.stretch;
    s.r_max = opt.r_max_over_B1 * B1;
    s.order = opt.order;
    return s;
}

void check_profile_preconditions(double b, double r_max) {
    if (!(b > 0.0)) throw std::invalid_argument("b must be positive");
    if (b > kProfileBMax) throw std::invalid_argument("b too large: profiles are built for b <= 1e-2");
    const double B1 = std::abs(std::log(b)) / std::sqrt(b);
    if (r_max < 4.0 * B1) throw std::invalid_argument("grid guard violated: r_max must be at least 4*B1");
}

ProfileFamily build_profile_family(double b, const ProfileOptions& opt) {
    const GridSpec spec = profile_grid_spec(b, opt);
    check_profile_preconditions(b, spec.r_max);
    return build_profile_family(b, RadialGrid::make(spec));
}

ProfileFamily build_profile_family(double b, GridPtr grid) {
    check_profile_preconditions(b, grid->r_max());
    ProfileFamily fam;
    fam.b = b;
    fam.B0 = 1.0 / std::sqrt(b);
    fam.B1 = std::abs(std::log(b)) * fam.B0;
    fam.grid = grid;
    fam.one = build_T1S1(grid);
    fam.rad = build_radiation(fam.one, b);
    fam.two = build_T2S2(fam.one, fam.rad);
    fam.loc = localize(fam.one, fam.two, b);
    fam.error = profile_error(fam.one, fam.rad, fam.two, b);
    fam.bounds = measure_bounds(fam.one, fam.two, b);
    return fam;
}

}  // namespace kslab
