#include "kslab/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include <boost/numeric/odeint.hpp>

namespace kslab {

namespace {

constexpr double kPi = std::numbers::pi;
using Vec = std::vector<double>;

FieldPair as_primitive(const FieldPair& p) {
    return p.representation == Representation::Primitive ? p : to_primitive(p);
}

// 2 pi int_a^b f r dr from the cumulative integral of the sampled f.
double integral_between(const RadialGrid& g, const Vec& f, double a, double b) {
    const auto c = g.cumulative_r(f, Parity::Even);
    const double ca = a <= 0.0 ? 0.0 : g.interpolate(c, Parity::Even, std::min(a, g.r_max()));
    const double cb = g.interpolate(c, Parity::Even, std::min(b, g.r_max()));
    return 2.0 * kPi * (cb - ca);
}

double integral_all(const RadialGrid& g, const Vec& f) {
    return integral_between(g, f, 0.0, g.r_max());
}

double log_weight(double r) {
    const double l = 1.0 + std::abs(std::log(r));
    return l * l;
}

double least_squares_slope(const Vec& x, const Vec& y, std::size_t lo, std::size_t hi, double* intercept = nullptr) {
    const double n = static_cast<double>(hi - lo);
    double sx = 0, sy = 0;
    for (std::size_t i = lo; i < hi; ++i) {
        sx += x[i];
        sy += y[i];
    }
    const double mx = sx / n, my = sy / n;
    double sxx = 0, sxy = 0;
    for (std::size_t i = lo; i < hi; ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    const double slope = sxx > 0 ? sxy / sxx : 0.0;
    if (intercept) *intercept = my - slope * mx;
    return slope;
}

}  // namespace

EnergyReport free_energy(const FieldPair& pair, double negative_tolerance) {
    const FieldPair p = as_primitive(pair);
    const auto& u = p.density;
    const auto& g = *u.grid;
    const std::size_t n = u.size();
    double umax = 0.0;
    for (double x : u.values) umax = std::max(umax, std::abs(x));
    for (double x : u.values)
        if (x < -negative_tolerance * umax) throw std::domain_error("free_energy: density is negative beyond tolerance");

    const RadialField v = potential_from_gradient(p.chem_gradient, Normalization::LogConvolution);
    const auto dg = g.derivative(p.chem_gradient.values, Parity::Odd, 1);
    Vec ent(n), inter(n), dir(n), mom(n), floored(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double r = g.r(i);
        const double ui = u[i];
        const double lap = i == 0 ? 2.0 * dg[0] : dg[i] + p.chem_gradient[i] / r;
        ent[i] = ui * std::log(std::max(ui, kEntropyFloor));
        floored[i] = ui < kEntropyFloor ? ui : 0.0;
        inter[i] = ui * v[i];
        dir[i] = -v[i] * lap;
        mom[i] = r * r * ui;
    }
    EnergyReport rep;
    rep.mass = integral_all(g, u.values);
    rep.entropy = integral_all(g, ent);
    rep.interaction = integral_all(g, inter);
    rep.dirichlet = integral_all(g, dir);
    rep.second_moment = integral_all(g, mom);
    rep.floored_mass = integral_all(g, floored);
    rep.free_energy = rep.entropy + rep.interaction + 0.5 * rep.dirichlet;
    return rep;
}

LogHLSReport check_logHLS(const RadialField& u) {
    const auto& g = *u.grid;
    const RadialField phi = potential_from_gradient(poisson_field(u), Normalization::LogConvolution);
    Vec ent(u.size()), inter(u.size());
    for (std::size_t i = 0; i < u.size(); ++i) {
        ent[i] = u[i] * std::log(std::max(u[i], kEntropyFloor));
        inter[i] = u[i] * phi[i];
    }
    LogHLSReport rep;
    rep.mass = integral_all(g, u.values);
    if (!(rep.mass > 0)) throw std::invalid_argument("check_logHLS: density must have positive mass");
    rep.lhs = integral_all(g, ent) + 4.0 * kPi / rep.mass * integral_all(g, inter);
    rep.rhs = rep.mass * (std::log(rep.mass) - 1.0 - std::log(kPi));
    rep.margin = rep.lhs - rep.rhs;
    return rep;
}

VirialReport virial_rate(const FieldPair& pair, Coupling) {
    const FieldPair p = as_primitive(pair);
    const auto& u = p.density;
    const auto& g = *u.grid;
    const RadialField dphi = poisson_field(u);
    const auto du = g.derivative(u.values, Parity::Even, 1);
    Vec flux(u.size());
    for (std::size_t i = 0; i < u.size(); ++i) flux[i] = -2.0 * g.r(i) * (du[i] + u[i] * dphi[i]);
    VirialReport rep;
    rep.mass = integral_all(g, u.values);
    rep.measured = integral_all(g, flux);
    rep.predicted = 4.0 * rep.mass * (1.0 - rep.mass / (8.0 * kPi));
    return rep;
}

const HardyEntry& HardyReport::at(const std::string& name) const {
    for (const auto& e : entries)
        if (e.name == name) return e;
    throw std::out_of_range("HardyReport: no entry " + name);
}

HardyReport check_hardy_suite(const RadialField& v, double alpha, double gamma, double R) {
    if (alpha <= -2.0) throw std::invalid_argument("check_hardy_suite: alpha must exceed -2");
    if (R <= 2.0) throw std::invalid_argument("check_hardy_suite: R must exceed 2");
    const auto& g = *v.grid;
    const std::size_t n = v.size();
    const RadialField dv = derivative(v, 1);
    const RadialField d2v = derivative(v, 2);
    const RadialField d3v = derivative(v, 3);

    Vec v2(n), grad2(n), pw_small(n), pw_big(n), lb_small(n), le_small(n), le_big(n);
    Vec l1_small(n), l1_grad(n), l1_v(n), l2_grad(n), l2_hess(n), l3_lap(n), l3_lap_far(n), l3_grad(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double r = g.r(i);
        const double vi = v[i], d1 = dv[i], d2 = d2v[i];
        v2[i] = vi * vi;
        grad2[i] = d1 * d1;
        l1_v[i] = vi * vi / (1.0 + std::pow(r, 8));
        // Laplacian and its derivative: (v'' + v'/r), (v''' + v''/r - v'/r^2).
        const double lap = i == 0 ? 2.0 * d2 : d2 + d1 / r;
        const double dlap = i == 0 ? 0.0 : d3v[i] + d2 / r - d1 / (r * r);
        l3_lap_far[i] = lap * lap / (1.0 + std::pow(r, 4));
        l3_grad[i] = dlap * dlap;
        if (i == 0) continue;
        const double lw = log_weight(r);
        pw_small[i] = std::pow(r, alpha) * vi * vi;
        pw_big[i] = std::pow(r, alpha + 2.0) * d1 * d1;
        lb_small[i] = vi * vi / (r * r * lw);
        le_small[i] = vi * vi / (std::pow(r, gamma + 2.0) * lw);
        le_big[i] = d1 * d1 / (std::pow(r, gamma) * lw);
        l1_small[i] = vi * vi / (r * r * (1.0 + std::pow(r, 4)) * lw);
        l1_grad[i] = d1 * d1 / (std::pow(r, 4) * lw);
        l2_grad[i] = d1 * d1 / (std::pow(r, 4) * lw);
        l2_hess[i] = (d2 * d2 + d1 * d1 / (r * r)) / (r * r * lw);
        l3_lap[i] = lap * lap / (r * r * lw);
    }

    HardyReport rep{alpha, gamma, R, {}};
    auto add = [&](std::string name, double small, double big, bool sharp) {
        HardyEntry e{std::move(name), small, big, 0.0, false};
        if (big > 0.0 && std::isfinite(big)) {
            e.constant = small / big;
            e.holds = std::isfinite(e.constant) && (!sharp || e.constant <= 1.0 + 1e-6);
        } else {
            e.constant = std::numeric_limits<double>::infinity();
        }
        rep.entries.push_back(std::move(e));
    };
    const double near = integral_between(g, v2, 1.0, 2.0);
    add("power", 0.25 * (2.0 + alpha) * (2.0 + alpha) * integral_all(g, pw_small), integral_all(g, pw_big), true);
    add("log_ball", integral_between(g, lb_small, 0.0, R), near + integral_between(g, grad2, 0.0, R), false);
    add("log_exterior", integral_between(g, le_small, 1.0, R), near + integral_between(g, le_big, 1.0, R), false);
    add("log_level1", integral_all(g, l1_small), integral_all(g, l1_grad) - integral_all(g, l1_v), false);
    add("log_level2", integral_all(g, l2_grad) + integral_all(g, l2_hess), integral_all(g, l3_lap), false);
    add("log_level3", integral_all(g, l3_lap) - integral_all(g, l3_lap_far), integral_all(g, l3_grad), false);
    return rep;
}

double poisson_roundtrip_error(const RadialField& v) {
    const RadialField lap = radial_laplacian(v);
    const RadialField phi = potential_from_gradient(poisson_field(lap), Normalization::LogConvolution);
    double err = 0.0, scale = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
        err = std::max(err, std::abs(phi[i] - v[i]));
        scale = std::max(scale, std::abs(v[i]));
    }
    return scale > 0 ? err / scale : err;
}

std::vector<double> windowed_slope(const std::vector<double>& x, const std::vector<double>& y, int window) {
    if (x.size() != y.size()) throw std::invalid_argument("windowed_slope: size mismatch");
    const std::size_t n = x.size();
    Vec out(n, std::numeric_limits<double>::quiet_NaN());
    if (n < 2) return out;
    const std::size_t w = static_cast<std::size_t>(std::max(window, 2));
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t lo = i >= w / 2 ? i - w / 2 : 0;
        std::size_t hi = std::min(n, lo + w);
        lo = hi >= w ? hi - w : 0;
        out[i] = least_squares_slope(x, y, lo, hi);
    }
    return out;
}

std::vector<double> lambda_rate(const TimeSeries& series, int window) {
    Vec s, ll;
    for (const auto& r : series.records) {
        s.push_back(r.s);
        ll.push_back(std::log(r.lambda));
    }
    auto slope = windowed_slope(s, ll, window);
    for (auto& x : slope) x = -x;
    return slope;
}

std::vector<double> b_hat_law(const TimeSeries& series, int window) {
    // d/ds (1 + log b)/b = b_s |log b|/b^2 for b < 1; fitting the primitive keeps
    // the one-sided windows at the ends unbiased.
    Vec s, G;
    for (const auto& r : series.records) {
        s.push_back(r.s);
        G.push_back((1.0 + std::log(r.b_hat)) / r.b_hat);
    }
    return windowed_slope(s, G, window);
}

RateFit fit_rate_law(const TimeSeries& series, const RateFitOptions& opt) {
    RateFit fit;
    const auto& rec = series.records;
    if (rec.size() < 3) {
        fit.note = "fewer than three records";
        return fit;
    }
    double bmin = rec.front().b_hat, bmax = bmin;
    for (const auto& r : rec) {
        bmin = std::min(bmin, r.b_hat);
        bmax = std::max(bmax, r.b_hat);
    }

    // (a) 2 s b_hat against log s - log log s.
    Vec x, y;
    for (const auto& r : rec) {
        if (r.s <= std::exp(1.0) || r.b_hat <= 0) continue;
        x.push_back(std::log(r.s) - std::log(std::log(r.s)));
        y.push_back(2.0 * r.s * r.b_hat);
    }
    if (!(bmin > 0) || std::log10(bmax / bmin) < opt.min_decades || x.size() < 3) {
        fit.note = "insufficient dynamic range in b for the s-law fit";
    } else {
        fit.s_law_fitted = true;
        fit.coefficient = least_squares_slope(x, y, 0, x.size(), &fit.intercept);
        Vec z(x.size());
        double mz = 0;
        for (std::size_t i = 0; i < x.size(); ++i) mz += (z[i] = y[i] - x[i]);
        mz /= static_cast<double>(x.size());
        double ss = 0;
        for (double zi : z) ss += (zi - mz) * (zi - mz);
        const auto [xlo, xhi] = std::minmax_element(x.begin(), x.end());
        fit.unit_slope_residual = std::sqrt(ss / static_cast<double>(z.size())) / (*xhi - *xlo);
        fit.s_law_accepted = std::abs(fit.coefficient - 1.0) <= opt.coefficient_tol &&
                             fit.unit_slope_residual <= opt.residual_tol;
        if (!fit.s_law_accepted) fit.note = "s-law rejected";
    }

    // (b) -lambda_s/lambda against b_hat.
    const Vec lr = lambda_rate(series, opt.rate_window);
    double sxy = 0, sxx = 0;
    for (std::size_t i = 0; i < rec.size(); ++i) {
        sxy += lr[i] * rec[i].b_hat;
        sxx += rec[i].b_hat * rec[i].b_hat;
    }
    fit.lambda_slope = sxx > 0 ? sxy / sxx : 0.0;
    double res = 0, nrm = 0;
    for (std::size_t i = 0; i < rec.size(); ++i) {
        const double d = lr[i] - fit.lambda_slope * rec[i].b_hat;
        res += d * d;
        nrm += lr[i] * lr[i];
    }
    fit.lambda_slope_residual = nrm > 0 ? std::sqrt(res / nrm) : 0.0;

    // (c) -lambda lambda_t = -lambda_s/lambda.
    fit.proxy_min = std::numeric_limits<double>::infinity();
    fit.proxy_max = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < rec.size(); ++i) {
        const double p = lr[i] * std::exp(2.0 * std::sqrt(std::abs(std::log(rec[i].lambda))));
        fit.proxy_min = std::min(fit.proxy_min, p);
        fit.proxy_max = std::max(fit.proxy_max, p);
    }
    return fit;
}

TimeSeries synthetic_rate_series(double b0, double s_end_over_s0, int samples, bool with_log) {
    namespace odeint = boost::numeric::odeint;
    if (!(b0 > 0 && b0 < 1)) throw std::invalid_argument("synthetic_rate_series: b0 must lie in (0,1)");
    if (samples < 2 || !(s_end_over_s0 > 1)) throw std::invalid_argument("synthetic_rate_series: bad sampling");
    // Start where the leading-order solution b = |log b|/(2s) (or 1/s) passes b0.
    const double s0 = with_log ? std::abs(std::log(b0)) / (2.0 * b0) : 1.0 / b0;
    using State = std::array<double, 3>;  // b, log lambda, t
    // Independent variable tau = log s.
    auto rhs = [with_log](const State& x, State& dx, double tau) {
        const double s = std::exp(tau);
        const double b = x[0];
        const double bs = with_log ? -2.0 * b * b / std::abs(std::log(b)) : -b * b;
        dx[0] = s * bs;
        dx[1] = -s * b;
        dx[2] = s * std::exp(2.0 * x[1]);
    };
    std::vector<double> taus(static_cast<std::size_t>(samples));
    const double t0 = std::log(s0), t1 = std::log(s0 * s_end_over_s0);
    for (int i = 0; i < samples; ++i) taus[static_cast<std::size_t>(i)] = t0 + (t1 - t0) * i / (samples - 1);
    TimeSeries out;
    State x{b0, 0.0, 0.0};
    auto stepper = odeint::make_dense_output(1e-13, 1e-13, odeint::runge_kutta_dopri5<State>());
    odeint::integrate_times(stepper, rhs, x, taus.begin(), taus.end(), (t1 - t0) / (10.0 * samples),
                            [&out](const State& st, double tau) {
                                TimeRecord r;
                                r.s = std::exp(tau);
                                r.b = r.b_hat = st[0];
                                r.lambda = std::exp(st[1]);
                                r.t = st[2];
                                out.records.push_back(r);
                            });
    return out;
}

}  // namespace kslab
