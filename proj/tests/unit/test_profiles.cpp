#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <vector>

#include "kslab/cutoff.hpp"
#include "kslab/ground_state.hpp"
#include "kslab/profiles.hpp"

using namespace kslab;

namespace {

GridPtr inversion_grid() {
    GridSpec s;
    s.h0 = 0.02;
    s.stretch = 0.02;
    s.r_max = 60.0;
    return RadialGrid::make(s);
}

double sup(const RadialField& f, double r_lo = 0.0, double r_hi = 1e300) {
    double m = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i)
        if (f.r(i) >= r_lo && f.r(i) <= r_hi) m = std::max(m, std::abs(f[i]));
    return m;
}

// Even sources vanishing like r^2 at the origin.
std::vector<std::function<double(double)>> smooth_battery() {
    return {
        [](double r) { return r * r * std::exp(-r * r); },
        [](double r) { return r * r * std::exp(-0.5 * r * r); },
        [](double r) { return r * r * std::exp(-2.0 * r * r); },
        [](double r) { return r * r / std::pow(1.0 + r * r, 3); },
        [](double r) { return r * r / std::pow(1.0 + r * r, 4); },
        [](double r) { return std::pow(r, 4) * std::exp(-r * r); },
        [](double r) { return r * r * std::cos(r) * std::exp(-0.25 * r * r); },
        [](double r) { return (r * r - std::pow(r, 4) / 3.0) * std::exp(-r * r); },
        [](double r) { return r * r / (std::cosh(r) * std::cosh(r)); },
        [](double r) { return r * closed::dm0(r) * std::exp(-0.1 * r * r); },
    };
}

}  // namespace

TEST_CASE("invert_L0 of zero is zero") {
    const auto g = inversion_grid();
    const auto z = make_field(g, [](double) { return 0.0; }, Parity::Even);
    CHECK(sup(invert_L0(z)) == 0.0);
}

TEST_CASE("invert_L0 residual on a smooth battery") {
    const auto g = inversion_grid();
    int k = 0;
    for (const auto& fn : smooth_battery()) {
        CAPTURE(k);
        const auto f = make_field(g, fn, Parity::Even);
        const auto m = invert_L0(f);
        auto res = apply_L0(m);
        for (std::size_t i = 0; i < res.size(); ++i) res.values[i] += f[i];
        // Nodes near r_max see the one-sided closure of the discrete operator.
        CHECK(sup(res, 0.0, 30.0) / sup(f) < 1e-4);
        // m = O(r^4) at the origin.
        CHECK(std::abs(m.at(0.1)) < 1e-3);
        ++k;
    }
}

TEST_CASE("invert_L1 reproduces d1 and the homogeneous solution") {
    const auto g = inversion_grid();
    const auto src = make_field(g, [](double r) { return r * closed::dm0(r); }, Parity::Even);
    const auto d = invert_L1(src, -2.0);
    CHECK(d[0] == 0.0);
    CHECK(d.at(1.0) == doctest::Approx(-2.0 * std::log(2.0)).epsilon(1e-8));
    double worst = 0.0;
    for (std::size_t i = 0; i < d.size(); ++i)
        worst = std::max(worst, std::abs(d[i] - closed::d1(d.r(i))) / (1.0 + std::abs(closed::d1(d.r(i)))));
    CHECK(worst < 1e-8);

    const auto z = make_field(g, [](double) { return 0.0; }, Parity::Even);
    const auto h = invert_L1(z, 1.0);
    double dev = 0.0;
    for (std::size_t i = 0; i < h.size(); ++i) dev = std::max(dev, std::abs(h[i] - h.r(i) * h.r(i)));
    CHECK(dev == 0.0);
}

TEST_CASE("invert_L1 residual on a smooth battery") {
    const auto g = inversion_grid();
    int k = 0;
    for (const auto& fn : smooth_battery()) {
        CAPTURE(k);
        const auto f = make_field(g, fn, Parity::Even);
        auto res = apply_L1(invert_L1(f, 0.5));
        for (std::size_t i = 0; i < res.size(); ++i) res.values[i] -= f[i];
        CHECK(sup(res, 0.0, 30.0) / sup(f) < 1e-4);
        ++k;
    }
}

TEST_CASE("homogeneous basis") {
    const auto g = inversion_grid();
    const auto hb = make_homogeneous_basis(g);
    CHECK(sup(apply_L0(hb.psi0), 0.0, 30.0) < 1e-6);
    double w = 0.0;
    for (std::size_t i = 0; i < hb.wronskian.size(); ++i) {
        const double r = hb.wronskian.r(i);
        w = std::max(w, std::abs(hb.wronskian[i] - r * closed::Q(r) / 4.0));
    }
    CHECK(w < 1e-12);
}

TEST_CASE("level-one profile") {
    const auto g = RadialGrid::make(profile_grid_spec(1e-4));
    const auto one = build_T1S1(g);

    SUBCASE("r^2 T1 tends to 4") { CHECK(1e4 * one.T1.at(100.0) == doctest::Approx(4.0).epsilon(0.02)); }

    SUBCASE("T1 behaves like r^2 at the origin") {
        double worst = 0.0;
        for (std::size_t i = 1; i < g->size() && g->r(i) <= 1.0; ++i)
            worst = std::max(worst, std::abs(one.T1[i]) / (g->r(i) * g->r(i)));
        CHECK(worst < 100.0);
        CHECK(one.T1[0] == doctest::Approx(0.0));
    }

    SUBCASE("m1 against an independent quadrature") {
        // Variation of constants for L0 m = -r m0'(1 - d1/r^2), evaluated with scipy.quad.
        CHECK(one.m1.v.at(10.0) == doctest::Approx(9.210635112687207).epsilon(1e-6));
        CHECK(one.m1.v.at(50.0) == doctest::Approx(15.648092501370728).epsilon(1e-6));
        CHECK(one.m1.v.at(100.0) == doctest::Approx(18.420680773946856).epsilon(1e-6));
    }

    SUBCASE("n1 = d1 + m1 and dS1 = n1/r") {
        double worst = 0.0;
        for (std::size_t i = 1; i < g->size(); ++i) {
            worst = std::max(worst, std::abs(one.n1.v[i] - one.d1.v[i] - one.m1.v[i]));
            worst = std::max(worst, std::abs(one.S1_grad[i] - one.n1.v[i] / g->r(i)));
        }
        CHECK(worst < 1e-10);
    }

    SUBCASE("tail bounds") {
        const auto bounds = measure_bounds(one, build_T2S2(one, build_radiation(one, 1e-4)), 1e-4);
        CHECK(std::isfinite(bounds.T1_tail));
        CHECK(bounds.T1_tail < 20.0);  // |T1| <~ r^2/(1+r^4), tail constant 4
        CHECK(bounds.S1_tail < 10.0);
    }
}

TEST_CASE("radiation") {
    SUBCASE("c1 at b = 1e-6 is |log b|/2 + O(1)") {
        const double b = 1e-6;
        const auto g = RadialGrid::make(profile_grid_spec(b));
        const auto rad = build_radiation(build_T1S1(g), b);
        CHECK(std::abs(rad.c1 - std::abs(std::log(b)) / 2.0) < 2.0);
        CHECK(rad.regions.outer_mass_residual < 1e-6);
        CHECK(rad.regions.core_residual < 1e-6);
        CHECK(rad.regions.outer_residual < 1e-6);
        CHECK(rad.c_b == doctest::Approx(1.0 / (rad.c1 - rad.c2)).epsilon(1e-12));
    }
    SUBCASE("c_b |log b|/2 approaches 1 monotonically") {
        double prev = 1e300;
        for (double b : {1e-4, 1e-6, 1e-8}) {
            CAPTURE(b);
            const auto g = RadialGrid::make(profile_grid_spec(b));
            const auto rad = build_radiation(build_T1S1(g), b);
            const double ratio = rad.c_b * std::abs(std::log(b)) / 2.0;
            CHECK(ratio > 0.8);
            CHECK(ratio < 1.2);
            CHECK(std::abs(ratio - 1.0) < prev);
            prev = std::abs(ratio - 1.0);
        }
    }
}

TEST_CASE("level-two profile and localisation") {
    const double b = 1e-4;
    const auto fam = build_profile_family(b);
    const auto& g = fam.grid;
    CHECK(fam.B0 == doctest::Approx(100.0));
    CHECK(fam.B1 == doctest::Approx(std::abs(std::log(b)) * 100.0));

    SUBCASE("m2 is O(r^4) at the origin") {
        CHECK(std::isfinite(fam.bounds.m2_inner));
        CHECK(fam.bounds.m2_inner < 10.0);
        CHECK(std::abs(fam.two.m2.v.at(0.1)) < 1e-3);
    }

    SUBCASE("mid-range bound on m2") { CHECK(fam.bounds.m2_mid < 10.0); }

    SUBCASE("Q~_b matches Q + b T1 + b^2 T2 inside B1 and Q beyond 2 B1") {
        double inner = 0.0, outer = 0.0;
        for (std::size_t i = 0; i < g->size(); ++i) {
            const double r = g->r(i);
            const double q = closed::Q(r);
            if (r <= fam.B1)
                inner = std::max(inner, std::abs(fam.loc.Qb_tilde[i] - (q + b * fam.one.T1[i] + b * b * fam.two.T2[i])));
            if (r >= 2.0 * fam.B1) outer = std::max(outer, std::abs(fam.loc.Qb_tilde[i] - q));
        }
        CHECK(inner < 1e-15);
        CHECK(outer == 0.0);
    }

    SUBCASE("breve T1 is cut at B0/4") {
        for (double r : {1.0, 10.0, fam.B0 / 4.0})
            CHECK(fam.loc.breveT1.at(r) == doctest::Approx(fam.one.T1.at(r)).epsilon(1e-10));
        double beyond = 0.0;
        for (std::size_t i = 0; i < g->size(); ++i)
            if (g->r(i) >= fam.B0 / 2.0) beyond = std::max(beyond, std::abs(fam.loc.breveT1[i]));
        CHECK(beyond == 0.0);
    }

    SUBCASE("localised profile carries supercritical mass") {
        RadialField excess = fam.loc.Qb_tilde;
        for (std::size_t i = 0; i < excess.size(); ++i) excess.values[i] -= closed::Q(g->r(i));
        const double dm = integrate(excess).value;
        CHECK(dm > 0.0);
        // Leading order: b int T1 over r < B1, i.e. 8 pi b log B1.
        CAPTURE(dm);
        CHECK(dm / (8.0 * std::numbers::pi * b * std::log(fam.B1)) == doctest::Approx(1.0).epsilon(0.5));
    }

    SUBCASE("norm report is finite") {
        const auto& n = fam.error.norms;
        for (double x : {n.psi1_L2, n.L1_over_Q, n.grad_psi2_weighted, n.L2_sq, n.Q_gradM1_sq, n.grad_psi2_L2})
            CHECK(std::isfinite(x));
        CHECK(n.psi1_L2 > 0.0);
    }
}

TEST_CASE("preconditions") {
    CHECK_THROWS_AS(check_profile_preconditions(0.5, 1e4), std::invalid_argument);
    CHECK_THROWS_AS(check_profile_preconditions(-1.0, 1e4), std::invalid_argument);
    CHECK_THROWS_AS(check_profile_preconditions(1e-6, 100.0), std::invalid_argument);
    CHECK_NOTHROW(check_profile_preconditions(1e-4, 1e4));
}

TEST_CASE("cutoff") {
    CHECK(cutoff(0.5) == 1.0);
    CHECK(cutoff(2.5) == 0.0);
    CHECK(cutoff(1.5) > 0.0);
    CHECK(cutoff(1.5) < 1.0);
    double prev = 1.0;
    for (double x = 1.0; x <= 2.0; x += 0.01) {
        CHECK(cutoff(x) <= prev);
        prev = cutoff(x);
    }
    const auto j = cutoff_jet(15.0, 10.0);
    const double h = 1e-5;
    CHECK(j.d1 == doctest::Approx((cutoff(15.0 + h, 10.0) - cutoff(15.0 - h, 10.0)) / (2 * h)).epsilon(1e-6));
}
