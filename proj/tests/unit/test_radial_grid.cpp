#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "kslab/ground_state.hpp"
#include "kslab/radial_grid.hpp"

using namespace kslab;
using std::numbers::pi;

namespace {

GridPtr reference_grid(double h0 = 0.02, double r_max = 200.0) {
    GridSpec s;
    s.h0 = h0;
    s.stretch = h0;
    s.r_max = r_max;
    return RadialGrid::make(s);
}

template <class F>
double max_error(const RadialField& f, F exact) {
    double e = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i)
        e = std::max(e, std::abs(f[i] - exact(f.r(i))));
    return e;
}

}  // namespace

TEST_CASE("grid construction rejects bad specs") {
    GridSpec s;
    s.h0 = -1.0;
    CHECK_THROWS_AS(RadialGrid{s}, std::invalid_argument);
    s = GridSpec{};
    s.order = 5;
    CHECK_THROWS_AS(RadialGrid{s}, std::invalid_argument);
    CHECK_THROWS_AS(RadialGrid({0.0, 1.0, 0.5}, 2), std::invalid_argument);
    CHECK_THROWS_AS(RadialGrid({0.1, 1.0, 2.0}, 2), std::invalid_argument);
}

TEST_CASE("nodes start at the origin and reach r_max") {
    const auto g = reference_grid();
    CHECK(g->r(0) == 0.0);
    CHECK(g->r_max() == doctest::Approx(200.0).epsilon(1e-12));
    CHECK(g->r(1) == doctest::Approx(0.02));
    CHECK(g->nodes_per_decade(1.0, 100.0) > 20.0);
}

TEST_CASE("derivative of r^2 is exact with the second-order stencil") {
    GridSpec s;
    s.h0 = 0.1;
    s.r_max = 20.0;
    s.stretch = 0.05;
    s.order = 2;
    const auto g = RadialGrid::make(s);
    const auto f = make_field(g, [](double r) { return r * r; }, Parity::Even);
    const auto d = derivative(f, 1);
    CHECK(d.parity == Parity::Odd);
    CHECK(max_error(d, [](double r) { return 2.0 * r; }) < 1e-10);
    const auto d2 = derivative(f, 2);
    CHECK(max_error(d2, [](double) { return 2.0; }) < 1e-9);
}

TEST_CASE("derivative of Q vanishes at the origin") {
    const auto g = reference_grid();
    const auto gs = make_ground_state(g);
    const auto d = derivative(gs.Q, 1);
    CHECK(d[0] == 0.0);
    CHECK(max_error(d, closed::dQ) < 1e-6);
}

TEST_CASE("psi1 derivative converges at the stencil order") {
    // Closed form psi1'/r = 8(1 + r^2 - (r^2 - 1) log r)/(1 + r^2)^3.
    auto exact = [](double r) {
        if (r == 0.0) return 0.0;
        return r * 8.0 * (1.0 + r * r - (r * r - 1.0) * std::log(r)) / std::pow(1.0 + r * r, 3);
    };
    double err[2];
    int k = 0;
    for (double h0 : {0.08, 0.04}) {
        GridSpec s;
        s.h0 = h0;
        s.stretch = h0;
        s.r_max = 50.0;
        const auto g = RadialGrid::make(s);
        const auto f = make_field(g, closed::psi1, Parity::Even);
        // r^2 log r is not smooth at the origin, so measure on [1/2, 5].
        const auto d = derivative(f, 1);
        double e = 0.0;
        for (std::size_t i = 0; i < d.size(); ++i)
            if (d.r(i) >= 0.5 && d.r(i) <= 5.0) e = std::max(e, std::abs(d[i] - exact(d.r(i))));
        err[k++] = e;
    }
    const double observed = std::log2(err[0] / err[1]);
    CHECK(err[1] < 1e-6);
    CHECK(observed > 5.0);  // sixth-order stencil
}

TEST_CASE("radial Laplacian") {
    const auto g = reference_grid();
    SUBCASE("of phi_Q is Q") {
        const auto f = make_field(g, closed::phi_Q, Parity::Even);
        CHECK(max_error(radial_laplacian(f), closed::Q) < 1e-6);
    }
    SUBCASE("of a constant vanishes") {
        const auto f = make_field(g, [](double) { return 3.0; }, Parity::Even);
        CHECK(max_error(radial_laplacian(f), [](double) { return 0.0; }) < 1e-9);
    }
    SUBCASE("of r^2 is 4") {
        const auto f = make_field(g, [](double r) { return r * r; }, Parity::Even);
        CHECK(max_error(radial_laplacian(f), [](double) { return 4.0; }) < 1e-8);
    }
    SUBCASE("rejects odd fields") {
        const auto f = make_field(g, [](double r) { return r; }, Parity::Odd);
        CHECK_THROWS_AS(radial_laplacian(f), std::invalid_argument);
    }
}

TEST_CASE("integrate") {
    const auto g = reference_grid();
    const auto gs = make_ground_state(g);
    SUBCASE("Q has mass 8 pi") {
        // Tail beyond r_max is 8 pi/(1 + r_max^2).
        const double tail = 8.0 * pi / (1.0 + 200.0 * 200.0);
        CHECK(std::abs((integrate(gs.Q).value + tail) / (8.0 * pi) - 1.0) < 1e-9);
        CHECK(std::abs(integrate(gs.Q).value / (8.0 * pi) - 1.0) < 1e-4);
    }
    SUBCASE("Lambda Q has zero mass") {
        // int_0^R LambdaQ r dr = R^2 Q(R), small but not zero at R = 200.
        const double tail = 2.0 * pi * 200.0 * 200.0 * closed::Q(200.0);
        CHECK(std::abs(integrate(gs.LambdaQ).value - tail) < 1e-9);
    }
    SUBCASE("indicator of the unit ball") {
        GridSpec s;
        s.h0 = 0.01;
        s.r_uniform = 2.0;
        s.r_max = 4.0;
        const auto gu = RadialGrid::make(s);
        // The jump is smeared over one cell by the interpolant.
        const auto f = make_field(gu, [](double r) { return r <= 1.0 ? 1.0 : 0.0; }, Parity::Even);
        CHECK(integrate(f).value == doctest::Approx(pi).epsilon(2e-2));
    }
}

TEST_CASE("partial mass and Poisson field") {
    const auto g = reference_grid();
    const auto gs = make_ground_state(g);
    const auto m = partial_mass(gs.Q);
    CHECK(m[0] == 0.0);
    CHECK(max_error(m, closed::m0) < 1e-9);
    CHECK(m.at(1.0) == doctest::Approx(2.0).epsilon(1e-8));

    const auto mL = partial_mass(gs.LambdaQ);
    CHECK(max_error(mL, [](double r) { return 8.0 * closed::psi0(r); }) < 1e-9);

    const auto z = make_field(g, [](double) { return 0.0; }, Parity::Even);
    CHECK(max_error(partial_mass(z), [](double) { return 0.0; }) == 0.0);
    CHECK(max_error(poisson_field(z), [](double) { return 0.0; }) == 0.0);

    const auto pf = poisson_field(gs.Q);
    CHECK(pf.parity == Parity::Odd);
    CHECK(max_error(pf, closed::dphi_Q) < 1e-9);
    CHECK(pf.at(1.0) == doctest::Approx(2.0).epsilon(1e-8));
    CHECK(max_error(poisson_field(gs.LambdaQ), [](double r) { return r * closed::Q(r); }) < 1e-9);
}

TEST_CASE("potential from gradient") {
    const auto g = reference_grid();
    const auto gs = make_ground_state(g);
    SUBCASE("log-convolution constant for Q is zero") {
        const auto phi = potential_from_gradient(poisson_field(gs.Q), Normalization::LogConvolution);
        CHECK(std::abs(phi[0]) < 1e-6);
        CHECK(max_error(phi, closed::phi_Q) < 1e-6);
    }
    SUBCASE("decay normalisation for Lambda Q") {
        const auto phi = potential_from_gradient(poisson_field(gs.LambdaQ), Normalization::Decay);
        CHECK(max_error(phi, closed::phi_LambdaQ) < 1e-6);
        // Lambda Q/Q + 2 + phi_{Lambda Q} = 0.
        double worst = 0.0;
        for (std::size_t i = 0; i < g->size(); ++i)
            worst = std::max(worst, std::abs(gs.LambdaQ[i] / gs.Q[i] + 2.0 + phi[i]));
        CHECK(worst < 1e-6);
    }
    SUBCASE("zero gradient") {
        const auto z = make_field(g, [](double) { return 0.0; }, Parity::Odd);
        const auto phi = potential_from_gradient(z, Normalization::ValueAtZero);
        CHECK(max_error(phi, [](double) { return 0.0; }) == 0.0);
    }
    SUBCASE("rejects even gradients") {
        CHECK_THROWS_AS(potential_from_gradient(gs.Q, Normalization::ValueAtZero), std::invalid_argument);
    }
}

TEST_CASE("interpolation reproduces closed forms between nodes") {
    const auto g = reference_grid();
    const auto gs = make_ground_state(g);
    CHECK(gs.Q.at(1.2345) == doctest::Approx(closed::Q(1.2345)).epsilon(1e-10));
    CHECK_THROWS_AS(gs.Q.at(1e4), std::out_of_range);
}
