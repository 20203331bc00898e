#include <doctest.h>

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "kslab/diagnostics.hpp"
#include "kslab/ground_state.hpp"

using namespace kslab;
using std::numbers::pi;

namespace {

GridPtr wide_grid(double r_max = 1e4, double h0 = 0.02) {
    GridSpec s;
    s.h0 = h0;
    // The Dirichlet and interaction terms grow like log R and cancel; the
    // stretch has to be small for the difference to keep its digits.
    s.stretch = 0.01;
    s.r_max = r_max;
    return RadialGrid::make(s);
}

FieldPair with_poisson(const RadialField& u) {
    return {u, poisson_field(u), Representation::Primitive};
}

RadialField scaled_Q(GridPtr g, double factor, double lambda = 1.0) {
    return make_field(g, [=](double r) { return factor * closed::Q(r / lambda) / (lambda * lambda); }, Parity::Even);
}

}  // namespace

TEST_CASE("free energy") {
    const auto g = wide_grid();

    SUBCASE("of the ground state is the sharp log-HLS value") {
        const auto rep = free_energy(with_poisson(scaled_Q(g, 1.0)));
        CHECK(rep.mass == doctest::Approx(8.0 * pi).epsilon(1e-6));
        CHECK(rep.free_energy == doctest::Approx(8.0 * pi * (std::log(8.0) - 1.0)).epsilon(1e-6));
        CHECK(rep.free_energy == doctest::Approx(rep.entropy + rep.interaction + 0.5 * rep.dirichlet).epsilon(1e-12));
        CHECK(rep.floored_mass == 0.0);
    }

    SUBCASE("scaling law") {
        // u_l = l^-2 u(x/l) shifts E by -M (2 - M/4pi) log l.
        for (double factor : {0.5, 1.0}) {
            const double M = factor * 8.0 * pi;
            const double E1 = free_energy(with_poisson(scaled_Q(g, factor))).free_energy;
            for (double lambda : {0.5, 2.0}) {
                CAPTURE(factor);
                CAPTURE(lambda);
                const double El = free_energy(with_poisson(scaled_Q(g, factor, lambda))).free_energy;
                const double expected = -M * (2.0 - M / (4.0 * pi)) * std::log(lambda);
                CHECK(El - E1 == doctest::Approx(expected).epsilon(1e-4).scale(1.0));
            }
        }
    }

    SUBCASE("reproducible under refinement") {
        const double a = free_energy(with_poisson(scaled_Q(wide_grid(1e4, 0.02), 1.0))).free_energy;
        const double b = free_energy(with_poisson(scaled_Q(wide_grid(1e4, 0.01), 1.0))).free_energy;
        CHECK(std::abs(a - b) / std::abs(a) < 1e-8);
    }

    SUBCASE("tolerates vanishing density and rejects negative density") {
        const auto u = make_field(g, [](double r) { return r < 1.0 ? 0.0 : std::exp(-r); }, Parity::Even);
        const auto rep = free_energy(with_poisson(u));
        CHECK(std::isfinite(rep.entropy));
        CHECK(rep.floored_mass >= 0.0);
        const auto neg = make_field(g, [](double r) { return closed::Q(r) - 1.0; }, Parity::Even);
        CHECK_THROWS_AS(free_energy(with_poisson(neg)), std::domain_error);
    }
}

TEST_CASE("log-HLS") {
    const auto g = wide_grid();
    SUBCASE("the Q scaling family is extremal") {
        for (double lambda : {0.5, 1.0, 2.0}) {
            CAPTURE(lambda);
            const auto rep = check_logHLS(scaled_Q(g, 1.0, lambda));
            CHECK(rep.rhs == doctest::Approx(rep.mass * (std::log(rep.mass) - 1.0 - std::log(pi))));
            CHECK(std::abs(rep.margin) < 1e-4 * std::abs(rep.rhs));
        }
    }
    SUBCASE("a bumped ground state has a positive margin") {
        // Q (1 + 0.3 e^{-(r-1)^2}) rescaled to mass 8 pi; both sides by scipy.quad.
        const double c = 0.8345861777641765;
        const auto u = make_field(g, [c](double r) { return c * closed::Q(r) * (1.0 + 0.3 * std::exp(-(r - 1) * (r - 1))); },
                                  Parity::Even);
        const auto rep = check_logHLS(u);
        CHECK(rep.lhs == doctest::Approx(27.173878197647458).epsilon(1e-6));
        CHECK(rep.margin == doctest::Approx(0.04455325907935759).epsilon(2e-3));
    }
    SUBCASE("multiples of Q are extremal too") {
        // lhs - rhs scales by c under u -> c u in the mass-normalised form.
        for (double f : {0.3, 0.6, 1.5}) {
            CAPTURE(f);
            const auto rep = check_logHLS(scaled_Q(g, f));
            CHECK(rep.margin >= -1e-6);
            CHECK(std::abs(rep.margin) < 1e-5 * std::abs(rep.rhs));
        }
    }
}

TEST_CASE("virial rate") {
    const auto g = wide_grid();
    SUBCASE("vanishes at critical mass") {
        const auto rep = virial_rate(with_poisson(scaled_Q(g, 1.0)));
        CHECK(std::abs(rep.measured) < 1e-6);
        CHECK(std::abs(rep.predicted) < 1e-3);
    }
    SUBCASE("1.2 Q") {
        const auto rep = virial_rate(with_poisson(scaled_Q(g, 1.2)));
        CHECK(rep.measured == doctest::Approx(-7.68 * pi).epsilon(0.01));
        CHECK(rep.predicted == doctest::Approx(-7.68 * pi).epsilon(0.01));
    }
    SUBCASE("0.5 Q") {
        const auto rep = virial_rate(with_poisson(scaled_Q(g, 0.5)));
        CHECK(rep.measured > 0.0);
        CHECK(rep.measured == doctest::Approx(8.0 * pi).epsilon(0.01));
    }
}

TEST_CASE("Hardy suite") {
    GridSpec s;
    s.h0 = 0.01;
    s.stretch = 0.01;
    s.r_max = 40.0;
    const auto g = RadialGrid::make(s);
    SUBCASE("sharp power inequality on a gaussian") {
        const auto rep = check_hardy_suite(make_field(g, [](double r) { return std::exp(-r * r); }, Parity::Even), 0.0, 1.0, 10.0);
        const auto& p = rep.at("power");
        CHECK(p.holds);
        CHECK(p.constant <= 1.0);
    }
    SUBCASE("log inequalities on r e^{-r}") {
        const auto rep = check_hardy_suite(make_field(g, [](double r) { return r * std::exp(-r); }, Parity::Even), 0.0, 1.0, 10.0);
        for (const char* name : {"power", "log_ball", "log_exterior"}) {
            CAPTURE(name);
            CHECK(rep.at(name).holds);
            CHECK(std::isfinite(rep.at(name).constant));
        }
        CHECK_THROWS(rep.at("no_such_entry"));
    }
    SUBCASE("mollified indicator keeps the sharp direction") {
        const auto v = make_field(g, [](double r) { return 0.5 * std::erfc(8.0 * (r - 1.0)); }, Parity::Even);
        CHECK(check_hardy_suite(v, 0.0, 1.0, 10.0).at("power").constant <= 1.0);
    }
    SUBCASE("constants are stable under refinement") {
        GridSpec f = s;
        f.h0 = 0.005;
        f.stretch = 0.005;
        auto fn = [](double r) { return r * r * r * std::exp(-r * r); };
        const auto a = check_hardy_suite(make_field(g, fn, Parity::Even), 0.0, 1.0, 10.0);
        const auto b = check_hardy_suite(make_field(RadialGrid::make(f), fn, Parity::Even), 0.0, 1.0, 10.0);
        for (const auto& e : a.entries) {
            CAPTURE(e.name);
            CHECK(b.at(e.name).constant == doctest::Approx(e.constant).epsilon(0.2));
        }
    }
}

TEST_CASE("Poisson round trip") {
    const auto g = wide_grid(200.0, 0.02);
    for (auto fn : {+[](double r) { return std::exp(-r * r); }, +[](double r) { return 1.0 / (1.0 + r * r); }})
        CHECK(poisson_roundtrip_error(make_field(g, fn, Parity::Even)) < 1e-4);
}

TEST_CASE("rate-law fit") {
    SUBCASE("recovers the sharp law on its own ODE") {
        const auto fit = fit_rate_law(synthetic_rate_series(1e-4, 1e12, 2000, true));
        CHECK(fit.s_law_fitted);
        CHECK(fit.s_law_accepted);
        CHECK(fit.coefficient == doctest::Approx(1.0).epsilon(0.02));
        CHECK(fit.lambda_slope == doctest::Approx(1.0).epsilon(0.02));
        CHECK(fit.proxy_min > 0.0);
    }
    SUBCASE("rejects the law without the logarithm") {
        const auto fit = fit_rate_law(synthetic_rate_series(1e-4, 1e12, 2000, false));
        CHECK_FALSE(fit.s_law_accepted);
    }
    SUBCASE("too little range is reported, not fitted") {
        const auto fit = fit_rate_law(synthetic_rate_series(1e-4, 1.5, 50, true));
        CHECK_FALSE(fit.s_law_fitted);
        CHECK_FALSE(fit.note.empty());
    }
}

TEST_CASE("windowed slope") {
    std::vector<double> x, y;
    for (int i = 0; i < 40; ++i) {
        x.push_back(0.1 * i);
        y.push_back(3.0 * x.back() - 1.0);
    }
    for (double s : windowed_slope(x, y, 9)) CHECK(s == doctest::Approx(3.0).epsilon(1e-12));
}
