#include "kslab/ground_state.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace kslab {

namespace closed {

namespace {
double sq(double x) { return x * x; }
}  // namespace

double Q(double r) { return 8.0 / sq(1.0 + r * r); }
double dQ(double r) { return -32.0 * r / std::pow(1.0 + r * r, 3); }
double Q_log_derivative(double r) { return -4.0 * r / (1.0 + r * r); }
double phi_Q(double r) { return 2.0 * std::log1p(r * r); }
double dphi_Q(double r) { return 4.0 * r / (1.0 + r * r); }
double LambdaQ(double r) { return 16.0 * (1.0 - r * r) / std::pow(1.0 + r * r, 3); }
double dLambdaQ(double r) { return 64.0 * r * (r * r - 2.0) / std::pow(1.0 + r * r, 4); }
double Lambda2Q(double r) { return 2.0 * LambdaQ(r) + r * dLambdaQ(r); }
double phi_LambdaQ(double r) { return -4.0 / (1.0 + r * r); }
double dphi_LambdaQ(double r) { return r * Q(r); }
double m0(double r) { return 4.0 * r * r / (1.0 + r * r); }
double dm0(double r) { return r * Q(r); }
double d2m0(double r) { return 8.0 * (1.0 - 3.0 * r * r) / std::pow(1.0 + r * r, 3); }

double psi0(double r) { return r * r / sq(1.0 + r * r); }
double dpsi0(double r) { return 2.0 * r * (1.0 - r * r) / std::pow(1.0 + r * r, 3); }
double d2psi0(double r) {
    const double s = r * r;
    return (2.0 - 16.0 * s + 6.0 * s * s) / std::pow(1.0 + s, 4);
}

double psi1(double r) {
    const double s = r * r;
    const double l = r > 0.0 ? 4.0 * s * std::log(r) : 0.0;
    return (s * s + l - 1.0) / sq(1.0 + s);
}
double dpsi1(double r) {
    if (r == 0.0) return 0.0;
    const double s = r * r;
    return 8.0 * r * (1.0 + s - (s - 1.0) * std::log(r)) / std::pow(1.0 + s, 3);
}
double d2psi1(double r) {
    // From L0 psi1 = 0: psi1'' = (1/r + Q'/Q) psi1' - Q psi1; log-singular at r = 0.
    if (r == 0.0) return -std::numeric_limits<double>::infinity();
    return (1.0 / r + Q_log_derivative(r)) * dpsi1(r) - Q(r) * psi1(r);
}
double wronskian(double r) { return 2.0 * r / sq(1.0 + r * r); }

double d1(double r) { return -2.0 * std::log1p(r * r); }
double dd1(double r) { return -4.0 * r / (1.0 + r * r); }
double d2d1(double r) { return -4.0 * (1.0 - r * r) / sq(1.0 + r * r); }
double d3d1(double r) { return 8.0 * r * (r * r - 3.0) / std::pow(1.0 + r * r, 3); }

}  // namespace closed

GroundState make_ground_state(GridPtr grid) {
    return {make_field(grid, closed::Q, Parity::Even),
            make_field(grid, closed::phi_Q, Parity::Even),
            make_field(grid, closed::LambdaQ, Parity::Even),
            make_field(grid, closed::phi_LambdaQ, Parity::Even),
            make_field(grid, closed::m0, Parity::Even)};
}

HomogeneousBasis make_homogeneous_basis(GridPtr grid) {
    return {make_field(grid, closed::psi0, Parity::Even),
            make_field(grid, closed::psi1, Parity::Even),
            make_field(grid, closed::wronskian, Parity::Odd)};
}

RadialField apply_L0(const RadialField& m) {
    if (m.parity != Parity::Even) throw std::invalid_argument("apply_L0: m must be even");
    const auto d1 = m.grid->derivative(m.values, Parity::Even, 1);
    const auto d2 = m.grid->derivative(m.values, Parity::Even, 2);
    RadialField out{m.grid, std::vector<double>(m.size()), Parity::Even};
    // At r = 0, m'/r -> m''(0).
    out.values[0] = -closed::Q(0.0) * m[0];
    for (std::size_t i = 1; i < m.size(); ++i) {
        const double r = m.r(i);
        out.values[i] = -d2[i] + (1.0 / r + closed::Q_log_derivative(r)) * d1[i] - closed::Q(r) * m[i];
    }
    return out;
}

RadialField apply_L1(const RadialField& d) {
    if (d.parity != Parity::Even) throw std::invalid_argument("apply_L1: d must be even");
    const auto d1 = d.grid->derivative(d.values, Parity::Even, 1);
    const auto d2 = d.grid->derivative(d.values, Parity::Even, 2);
    RadialField out{d.grid, std::vector<double>(d.size()), Parity::Even};
    out.values[0] = 0.0;
    for (std::size_t i = 1; i < d.size(); ++i) out.values[i] = d2[i] - d1[i] / d.r(i);
    return out;
}

}  // namespace kslab
