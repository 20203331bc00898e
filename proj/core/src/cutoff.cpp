#include "kslab/cutoff.hpp"

#include <cmath>

namespace kslab {

Jet3 operator+(const Jet3& a, const Jet3& b) {
    return {a.v + b.v, a.d1 + b.d1, a.d2 + b.d2, a.d3 + b.d3};
}

Jet3 operator-(const Jet3& a, const Jet3& b) {
    return {a.v - b.v, a.d1 - b.d1, a.d2 - b.d2, a.d3 - b.d3};
}

Jet3 operator*(const Jet3& a, const Jet3& b) {
    return {a.v * b.v,
            a.d1 * b.v + a.v * b.d1,
            a.d2 * b.v + 2.0 * a.d1 * b.d1 + a.v * b.d2,
            a.d3 * b.v + 3.0 * a.d2 * b.d1 + 3.0 * a.d1 * b.d2 + a.v * b.d3};
}

Jet3 operator*(double s, const Jet3& a) { return {s * a.v, s * a.d1, s * a.d2, s * a.d3}; }

Jet3 reciprocal(const Jet3& a) {
    const double s = a.v;
    const double s2 = s * s;
    return {1.0 / s,
            -a.d1 / s2,
            (2.0 * a.d1 * a.d1 - s * a.d2) / (s2 * s),
            (-6.0 * a.d1 * a.d1 * a.d1 + 6.0 * s * a.d1 * a.d2 - s2 * a.d3) / (s2 * s2)};
}

Jet3 operator/(const Jet3& a, const Jet3& b) { return a * reciprocal(b); }

namespace {

// exp(-1/t) for t > 0 and 0 otherwise, with derivatives in t.
Jet3 bump(double t) {
    if (t <= 0.0) return {};
    const double f = std::exp(-1.0 / t);
    const double t2 = t * t;
    const double t4 = t2 * t2;
    return {f, f / t2, f * (1.0 - 2.0 * t) / t4, f * (1.0 - 6.0 * t + 6.0 * t2) / (t4 * t2)};
}

}  // namespace

Jet3 cutoff_jet(double x) {
    if (x <= 1.0) return {1.0, 0.0, 0.0, 0.0};
    if (x >= 2.0) return {};
    Jet3 a = bump(2.0 - x);
    a.d1 = -a.d1;
    a.d3 = -a.d3;
    const Jet3 b = bump(x - 1.0);
    return a / (a + b);
}

double cutoff(double x) { return cutoff_jet(x).v; }

Jet3 cutoff_jet(double r, double R) {
    Jet3 j = cutoff_jet(r / R);
    const double s = 1.0 / R;
    j.d1 *= s;
    j.d2 *= s * s;
    j.d3 *= s * s * s;
    return j;
}

double cutoff(double r, double R) { return cutoff(r / R); }

}  // namespace kslab
