#pragma once

namespace kslab {

// Value and first three derivatives of a scalar function at a point.
struct Jet3 {
    double v = 0.0;
    double d1 = 0.0;
    double d2 = 0.0;
    double d3 = 0.0;
};

Jet3 operator+(const Jet3& a, const Jet3& b);
Jet3 operator-(const Jet3& a, const Jet3& b);
Jet3 operator*(const Jet3& a, const Jet3& b);
Jet3 operator*(double s, const Jet3& a);
Jet3 reciprocal(const Jet3& a);
Jet3 operator/(const Jet3& a, const Jet3& b);

// Smooth radial cut-off: 1 on [0,1], 0 on [2,inf), C-infinity and monotone
// in between (built from exp(-1/t) bumps).
Jet3 cutoff_jet(double x);
double cutoff(double x);

// chi_R(r) = chi(r/R) together with its r-derivatives.
Jet3 cutoff_jet(double r, double R);
double cutoff(double r, double R);

}  // namespace kslab
