#pragma once

#include "kslab/radial_grid.hpp"

namespace kslab {

// Closed forms around the stationary bubble Q = 8/(1+r^2)^2.
namespace closed {

double Q(double r);
double dQ(double r);
double Q_log_derivative(double r);  // Q'/Q = -4r/(1+r^2)
double phi_Q(double r);             // 2 log(1+r^2)
double dphi_Q(double r);            // 4r/(1+r^2)
double LambdaQ(double r);           // 2Q + rQ'
double dLambdaQ(double r);
double Lambda2Q(double r);          // Lambda applied twice
double phi_LambdaQ(double r);       // -4/(1+r^2)
double dphi_LambdaQ(double r);      // rQ
double m0(double r);                // 4r^2/(1+r^2)
double dm0(double r);
double d2m0(double r);

double psi0(double r);
double dpsi0(double r);
double d2psi0(double r);
double psi1(double r);
double dpsi1(double r);
double d2psi1(double r);
double wronskian(double r);  // psi1' psi0 - psi1 psi0' = rQ/4

// d1 = -2 log(1+r^2) and its first three derivatives.
double d1(double r);
double dd1(double r);
double d2d1(double r);
double d3d1(double r);

}  // namespace closed

struct GroundState {
    RadialField Q;
    RadialField phi_Q;
    RadialField LambdaQ;
    RadialField phi_LambdaQ;
    RadialField m0;
};

struct HomogeneousBasis {
    RadialField psi0;
    RadialField psi1;
    RadialField wronskian;
};

GroundState make_ground_state(GridPtr grid);
HomogeneousBasis make_homogeneous_basis(GridPtr grid);

// L0 m = -m'' + (1/r + Q'/Q) m' - Q m, discretised on the grid (m even).
RadialField apply_L0(const RadialField& m);
// L1 d = d'' - d'/r (d even).
RadialField apply_L1(const RadialField& d);

}  // namespace kslab
