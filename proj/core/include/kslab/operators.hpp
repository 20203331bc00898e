#pragma once

#include <string>
#include <vector>

#include "kslab/radial_grid.hpp"

namespace kslab {

enum class Representation { Primitive, PartialMass };

// A radial state: density u and the radial derivative of the potential v
// (primitive form), or the partial masses (m_u, n_v) with u = m'/r and
// dv/dr = n/r.
struct FieldPair {
    RadialField density;
    RadialField chem_gradient;
    Representation representation = Representation::Primitive;

    GridPtr grid() const { return density.grid; }
};

FieldPair to_partial_mass(const FieldPair& p);
FieldPair to_primitive(const FieldPair& p);

// <(u,v),(f,g)> = int u f + int grad v . grad g over R^2, radially.
double pairing(const FieldPair& a, const FieldPair& b);

// int u^2/Q + int |grad v|^2.
double norm_XQ_sq(const FieldPair& a);

FieldPair lambda_Q_pair(GridPtr grid);          // (Lambda Q, r Q)
FieldPair zero_pair(GridPtr grid);

// M(u,v) = (u/Q + v, v - phi_u); the second slot is returned as a gradient.
// v is recovered from its gradient with decay normalisation.
FieldPair apply_M(const FieldPair& e);

// <M u, u> in gradient form, int u^2/Q + int |grad v|^2 - 2 int grad v . grad phi_u,
// which equals the definition when int u = 0.
double quadratic_M(const FieldPair& u);

// Removes from u its X_Q-orthogonal components along the Riesz representers
// of the functionals <., c_k>, so that <u, c_k> = 0 afterwards.
FieldPair project_out(const FieldPair& u, const std::vector<FieldPair>& constraints);

// L(eps,eta) = (div(Q grad(eps/Q + eta)), Lap eta - eps); second slot as gradient.
FieldPair apply_L(const FieldPair& e);

// L*(eps,eta) = (div(Q grad eps)/Q + Lap eta, Lap eta - phi_{div(Q grad eps)}).
FieldPair apply_Lstar(const FieldPair& e);

// First-order factor: L = div A, A(w,z) = (w' + phi_Q' w + Q z', z' - m_w/r).
FieldPair apply_A(const FieldPair& e);

// Phi_{0,B} = (chi_B r^2, -4 int_0^r log(1+t^2)/t chi_B dt) and its image
// under L*, both in closed form.
FieldPair Phi0(GridPtr grid, double B);
FieldPair Lstar_Phi0(GridPtr grid, double B);
// Second slot of Phi_{0,B} as a potential (for reporting).
RadialField Phi0_potential(GridPtr grid, double B);

// Threshold below which |<Phi_{0,M}, Lambda Q>| is treated as degenerate:
// the value of 32 pi log M at M = 4.
double phi_pairing_floor();

struct PhiMReport {
    double M = 0.0;
    double c_M = 0.0;
    double Phi0_T1 = 0.0;        // <Phi_{0,M}, T1>
    double Phi0_LambdaQ = 0.0;   // <Phi_{0,M}, Lambda Q>
    double PhiM_T1 = 0.0;        // should vanish
    double PhiM_LambdaQ = 0.0;   // ~ -32 pi log M
};

struct PhiMDirections {
    FieldPair Phi_M;
    FieldPair Lstar_Phi_M;
    PhiMReport report;
};

// Grid suited to Phi_M work: r_max >= 50 M.
GridSpec phi_grid_spec(double M, double h0 = 0.02, double stretch = 0.01);

// Builds Phi_M = Phi_{0,M} + c_M L* Phi_{0,M} on the grid; the level-one
// profile is rebuilt on the same grid. Throws if M is too small.
PhiMDirections build_Phi_M(GridPtr grid, double M);

struct CoercivityResult {
    double delta = 0.0;         // minimal constrained Rayleigh quotient
    double delta_log_weighted = 0.0;
    double unconstrained_min = 0.0;
    int dimension = 0;
};

// Coarse grid used for the dense Rayleigh-quotient problems.
GridSpec coercivity_grid_spec(double r_max, double h0 = 0.1, double stretch = 0.08);

// Minimal <M u, u>/||u||^2_{X_Q} over int u = 0, <u, Lambda Q> = 0.
CoercivityResult coercivity_M(GridPtr grid);

// Minimal <M u, u>/||u||^2_{X_Q} over int u = 0, <u, Phi_M> = 0 (u ranges over
// the image of L, characterised by those two conditions).
CoercivityResult coercivity_L(GridPtr grid, double M);

// <M E2, E2> with E2 = L e.
double lyapunov_functional(const FieldPair& e);

// Ratio sigma_min / sigma_next of the discrete L in X_Q-scaled variables;
// a small value confirms a one-dimensional kernel.
struct KernelGap {
    double sigma_min = 0.0;
    double sigma_next = 0.0;
    double ratio = 0.0;
    double kernel_overlap = 0.0;  // |cos| between the kernel vector and Lambda Q
};
KernelGap kernel_gap(GridPtr grid);

}  // namespace kslab
