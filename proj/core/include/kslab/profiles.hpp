#pragma once

#include <array>
#include <string>
#include <vector>

#include "kslab/radial_grid.hpp"

namespace kslab {

// A radial field together with its first two r-derivatives, all obtained
// from closed forms or quadrature rather than finite differences.
struct FieldJet {
    RadialField v;
    RadialField d1;
    RadialField d2;
};

// Solves L0 m = -f by variation of constants; m = O(r^4) at the origin.
FieldJet invert_L0_jet(const RadialField& f);
RadialField invert_L0(const RadialField& f);

// Solves L1 d = f with d(0) = 0 and homogeneous part c r^2.
FieldJet invert_L1_jet(const RadialField& f, double c);
RadialField invert_L1(const RadialField& f, double c);

// Level-b profile: L(m1, d1) = (r m0', r n0').
struct LevelOne {
    RadialField T1;       // m1'/r
    RadialField S1_grad;  // n1/r
    FieldJet m1;
    FieldJet d1;
    FieldJet n1;
};

LevelOne build_T1S1(GridPtr grid);

struct RegionCheck {
    double core_residual = 0.0;     // Sigma vs c_b (T1, dS1) for r <= B0/4, relative
    double outer_residual = 0.0;    // Sigma vs (4 psi1'/r, 4 psi1/r) for r >= 6B0, relative to max |Sigma|
    double outer_mass_residual = 0.0;  // max |m_Sigma - 4 psi1| for r >= 6B0
    double mid_sigma1_const = 0.0;  // max |Sigma1| |log b| r^2 on [B0/4, 6B0]
    double mid_sigma2_const = 0.0;  // max |dSigma2| r on [B0/4, 6B0]
    double mid_mass_deviation = 0.0;  // max |m_Sigma - 4 psi1| on [B0/4, 6B0]
};

// Radiation term flattening the level-b^2 tail. The matching constant solves
// c_b (c1 - c2) = 1 with c2 = int tau D/(1+tau^2)^2 and d_Sigma = c_b D.
struct Radiation {
    double b = 0.0;
    double B0 = 0.0;
    double c_b = 0.0;
    double c_b_quadratic_root = 0.0;  // (c1 - sqrt(c1^2 - 4 c2)) / (2 c2), NaN if the discriminant is negative
    double c1 = 0.0;
    double c2 = 0.0;
    std::array<double, 3> beta{};  // beta_1, beta_2, beta_3
    FieldJet m_Sigma;
    FieldJet d_Sigma;
    RadialField delta_m_Sigma;  // m_Sigma - c_b m1, vanishes for r <= B0/4
    RadialField Sigma1;         // m_Sigma'/r
    RadialField Sigma2_grad;    // (d_Sigma + m_Sigma)/r
    RegionCheck regions;
};

Radiation build_radiation(const LevelOne& one, double b);

// Level-b^2 profile: L(m2, d2) = (r m1' - m1' n1/r, r n1') - (m_Sigma, d_Sigma).
struct LevelTwo {
    RadialField T2;
    RadialField S2_grad;
    FieldJet m2;
    FieldJet d2;
    FieldJet n2;
};

LevelTwo build_T2S2(const LevelOne& one, const Radiation& rad);

struct Localized {
    RadialField Qb_tilde;
    RadialField Pb_tilde_grad;
    RadialField Pb_tilde;        // with Pb_tilde(0) = phi_Q(0) = 0
    RadialField breveT1;         // chi_{B0/4} T1
    RadialField breveT2_grad;    // chi_{B0/4} dS1
};

Localized localize(const LevelOne& one, const LevelTwo& two, double b);

struct NormReport {
    double psi1_L2 = 0.0;            // int |Psi1|^2
    double L1_over_Q = 0.0;          // int |L^(1)(Psi)|^2 / Q
    double grad_psi2_weighted = 0.0; // int |grad Psi2|^2 / (1+r^2)
    double L2_sq = 0.0;              // int |L^(2)(Psi)|^2
    double Q_gradM1_sq = 0.0;        // int Q |grad M^(1)(Psi)|^2
    double grad_psi2_L2 = 0.0;       // int |grad Psi2|^2
    double degenerate_flux = 0.0;    // <L Psi, Phi_{0,B0}>
};

struct ProfileError {
    RadialField Psi1;
    RadialField Psi2_grad;
    NormReport norms;
};

struct BoundConstants {
    double T1_tail = 0.0;       // max |T1| (1+r^4)/r^2
    double S1_tail = 0.0;       // max |dS1| (1+r^2)/r
    double m2_inner = 0.0;      // max |m2|/r^4 on r <= 1
    double m2_mid = 0.0;        // max |m2| |log b| / (r^2 (1+|log(r sqrt b)|)) on [1, 6B0]
    double m2_outer = 0.0;      // max |m2| b |log b| on [6B0, 2B1]
    double T2_mid = 0.0;        // max |T2| |log b| / (1+|log(r sqrt b)|) on [1, 6B0]
    double S2_growth = 0.0;     // max |dS2| / (r (1+|log r|)) on [1, 2B1]
};

// Everything built for one value of b on one grid.
struct ProfileFamily {
    double b = 0.0;
    double B0 = 0.0;
    double B1 = 0.0;
    GridPtr grid;
    LevelOne one;
    Radiation rad;
    LevelTwo two;
    Localized loc;
    ProfileError error;
    BoundConstants bounds;
};

struct ProfileOptions {
    double h0 = 0.02;
    double stretch = 0.02;
    double r_max_over_B1 = 5.0;
    int order = 6;
};

GridSpec profile_grid_spec(double b, const ProfileOptions& opt = {});

// Largest b for which profiles are built (asymptotic regime guard).
inline constexpr double kProfileBMax = 1e-2;

// Validates 0 < b <= kProfileBMax and r_max >= 4 B1; throws std::invalid_argument.
void check_profile_preconditions(double b, double r_max);

ProfileFamily build_profile_family(double b, const ProfileOptions& opt = {});
ProfileFamily build_profile_family(double b, GridPtr grid);

ProfileError profile_error(const LevelOne& one, const Radiation& rad, const LevelTwo& two, double b);
BoundConstants measure_bounds(const LevelOne& one, const LevelTwo& two, double b);

}  // namespace kslab
