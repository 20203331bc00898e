#pragma once

#include <string>
#include <vector>

#include "kslab/operators.hpp"
#include "kslab/radial_grid.hpp"
#include "kslab/timeseries.hpp"

namespace kslab {

inline constexpr double kEntropyFloor = 1e-30;

struct EnergyReport {
    double mass = 0.0;
    double free_energy = 0.0;
    double entropy = 0.0;        // int u log u
    double interaction = 0.0;    // int u v
    double dirichlet = 0.0;      // -int v Lap v (= int |grad v|^2 when v decays)
    double second_moment = 0.0;  // int |x|^2 u
    double floored_mass = 0.0;   // mass where u < kEntropyFloor
};

// E(u,v) = int u log u + int u v - 1/2 int v Lap v. The potential is rebuilt
// from its gradient with the log-convolution constant, so that for v = phi_u
// the value is the log-HLS functional. Throws if u < -tol max|u| somewhere.
EnergyReport free_energy(const FieldPair& pair, double negative_tolerance = 1e-10);

struct LogHLSReport {
    double mass = 0.0;
    double lhs = 0.0;   // int u log u + (4 pi/M) int phi_u u
    double rhs = 0.0;   // M (log M - 1 - log pi), attained by the Q scaling family
    double margin = 0.0;
};

LogHLSReport check_logHLS(const RadialField& u);

enum class Coupling { ParabolicElliptic };

struct VirialReport {
    double mass = 0.0;
    double measured = 0.0;   // -2 int x.(grad u + u grad phi_u)
    double predicted = 0.0;  // 4 M (1 - M/8pi)
};

VirialReport virial_rate(const FieldPair& pair, Coupling coupling = Coupling::ParabolicElliptic);

// One weighted Hardy inequality "small <= C big"; constant = small/big.
struct HardyEntry {
    std::string name;
    double small = 0.0;
    double big = 0.0;
    double constant = 0.0;
    bool holds = false;
};

struct HardyReport {
    double alpha = 0.0;
    double gamma = 0.0;
    double R = 0.0;
    std::vector<HardyEntry> entries;

    const HardyEntry& at(const std::string& name) const;
};

// Entries: "power" (sharp, constant <= 1), "log_ball", "log_exterior",
// "log_level1", "log_level2", "log_level3". The origin node of singular
// weights is dropped; admissible v make that node's contribution vanish.
HardyReport check_hardy_suite(const RadialField& v, double alpha, double gamma, double R);

// max |phi_{Lap v} - v| / max |v|.
double poisson_roundtrip_error(const RadialField& v);

struct RateFitOptions {
    double min_decades = 0.5;        // required b range for the s-law fit
    double coefficient_tol = 0.2;
    double residual_tol = 0.05;      // RMS of 2sb - x - c over the x range
    int rate_window = 5;             // records in each local slope fit
};

struct RateFit {
    bool s_law_fitted = false;
    bool s_law_accepted = false;
    std::string note;
    double coefficient = 0.0;        // slope of 2 s b_hat against log s - log log s
    double intercept = 0.0;
    double unit_slope_residual = 0.0;
    double lambda_slope = 0.0;       // -lambda_s/lambda against b_hat, through the origin
    double lambda_slope_residual = 0.0;
    double proxy_min = 0.0;          // -lambda lambda_t exp(2 sqrt|log lambda|)
    double proxy_max = 0.0;
};

RateFit fit_rate_law(const TimeSeries& series, const RateFitOptions& opt = {});

// Local least-squares slope of y against x over a centred window of records.
std::vector<double> windowed_slope(const std::vector<double>& x, const std::vector<double>& y, int window);

// -lambda_s/lambda at each record from a windowed slope of log lambda.
std::vector<double> lambda_rate(const TimeSeries& series, int window);

// b_hat_s |log b_hat| / b_hat^2 at each record; the sharp law predicts -2.
std::vector<double> b_hat_law(const TimeSeries& series, int window);

// Series generated from b_s = -2 b^2/|log b| (or -b^2 without the log),
// lambda_s/lambda = -b, t_s = lambda^2, sampled at log-spaced s.
TimeSeries synthetic_rate_series(double b0, double s_end_over_s0, int samples, bool with_log = true);

}  // namespace kslab
