#pragma once

#include <vector>

namespace kslab {

struct TimeRecord {
    double t = 0.0;
    double s = 0.0;
    double lambda = 1.0;       // modulated scale
    double b = 0.0;
    double b_hat = 0.0;
    double mass = 0.0;
    double free_energy = 0.0;
    double E2_norm = 0.0;      // ||L E||_{X_Q}
    double lyapunov = 0.0;     // <M L E, L E>
    double residual_phi = 0.0;
    double residual_lstar_phi = 0.0;
    double gauge_rate = 0.0;   // d log(lambda_gauge)/ds used by the rescaled solver
    double min_density = 0.0;
};

struct TimeSeries {
    std::vector<TimeRecord> records;

    bool empty() const { return records.empty(); }
    std::size_t size() const { return records.size(); }
};

}  // namespace kslab
