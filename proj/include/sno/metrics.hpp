#ifndef SNO_METRICS_HPP
#define SNO_METRICS_HPP

#include <cstddef>
#include <span>
#include <vector>

#include "sno/matrix.hpp"

namespace sno {

/// Error metrics between a reference field S and a prediction Shat, both
/// shaped nt x n (timestamps by spatial points), in physical units.
struct MetricsReport {
    double rmse = 0.0;
    double mae = 0.0;
    std::vector<double> max_mae_series; // per-timestamp MAE
    double max_mae = 0.0;
    std::size_t n_points = 0;
    std::size_t n_timestamps = 0;
};

double rmse(const Matrix& s, const Matrix& shat);

double mae(const Matrix& s, const Matrix& shat);

struct MaxMaeResult {
    std::vector<double> series;
    double max = 0.0;
};

/// Per-timestamp mean absolute error and its maximum over timestamps.
MaxMaeResult max_mae(const Matrix& s, const Matrix& shat);

/// |S - Shat| for a single timestamp, as an exportable field.
std::vector<double> pointwise_difference(std::span<const double> s_t,
                                         std::span<const double> shat_t);

MetricsReport compute_metrics(const Matrix& s, const Matrix& shat);

} // namespace sno

#endif
