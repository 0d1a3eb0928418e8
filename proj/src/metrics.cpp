#include "sno/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "sno/errors.hpp"

namespace sno {

namespace {

void check_pair(const Matrix& s, const Matrix& shat) {
    if (!s.same_shape(shat)) {
        throw DimensionError("metric operands have different shapes: " + shape_string(s) +
                             " vs " + shape_string(shat));
    }
    if (s.empty()) {
        throw DimensionError("metric operands are empty");
    }
}

} // namespace

double rmse(const Matrix& s, const Matrix& shat) {
    check_pair(s, shat);
    double total = 0.0;
    const double* a = s.data();
    const double* b = shat.data();
    for (std::size_t i = 0; i < s.size(); ++i) {
        const double r = a[i] - b[i];
        total += r * r;
    }
    return std::sqrt(total / static_cast<double>(s.size()));
}

double mae(const Matrix& s, const Matrix& shat) {
    check_pair(s, shat);
    double total = 0.0;
    const double* a = s.data();
    const double* b = shat.data();
    for (std::size_t i = 0; i < s.size(); ++i) {
        total += std::abs(a[i] - b[i]);
    }
    return total / static_cast<double>(s.size());
}

MaxMaeResult max_mae(const Matrix& s, const Matrix& shat) {
    check_pair(s, shat);
    MaxMaeResult result;
    result.series.resize(s.rows());
    for (std::size_t t = 0; t < s.rows(); ++t) {
        double total = 0.0;
        const double* a = s.row(t);
        const double* b = shat.row(t);
        for (std::size_t j = 0; j < s.cols(); ++j) {
            total += std::abs(a[j] - b[j]);
        }
        result.series[t] = total / static_cast<double>(s.cols());
    }
    result.max = *std::max_element(result.series.begin(), result.series.end());
    return result;
}

std::vector<double> pointwise_difference(std::span<const double> s_t,
                                         std::span<const double> shat_t) {
    if (s_t.size() != shat_t.size()) {
        throw DimensionError("pointwise_difference operands have lengths " +
                             std::to_string(s_t.size()) + " vs " +
                             std::to_string(shat_t.size()));
    }
    if (s_t.empty()) {
        throw DimensionError("pointwise_difference operands are empty");
    }
    std::vector<double> diff(s_t.size());
    for (std::size_t j = 0; j < s_t.size(); ++j) {
        diff[j] = std::abs(s_t[j] - shat_t[j]);
    }
    return diff;
}

MetricsReport compute_metrics(const Matrix& s, const Matrix& shat) {
    MetricsReport report;
    report.rmse = rmse(s, shat);
    report.mae = mae(s, shat);
    const MaxMaeResult mm = max_mae(s, shat);
    report.max_mae_series = mm.series;
    report.max_mae = mm.max;
    report.n_points = s.cols();
    report.n_timestamps = s.rows();
    return report;
}

} // namespace sno
