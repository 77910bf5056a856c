#pragma once

#include <span>
#include <vector>

#include "entransformer/ensemble.hpp"

namespace entransformer {

// Sample CRPS of an empirical ensemble against an observation:
// (1/M) sum |x_m - u| - (1/(2M^2)) sum_i sum_j |x_i - x_j|.
double crps_sample(double truth, std::span<const double> samples);

struct CrpsSumResult {
  double value = 0.0;         // normalized unless requested otherwise
  double unnormalized = 0.0;  // mean CRPS of the aggregated series
  double normalizer = 1.0;    // mean |sum_d y| over scored cells
  std::vector<double> per_window;  // same normalization as `value`
};

// Sums truth and every sample over the node axis, scores each (window, step)
// with crps_sample, averages, and divides by the mean absolute aggregated
// truth unless `normalize` is false.
CrpsSumResult crps_sum(const TruthBlocks& truth, const ForecastEnsemble& ensemble, bool normalize = true);

struct NrmseSumResult {
  double value = 0.0;
  std::vector<double> per_window;
};

// sqrt(mean((yhat - y)^2) / mean(|y|)) on node-aggregated series. `point`
// must have the truth layout (W, q, D).
NrmseSumResult nrmse_sum(const TruthBlocks& truth, const TruthBlocks& point);

// Mid-point empirical CDF at the observation:
// (#{x_m < y} + 0.5 #{x_m == y}) / M.
double pit_value(double truth, std::span<const double> samples);
// One PIT value per (window, step, node) cell.
std::vector<double> pit_values(const TruthBlocks& truth, const ForecastEnsemble& ensemble);

struct QQPoint {
  double theoretical;
  double empirical;
};

// Empirical quantiles of the PIT array at levels k/(n+1), k = 1..n.
std::vector<QQPoint> pit_qq_points(std::span<const double> pit, std::size_t n_points);

// Linear interpolation between order statistics (h = (n-1) * level).
double empirical_quantile(std::span<const double> sorted, double level);

struct QuantileForecast {
  std::vector<double> levels;
  std::size_t windows = 0, horizon = 0, nodes = 0;
  std::vector<double> values;  // (L, W, q, D)

  double at(std::size_t l, std::size_t w, std::size_t s, std::size_t d) const {
    return values[((l * windows + w) * horizon + s) * nodes + d];
  }
};

QuantileForecast forecast_quantiles(const ForecastEnsemble& ensemble, const std::vector<double>& levels);

// Per-cell ensemble median in the truth layout.
TruthBlocks ensemble_median(const ForecastEnsemble& ensemble);

// Kolmogorov-Smirnov distance between the PIT array and the uniform law. With
// ensemble_size == 0 the reference is U(0,1); otherwise it is the discrete
// uniform law on {0, 1/M, ..., 1} that PIT values of a calibrated M-member
// ensemble follow, compared at the support points.
double ks_uniform_statistic(std::span<const double> pit, std::size_t ensemble_size = 0);
// Asymptotic critical value c(alpha)/sqrt(n); supports alpha in {0.1, 0.05, 0.01}.
double ks_critical_value(std::size_t n, double alpha);

}  // namespace entransformer
