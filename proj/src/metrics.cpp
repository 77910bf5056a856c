#include "entransformer/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "entransformer/errors.hpp"

namespace entransformer {
namespace {

void check_aligned(const TruthBlocks& truth, const ForecastEnsemble& ens) {
  if (truth.windows != ens.windows || truth.horizon != ens.horizon || truth.nodes != ens.nodes) {
    throw DimensionError("truth (W=" + std::to_string(truth.windows) + ", q=" + std::to_string(truth.horizon) +
                         ", D=" + std::to_string(truth.nodes) + ") and ensemble (W=" + std::to_string(ens.windows) +
                         ", q=" + std::to_string(ens.horizon) + ", D=" + std::to_string(ens.nodes) +
                         ") are not aligned");
  }
  if (ens.samples < 1) throw ContractViolation("ensemble has no samples");
}

}  // namespace

double crps_sample(double truth, std::span<const double> samples) {
  if (samples.empty()) throw ContractViolation("crps_sample requires at least one sample");
  const std::size_t m = samples.size();
  std::vector<double> sorted(samples.begin(), samples.end());
  std::sort(sorted.begin(), sorted.end());
  double abs_err = 0.0;
  double spread = 0.0;  // sum_{i<j} (x_(j) - x_(i))
  for (std::size_t k = 0; k < m; ++k) {
    abs_err += std::abs(sorted[k] - truth);
    spread += sorted[k] * (2.0 * static_cast<double>(k) - static_cast<double>(m) + 1.0);
  }
  const double md = static_cast<double>(m);
  return abs_err / md - spread / (md * md);
}

CrpsSumResult crps_sum(const TruthBlocks& truth, const ForecastEnsemble& ens, bool normalize) {
  check_aligned(truth, ens);
  CrpsSumResult out;
  std::vector<double> agg_samples(ens.samples);
  double total = 0.0, abs_truth = 0.0;
  std::vector<double> window_total(ens.windows, 0.0);
  std::vector<double> window_abs(ens.windows, 0.0);
  for (std::size_t w = 0; w < ens.windows; ++w) {
    for (std::size_t s = 0; s < ens.horizon; ++s) {
      double y = 0.0;
      for (std::size_t d = 0; d < ens.nodes; ++d) y += truth.at(w, s, d);
      for (std::size_t m = 0; m < ens.samples; ++m) {
        double acc = 0.0;
        for (std::size_t d = 0; d < ens.nodes; ++d) acc += ens.at(m, w, s, d);
        agg_samples[m] = acc;
      }
      const double score = crps_sample(y, agg_samples);
      total += score;
      abs_truth += std::abs(y);
      window_total[w] += score;
      window_abs[w] += std::abs(y);
    }
  }
  const double cells = static_cast<double>(ens.windows * ens.horizon);
  out.unnormalized = total / cells;
  out.normalizer = abs_truth / cells;
  const double q = static_cast<double>(ens.horizon);
  if (normalize) {
    if (out.normalizer == 0.0) {
      throw DataError("CRPS_sum normalizer (mean |aggregated truth|) is zero; use the unnormalized mode");
    }
    out.value = out.unnormalized / out.normalizer;
    for (std::size_t w = 0; w < ens.windows; ++w) {
      out.per_window.push_back(window_abs[w] > 0.0 ? (window_total[w] / q) / (window_abs[w] / q)
                                                   : std::numeric_limits<double>::quiet_NaN());
    }
  } else {
    out.value = out.unnormalized;
    for (std::size_t w = 0; w < ens.windows; ++w) out.per_window.push_back(window_total[w] / q);
  }
  return out;
}

NrmseSumResult nrmse_sum(const TruthBlocks& truth, const TruthBlocks& point) {
  if (truth.windows != point.windows || truth.horizon != point.horizon || truth.nodes != point.nodes) {
    throw DimensionError("nrmse_sum: truth and point forecast are not aligned");
  }
  auto score = [&](std::size_t w0, std::size_t w1) {
    double se = 0.0, abs_y = 0.0;
    for (std::size_t w = w0; w < w1; ++w) {
      for (std::size_t s = 0; s < truth.horizon; ++s) {
        double y = 0.0, yhat = 0.0;
        for (std::size_t d = 0; d < truth.nodes; ++d) {
          y += truth.at(w, s, d);
          yhat += point.at(w, s, d);
        }
        se += (yhat - y) * (yhat - y);
        abs_y += std::abs(y);
      }
    }
    if (abs_y == 0.0) throw DataError("NRMSE_sum normalizer (mean |aggregated truth|) is zero");
    return std::sqrt(se / abs_y);  // both means share the cell count
  };
  NrmseSumResult out;
  out.value = score(0, truth.windows);
  for (std::size_t w = 0; w < truth.windows; ++w) out.per_window.push_back(score(w, w + 1));
  return out;
}

double pit_value(double truth, std::span<const double> samples) {
  if (samples.empty()) throw ContractViolation("pit_value requires at least one sample");
  double below = 0.0, ties = 0.0;
  for (double x : samples) {
    if (x < truth) {
      below += 1.0;
    } else if (x == truth) {
      ties += 1.0;
    }
  }
  return (below + 0.5 * ties) / static_cast<double>(samples.size());
}

std::vector<double> pit_values(const TruthBlocks& truth, const ForecastEnsemble& ens) {
  check_aligned(truth, ens);
  std::vector<double> out;
  out.reserve(ens.windows * ens.horizon * ens.nodes);
  std::vector<double> cell(ens.samples);
  for (std::size_t w = 0; w < ens.windows; ++w) {
    for (std::size_t s = 0; s < ens.horizon; ++s) {
      for (std::size_t d = 0; d < ens.nodes; ++d) {
        for (std::size_t m = 0; m < ens.samples; ++m) cell[m] = ens.at(m, w, s, d);
        out.push_back(pit_value(truth.at(w, s, d), cell));
      }
    }
  }
  return out;
}

double empirical_quantile(std::span<const double> sorted, double level) {
  if (sorted.empty()) throw ContractViolation("empirical_quantile of empty sample");
  const double h = (static_cast<double>(sorted.size()) - 1.0) * level;
  const std::size_t lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = h - static_cast<double>(lo);
  if (frac == 0.0) return sorted[lo];
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

std::vector<QQPoint> pit_qq_points(std::span<const double> pit, std::size_t n_points) {
  if (pit.empty()) throw ContractViolation("pit_qq_points: empty PIT array");
  if (n_points < 1) throw ContractViolation("pit_qq_points: need at least one point");
  std::vector<double> sorted(pit.begin(), pit.end());
  std::sort(sorted.begin(), sorted.end());
  std::vector<QQPoint> out;
  out.reserve(n_points);
  for (std::size_t k = 1; k <= n_points; ++k) {
    const double level = static_cast<double>(k) / static_cast<double>(n_points + 1);
    out.push_back({level, empirical_quantile(sorted, level)});
  }
  return out;
}

QuantileForecast forecast_quantiles(const ForecastEnsemble& ens, const std::vector<double>& levels) {
  for (double l : levels) {
    if (!(l > 0.0 && l < 1.0)) throw ContractViolation("quantile levels must lie in (0, 1)");
  }
  QuantileForecast out;
  out.levels = levels;
  out.windows = ens.windows;
  out.horizon = ens.horizon;
  out.nodes = ens.nodes;
  out.values.assign(levels.size() * ens.windows * ens.horizon * ens.nodes, 0.0);
  std::vector<double> cell(ens.samples);
  for (std::size_t w = 0; w < ens.windows; ++w) {
    for (std::size_t s = 0; s < ens.horizon; ++s) {
      for (std::size_t d = 0; d < ens.nodes; ++d) {
        for (std::size_t m = 0; m < ens.samples; ++m) cell[m] = ens.at(m, w, s, d);
        std::sort(cell.begin(), cell.end());
        for (std::size_t l = 0; l < levels.size(); ++l) {
          out.values[((l * ens.windows + w) * ens.horizon + s) * ens.nodes + d] = empirical_quantile(cell, levels[l]);
        }
      }
    }
  }
  return out;
}

TruthBlocks ensemble_median(const ForecastEnsemble& ens) {
  QuantileForecast q = forecast_quantiles(ens, {0.5});
  TruthBlocks out;
  out.windows = ens.windows;
  out.horizon = ens.horizon;
  out.nodes = ens.nodes;
  out.values = std::move(q.values);
  out.window_starts = ens.window_starts;
  out.node_names = ens.node_names;
  return out;
}

double ks_uniform_statistic(std::span<const double> pit, std::size_t ensemble_size) {
  if (pit.empty()) throw ContractViolation("ks_uniform_statistic: empty sample");
  const double n = static_cast<double>(pit.size());
  if (ensemble_size > 0) {
    const std::size_t m = ensemble_size;
    std::vector<double> counts(m + 1, 0.0);
    for (double p : pit) {
      const double scaled = std::clamp(p * static_cast<double>(m), 0.0, static_cast<double>(m));
      counts[static_cast<std::size_t>(std::floor(scaled + 1e-9))] += 1.0;
    }
    double cum = 0.0, worst = 0.0;
    for (std::size_t k = 0; k <= m; ++k) {
      cum += counts[k];
      const double reference = static_cast<double>(k + 1) / static_cast<double>(m + 1);
      worst = std::max(worst, std::abs(cum / n - reference));
    }
    return worst;
  }
  std::vector<double> sorted(pit.begin(), pit.end());
  std::sort(sorted.begin(), sorted.end());
  double worst = 0.0;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    const double x = std::clamp(sorted[i], 0.0, 1.0);
    worst = std::max({worst, std::abs(static_cast<double>(i + 1) / n - x), std::abs(x - static_cast<double>(i) / n)});
  }
  return worst;
}

double ks_critical_value(std::size_t n, double alpha) {
  double c = 0.0;
  if (std::abs(alpha - 0.01) < 1e-12) {
    c = 1.628;
  } else if (std::abs(alpha - 0.05) < 1e-12) {
    c = 1.358;
  } else if (std::abs(alpha - 0.1) < 1e-12) {
    c = 1.224;
  } else {
    throw ContractViolation("ks_critical_value: unsupported alpha");
  }
  return c / std::sqrt(static_cast<double>(n));
}

}  // namespace entransformer
