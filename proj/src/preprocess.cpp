#include "entransformer/preprocess.hpp"

#include <algorithm>
#include <cmath>

#include "entransformer/errors.hpp"

namespace entransformer {
namespace {

void check_range(const SeriesPanel& panel, IndexRange range) {
  if (range.begin > range.end || range.end > panel.length()) {
    throw DataError("row range [" + std::to_string(range.begin) + ", " + std::to_string(range.end) +
                    ") is outside the panel of length " + std::to_string(panel.length()));
  }
}

}  // namespace

Normalization fit_standardize(const SeriesPanel& panel, IndexRange range) {
  check_range(panel, range);
  Normalization norm;
  for (std::size_t d = 0; d < panel.nodes(); ++d) {
    double total = 0.0;
    std::size_t count = 0;
    for (std::size_t t = range.begin; t < range.end; ++t) {
      if (panel.missing(t, d)) continue;
      total += panel.value(t, d);
      ++count;
    }
    if (count == 0) throw DataError("node '" + panel.node_names[d] + "' has no observed values in the training range");
    const double mu = total / static_cast<double>(count);
    double ss = 0.0;
    for (std::size_t t = range.begin; t < range.end; ++t) {
      if (!panel.missing(t, d)) ss += (panel.value(t, d) - mu) * (panel.value(t, d) - mu);
    }
    norm.mean.push_back(mu);
    norm.stddev.push_back(std::max(std::sqrt(ss / static_cast<double>(count)), kStdFloor));
  }
  return norm;
}

SeriesPanel apply_standardize(const SeriesPanel& panel, const Normalization& norm) {
  if (norm.nodes() != panel.nodes()) throw DataError("normalization covers a different node count than the panel");
  SeriesPanel out = panel;
  for (std::size_t t = 0; t < out.length(); ++t) {
    for (std::size_t d = 0; d < out.nodes(); ++d) {
      if (!out.missing(t, d)) out.value(t, d) = norm.standardize(out.value(t, d), d);
    }
  }
  return out;
}

SeriesPanel destandardize(const SeriesPanel& panel, const Normalization& norm) {
  if (norm.nodes() != panel.nodes()) throw DataError("normalization covers a different node count than the panel");
  SeriesPanel out = panel;
  for (std::size_t t = 0; t < out.length(); ++t) {
    for (std::size_t d = 0; d < out.nodes(); ++d) {
      if (!out.missing(t, d)) out.value(t, d) = norm.destandardize(out.value(t, d), d);
    }
  }
  return out;
}

SeriesPanel impute_seasonal_mean(const SeriesPanel& panel, std::size_t period, IndexRange range) {
  if (period < 1) throw ContractViolation("impute_seasonal_mean: season length must be >= 1");
  check_range(panel, range);
  SeriesPanel out = panel;
  for (std::size_t d = 0; d < panel.nodes(); ++d) {
    std::vector<double> slot_sum(period, 0.0);
    std::vector<std::size_t> slot_count(period, 0);
    double total = 0.0;
    std::size_t count = 0;
    bool any_missing = false;
    for (std::size_t t = range.begin; t < range.end; ++t) {
      if (panel.missing(t, d)) {
        any_missing = true;
        continue;
      }
      slot_sum[t % period] += panel.value(t, d);
      ++slot_count[t % period];
      total += panel.value(t, d);
      ++count;
    }
    if (!any_missing) continue;
    if (count == 0) throw DataError("node '" + panel.node_names[d] + "' has no observed values to impute from");
    const double node_mean = total / static_cast<double>(count);
    for (std::size_t t = range.begin; t < range.end; ++t) {
      if (!panel.missing(t, d)) continue;
      const std::size_t slot = t % period;
      out.value(t, d) = slot_count[slot] ? slot_sum[slot] / static_cast<double>(slot_count[slot]) : node_mean;
    }
  }
  return out;
}

SeriesPanel impute_zero(const SeriesPanel& panel, IndexRange range) {
  check_range(panel, range);
  SeriesPanel out = panel;
  for (std::size_t t = range.begin; t < range.end; ++t) {
    for (std::size_t d = 0; d < out.nodes(); ++d) {
      if (out.missing(t, d)) out.value(t, d) = 0.0;
    }
  }
  return out;
}

}  // namespace entransformer
