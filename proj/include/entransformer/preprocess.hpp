#pragma once

#include <vector>

#include "entransformer/panel.hpp"

namespace entransformer {

inline constexpr double kStdFloor = 1e-8;

// Per-node location/scale fitted on the training split. Population standard
// deviation, floored at kStdFloor.
struct Normalization {
  std::vector<double> mean;
  std::vector<double> stddev;

  std::size_t nodes() const { return mean.size(); }
  double standardize(double value, std::size_t node) const { return (value - mean[node]) / stddev[node]; }
  double destandardize(double value, std::size_t node) const { return value * stddev[node] + mean[node]; }
};

// Fits on observed (non-missing) cells of rows in `range`. Throws DataError
// naming the node when a node has no observed value there.
Normalization fit_standardize(const SeriesPanel& panel, IndexRange range);
SeriesPanel apply_standardize(const SeriesPanel& panel, const Normalization& norm);
SeriesPanel destandardize(const SeriesPanel& panel, const Normalization& norm);

// Replaces each missing cell in `range` with the mean of the observed cells of
// the same node whose row index is congruent modulo season_length, taken over
// `range`. Falls back to the node's mean over `range` when the slot has no
// observation. Throws DataError for a node with no observed value in range.
SeriesPanel impute_seasonal_mean(const SeriesPanel& panel, std::size_t season_length, IndexRange range);

// Sets every missing cell in `range` to 0.
SeriesPanel impute_zero(const SeriesPanel& panel, IndexRange range);

}  // namespace entransformer
