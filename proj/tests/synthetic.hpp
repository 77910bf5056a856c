#pragma once

#include <cmath>
#include <random>
#include <string>

#include "entransformer/panel.hpp"

namespace synthetic {

// Hourly panel starting 2021-01-04 00:00 (a Monday).
inline entransformer::SeriesPanel empty_panel(std::size_t length, std::size_t nodes) {
  entransformer::SeriesPanel p;
  p.granularity = entransformer::Granularity::kHourly;
  const std::int64_t start = *entransformer::parse_timestamp("2021-01-04 00:00");
  for (std::size_t t = 0; t < length; ++t) p.timestamps.push_back(start + static_cast<std::int64_t>(t) * 3600);
  for (std::size_t d = 0; d < nodes; ++d) p.node_names.push_back("node" + std::to_string(d));
  p.values.assign(length * nodes, 0.0);
  return p;
}

// Daily sinusoids with node-specific amplitude, phase and level plus i.i.d.
// Gaussian noise of standard deviation `noise_sd`.
inline entransformer::SeriesPanel noisy_sinusoids(std::size_t length, std::size_t nodes, double noise_sd,
                                                  std::uint64_t seed) {
  auto p = empty_panel(length, nodes);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> eps(0.0, noise_sd);
  const double pi = std::acos(-1.0);
  for (std::size_t t = 0; t < length; ++t) {
    for (std::size_t d = 0; d < nodes; ++d) {
      const double amp = 2.0 + static_cast<double>(d);
      const double phase = 0.7 * static_cast<double>(d);
      p.value(t, d) = 10.0 + 3.0 * static_cast<double>(d) + amp * std::sin(2 * pi * static_cast<double>(t) / 24.0 + phase) +
                      eps(rng);
    }
  }
  return p;
}

// x_t = phi x_{t-1} + e_t per node, independent nodes.
inline entransformer::SeriesPanel ar1(std::size_t length, std::size_t nodes, double phi, std::uint64_t seed) {
  auto p = empty_panel(length, nodes);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> eps(0.0, 1.0);
  for (std::size_t d = 0; d < nodes; ++d) {
    double x = 0.0;
    for (std::size_t t = 0; t < length; ++t) {
      x = phi * x + eps(rng);
      p.value(t, d) = x;
    }
  }
  return p;
}

// Sinusoid whose noise level itself follows the daily cycle.
inline entransformer::SeriesPanel heteroscedastic(std::size_t length, std::size_t nodes, std::uint64_t seed) {
  auto p = empty_panel(length, nodes);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> eps(0.0, 1.0);
  const double pi = std::acos(-1.0);
  for (std::size_t t = 0; t < length; ++t) {
    const double phase = 2 * pi * static_cast<double>(t) / 24.0;
    for (std::size_t d = 0; d < nodes; ++d) {
      p.value(t, d) = std::sin(phase) + (0.2 + 0.8 * (1 + std::cos(phase)) / 2) * eps(rng);
    }
  }
  return p;
}

}  // namespace synthetic
