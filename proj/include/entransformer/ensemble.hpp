#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <random>
#include <string>
#include <vector>

#include "entransformer/noise.hpp"
#include "entransformer/preprocess.hpp"
#include "entransformer/transformer.hpp"
#include "entransformer/windows.hpp"

namespace entransformer {

// M sampled trajectories per window in original units, laid out (M, W, q, D).
struct ForecastEnsemble {
  std::size_t samples = 0;
  std::size_t windows = 0;
  std::size_t horizon = 0;
  std::size_t nodes = 0;
  std::vector<double> values;
  std::vector<std::int64_t> window_starts;  // timestamp of each window's first forecast step
  std::vector<std::string> node_names;
  std::uint64_t seed = 0;

  std::size_t index(std::size_t m, std::size_t w, std::size_t s, std::size_t d) const {
    return ((m * windows + w) * horizon + s) * nodes + d;
  }
  double at(std::size_t m, std::size_t w, std::size_t s, std::size_t d) const { return values[index(m, w, s, d)]; }
};

// Observed future blocks aligned with an ensemble, laid out (W, q, D).
struct TruthBlocks {
  std::size_t windows = 0;
  std::size_t horizon = 0;
  std::size_t nodes = 0;
  std::vector<double> values;
  std::vector<std::int64_t> window_starts;
  std::vector<std::string> node_names;

  double at(std::size_t w, std::size_t s, std::size_t d) const { return values[(w * horizon + s) * nodes + d]; }
};

// expand_batch -> inject_noise -> encode/decode -> (M, W, q, D) -> original
// units. Dropout is disabled. Windows are processed in chunks; the noise
// stream is consumed in the same row order as a single pass would, so the
// result does not depend on the chunk size.
ForecastEnsemble generate_ensemble(const TransformerModel& model, const WindowBatch& batch, std::size_t samples,
                                   const NoiseConfig& noise, std::mt19937_64& rng, const Normalization& norm);

// Flat export: header `window_start,sample_id,step,node,value`, one row per
// (window, sample, step, node), values with 9 significant digits.
void write_ensemble_csv(std::ostream& out, const ForecastEnsemble& ensemble);
void write_ensemble_files(const std::filesystem::path& csv_path, const ForecastEnsemble& ensemble);
ForecastEnsemble read_ensemble_csv(const std::filesystem::path& path);

// Header `window_start,step,node,value`.
void write_truth_csv(std::ostream& out, const TruthBlocks& truth);
TruthBlocks read_truth_csv(const std::filesystem::path& path);

std::string format_value(double v);  // %.9g

}  // namespace entransformer
