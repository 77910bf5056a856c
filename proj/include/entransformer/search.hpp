#pragma once

#include <cstdint>
#include <filesystem>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "entransformer/config.hpp"
#include "entransformer/errors.hpp"
#include "entransformer/panel.hpp"

namespace entransformer {

// Candidate values for each tuned setting. d_model is n_head times a sampled
// multiplier, so every draw satisfies the head divisibility constraint.
// Ranges are closed intervals; learning_rate is sampled log-uniformly.
struct SearchSpace {
  std::vector<std::size_t> n_head{2, 4, 6, 8, 10, 12, 14, 16};
  std::vector<std::size_t> d_model_multiplier{8, 9, 10, 11, 12, 13, 14, 15, 16, 17, 18, 19, 20, 21, 22, 23, 24};
  std::vector<std::size_t> n_layers{1, 2, 3, 4};
  std::vector<std::size_t> d_ff{128, 256, 512, 1024};
  double dropout_min = 0.0, dropout_max = 0.4;
  std::vector<Activation> activation{Activation::kRelu, Activation::kGelu};
  double learning_rate_min = 1e-5, learning_rate_max = 1e-2;
  std::vector<std::size_t> batch_size{32, 64, 128};
  std::vector<NoiseDistribution> noise{NoiseDistribution::kUniform, NoiseDistribution::kGaussian};
  double sigma_min = 0.5, sigma_max = 2.0;
  std::vector<std::size_t> m_train{2, 3, 4, 5, 6, 7, 8};

  void validate() const;
};

// Flat `key = value` overrides of the default space. Sets are comma lists
// (n_head d_model_multiplier n_layers d_ff activation batch_size noise
// m_train), intervals are `lo,hi` (dropout learning_rate sigma).
SearchSpace parse_search_space(const std::string& text);
SearchSpace load_search_space(const std::filesystem::path& path);

// Draws one configuration: the base config with every tuned key replaced.
RunConfig sample_config(const SearchSpace& space, const RunConfig& base, std::mt19937_64& rng);

struct Trial {
  RunConfig config;
  double validation_crps_sum = std::numeric_limits<double>::quiet_NaN();  // NaN when the trial failed
  std::size_t epochs_completed = 0;
  double wall_seconds = 0.0;
  std::string error;  // empty on success
};

struct SearchResult {
  RunConfig best;
  std::size_t best_index = 0;
  std::vector<Trial> trials;
};

// Raised when no trial produced a finite validation score.
class SearchFailed : public NumericError {
 public:
  SearchFailed(const std::string& what, std::vector<Trial> trials) : NumericError(what), trials_(std::move(trials)) {}
  const std::vector<Trial>& trials() const { return trials_; }

 private:
  std::vector<Trial> trials_;
};

struct SearchOptions {
  std::size_t validation_samples = 100;
};

// Each trial trains on targets before the last q rows of the training range
// [0, train_end) and is scored by CRPS_sum on that q-row block, which lies
// after every training target and before the test range.
SearchResult random_search(const SearchSpace& space, std::size_t budget, const SeriesPanel& panel,
                           std::size_t train_end, const RunConfig& base, std::uint64_t seed,
                           const SearchOptions& options = {});

// One JSON object per line: {"config": {...}, "validation_crps_sum": x|null,
// "epochs_completed": n, "wall_seconds": s[, "error": "..."]}.
std::string trial_log_jsonl(const std::vector<Trial>& trials);

}  // namespace entransformer
