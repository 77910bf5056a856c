#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>

#include "entransformer/noise.hpp"
#include "entransformer/panel.hpp"
#include "entransformer/transformer.hpp"
#include "entransformer/windows.hpp"

namespace entransformer {

struct TrainConfig {
  std::size_t epochs = 30;
  std::size_t batch_size = 32;
  double learning_rate = 1e-3;
  std::size_t m_train = 4;
  std::uint64_t seed = 0;
  double validation_fraction = 0.0;  // trailing share of training windows held out for monitoring
  double grad_clip = 10.0;           // global gradient-norm cap

  void validate() const;
};

enum class Imputation { kSeasonalMean, kZero };

std::string to_string(Imputation imp);
Imputation parse_imputation(const std::string& name);

// Everything one run needs. The model's context/horizon/input/output
// extents are derived from the window spec and the panel's node count.
struct RunConfig {
  WindowSpec window;
  TransformerConfig model;
  NoiseConfig noise;
  TrainConfig train;
  Imputation train_imputation = Imputation::kSeasonalMean;
  Imputation test_imputation = Imputation::kZero;
  std::optional<Granularity> granularity;

  // Fills model extents for a panel with `nodes` series.
  TransformerConfig model_for(std::size_t nodes) const;
  void validate() const;
};

// Flat `key = value` text, `#` starts a comment. Unknown keys and bad
// values raise ConfigError naming the key. Keys:
//   context_length horizon lags rolling_windows calendar granularity
//   n_head d_model n_layers d_ff dropout activation
//   noise sigma
//   epochs batch_size learning_rate m_train seed validation_fraction grad_clip
//   train_imputation test_imputation
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::filesystem::path& path);
void apply_setting(RunConfig& cfg, const std::string& key, const std::string& value);

std::map<std::string, std::string> config_settings(const RunConfig& cfg);
std::string format_config(const RunConfig& cfg);

// Deterministic per-purpose seed stream derived from the run seed.
std::uint64_t derive_seed(std::uint64_t seed, const std::string& purpose);

}  // namespace entransformer
