#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "entransformer/config.hpp"
#include "entransformer/preprocess.hpp"
#include "entransformer/transformer.hpp"

namespace entransformer {

inline constexpr int kCheckpointVersion = 1;

// Self-describing model container: run config, node set, normalization
// statistics and every named parameter tensor.
struct Checkpoint {
  RunConfig config;
  std::vector<std::string> node_names;
  Granularity granularity = Granularity::kHourly;
  Normalization normalization;
  TransformerModel model;
};

// JSON layout:
// {"format": "entransformer-checkpoint", "version": 1,
//  "config": {key: value, ...}, "nodes": [...], "granularity": "hourly",
//  "normalization": {"mean": [...], "stddev": [...]},
//  "parameters": [{"name": ..., "shape": [...], "data": [...]}, ...]}
// Doubles are written in shortest round-trip form, so save/load is exact.
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace entransformer
