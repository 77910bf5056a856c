#pragma once

#include <cstdint>
#include <random>
#include <string>

#include "entransformer/tensor.hpp"

namespace entransformer {

enum class NoiseDistribution { kGaussian, kUniform };

std::string to_string(NoiseDistribution dist);
NoiseDistribution parse_noise_distribution(const std::string& name);

// Pre-additive input noise. sigma is the standard deviation for the Gaussian
// law and the half-width for the uniform law.
struct NoiseConfig {
  NoiseDistribution distribution = NoiseDistribution::kGaussian;
  double sigma = 1.0;
  std::uint64_t rng_seed = 0;

  void validate() const;
};

// Repeat-interleave along axis 0: rows come out as [x0 x M, x1 x M, ...].
Tensor expand_batch(const Tensor& x, std::size_t replicas);

// Inverse grouping of expand_batch output: (B*M, ...) -> (M, B, ...), so
// index [m, b] is replica m of window b.
Tensor to_sample_major(const Tensor& expanded, std::size_t replicas);

// i.i.d. draws from the configured law. A single tensor covers the whole
// shape, so replicas of one window get independent perturbations.
Tensor sample_noise(const Shape& shape, const NoiseConfig& cfg, std::mt19937_64& rng);

// x + noise, with noise = sample_noise(x.shape(), cfg, rng). Returns x
// unchanged (bitwise) when sigma == 0.
Tensor inject_noise(const Tensor& x, const NoiseConfig& cfg, std::mt19937_64& rng);

}  // namespace entransformer
