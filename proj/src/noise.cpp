#include "entransformer/noise.hpp"

#include <cmath>
#include <numeric>

#include "entransformer/errors.hpp"
#include "entransformer/ops.hpp"

namespace entransformer {

std::string to_string(NoiseDistribution dist) {
  return dist == NoiseDistribution::kGaussian ? "gaussian" : "uniform";
}

NoiseDistribution parse_noise_distribution(const std::string& name) {
  if (name == "gaussian" || name == "normal") return NoiseDistribution::kGaussian;
  if (name == "uniform") return NoiseDistribution::kUniform;
  throw ConfigError("noise", "unknown noise distribution '" + name + "' (expected gaussian or uniform)");
}

void NoiseConfig::validate() const {
  if (!(sigma >= 0.0) || !std::isfinite(sigma)) throw ConfigError("sigma", "must be a finite value >= 0");
}

Tensor expand_batch(const Tensor& x, std::size_t replicas) {
  if (replicas < 1) throw ContractViolation("expand_batch: replica count M must be >= 1");
  if (x.rank() < 1) throw DimensionError("expand_batch: input must have a batch axis");
  std::vector<std::size_t> rows;
  rows.reserve(x.dim(0) * replicas);
  for (std::size_t b = 0; b < x.dim(0); ++b) rows.insert(rows.end(), replicas, b);
  return gather_rows(x, rows);
}

Tensor to_sample_major(const Tensor& expanded, std::size_t replicas) {
  if (replicas < 1) throw ContractViolation("to_sample_major: replica count M must be >= 1");
  if (expanded.rank() < 1 || expanded.dim(0) % replicas != 0) {
    throw DimensionError("to_sample_major: batch extent of " + shape_string(expanded.shape()) +
                         " is not divisible by M=" + std::to_string(replicas));
  }
  const std::size_t batch = expanded.dim(0) / replicas;
  std::vector<std::size_t> rows;
  rows.reserve(expanded.dim(0));
  for (std::size_t m = 0; m < replicas; ++m) {
    for (std::size_t b = 0; b < batch; ++b) rows.push_back(b * replicas + m);
  }
  Tensor grouped = gather_rows(expanded, rows);
  Shape shape = expanded.shape();
  shape[0] = batch;
  shape.insert(shape.begin(), replicas);
  return reshape(grouped, std::move(shape));
}

Tensor sample_noise(const Shape& shape, const NoiseConfig& cfg, std::mt19937_64& rng) {
  cfg.validate();
  std::vector<double> values(shape_size(shape), 0.0);
  if (cfg.sigma == 0.0) return Tensor::from(shape, std::move(values));
  if (cfg.distribution == NoiseDistribution::kGaussian) {
    std::normal_distribution<double> law(0.0, cfg.sigma);
    for (double& v : values) v = law(rng);
  } else {
    std::uniform_real_distribution<double> law(-cfg.sigma, cfg.sigma);
    for (double& v : values) v = law(rng);
  }
  return Tensor::from(shape, std::move(values));
}

Tensor inject_noise(const Tensor& x, const NoiseConfig& cfg, std::mt19937_64& rng) {
  for (double v : x.data()) {
    if (!std::isfinite(v)) throw NumericError("inject_noise: non-finite input value");
  }
  if (cfg.sigma == 0.0) return x;
  return add(x, sample_noise(x.shape(), cfg, rng));
}

}  // namespace entransformer
