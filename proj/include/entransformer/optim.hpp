#pragma once

#include <string>
#include <vector>

#include "entransformer/tensor.hpp"

namespace entransformer {

struct NamedParameter {
  std::string name;
  Tensor value;
};

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  std::size_t step = 0;
  std::vector<std::vector<double>> first_moment;
  std::vector<std::vector<double>> second_moment;
};

// One bias-corrected Adam update of every parameter from its grad(). A
// parameter without a grad is treated as having a zero gradient. Throws
// NumericError naming the first parameter whose gradient is not finite,
// before any parameter is modified.
void adam_step(std::vector<NamedParameter>& params, AdamState& state, const AdamConfig& cfg);

// Rescales all gradients so their joint Euclidean norm is at most max_norm.
// Returns the norm before clipping.
double clip_grad_norm(std::vector<NamedParameter>& params, double max_norm);

void zero_grads(std::vector<NamedParameter>& params);

}  // namespace entransformer
