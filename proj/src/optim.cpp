#include "entransformer/optim.hpp"

#include <cmath>

#include "entransformer/errors.hpp"

namespace entransformer {

void adam_step(std::vector<NamedParameter>& params, AdamState& state, const AdamConfig& cfg) {
  if (state.first_moment.empty()) {
    for (const auto& p : params) {
      state.first_moment.emplace_back(p.value.size(), 0.0);
      state.second_moment.emplace_back(p.value.size(), 0.0);
    }
  }
  if (state.first_moment.size() != params.size()) {
    throw DimensionError("adam_step: optimizer state tracks " + std::to_string(state.first_moment.size()) +
                         " parameters, got " + std::to_string(params.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& p = params[i];
    if (state.first_moment[i].size() != p.value.size()) {
      throw DimensionError("adam_step: state shape mismatch for parameter '" + p.name + "'");
    }
    for (double g : p.value.grad()) {
      if (!std::isfinite(g)) throw NumericError("non-finite gradient in parameter '" + p.name + "'");
    }
  }

  ++state.step;
  const double t = static_cast<double>(state.step);
  const double bias1 = 1.0 - std::pow(cfg.beta1, t);
  const double bias2 = 1.0 - std::pow(cfg.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor& value = params[i].value;
    if (!value.has_grad()) continue;
    auto grad = value.grad();
    auto data = value.mutable_data();
    auto& m = state.first_moment[i];
    auto& v = state.second_moment[i];
    for (std::size_t j = 0; j < data.size(); ++j) {
      m[j] = cfg.beta1 * m[j] + (1.0 - cfg.beta1) * grad[j];
      v[j] = cfg.beta2 * v[j] + (1.0 - cfg.beta2) * grad[j] * grad[j];
      const double m_hat = m[j] / bias1;
      const double v_hat = v[j] / bias2;
      data[j] -= cfg.learning_rate * m_hat / (std::sqrt(v_hat) + cfg.eps);
    }
  }
}

double clip_grad_norm(std::vector<NamedParameter>& params, double max_norm) {
  double ss = 0.0;
  for (const auto& p : params) {
    for (double g : p.value.grad()) ss += g * g;
  }
  const double norm = std::sqrt(ss);
  if (norm > max_norm && norm > 0.0) {
    const double factor = max_norm / norm;
    for (auto& p : params) {
      if (!p.value.has_grad()) continue;
      for (double& g : p.value.mutable_grad()) g *= factor;
    }
  }
  return norm;
}

void zero_grads(std::vector<NamedParameter>& params) {
  for (auto& p : params) p.value.zero_grad();
}

}  // namespace entransformer
