#include "entransformer/energy_score.hpp"

#include "entransformer/errors.hpp"
#include "entransformer/ops.hpp"

namespace entransformer {

EnergyScoreTerms energy_score_terms(const Tensor& truth, const Tensor& pred) {
  if (truth.rank() < 1 || pred.rank() != truth.rank() + 1 ||
      !std::equal(truth.shape().begin(), truth.shape().end(), pred.shape().begin() + 1)) {
    throw DimensionError("energy score: pred " + shape_string(pred.shape()) + " must be (M, " +
                         shape_string(truth.shape()).substr(1));
  }
  const std::size_t samples = pred.dim(0);
  const std::size_t batch = truth.dim(0);
  if (samples < 1 || batch < 1) throw ContractViolation("energy score: empty ensemble or batch");
  const std::size_t width = truth.size() / batch;

  Tensor pred_rows = reshape(pred, {samples * batch, width});
  Tensor truth_rows = reshape(truth, {batch, width});

  std::vector<std::size_t> truth_index(samples * batch);
  for (std::size_t m = 0; m < samples; ++m) {
    for (std::size_t b = 0; b < batch; ++b) truth_index[m * batch + b] = b;
  }
  Tensor residual_norms = row_l2_norms(sub(pred_rows, gather_rows(truth_rows, truth_index)));
  Tensor fidelity = scale(sum(residual_norms), 1.0 / static_cast<double>(samples * batch));

  if (samples == 1) return {fidelity, Tensor::scalar(0.0)};

  // Ordered pairs (i, j) including i == j, whose norms are exactly 0.
  std::vector<std::size_t> left, right;
  left.reserve(samples * samples * batch);
  right.reserve(samples * samples * batch);
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t i = 0; i < samples; ++i) {
      for (std::size_t j = 0; j < samples; ++j) {
        left.push_back(i * batch + b);
        right.push_back(j * batch + b);
      }
    }
  }
  Tensor pair_norms = row_l2_norms(sub(gather_rows(pred_rows, left), gather_rows(pred_rows, right)));
  const double m = static_cast<double>(samples);
  Tensor dispersion = scale(sum(pair_norms), 1.0 / (2.0 * m * (m - 1.0) * static_cast<double>(batch)));
  return {fidelity, dispersion};
}

Tensor energy_score_loss(const Tensor& truth, const Tensor& pred) {
  if (pred.rank() < 1 || pred.dim(0) < 2) {
    throw ContractViolation("energy_score_loss requires M >= 2 samples: the pairwise term divides by M - 1");
  }
  auto terms = energy_score_terms(truth, pred);
  return sub(terms.fidelity, terms.dispersion);
}

}  // namespace entransformer
