#pragma once

#include "entransformer/tensor.hpp"

namespace entransformer {

// The two halves of the sample energy score, each averaged over the batch:
//   fidelity   = mean_b (1/M) sum_m ||pred[m,b] - truth[b]||
//   dispersion = mean_b 1/(2M(M-1)) sum_i sum_j ||pred[i,b] - pred[j,b]||
// Norms are Frobenius over the flattened q x D block. With M == 1 the
// pairwise sum is empty and dispersion is exactly 0.
struct EnergyScoreTerms {
  Tensor fidelity;
  Tensor dispersion;
};

EnergyScoreTerms energy_score_terms(const Tensor& truth, const Tensor& pred);

// fidelity - dispersion for truth (B, q, D) and pred (M, B, q, D).
// Requires M >= 2.
Tensor energy_score_loss(const Tensor& truth, const Tensor& pred);

}  // namespace entransformer
