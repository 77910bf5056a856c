#pragma once

#include <functional>
#include <random>
#include <vector>

#include "entransformer/config.hpp"
#include "entransformer/ensemble.hpp"
#include "entransformer/optim.hpp"
#include "entransformer/preprocess.hpp"
#include "entransformer/transformer.hpp"
#include "entransformer/windows.hpp"

namespace entransformer {

// Imputed and standardized panel plus the statistics needed to undo it.
// Rows [0, train_end) are the only rows used for fitting.
struct PreparedData {
  SeriesPanel raw_imputed;
  SeriesPanel standardized;
  Normalization normalization;
  std::size_t train_end = 0;
};

// Imputes rows before train_end with cfg.train_imputation and the rest with
// cfg.test_imputation, fits the normalization on [0, train_end) and
// standardizes every row (lag channels reuse their source node's stats).
PreparedData prepare_data(const SeriesPanel& raw, const RunConfig& cfg, std::size_t train_end);

struct StepResult {
  double loss = 0.0;        // before the update
  double fidelity = 0.0;
  double dispersion = 0.0;
  double grad_norm = 0.0;   // before clipping
};

// One model, one optimizer, one sequence of steps.
class Trainer {
 public:
  // allow_single_sample admits M_train = 1 (pairwise term empty), used only
  // by the ensemble-size cost sweep.
  Trainer(TransformerModel& model, const TrainConfig& train, const NoiseConfig& noise,
          bool allow_single_sample = false);

  // concat (done by the batch) -> repeat-interleave -> noise -> encode/decode
  // -> (M, B, q, D) -> energy score -> backward -> clip -> Adam.
  StepResult step(const WindowBatch& batch);

  // Loss without gradient or update; consumes noise like step().
  double evaluate(const WindowBatch& batch);

  const AdamState& optimizer_state() const { return adam_; }

 private:
  TransformerModel& model_;
  TrainConfig train_;
  NoiseConfig noise_;
  AdamState adam_;
  std::mt19937_64 noise_rng_;
  std::mt19937_64 dropout_rng_;
};

struct FitResult {
  TransformerModel model;
  std::vector<double> epoch_loss;        // mean training loss per epoch
  std::vector<double> validation_loss;   // per epoch; empty without a validation fraction
  std::size_t steps = 0;
};

struct FitOptions {
  bool allow_single_sample = false;
  // Called after each epoch with (epoch index, mean loss).
  std::function<void(std::size_t, double)> on_epoch;
};

// Trains on every admissible window whose targets precede data.train_end,
// reshuffled each epoch with the run seed. Throws NumericError with the
// epoch and batch index when a loss is not finite.
FitResult fit(const PreparedData& data, const RunConfig& cfg, const FitOptions& options = {});

// Windows of the rolling evaluation split, built from the standardized panel.
WindowBatch evaluation_batch(const PreparedData& data, const RunConfig& cfg, const std::vector<EvalWindow>& windows);
TruthBlocks truth_blocks(const PreparedData& data, const std::vector<EvalWindow>& windows);

// Ensemble for the given evaluation windows with window/node metadata.
ForecastEnsemble forecast_windows(const TransformerModel& model, const PreparedData& data, const RunConfig& cfg,
                                  const std::vector<EvalWindow>& windows, std::size_t samples,
                                  std::uint64_t noise_seed);

struct CostPoint {
  std::size_t m_train = 0;
  double seconds = 0.0;
};

// Wall time of a full fit for each training ensemble size, all else fixed.
std::vector<CostPoint> measure_training_cost(const PreparedData& data, const RunConfig& cfg,
                                             const std::vector<std::size_t>& m_values);

struct LineFit {
  double intercept = 0.0;
  double slope = 0.0;
  double r_squared = 0.0;
};

LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace entransformer
