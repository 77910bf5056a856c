#include "entransformer/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include "entransformer/energy_score.hpp"
#include "entransformer/errors.hpp"
#include "entransformer/ops.hpp"

namespace entransformer {

PreparedData prepare_data(const SeriesPanel& raw, const RunConfig& cfg, std::size_t train_end) {
  raw.validate();
  if (train_end < 1 || train_end > raw.length()) throw DataError("training range is empty or exceeds the panel");
  auto impute = [&](const SeriesPanel& panel, Imputation how, IndexRange range) {
    if (range.size() == 0) return panel;
    return how == Imputation::kZero ? impute_zero(panel, range)
                                    : impute_seasonal_mean(panel, season_length(panel.granularity), range);
  };
  PreparedData out;
  out.train_end = train_end;
  out.raw_imputed = impute(raw, cfg.train_imputation, {0, train_end});
  out.raw_imputed = impute(out.raw_imputed, cfg.test_imputation, {train_end, raw.length()});
  out.normalization = fit_standardize(out.raw_imputed, {0, train_end});
  out.standardized = apply_standardize(out.raw_imputed, out.normalization);
  return out;
}

Trainer::Trainer(TransformerModel& model, const TrainConfig& train, const NoiseConfig& noise, bool allow_single_sample)
    : model_(model),
      train_(train),
      noise_(noise),
      noise_rng_(noise.rng_seed),
      dropout_rng_(derive_seed(train.seed, "dropout")) {
  if (train_.m_train < (allow_single_sample ? 1u : 2u)) {
    throw ContractViolation("Trainer: M_train must be >= 2 for the energy score");
  }
}

StepResult Trainer::step(const WindowBatch& batch) {
  const std::size_t replicas = train_.m_train;
  ForwardContext ctx{true, &dropout_rng_};
  Tensor expanded = expand_batch(batch.inputs, replicas);
  Tensor raw = forward_pass(model_, expanded, replicas, noise_, noise_rng_, ctx);
  Tensor pred = to_sample_major(raw, replicas);
  EnergyScoreTerms terms = energy_score_terms(batch.targets, pred);
  Tensor loss = sub(terms.fidelity, terms.dispersion);

  StepResult result{loss.item(), terms.fidelity.item(), terms.dispersion.item(), 0.0};
  if (!std::isfinite(result.loss)) throw NumericError("non-finite loss");

  auto& params = model_.parameters();
  zero_grads(params);
  backward(loss);
  result.grad_norm = clip_grad_norm(params, train_.grad_clip);
  adam_step(params, adam_, AdamConfig{train_.learning_rate, 0.9, 0.999, 1e-8});
  return result;
}

double Trainer::evaluate(const WindowBatch& batch) {
  const std::size_t replicas = train_.m_train;
  ForwardContext ctx;
  Tensor expanded = expand_batch(batch.inputs, replicas);
  Tensor raw = forward_pass(model_, expanded, replicas, noise_, noise_rng_, ctx);
  EnergyScoreTerms terms = energy_score_terms(batch.targets, to_sample_major(raw, replicas));
  return terms.fidelity.item() - terms.dispersion.item();
}

FitResult fit(const PreparedData& data, const RunConfig& cfg, const FitOptions& options) {
  if (options.allow_single_sample) {
    RunConfig probe = cfg;
    probe.train.m_train = std::max<std::size_t>(2, cfg.train.m_train);
    probe.validate();
  } else {
    cfg.validate();
  }
  const std::size_t nodes = data.standardized.nodes();
  FitResult result{TransformerModel(cfg.model_for(nodes), derive_seed(cfg.train.seed, "init")), {}, {}, 0};

  auto anchors = admissible_anchors(data.train_end, cfg.window);
  if (anchors.empty()) {
    throw DataError("no admissible training window: need at least " +
                    std::to_string(cfg.window.max_lag() + cfg.window.context + cfg.window.horizon) +
                    " training rows, have " + std::to_string(data.train_end));
  }
  const std::size_t n_val =
      static_cast<std::size_t>(std::floor(cfg.train.validation_fraction * static_cast<double>(anchors.size())));
  std::vector<std::size_t> val_anchors(anchors.end() - static_cast<std::ptrdiff_t>(n_val), anchors.end());
  anchors.resize(anchors.size() - n_val);
  if (anchors.empty()) throw DataError("validation_fraction leaves no training windows");

  Trainer trainer(result.model, cfg.train, cfg.noise, options.allow_single_sample);
  std::mt19937_64 shuffle_rng(derive_seed(cfg.train.seed, "shuffle"));
  const std::size_t bs = cfg.train.batch_size;

  for (std::size_t epoch = 0; epoch < cfg.train.epochs; ++epoch) {
    std::shuffle(anchors.begin(), anchors.end(), shuffle_rng);
    double total = 0.0;
    std::size_t count = 0;
    for (std::size_t start = 0, b = 0; start < anchors.size(); start += bs, ++b) {
      std::vector<std::size_t> chunk(anchors.begin() + start, anchors.begin() + std::min(anchors.size(), start + bs));
      WindowBatch batch = make_batch(data.standardized, cfg.window, chunk);
      try {
        StepResult r = trainer.step(batch);
        total += r.loss * static_cast<double>(chunk.size());
        count += chunk.size();
        ++result.steps;
      } catch (const NumericError& e) {
        throw NumericError("training diverged at epoch " + std::to_string(epoch) + ", batch " + std::to_string(b) +
                           ": " + e.what());
      }
    }
    result.epoch_loss.push_back(total / static_cast<double>(count));
    if (!val_anchors.empty()) {
      double vt = 0.0;
      for (std::size_t start = 0; start < val_anchors.size(); start += bs) {
        std::vector<std::size_t> chunk(val_anchors.begin() + start,
                                       val_anchors.begin() + std::min(val_anchors.size(), start + bs));
        vt += trainer.evaluate(make_batch(data.standardized, cfg.window, chunk)) * static_cast<double>(chunk.size());
      }
      result.validation_loss.push_back(vt / static_cast<double>(val_anchors.size()));
    }
    if (options.on_epoch) options.on_epoch(epoch, result.epoch_loss.back());
  }
  return result;
}

WindowBatch evaluation_batch(const PreparedData& data, const RunConfig& cfg, const std::vector<EvalWindow>& windows) {
  std::vector<std::size_t> anchors;
  for (const auto& w : windows) anchors.push_back(w.anchor);
  return make_batch(data.standardized, cfg.window, anchors, /*allow_missing_targets=*/true);
}

TruthBlocks truth_blocks(const PreparedData& data, const std::vector<EvalWindow>& windows) {
  const SeriesPanel& panel = data.raw_imputed;
  TruthBlocks truth;
  truth.windows = windows.size();
  truth.horizon = windows.empty() ? 0 : windows.front().truth.size();
  truth.nodes = panel.nodes();
  truth.node_names = panel.node_names;
  for (const auto& w : windows) {
    if (w.truth.end > panel.length()) throw DataError("evaluation window extends past the panel");
    truth.window_starts.push_back(panel.timestamps[w.truth.begin]);
    for (std::size_t t = w.truth.begin; t < w.truth.end; ++t) {
      for (std::size_t d = 0; d < panel.nodes(); ++d) truth.values.push_back(panel.value(t, d));
    }
  }
  return truth;
}

ForecastEnsemble forecast_windows(const TransformerModel& model, const PreparedData& data, const RunConfig& cfg,
                                  const std::vector<EvalWindow>& windows, std::size_t samples,
                                  std::uint64_t noise_seed) {
  NoiseConfig noise = cfg.noise;
  noise.rng_seed = noise_seed;
  std::mt19937_64 rng(noise_seed);
  ForecastEnsemble ens =
      generate_ensemble(model, evaluation_batch(data, cfg, windows), samples, noise, rng, data.normalization);
  const SeriesPanel& panel = data.standardized;
  const std::int64_t step = granularity_seconds(panel.granularity);
  for (const auto& w : windows) ens.window_starts.push_back(panel.timestamps[w.anchor] + step);
  ens.node_names = panel.node_names;
  return ens;
}

std::vector<CostPoint> measure_training_cost(const PreparedData& data, const RunConfig& cfg,
                                             const std::vector<std::size_t>& m_values) {
  std::vector<CostPoint> out;
  for (std::size_t m : m_values) {
    RunConfig run = cfg;
    run.train.m_train = m;
    const auto start = std::chrono::steady_clock::now();
    fit(data, run, FitOptions{true, {}});
    const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - start;
    out.push_back({m, elapsed.count()});
  }
  return out;
}

LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw ContractViolation("fit_line needs >= 2 paired points");
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  LineFit fit;
  fit.slope = sxx > 0.0 ? sxy / sxx : 0.0;
  fit.intercept = my - fit.slope * mx;
  double ss_res = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double e = y[i] - (fit.intercept + fit.slope * x[i]);
    ss_res += e * e;
  }
  fit.r_squared = syy > 0.0 ? 1.0 - ss_res / syy : 1.0;
  return fit;
}

}  // namespace entransformer
