#pragma once

#include <string>
#include <vector>

#include "entransformer/panel.hpp"
#include "entransformer/tensor.hpp"

namespace entransformer {

enum class CalendarFeature { kHourOfDay, kDayOfWeek };

std::string to_string(CalendarFeature f);
CalendarFeature parse_calendar_feature(const std::string& name);

struct WindowSpec {
  std::size_t context = 24;  // p
  std::size_t horizon = 24;  // q
  std::vector<std::size_t> lags;
  std::size_t rolling_windows = 1;
  std::vector<CalendarFeature> calendar;

  void validate() const;
  std::size_t max_lag() const { return lags.empty() ? 0 : lags.back(); }
  // Covariate channels per step: D per lag, plus a sin/cos pair per
  // calendar feature.
  std::size_t covariate_dim(std::size_t nodes) const { return nodes * lags.size() + 2 * calendar.size(); }
  std::size_t input_dim(std::size_t nodes) const { return nodes + covariate_dim(nodes); }
};

// Paired model inputs and future targets for B windows.
struct WindowBatch {
  Tensor inputs;                     // (B, p, D') = targets || lags || calendar
  Tensor targets;                    // (B, q, D)
  std::vector<std::size_t> anchors;  // row index of the last history step
};

// Anchors t whose history (including lags) starts at row >= 0 and whose
// targets end before `target_end`; count = target_end - max_lag - p - q + 1.
std::vector<std::size_t> admissible_anchors(std::size_t target_end, const WindowSpec& spec);

// Assembles windows for the given anchors from a standardized, fully
// imputed panel. Targets past the panel end are left as zeros only when
// `allow_missing_targets` is set.
WindowBatch make_batch(const SeriesPanel& panel, const WindowSpec& spec, const std::vector<std::size_t>& anchors,
                       bool allow_missing_targets = false);

// All admissible windows whose targets lie before `target_end`, in anchor
// order, chunked into batches of at most batch_size. Throws DataError with
// the required minimum length when no anchor is admissible.
std::vector<WindowBatch> build_windows(const SeriesPanel& panel, const WindowSpec& spec, std::size_t batch_size,
                                       std::size_t target_end);

// Calendar channels for one timestamp, in spec order (sin, cos per feature).
std::vector<double> calendar_channels(std::int64_t timestamp, const std::vector<CalendarFeature>& features);

struct EvalWindow {
  std::size_t anchor = 0;  // last history row
  IndexRange truth;        // q rows following the anchor
};

struct RollingSplit {
  std::size_t train_end = 0;  // training targets must lie in [0, train_end)
  std::vector<EvalWindow> windows;
};

// The last rolling_windows * q rows form consecutive, non-overlapping truth
// blocks; each is forecast from all rows before it.
std::size_t rolling_min_length(const WindowSpec& spec);
RollingSplit rolling_test_split(std::size_t panel_length, const WindowSpec& spec);

}  // namespace entransformer
