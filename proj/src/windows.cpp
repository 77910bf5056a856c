#include "entransformer/windows.hpp"

#include <cmath>
#include <numbers>

#include "entransformer/errors.hpp"

namespace entransformer {

std::string to_string(CalendarFeature f) { return f == CalendarFeature::kHourOfDay ? "hour_of_day" : "day_of_week"; }

CalendarFeature parse_calendar_feature(const std::string& name) {
  if (name == "hour_of_day") return CalendarFeature::kHourOfDay;
  if (name == "day_of_week") return CalendarFeature::kDayOfWeek;
  throw ConfigError("calendar", "unknown calendar feature '" + name + "' (expected hour_of_day or day_of_week)");
}

void WindowSpec::validate() const {
  if (context < 1) throw ConfigError("context_length", "must be >= 1");
  if (horizon < 1) throw ConfigError("horizon", "must be >= 1");
  if (rolling_windows < 1) throw ConfigError("rolling_windows", "must be >= 1");
  for (std::size_t i = 0; i < lags.size(); ++i) {
    if (lags[i] < 1) throw ConfigError("lags", "lags must be positive");
    if (i > 0 && lags[i] <= lags[i - 1]) throw ConfigError("lags", "lags must be strictly ascending");
  }
  for (std::size_t i = 0; i < calendar.size(); ++i) {
    for (std::size_t j = 0; j < i; ++j) {
      if (calendar[i] == calendar[j]) throw ConfigError("calendar", "duplicate calendar feature");
    }
  }
}

std::vector<std::size_t> admissible_anchors(std::size_t target_end, const WindowSpec& spec) {
  const std::size_t first = spec.max_lag() + spec.context - 1;
  std::vector<std::size_t> anchors;
  for (std::size_t t = first; t + spec.horizon < target_end; ++t) anchors.push_back(t);
  return anchors;
}

std::vector<double> calendar_channels(std::int64_t timestamp, const std::vector<CalendarFeature>& features) {
  std::int64_t days = timestamp / 86400;
  std::int64_t secs = timestamp % 86400;
  if (secs < 0) {
    secs += 86400;
    --days;
  }
  std::vector<double> out;
  out.reserve(2 * features.size());
  for (CalendarFeature f : features) {
    double phase = 0.0;
    if (f == CalendarFeature::kHourOfDay) {
      phase = static_cast<double>(secs) / 86400.0;
    } else {
      // 1970-01-01 was a Thursday; Monday maps to 0.
      const std::int64_t dow = ((days + 3) % 7 + 7) % 7;
      phase = static_cast<double>(dow) / 7.0;
    }
    out.push_back(std::sin(2.0 * std::numbers::pi * phase));
    out.push_back(std::cos(2.0 * std::numbers::pi * phase));
  }
  return out;
}

WindowBatch make_batch(const SeriesPanel& panel, const WindowSpec& spec, const std::vector<std::size_t>& anchors,
                       bool allow_missing_targets) {
  const std::size_t p = spec.context, q = spec.horizon, nodes = panel.nodes();
  const std::size_t width = spec.input_dim(nodes);
  const std::size_t batch = anchors.size();
  std::vector<double> inputs(batch * p * width);
  std::vector<double> targets(batch * q * nodes, 0.0);

  auto cell = [&](std::size_t t, std::size_t d) {
    const double v = panel.value(t, d);
    if (std::isnan(v)) {
      throw DataError("window touches missing cell at " + format_timestamp(panel.timestamps[t]) + ", node '" +
                      panel.node_names[d] + "' (impute first)");
    }
    return v;
  };

  for (std::size_t b = 0; b < batch; ++b) {
    const std::size_t anchor = anchors[b];
    if (anchor + 1 < p + spec.max_lag() || anchor >= panel.length()) {
      throw DataError("anchor " + std::to_string(anchor) + " lacks the required history");
    }
    for (std::size_t s = 0; s < p; ++s) {
      const std::size_t t = anchor + 1 - p + s;
      double* row = inputs.data() + (b * p + s) * width;
      std::size_t c = 0;
      for (std::size_t d = 0; d < nodes; ++d) row[c++] = cell(t, d);
      for (std::size_t lag : spec.lags) {
        for (std::size_t d = 0; d < nodes; ++d) row[c++] = cell(t - lag, d);
      }
      for (double v : calendar_channels(panel.timestamps[t], spec.calendar)) row[c++] = v;
    }
    for (std::size_t s = 0; s < q; ++s) {
      const std::size_t t = anchor + 1 + s;
      if (t >= panel.length()) {
        if (allow_missing_targets) continue;
        throw DataError("anchor " + std::to_string(anchor) + " has targets past the panel end");
      }
      for (std::size_t d = 0; d < nodes; ++d) {
        const double v = panel.value(t, d);
        if (std::isnan(v) && !allow_missing_targets) cell(t, d);
        targets[(b * q + s) * nodes + d] = std::isnan(v) ? 0.0 : v;
      }
    }
  }
  return {Tensor::from({batch, p, width}, std::move(inputs)), Tensor::from({batch, q, nodes}, std::move(targets)),
          anchors};
}

std::vector<WindowBatch> build_windows(const SeriesPanel& panel, const WindowSpec& spec, std::size_t batch_size,
                                       std::size_t target_end) {
  spec.validate();
  if (batch_size < 1) throw ConfigError("batch_size", "must be >= 1");
  if (target_end > panel.length()) throw DataError("build_windows: target range exceeds panel length");
  auto anchors = admissible_anchors(target_end, spec);
  if (anchors.empty()) {
    throw DataError("no admissible window: need at least " +
                    std::to_string(spec.max_lag() + spec.context + spec.horizon) + " rows, have " +
                    std::to_string(target_end));
  }
  std::vector<WindowBatch> batches;
  for (std::size_t start = 0; start < anchors.size(); start += batch_size) {
    const std::size_t stop = std::min(anchors.size(), start + batch_size);
    std::vector<std::size_t> chunk(anchors.begin() + start, anchors.begin() + stop);
    batches.push_back(make_batch(panel, spec, chunk));
  }
  return batches;
}

std::size_t rolling_min_length(const WindowSpec& spec) {
  return spec.max_lag() + spec.context + spec.horizon + spec.rolling_windows * spec.horizon;
}

RollingSplit rolling_test_split(std::size_t panel_length, const WindowSpec& spec) {
  spec.validate();
  const std::size_t required = rolling_min_length(spec);
  if (panel_length < required) {
    throw DataError("panel of length " + std::to_string(panel_length) + " is too short for " +
                    std::to_string(spec.rolling_windows) + " rolling windows; need at least " +
                    std::to_string(required) + " rows");
  }
  RollingSplit split;
  split.train_end = panel_length - spec.rolling_windows * spec.horizon;
  for (std::size_t k = 0; k < spec.rolling_windows; ++k) {
    const std::size_t begin = split.train_end + k * spec.horizon;
    split.windows.push_back({begin - 1, {begin, begin + spec.horizon}});
  }
  return split;
}

}  // namespace entransformer
