#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "entransformer/errors.hpp"
#include "entransformer/panel.hpp"
#include "entransformer/preprocess.hpp"
#include "entransformer/windows.hpp"

using namespace entransformer;

namespace {

SeriesPanel parse(const std::string& text) {
  std::istringstream in(text);
  return parse_panel(in);
}

// Hourly panel with `nodes` columns; value(t, d) = 100 d + t.
SeriesPanel ramp_panel(std::size_t length, std::size_t nodes, std::int64_t start = 0) {
  SeriesPanel p;
  p.granularity = Granularity::kHourly;
  for (std::size_t d = 0; d < nodes; ++d) p.node_names.push_back("n" + std::to_string(d));
  for (std::size_t t = 0; t < length; ++t) {
    p.timestamps.push_back(start + static_cast<std::int64_t>(t) * 3600);
    for (std::size_t d = 0; d < nodes; ++d) p.values.push_back(100.0 * d + static_cast<double>(t));
  }
  return p;
}

std::string error_of(const std::string& text) {
  try {
    parse(text);
  } catch (const DataError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST(LoadPanel, WellFormed) {
  SeriesPanel p = parse("timestamp,a,b\n2024-01-01 00:00,1,2\n2024-01-01 01:00,3,4\n2024-01-01 02:00,5,6\n");
  EXPECT_EQ(p.length(), 3u);
  EXPECT_EQ(p.nodes(), 2u);
  EXPECT_EQ(p.granularity, Granularity::kHourly);
  EXPECT_EQ(p.value(2, 1), 6.0);
  EXPECT_EQ(p.node_names[0], "a");
}

TEST(LoadPanel, EmptyCellAndNanTokenAreMissing) {
  SeriesPanel p = parse("timestamp,a,b\n2024-01-01T00:00:00Z,1,\n2024-01-01T01:00:00Z,NaN,4\n");
  EXPECT_TRUE(p.missing(0, 1));
  EXPECT_TRUE(p.missing(1, 0));
  EXPECT_EQ(p.value(0, 0), 1.0);
  EXPECT_EQ(p.value(1, 1), 4.0);
  EXPECT_EQ(p.missing_count(), 2u);
}

TEST(LoadPanel, ErrorsCarryLineNumbers) {
  EXPECT_NE(error_of("timestamp,a\n2024-01-01 00:00,1\n2024-01-01 02:00,1\n").find("line 3"), std::string::npos);
  EXPECT_NE(error_of("timestamp,a,b\n2024-01-01 00:00,1\n").find("line 2"), std::string::npos);
  EXPECT_NE(error_of("timestamp,a\nyesterday,1\n").find("line 2"), std::string::npos);
  EXPECT_NE(error_of("timestamp,a\n2024-01-01 01:00,1\n2024-01-01 00:00,1\n").find("line 3"), std::string::npos);
  EXPECT_NE(error_of("timestamp,a\n2024-01-01 00:00,abc\n").find("line 2"), std::string::npos);
}

TEST(LoadPanel, GapNamesLocation) {
  const std::string msg = error_of("timestamp,a\n2024-01-01 00:00,1\n2024-01-01 01:00,1\n2024-01-01 03:00,1\n");
  EXPECT_NE(msg.find("line 4"), std::string::npos) << msg;
  EXPECT_NE(msg.find("2024-01-01T03:00:00"), std::string::npos) << msg;
}

TEST(LoadPanel, RoundTripThroughWriter) {
  SeriesPanel p = ramp_panel(5, 2);
  p.value(3, 1) = std::nan("");
  std::ostringstream out;
  write_panel(out, p);
  SeriesPanel back = parse(out.str());
  EXPECT_EQ(back.timestamps, p.timestamps);
  EXPECT_TRUE(back.missing(3, 1));
  EXPECT_EQ(back.value(4, 1), p.value(4, 1));
}

TEST(Timestamps, Formats) {
  EXPECT_EQ(parse_timestamp("1970-01-02 00:00"), 86400);
  EXPECT_EQ(parse_timestamp("1970-01-02"), 86400);
  EXPECT_EQ(parse_timestamp("1970-01-01T01:00:00+02:00"), 3600);
  EXPECT_EQ(parse_timestamp("2000-03-01 00:00:30"), 951868830);
  EXPECT_FALSE(parse_timestamp("2000-13-01").has_value());
  EXPECT_EQ(format_timestamp(951868830), "2000-03-01T00:00:30");
}

TEST(Standardize, HandExample) {
  SeriesPanel p = ramp_panel(3, 1);
  p.values = {1, 2, 3};
  Normalization n = fit_standardize(p, {0, 3});
  EXPECT_DOUBLE_EQ(n.mean[0], 2.0);
  EXPECT_NEAR(n.stddev[0], 0.816496580927726, 1e-12);
  SeriesPanel s = apply_standardize(p, n);
  EXPECT_NEAR(s.value(0, 0), -1.224744871391589, 1e-12);
  EXPECT_NEAR(s.value(1, 0), 0.0, 1e-15);
  EXPECT_NEAR(s.value(2, 0), 1.224744871391589, 1e-12);
}

TEST(Standardize, TrainingColumnsAreUnitScaleAndRoundTrip) {
  SeriesPanel p = ramp_panel(50, 3);
  for (std::size_t i = 0; i < p.values.size(); ++i) p.values[i] = std::sin(0.37 * static_cast<double>(i)) * 40 + 7;
  Normalization n = fit_standardize(p, {0, 40});
  SeriesPanel s = apply_standardize(p, n);
  for (std::size_t d = 0; d < 3; ++d) {
    double m = 0.0, v = 0.0;
    for (std::size_t t = 0; t < 40; ++t) m += s.value(t, d) / 40;
    for (std::size_t t = 0; t < 40; ++t) v += (s.value(t, d) - m) * (s.value(t, d) - m) / 40;
    EXPECT_NEAR(m, 0.0, 1e-9);
    EXPECT_NEAR(std::sqrt(v), 1.0, 1e-9);
  }
  SeriesPanel back = destandardize(s, n);
  for (std::size_t i = 0; i < p.values.size(); ++i) EXPECT_NEAR(back.values[i], p.values[i], 1e-9);
}

TEST(Standardize, ConstantNodeIsFloored) {
  SeriesPanel p = ramp_panel(4, 1);
  p.values = {5, 5, 5, 5};
  Normalization n = fit_standardize(p, {0, 4});
  EXPECT_EQ(n.stddev[0], kStdFloor);
  for (double v : apply_standardize(p, n).values) EXPECT_EQ(v, 0.0);
}

TEST(Standardize, AllMissingNodeIsNamed) {
  SeriesPanel p = ramp_panel(3, 2);
  p.node_names = {"ok", "empty"};
  for (std::size_t t = 0; t < 3; ++t) p.value(t, 1) = std::nan("");
  try {
    fit_standardize(p, {0, 3});
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("empty"), std::string::npos);
  }
}

TEST(Impute, SeasonalSlotMean) {
  SeriesPanel p = ramp_panel(72, 1);
  p.value(7, 0) = 10;
  p.value(31, 0) = 14;
  p.value(55, 0) = std::nan("");
  SeriesPanel out = impute_seasonal_mean(p, 24, {0, 72});
  EXPECT_DOUBLE_EQ(out.value(55, 0), 12.0);
  EXPECT_EQ(out.missing_count(), 0u);
}

TEST(Impute, NoMissingUnchangedAndSingleValueFill) {
  SeriesPanel p = ramp_panel(10, 1);
  EXPECT_EQ(impute_seasonal_mean(p, 24, {0, 10}).values, p.values);
  EXPECT_EQ(impute_zero(p, {0, 10}).values, p.values);
  for (std::size_t t = 0; t < 10; ++t) p.value(t, 0) = t == 4 ? 3.5 : std::nan("");
  SeriesPanel out = impute_seasonal_mean(p, 24, {0, 10});
  for (double v : out.values) EXPECT_EQ(v, 3.5);
  for (std::size_t t = 0; t < 10; ++t) p.value(t, 0) = std::nan("");
  EXPECT_THROW(impute_seasonal_mean(p, 24, {0, 10}), DataError);
}

TEST(Impute, ZeroOnlyTouchesRange) {
  SeriesPanel p = ramp_panel(6, 2);
  p.value(1, 0) = std::nan("");
  p.value(4, 1) = std::nan("");
  SeriesPanel out = impute_zero(p, {3, 6});
  EXPECT_TRUE(out.missing(1, 0));
  EXPECT_EQ(out.value(4, 1), 0.0);
  EXPECT_EQ(out.value(5, 1), p.value(5, 1));
  for (std::size_t t = 0; t < 6; ++t) p.value(t, 0) = std::nan("");
  SeriesPanel zeros = impute_zero(p, {0, 6});
  for (std::size_t t = 0; t < 6; ++t) EXPECT_EQ(zeros.value(t, 0), 0.0);
}

TEST(Windows, CountFormula) {
  WindowSpec spec;
  spec.context = 3;
  spec.horizon = 2;
  SeriesPanel p = ramp_panel(10, 1);
  auto batches = build_windows(p, spec, 4, 10);
  std::size_t total = 0;
  for (const auto& b : batches) total += b.anchors.size();
  EXPECT_EQ(total, 6u);
  EXPECT_EQ(batches.size(), 2u);
  spec.lags = {1, 4};
  EXPECT_EQ(admissible_anchors(10, spec).size(), 10u - 4 - 3 - 2 + 1);
  spec.lags = {6};
  try {
    build_windows(p, spec, 4, 10);
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("11"), std::string::npos) << e.what();
  }
}

TEST(Windows, LayoutLagsAndTargets) {
  WindowSpec spec;
  spec.context = 3;
  spec.horizon = 2;
  spec.lags = {1, 2};
  SeriesPanel p = ramp_panel(12, 2);
  WindowBatch b = make_batch(p, spec, {6});
  ASSERT_EQ(b.inputs.shape(), (Shape{1, 3, 6}));
  for (std::size_t s = 0; s < 3; ++s) {
    const double t = 4.0 + static_cast<double>(s);
    EXPECT_EQ(b.inputs.at({0, s, 0}), t);
    EXPECT_EQ(b.inputs.at({0, s, 1}), 100 + t);
    EXPECT_EQ(b.inputs.at({0, s, 2}), t - 1);
    EXPECT_EQ(b.inputs.at({0, s, 3}), 100 + t - 1);
    EXPECT_EQ(b.inputs.at({0, s, 4}), t - 2);
    if (s > 0) EXPECT_EQ(b.inputs.at({0, s, 2}), b.inputs.at({0, s - 1, 0}));
  }
  EXPECT_EQ(b.targets.at({0, 0, 0}), 7.0);
  EXPECT_EQ(b.targets.at({0, 1, 1}), 108.0);
}

TEST(Windows, CalendarChannels) {
  WindowSpec spec;
  spec.calendar = {CalendarFeature::kHourOfDay, CalendarFeature::kDayOfWeek};
  EXPECT_EQ(spec.covariate_dim(3), 4u);
  const double pi = std::acos(-1.0);
  auto c0 = calendar_channels(6 * 3600, spec.calendar);  // Thursday 06:00
  ASSERT_EQ(c0.size(), 4u);
  EXPECT_NEAR(c0[0], std::sin(2 * pi * 6 / 24), 1e-12);
  EXPECT_NEAR(c0[1], std::cos(2 * pi * 6 / 24), 1e-12);
  EXPECT_NEAR(c0[2], std::sin(2 * pi * 3 / 7), 1e-12);
  auto c24 = calendar_channels(30 * 3600, spec.calendar);
  EXPECT_NEAR(c24[0], c0[0], 1e-12);
  EXPECT_NEAR(c24[1], c0[1], 1e-12);
  EXPECT_NE(c24[2], c0[2]);
  auto week = calendar_channels(6 * 3600 + 7 * 86400, spec.calendar);
  EXPECT_NEAR(week[2], c0[2], 1e-12);
  EXPECT_NEAR(week[3], c0[3], 1e-12);
}

TEST(Windows, MissingInputCellIsRejected) {
  WindowSpec spec;
  spec.context = 2;
  spec.horizon = 1;
  SeriesPanel p = ramp_panel(5, 1);
  p.value(1, 0) = std::nan("");
  EXPECT_THROW(make_batch(p, spec, {2}), DataError);
}

TEST(RollingSplit, TailBlocks) {
  WindowSpec spec;
  spec.context = 24;
  spec.horizon = 24;
  spec.rolling_windows = 7;
  RollingSplit split = rolling_test_split(500, spec);
  ASSERT_EQ(split.windows.size(), 7u);
  EXPECT_EQ(split.train_end, 500u - 168);
  for (std::size_t k = 0; k < 7; ++k) {
    EXPECT_EQ(split.windows[k].truth.begin, 332 + 24 * k);
    EXPECT_EQ(split.windows[k].truth.size(), 24u);
    EXPECT_EQ(split.windows[k].anchor + 1, split.windows[k].truth.begin);
  }
  EXPECT_EQ(split.windows.back().truth.end, 500u);
  spec.rolling_windows = 1;
  EXPECT_EQ(rolling_test_split(100, spec).windows[0].truth.begin, 76u);
  spec.rolling_windows = 4;
  EXPECT_THROW(rolling_test_split(100, spec), DataError);
}

TEST(RollingSplit, TrainingWindowsNeverTouchTruth) {
  WindowSpec spec;
  spec.context = 5;
  spec.horizon = 3;
  spec.lags = {2};
  spec.rolling_windows = 4;
  SeriesPanel p = ramp_panel(60, 1);
  RollingSplit split = rolling_test_split(60, spec);
  const std::size_t first_truth = split.windows.front().truth.begin;
  for (const auto& batch : build_windows(p, spec, 32, split.train_end)) {
    for (std::size_t a : batch.anchors) {
      EXPECT_LT(a + spec.horizon, first_truth) << "target range reaches the test blocks";
    }
    // Inputs are timestamps here, so the max input value bounds the latest row read.
    for (double v : batch.inputs.data()) EXPECT_LT(v, static_cast<double>(first_truth));
  }
}

TEST(WindowSpec, Validation) {
  WindowSpec spec;
  spec.lags = {3, 1};
  EXPECT_THROW(spec.validate(), ConfigError);
  spec.lags = {0};
  EXPECT_THROW(spec.validate(), ConfigError);
  spec.lags = {1, 24};
  EXPECT_NO_THROW(spec.validate());
  spec.horizon = 0;
  EXPECT_THROW(spec.validate(), ConfigError);
}
