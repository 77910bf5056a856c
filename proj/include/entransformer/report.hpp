#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "entransformer/ensemble.hpp"
#include "entransformer/mcb.hpp"
#include "entransformer/metrics.hpp"

namespace entransformer {

// Scores of one evaluation run (one ensemble against the truth).
struct RunMetrics {
  CrpsSumResult crps_sum;
  NrmseSumResult nrmse_sum;  // on the per-cell ensemble median
};

struct Aggregate {
  double mean = 0.0;
  double stderr_ = 0.0;  // sample std / sqrt(runs); NaN with fewer than two runs
};

struct MetricReport {
  std::string dataset;
  bool normalized = true;
  std::vector<RunMetrics> runs;
  Aggregate crps_sum;
  Aggregate nrmse_sum;
  std::vector<double> pit;      // every cell of every run, run-major
  QuantileForecast quantiles;   // levels 0.5, 0.025, 0.975 of the first run
};

inline const std::vector<double> kSummaryLevels{0.5, 0.025, 0.975};

// Throws DataError naming the first field on which ensemble and truth
// disagree (windows, horizon, nodes, node name, window start).
void check_alignment(const TruthBlocks& truth, const ForecastEnsemble& ensemble);

Aggregate aggregate(const std::vector<double>& values);

MetricReport build_report(const std::string& dataset, const TruthBlocks& truth,
                          const std::vector<ForecastEnsemble>& runs, bool normalize = true);

std::string report_json(const MetricReport& report);

// Two columns `theoretical,empirical`, one row per point.
void write_qq_csv(std::ostream& out, const std::vector<QQPoint>& points);

// Header `window_start,step,node,median,q025,q975`.
void write_quantile_csv(std::ostream& out, const QuantileForecast& quantiles,
                        const std::vector<std::int64_t>& window_starts, const std::vector<std::string>& node_names);

std::string rank_table_json(const RankTable& table);

}  // namespace entransformer
