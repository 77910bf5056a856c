#include "entransformer/report.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>

#include <json.hpp>

#include "entransformer/errors.hpp"
#include "entransformer/panel.hpp"

namespace entransformer {

namespace {

nlohmann::ordered_json number_or_null(double v) {
  return std::isfinite(v) ? nlohmann::ordered_json(v) : nlohmann::ordered_json(nullptr);
}

}  // namespace

void check_alignment(const TruthBlocks& truth, const ForecastEnsemble& ensemble) {
  auto mismatch = [](const std::string& key, const std::string& a, const std::string& b) {
    throw DataError("ensemble and truth disagree on " + key + ": " + a + " vs " + b);
  };
  if (ensemble.windows != truth.windows) mismatch("windows", std::to_string(ensemble.windows), std::to_string(truth.windows));
  if (ensemble.horizon != truth.horizon) mismatch("horizon", std::to_string(ensemble.horizon), std::to_string(truth.horizon));
  if (ensemble.nodes != truth.nodes) mismatch("nodes", std::to_string(ensemble.nodes), std::to_string(truth.nodes));
  if (ensemble.samples == 0) throw DataError("ensemble has no samples");
  for (std::size_t d = 0; d < truth.node_names.size() && d < ensemble.node_names.size(); ++d) {
    if (ensemble.node_names[d] != truth.node_names[d]) {
      mismatch("node " + std::to_string(d), ensemble.node_names[d], truth.node_names[d]);
    }
  }
  for (std::size_t w = 0; w < truth.window_starts.size() && w < ensemble.window_starts.size(); ++w) {
    if (ensemble.window_starts[w] != truth.window_starts[w]) {
      mismatch("window_start of window " + std::to_string(w), format_timestamp(ensemble.window_starts[w]),
               format_timestamp(truth.window_starts[w]));
    }
  }
}

Aggregate aggregate(const std::vector<double>& values) {
  Aggregate a;
  if (values.empty()) return {std::numeric_limits<double>::quiet_NaN(), std::numeric_limits<double>::quiet_NaN()};
  const double n = static_cast<double>(values.size());
  for (double v : values) a.mean += v;
  a.mean /= n;
  if (values.size() < 2) {
    a.stderr_ = std::numeric_limits<double>::quiet_NaN();
    return a;
  }
  double ss = 0.0;
  for (double v : values) ss += (v - a.mean) * (v - a.mean);
  a.stderr_ = std::sqrt(ss / (n - 1.0)) / std::sqrt(n);
  return a;
}

MetricReport build_report(const std::string& dataset, const TruthBlocks& truth,
                          const std::vector<ForecastEnsemble>& runs, bool normalize) {
  if (runs.empty()) throw DataError("no ensemble to evaluate");
  MetricReport report;
  report.dataset = dataset;
  report.normalized = normalize;
  std::vector<double> crps, nrmse;
  for (const auto& ens : runs) {
    check_alignment(truth, ens);
    RunMetrics m{crps_sum(truth, ens, normalize), nrmse_sum(truth, ensemble_median(ens))};
    crps.push_back(m.crps_sum.value);
    nrmse.push_back(m.nrmse_sum.value);
    const auto pit = pit_values(truth, ens);
    report.pit.insert(report.pit.end(), pit.begin(), pit.end());
    report.runs.push_back(std::move(m));
  }
  report.crps_sum = aggregate(crps);
  report.nrmse_sum = aggregate(nrmse);
  report.quantiles = forecast_quantiles(runs.front(), kSummaryLevels);
  return report;
}

std::string report_json(const MetricReport& report) {
  using nlohmann::ordered_json;
  ordered_json j;
  j["dataset"] = report.dataset;
  j["normalized"] = report.normalized;
  j["runs"] = report.runs.size();
  j["crps_sum"] = {{"mean", number_or_null(report.crps_sum.mean)},
                   {"stderr", number_or_null(report.crps_sum.stderr_)}};
  j["nrmse_sum"] = {{"mean", number_or_null(report.nrmse_sum.mean)},
                    {"stderr", number_or_null(report.nrmse_sum.stderr_)}};
  ordered_json per_run = ordered_json::array();
  for (const auto& r : report.runs) {
    per_run.push_back({{"crps_sum", r.crps_sum.value},
                       {"crps_sum_unnormalized", r.crps_sum.unnormalized},
                       {"normalizer", r.crps_sum.normalizer},
                       {"crps_sum_per_window", r.crps_sum.per_window},
                       {"nrmse_sum", r.nrmse_sum.value},
                       {"nrmse_sum_per_window", r.nrmse_sum.per_window}});
  }
  j["per_run"] = per_run;
  const auto& q = report.quantiles;
  const std::size_t cells = q.windows * q.horizon * q.nodes;
  ordered_json summary;
  summary["levels"] = q.levels;
  summary["shape"] = {q.windows, q.horizon, q.nodes};
  for (std::size_t l = 0; l < q.levels.size(); ++l) {
    std::vector<double> slice(q.values.begin() + static_cast<std::ptrdiff_t>(l * cells),
                              q.values.begin() + static_cast<std::ptrdiff_t>((l + 1) * cells));
    summary["values"].push_back(slice);
  }
  j["quantiles"] = summary;
  j["pit"] = report.pit;
  return j.dump(2) + "\n";
}

void write_qq_csv(std::ostream& out, const std::vector<QQPoint>& points) {
  out << "theoretical,empirical\n";
  for (const auto& p : points) out << format_value(p.theoretical) << ',' << format_value(p.empirical) << '\n';
}

void write_quantile_csv(std::ostream& out, const QuantileForecast& q, const std::vector<std::int64_t>& window_starts,
                        const std::vector<std::string>& node_names) {
  out << "window_start,step,node";
  for (double level : q.levels) {
    if (level == 0.5) out << ",median";
    else {
      char name[16];
      std::snprintf(name, sizeof name, ",q%03d", static_cast<int>(std::lround(level * 1000.0)));
      out << name;
    }
  }
  out << '\n';
  for (std::size_t w = 0; w < q.windows; ++w) {
    const std::string start = w < window_starts.size() ? format_timestamp(window_starts[w]) : std::to_string(w);
    for (std::size_t s = 0; s < q.horizon; ++s) {
      for (std::size_t d = 0; d < q.nodes; ++d) {
        out << start << ',' << s << ',' << (d < node_names.size() ? node_names[d] : std::to_string(d));
        for (std::size_t l = 0; l < q.levels.size(); ++l) out << ',' << format_value(q.at(l, w, s, d));
        out << '\n';
      }
    }
  }
}

std::string rank_table_json(const RankTable& table) {
  using nlohmann::ordered_json;
  ordered_json j;
  j["models"] = table.models;
  j["datasets"] = table.datasets;
  j["ranks"] = table.ranks;
  j["average_rank"] = table.average_rank;
  j["alpha"] = table.alpha;
  j["q_alpha"] = table.q_alpha;
  j["critical_half_width"] = table.critical_half_width;
  j["best"] = table.models[table.best];
  ordered_json intervals = ordered_json::array();
  for (std::size_t i = 0; i < table.models.size(); ++i) {
    intervals.push_back({{"model", table.models[i]},
                         {"average_rank", table.average_rank[i]},
                         {"lower", table.average_rank[i] - table.critical_half_width},
                         {"upper", table.average_rank[i] + table.critical_half_width},
                         {"significantly_worse", static_cast<bool>(table.significantly_worse[i])}});
  }
  j["intervals"] = intervals;
  return j.dump(2) + "\n";
}

}  // namespace entransformer
