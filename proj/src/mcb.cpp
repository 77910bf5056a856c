#include "entransformer/mcb.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <numeric>
#include <set>
#include <sstream>

#include "entransformer/errors.hpp"

namespace entransformer {
namespace {

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }
double normal_pdf(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi); }

// P(range of k standard normals <= w) = k * int phi(z) [Phi(z) - Phi(z - w)]^(k-1) dz
double range_cdf(std::size_t k, double w) {
  constexpr int kIntervals = 4000;
  constexpr double lo = -9.0, hi = 9.0;
  const double h = (hi - lo) / kIntervals;
  double acc = 0.0;
  for (int i = 0; i <= kIntervals; ++i) {
    const double z = lo + i * h;
    const double f = normal_pdf(z) * std::pow(normal_cdf(z) - normal_cdf(z - w), static_cast<double>(k - 1));
    const double weight = (i == 0 || i == kIntervals) ? 1.0 : (i % 2 ? 4.0 : 2.0);
    acc += weight * f;
  }
  return static_cast<double>(k) * acc * h / 3.0;
}

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return {};
  return s.substr(first, s.find_last_not_of(" \t\r\n") - first + 1);
}

}  // namespace

std::vector<double> average_ranks(const std::vector<double>& values) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(values.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && values[order[j + 1]] == values[order[i]]) ++j;
    const double shared = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
    for (std::size_t t = i; t <= j; ++t) ranks[order[t]] = shared;
    i = j + 1;
  }
  return ranks;
}

double studentized_range_quantile(std::size_t k, double alpha) {
  if (k < 2) throw ContractViolation("studentized range needs k >= 2");
  double lo = 0.0, hi = 20.0;
  for (int it = 0; it < 100; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (range_cdf(k, mid) < 1.0 - alpha) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

double nemenyi_q(std::size_t k, double alpha) { return studentized_range_quantile(k, alpha) / std::numbers::sqrt2; }

RankTable mcb_ranks(const ScoreTable& table, double alpha) {
  const std::size_t k = table.models.size();
  const std::size_t n = table.datasets.size();
  if (k < 2) throw ContractViolation("mcb_ranks needs at least two models");
  if (n < 1) throw ContractViolation("mcb_ranks needs at least one dataset");
  if (table.scores.size() != k) throw DimensionError("score matrix row count does not match model count");
  std::set<std::string> seen;
  for (const auto& m : table.models) {
    if (!seen.insert(m).second) throw DataError("duplicate model name '" + m + "'");
  }
  for (std::size_t i = 0; i < k; ++i) {
    if (table.scores[i].size() != n) throw DimensionError("score row for '" + table.models[i] + "' is ragged");
    for (std::size_t j = 0; j < n; ++j) {
      if (!std::isfinite(table.scores[i][j])) {
        throw DataError("non-finite score for model '" + table.models[i] + "' on dataset '" + table.datasets[j] + "'");
      }
    }
  }

  RankTable out;
  out.models = table.models;
  out.datasets = table.datasets;
  out.alpha = alpha;
  out.ranks.assign(k, std::vector<double>(n, 0.0));
  for (std::size_t j = 0; j < n; ++j) {
    std::vector<double> column(k);
    for (std::size_t i = 0; i < k; ++i) column[i] = table.scores[i][j];
    auto r = average_ranks(column);
    for (std::size_t i = 0; i < k; ++i) out.ranks[i][j] = r[i];
  }
  for (std::size_t i = 0; i < k; ++i) {
    out.average_rank.push_back(std::accumulate(out.ranks[i].begin(), out.ranks[i].end(), 0.0) / static_cast<double>(n));
  }
  out.best = static_cast<std::size_t>(
      std::min_element(out.average_rank.begin(), out.average_rank.end()) - out.average_rank.begin());
  out.q_alpha = nemenyi_q(k, alpha);
  const double kd = static_cast<double>(k);
  out.critical_half_width = out.q_alpha * std::sqrt(kd * (kd + 1.0) / (12.0 * static_cast<double>(n)));
  const double best_upper = out.average_rank[out.best] + out.critical_half_width;
  for (std::size_t i = 0; i < k; ++i) {
    out.significantly_worse.push_back(out.average_rank[i] - out.critical_half_width > best_upper);
  }
  return out;
}

ScoreTable parse_score_table(std::istream& in, const std::string& source) {
  ScoreTable table;
  std::string line;
  std::size_t line_no = 0;
  auto split = [](const std::string& row) {
    std::vector<std::string> f;
    std::string cell;
    std::istringstream s(row);
    while (std::getline(s, cell, ',')) f.push_back(trim(cell));
    if (!row.empty() && row.back() == ',') f.emplace_back();
    return f;
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (!trim(line).empty()) break;
  }
  auto header = split(trim(line));
  if (header.size() < 2) throw DataError(source + ", line " + std::to_string(line_no) + ": header needs model + datasets");
  table.datasets.assign(header.begin() + 1, header.end());
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    auto f = split(trim(line));
    if (f.size() != header.size()) {
      throw DataError(source + ", line " + std::to_string(line_no) + ": expected " + std::to_string(header.size()) +
                      " fields, found " + std::to_string(f.size()));
    }
    table.models.push_back(f[0]);
    std::vector<double> row;
    for (std::size_t j = 1; j < f.size(); ++j) {
      char* end = nullptr;
      const double v = std::strtod(f[j].c_str(), &end);
      if (f[j].empty() || end != f[j].c_str() + f[j].size()) {
        throw DataError(source + ", line " + std::to_string(line_no) + ": non-numeric cell '" + f[j] + "' (model '" + f[0] +
                        "', dataset '" + header[j] + "')");
      }
      row.push_back(v);
    }
    table.scores.push_back(std::move(row));
  }
  return table;
}

ScoreTable load_score_table(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open score table " + path);
  return parse_score_table(in, path);
}

std::string render_rank_table(const RankTable& table) {
  std::size_t name_width = 5;
  for (const auto& m : table.models) name_width = std::max(name_width, m.size());
  std::vector<std::size_t> order(table.models.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return table.average_rank[a] < table.average_rank[b]; });
  std::ostringstream out;
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-*s  %8s  %17s  %s\n", static_cast<int>(name_width), "model", "avg_rank",
                "interval", "status");
  out << buf;
  for (std::size_t i : order) {
    const double r = table.average_rank[i];
    const char* status = i == table.best ? "best" : (table.significantly_worse[i] ? "worse" : "-");
    std::snprintf(buf, sizeof buf, "%-*s  %8.3f  [%6.3f, %6.3f]  %s\n", static_cast<int>(name_width),
                  table.models[i].c_str(), r, r - table.critical_half_width, r + table.critical_half_width, status);
    out << buf;
  }
  std::snprintf(buf, sizeof buf, "k=%zu models, N=%zu datasets, alpha=%.3g, q_alpha=%.4f, half-width=%.4f\n",
                table.models.size(), table.datasets.size(), table.alpha, table.q_alpha, table.critical_half_width);
  out << buf;
  return out.str();
}

}  // namespace entransformer
