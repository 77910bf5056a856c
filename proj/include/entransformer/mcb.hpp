#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace entransformer {

// Models x datasets score matrix; lower is better.
struct ScoreTable {
  std::vector<std::string> models;
  std::vector<std::string> datasets;
  std::vector<std::vector<double>> scores;  // [model][dataset]
};

struct RankTable {
  std::vector<std::string> models;
  std::vector<std::string> datasets;
  std::vector<std::vector<double>> ranks;  // [model][dataset], ties share the average rank
  std::vector<double> average_rank;
  double alpha = 0.05;
  double q_alpha = 0.0;         // Nemenyi constant (studentized range / sqrt 2)
  double critical_half_width = 0.0;
  std::size_t best = 0;
  std::vector<bool> significantly_worse;  // interval disjoint from the best model's
};

// Ranks within each dataset (1 = best, average rank on ties), averages per
// model, and attaches the MCB interval avg_rank +- q_alpha*sqrt(k(k+1)/(12N)).
// Throws DataError naming the cell for NaN scores and for duplicate names.
RankTable mcb_ranks(const ScoreTable& table, double alpha = 0.05);

// Ranks of one column; ties receive the mean of the positions they span.
std::vector<double> average_ranks(const std::vector<double>& values);

// Upper alpha quantile of the range of k i.i.d. standard normals
// (studentized range with infinite degrees of freedom).
double studentized_range_quantile(std::size_t k, double alpha);
double nemenyi_q(std::size_t k, double alpha);

// CSV: header `model,<dataset>,...`, one row per model.
ScoreTable parse_score_table(std::istream& in, const std::string& source = "<stream>");
ScoreTable load_score_table(const std::string& path);

std::string render_rank_table(const RankTable& table);

}  // namespace entransformer
