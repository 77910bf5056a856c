#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "entransformer/errors.hpp"
#include "entransformer/mcb.hpp"

using namespace entransformer;

namespace {

ScoreTable table_of(std::vector<std::vector<double>> scores) {
  ScoreTable t;
  for (std::size_t i = 0; i < scores.size(); ++i) t.models.push_back("m" + std::to_string(i));
  for (std::size_t j = 0; j < scores.front().size(); ++j) t.datasets.push_back("d" + std::to_string(j));
  t.scores = std::move(scores);
  return t;
}

// Rank by counting: 1 + #strictly better + 0.5 * #ties (excluding self).
double oracle_rank(const std::vector<double>& column, std::size_t i) {
  double r = 1.0;
  for (std::size_t j = 0; j < column.size(); ++j) {
    if (j == i) continue;
    if (column[j] < column[i]) r += 1.0;
    else if (column[j] == column[i]) r += 0.5;
  }
  return r;
}

}  // namespace

TEST(Mcb, BestEverywhereHasRankOne) {
  RankTable r = mcb_ranks(table_of({{3, 3, 3}, {1, 1, 1}, {2, 5, 4}}));
  EXPECT_EQ(r.average_rank[1], 1.0);
  EXPECT_EQ(r.best, 1u);
  EXPECT_FALSE(r.significantly_worse[1]);
}

TEST(Mcb, TiesShareAverageRank) {
  RankTable r = mcb_ranks(table_of({{0.2}, {0.2}, {0.5}}));
  EXPECT_EQ(r.ranks[0][0], 1.5);
  EXPECT_EQ(r.ranks[1][0], 1.5);
  EXPECT_EQ(r.ranks[2][0], 3.0);
}

TEST(Mcb, ColumnPermutationInvariant) {
  auto a = mcb_ranks(table_of({{1, 5, 3}, {2, 4, 1}, {3, 1, 2}}));
  auto b = mcb_ranks(table_of({{3, 1, 5}, {1, 2, 4}, {2, 3, 1}}));
  for (std::size_t i = 0; i < 3; ++i) EXPECT_DOUBLE_EQ(a.average_rank[i], b.average_rank[i]);
}

TEST(Mcb, MatchesRankOracleOnRandomTable) {
  std::mt19937_64 rng(44);
  std::uniform_int_distribution<int> u(0, 4);  // small support forces ties
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<std::vector<double>> s(3, std::vector<double>(4));
    for (auto& row : s)
      for (auto& v : row) v = u(rng);
    RankTable r = mcb_ranks(table_of(s));
    for (std::size_t i = 0; i < 3; ++i) {
      double avg = 0.0;
      for (std::size_t j = 0; j < 4; ++j) {
        std::vector<double> column{s[0][j], s[1][j], s[2][j]};
        EXPECT_DOUBLE_EQ(r.ranks[i][j], oracle_rank(column, i));
        avg += oracle_rank(column, i) / 4.0;
      }
      EXPECT_NEAR(r.average_rank[i], avg, 1e-12);
      EXPECT_GE(r.average_rank[i], 1.0);
      EXPECT_LE(r.average_rank[i], 3.0);
    }
  }
}

TEST(Mcb, NemenyiConstantsMatchPublishedTable) {
  const std::vector<double> expected{1.960, 2.343, 2.569, 2.728, 2.850, 2.949, 3.031, 3.102, 3.164};
  for (std::size_t k = 2; k <= 10; ++k) EXPECT_NEAR(nemenyi_q(k, 0.05), expected[k - 2], 1.5e-3) << "k=" << k;
  EXPECT_NEAR(studentized_range_quantile(2, 0.05), 2.772, 1e-3);
}

TEST(Mcb, HalfWidthFormula) {
  RankTable r = mcb_ranks(table_of({{1, 2, 3, 4}, {2, 1, 4, 3}, {3, 3, 1, 1}, {4, 4, 2, 2}}));
  EXPECT_NEAR(r.critical_half_width, r.q_alpha * std::sqrt(4.0 * 5.0 / (12.0 * 4.0)), 1e-12);
}

TEST(Mcb, SignificanceFlagsDisjointIntervals) {
  std::vector<std::vector<double>> s(3, std::vector<double>(40));
  for (std::size_t j = 0; j < 40; ++j) {
    s[0][j] = 1;
    s[1][j] = 2;
    s[2][j] = j % 2 ? 1.5 : 0.5;
  }
  RankTable r = mcb_ranks(table_of(s));
  EXPECT_EQ(r.best, 0u);
  EXPECT_TRUE(r.significantly_worse[1]);
  EXPECT_FALSE(r.significantly_worse[2]);
}

TEST(Mcb, InputErrors) {
  ScoreTable dup = table_of({{1}, {2}});
  dup.models = {"x", "x"};
  EXPECT_THROW(mcb_ranks(dup), DataError);
  ScoreTable nan = table_of({{1, std::nan("")}, {2, 3}});
  try {
    mcb_ranks(nan);
    FAIL();
  } catch (const DataError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("m0"), std::string::npos);
    EXPECT_NE(msg.find("d1"), std::string::npos);
  }
}

TEST(ScoreCsv, ParsesAndReportsCoordinates) {
  std::istringstream ok("model,A,B\nfoo,0.1,0.2\nbar,0.3,0.05\n");
  ScoreTable t = parse_score_table(ok);
  EXPECT_EQ(t.models, (std::vector<std::string>{"foo", "bar"}));
  EXPECT_EQ(t.scores[1][1], 0.05);
  std::istringstream bad("model,A,B\nfoo,0.1,0.2\nbar,0.3,n/a\n");
  try {
    parse_score_table(bad);
    FAIL();
  } catch (const DataError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("line 3"), std::string::npos) << msg;
    EXPECT_NE(msg.find("bar"), std::string::npos) << msg;
    EXPECT_NE(msg.find("'B'"), std::string::npos) << msg;
  }
}

TEST(ScoreCsv, PublishedMeansRankEnTransformerFirst) {
  RankTable r = mcb_ranks(load_score_table(FIXTURE_DIR "/crps_sum_scores.csv"));
  const auto it = std::find(r.models.begin(), r.models.end(), "EnTransformer");
  ASSERT_NE(it, r.models.end());
  EXPECT_EQ(r.models[r.best], "EnTransformer");
  EXPECT_NEAR(r.average_rank[static_cast<std::size_t>(it - r.models.begin())], 1.8, 1e-12);
  const std::string text = render_rank_table(r);
  EXPECT_NE(text.find("EnTransformer"), std::string::npos);
}
