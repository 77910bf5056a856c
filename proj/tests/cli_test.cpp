#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "entransformer/cli.hpp"
#include "entransformer/config.hpp"
#include "entransformer/ensemble.hpp"
#include "entransformer/panel.hpp"
#include "synthetic.hpp"

using namespace entransformer;
namespace fs = std::filesystem;

namespace {

const char* kConfig =
    "context_length = 8\n"
    "horizon = 4\n"
    "lags = 1\n"
    "rolling_windows = 2\n"
    "calendar = hour_of_day\n"
    "n_head = 2\n"
    "d_model = 8\n"
    "n_layers = 1\n"
    "d_ff = 16\n"
    "epochs = 2\n"
    "batch_size = 32\n"
    "learning_rate = 0.003\n"
    "m_train = 2\n"
    "seed = 3\n";

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write(const fs::path& p, const std::string& text) {
  std::ofstream out(p);
  out << text;
}

std::size_t line_count(const fs::path& p) {
  const std::string s = slurp(p);
  return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n'));
}

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("entransformer_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
    write(dir_ / "run.cfg", kConfig);
    std::ofstream panel(dir_ / "panel.csv");
    write_panel(panel, synthetic::noisy_sinusoids(120, 3, 0.3, 21));
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  Result train(const std::string& out, std::vector<std::string> extra = {}) {
    std::vector<std::string> args{"train", "--config", path("run.cfg"), "--data", path("panel.csv"), "--out", path(out)};
    args.insert(args.end(), extra.begin(), extra.end());
    return run(args);
  }

  Result forecast(const std::string& ckpt_dir, const std::string& out, std::vector<std::string> extra = {}) {
    std::vector<std::string> args{"forecast", "--checkpoint", path(ckpt_dir + "/checkpoint.json"),
                                  "--data",   path("panel.csv"), "--out", path(out)};
    args.insert(args.end(), extra.begin(), extra.end());
    return run(args);
  }

  fs::path dir_;
};

}  // namespace

TEST_F(Cli, TrainWritesArtifacts) {
  Result r = train("t");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(fs::exists(dir_ / "t/checkpoint.json"));
  EXPECT_EQ(line_count(dir_ / "t/loss.csv"), 3u);
  EXPECT_EQ(slurp(dir_ / "t/loss.csv").substr(0, 29), "epoch,loss,validation_loss\n1,");
  auto manifest = nlohmann::json::parse(slurp(dir_ / "t/manifest.json"));
  EXPECT_EQ(manifest["command"], "train");
  EXPECT_EQ(manifest["inputs"].size(), 2u);
  EXPECT_EQ(manifest["inputs"][0]["sha256"].get<std::string>().size(), 64u);
  EXPECT_NE(r.out.find("epoch"), std::string::npos);
}

TEST_F(Cli, SameSeedSameLossHistory) {
  ASSERT_EQ(train("a").code, 0);
  ASSERT_EQ(train("b").code, 0);
  ASSERT_EQ(train("c", {"--seed", "4"}).code, 0);
  EXPECT_EQ(slurp(dir_ / "a/loss.csv"), slurp(dir_ / "b/loss.csv"));
  EXPECT_EQ(slurp(dir_ / "a/checkpoint.json"), slurp(dir_ / "b/checkpoint.json"));
  EXPECT_NE(slurp(dir_ / "a/loss.csv"), slurp(dir_ / "c/loss.csv"));
}

TEST_F(Cli, InvalidDropoutIsAConfigError) {
  Result r = train("t", {"--set", "dropout=0.9"});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("dropout"), std::string::npos) << r.err;
}

TEST_F(Cli, HeadDivisibilityIsAConfigError) {
  Result r = train("t", {"--set", "d_model=9"});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("d_model"), std::string::npos) << r.err;
}

TEST_F(Cli, MissingDataFileIsADataError) {
  Result r = run({"train", "--config", path("run.cfg"), "--data", path("nope.csv"), "--out", path("t")});
  EXPECT_EQ(r.code, 3) << r.err;
}

TEST_F(Cli, ForecastShapesAndFiles) {
  ASSERT_EQ(train("t").code, 0);
  Result r = forecast("t", "f", {"--samples", "7"});
  ASSERT_EQ(r.code, 0) << r.err;
  // M * W * q * D rows plus header.
  EXPECT_EQ(line_count(dir_ / "f/ensemble.csv"), 7u * 2 * 4 * 3 + 1);
  EXPECT_EQ(line_count(dir_ / "f/quantiles.csv"), 2u * 4 * 3 + 1);
  EXPECT_EQ(line_count(dir_ / "f/truth.csv"), 2u * 4 * 3 + 1);
  auto sidecar = nlohmann::json::parse(slurp(dir_ / "f/ensemble.json"));
  EXPECT_EQ(sidecar["M"], 7);
  EXPECT_EQ(sidecar["q"], 4);
  EXPECT_EQ(sidecar["D"], 3);
  EXPECT_EQ(slurp(dir_ / "f/quantiles.csv").substr(0, 42), "window_start,step,node,median,q025,q975\n20");
  ForecastEnsemble ens = read_ensemble_csv(dir_ / "f/ensemble.csv");
  EXPECT_EQ(ens.samples, 7u);
  EXPECT_EQ(ens.node_names, (std::vector<std::string>{"node0", "node1", "node2"}));
}

TEST_F(Cli, SingleDeterministicSampleCollapsesQuantiles) {
  ASSERT_EQ(train("t", {"--set", "sigma=0"}).code, 0);
  ASSERT_EQ(forecast("t", "f", {"--samples", "1"}).code, 0);
  std::ifstream in(dir_ / "f/quantiles.csv");
  std::string line;
  std::getline(in, line);
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    std::vector<std::string> f;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) f.push_back(cell);
    ASSERT_EQ(f.size(), 6u);
    EXPECT_EQ(f[3], f[4]);
    EXPECT_EQ(f[3], f[5]);
    ++rows;
  }
  EXPECT_EQ(rows, 24u);
}

TEST_F(Cli, ForecastNodeMismatchNamesNodes) {
  ASSERT_EQ(train("t").code, 0);
  SeriesPanel other = synthetic::noisy_sinusoids(120, 3, 0.3, 21);
  other.node_names[2] = "extra";
  {
    std::ofstream out(dir_ / "panel.csv");
    write_panel(out, other);
  }
  Result r = forecast("t", "f");
  EXPECT_EQ(r.code, 3);
  EXPECT_NE(r.err.find("node2"), std::string::npos) << r.err;
  EXPECT_NE(r.err.find("extra"), std::string::npos) << r.err;
}

TEST_F(Cli, ForecastAcceptsReorderedColumns) {
  ASSERT_EQ(train("t").code, 0);
  ASSERT_EQ(forecast("t", "f1").code, 0);
  SeriesPanel p = synthetic::noisy_sinusoids(120, 3, 0.3, 21);
  SeriesPanel swapped = p;
  swapped.node_names = {"node2", "node0", "node1"};
  for (std::size_t t = 0; t < p.length(); ++t) {
    swapped.value(t, 0) = p.value(t, 2);
    swapped.value(t, 1) = p.value(t, 0);
    swapped.value(t, 2) = p.value(t, 1);
  }
  {
    std::ofstream out(dir_ / "panel.csv");
    write_panel(out, swapped);
  }
  ASSERT_EQ(forecast("t", "f2").code, 0);
  EXPECT_EQ(slurp(dir_ / "f1/ensemble.csv"), slurp(dir_ / "f2/ensemble.csv"));
}

TEST_F(Cli, EvaluateReports) {
  ASSERT_EQ(train("t").code, 0);
  ASSERT_EQ(forecast("t", "f", {"--samples", "20"}).code, 0);
  ASSERT_EQ(forecast("t", "g", {"--samples", "20", "--seed", "9"}).code, 0);
  Result r = run({"evaluate", "--ensemble", path("f/ensemble.csv"), "--ensemble", path("g/ensemble.csv"), "--truth",
                  path("f/truth.csv"), "--out", path("e"), "--dataset", "toy", "--qq-points", "25"});
  ASSERT_EQ(r.code, 0) << r.err;
  auto report = nlohmann::json::parse(slurp(dir_ / "e/report.json"));
  EXPECT_EQ(report["dataset"], "toy");
  EXPECT_EQ(report["runs"], 2);
  EXPECT_GT(report["crps_sum"]["mean"].get<double>(), 0.0);
  EXPECT_TRUE(report["crps_sum"]["stderr"].is_number());
  EXPECT_EQ(report["pit"].size(), 2u * 2 * 4 * 3);
  EXPECT_EQ(line_count(dir_ / "e/pit_qq.csv"), 26u);

  Result u = run({"evaluate", "--ensemble", path("f/ensemble.csv"), "--truth", path("f/truth.csv"), "--out",
                  path("u"), "--unnormalized"});
  Result n = run({"evaluate", "--ensemble", path("f/ensemble.csv"), "--truth", path("f/truth.csv"), "--out",
                  path("n")});
  ASSERT_EQ(u.code, 0) << u.err;
  ASSERT_EQ(n.code, 0) << n.err;
  TruthBlocks truth = read_truth_csv(dir_ / "f/truth.csv");
  double normalizer = 0.0;
  for (std::size_t w = 0; w < truth.windows; ++w)
    for (std::size_t s = 0; s < truth.horizon; ++s) {
      double sum = 0.0;
      for (std::size_t d = 0; d < truth.nodes; ++d) sum += truth.at(w, s, d);
      normalizer += std::abs(sum) / static_cast<double>(truth.windows * truth.horizon);
    }
  const double cu = nlohmann::json::parse(slurp(dir_ / "u/report.json"))["crps_sum"]["mean"].get<double>();
  const double cn = nlohmann::json::parse(slurp(dir_ / "n/report.json"))["crps_sum"]["mean"].get<double>();
  EXPECT_NEAR(cu / cn, normalizer, 1e-9 * normalizer);
}

TEST_F(Cli, EvaluateCollapsedEnsembleOnTruthScoresZero) {
  TruthBlocks truth;
  truth.windows = 1;
  truth.horizon = 2;
  truth.nodes = 2;
  truth.values = {1, 2, 3, 4};
  truth.window_starts = {*parse_timestamp("2021-01-01 00:00")};
  truth.node_names = {"a", "b"};
  {
    std::ofstream out(dir_ / "truth.csv");
    write_truth_csv(out, truth);
  }
  ForecastEnsemble ens;
  ens.samples = 3;
  ens.windows = 1;
  ens.horizon = 2;
  ens.nodes = 2;
  ens.window_starts = truth.window_starts;
  ens.node_names = truth.node_names;
  for (int m = 0; m < 3; ++m) ens.values.insert(ens.values.end(), truth.values.begin(), truth.values.end());
  write_ensemble_files(dir_ / "ens.csv", ens);
  Result r = run({"evaluate", "--ensemble", path("ens.csv"), "--truth", path("truth.csv"), "--out", path("e")});
  ASSERT_EQ(r.code, 0) << r.err;
  auto report = nlohmann::json::parse(slurp(dir_ / "e/report.json"));
  EXPECT_EQ(report["crps_sum"]["mean"].get<double>(), 0.0);
  EXPECT_EQ(report["nrmse_sum"]["mean"].get<double>(), 0.0);
}

TEST_F(Cli, EvaluateMisalignedTruthIsADataError) {
  ASSERT_EQ(train("t").code, 0);
  ASSERT_EQ(forecast("t", "f", {"--samples", "5"}).code, 0);
  std::string truth = slurp(dir_ / "f/truth.csv");
  truth = truth.substr(0, truth.rfind('\n', truth.size() - 2) + 1);
  write(dir_ / "short.csv", truth);
  Result r = run({"evaluate", "--ensemble", path("f/ensemble.csv"), "--truth", path("short.csv"), "--out", path("e")});
  EXPECT_EQ(r.code, 3) << r.err;
}

TEST_F(Cli, RankWritesTables) {
  write(dir_ / "scores.csv", "model,A,B,C\nx,0.1,0.2,0.3\ny,0.2,0.3,0.4\nz,0.3,0.1,0.5\n");
  Result r = run({"rank", "--scores", path("scores.csv"), "--out", path("r")});
  ASSERT_EQ(r.code, 0) << r.err;
  auto ranks = nlohmann::json::parse(slurp(dir_ / "r/ranks.json"));
  EXPECT_EQ(ranks["best"], "x");
  EXPECT_NEAR(ranks["average_rank"][0].get<double>(), 4.0 / 3.0, 1e-12);
  EXPECT_TRUE(fs::exists(dir_ / "r/ranks.txt"));
  EXPECT_NE(r.out.find("x"), std::string::npos);
}

TEST_F(Cli, RankRejectsBadTables) {
  write(dir_ / "dup.csv", "model,A,B\nx,0.1,0.2\nx,0.2,0.3\n");
  Result dup = run({"rank", "--scores", path("dup.csv"), "--out", path("r")});
  EXPECT_EQ(dup.code, 3);
  EXPECT_NE(dup.err.find("x"), std::string::npos);
  write(dir_ / "bad.csv", "model,A,B\nx,0.1,0.2\ny,0.2,oops\n");
  Result bad = run({"rank", "--scores", path("bad.csv"), "--out", path("r")});
  EXPECT_EQ(bad.code, 3);
  EXPECT_NE(bad.err.find("line 3"), std::string::npos) << bad.err;
  EXPECT_NE(bad.err.find("'B'"), std::string::npos) << bad.err;
}

TEST_F(Cli, TuneBudgetOne) {
  write(dir_ / "space.txt", "n_head = 2\nd_model_multiplier = 4\nn_layers = 1\nd_ff = 16\nbatch_size = 32\n");
  Result r = run({"tune", "--config", path("run.cfg"), "--data", path("panel.csv"), "--out", path("s"), "--budget",
                  "1", "--space", path("space.txt"), "--set", "epochs=1"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(line_count(dir_ / "s/trials.jsonl"), 1u);
  auto trial = nlohmann::json::parse(slurp(dir_ / "s/trials.jsonl"));
  EXPECT_TRUE(trial["validation_crps_sum"].is_number());
  EXPECT_NO_THROW(load_config(dir_ / "s/best_config.txt").validate());
}

TEST_F(Cli, RerunReproducesForecast) {
  ASSERT_EQ(train("t").code, 0);
  ASSERT_EQ(forecast("t", "f", {"--samples", "5"}).code, 0);
  Result r = run({"rerun", "--manifest", path("f/manifest.json"), "--out", path("f2")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(slurp(dir_ / "f/ensemble.csv"), slurp(dir_ / "f2/ensemble.csv"));
  EXPECT_EQ(slurp(dir_ / "f/quantiles.csv"), slurp(dir_ / "f2/quantiles.csv"));

  write(dir_ / "panel.csv", slurp(dir_ / "panel.csv") + "\n");
  Result changed = run({"rerun", "--manifest", path("f/manifest.json"), "--out", path("f3")});
  EXPECT_EQ(changed.code, 3);
  EXPECT_NE(changed.err.find("panel.csv"), std::string::npos) << changed.err;
}

TEST_F(Cli, UnknownSubcommandFails) {
  Result r = run({"bogus"});
  EXPECT_NE(r.code, 0);
}

TEST_F(Cli, ExecutableReportsConfigErrors) {
  const std::string cmd = std::string(CLI_PATH) + " train --config " + path("run.cfg") + " --data " +
                          path("panel.csv") + " --out " + path("t") + " --set n_layers=0 2>/dev/null";
  const int status = std::system(cmd.c_str());
  ASSERT_TRUE(WIFEXITED(status));
  EXPECT_EQ(WEXITSTATUS(status), 2);
}
