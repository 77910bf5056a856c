#include "entransformer/cli.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "entransformer/checkpoint.hpp"
#include "entransformer/config.hpp"
#include "entransformer/errors.hpp"
#include "entransformer/mcb.hpp"
#include "entransformer/report.hpp"
#include "entransformer/search.hpp"
#include "entransformer/trainer.hpp"

namespace entransformer {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

std::string sha256_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path);
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
  char buf[1 << 16];
  while (in.read(buf, sizeof buf) || in.gcount() > 0) EVP_DigestUpdate(ctx, buf, static_cast<std::size_t>(in.gcount()));
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx, digest, &len);
  EVP_MD_CTX_free(ctx);
  std::ostringstream hex;
  for (unsigned int i = 0; i < len; ++i) hex << std::hex << std::setw(2) << std::setfill('0') << int(digest[i]);
  return hex.str();
}

namespace {

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

// Collects what a run read and wrote; saved as <out>/manifest.json.
class Manifest {
 public:
  Manifest(std::string command, std::vector<std::string> args)
      : command_(std::move(command)), args_(std::move(args)), started_(utc_now()) {}

  void input(const std::string& role, const std::string& path) {
    inputs_.push_back({{"role", role}, {"path", fs::absolute(path).string()}, {"sha256", sha256_file(path)}});
  }
  void output(const fs::path& path) { outputs_.push_back(path.filename().string()); }
  void config(const RunConfig& cfg) {
    config_ = ordered_json::object();
    for (const auto& [k, v] : config_settings(cfg)) config_[k] = v;
  }
  void seeds(std::uint64_t run_seed, const std::vector<std::string>& purposes) {
    seeds_ = ordered_json::object();
    seeds_["run"] = run_seed;
    for (const auto& p : purposes) seeds_[p] = derive_seed(run_seed, p);
  }
  void set(const std::string& key, ordered_json value) { extra_[key] = std::move(value); }

  void write(const fs::path& dir) const {
    ordered_json j;
    j["tool"] = "entransformer";
    j["version"] = kToolVersion;
    j["command"] = command_;
    j["arguments"] = args_;
    if (!config_.is_null()) j["config"] = config_;
    if (!seeds_.is_null()) j["seeds"] = seeds_;
    j["inputs"] = inputs_;
    j["outputs"] = outputs_;
    for (const auto& [k, v] : extra_.items()) j[k] = v;
    j["started_at"] = started_;
    j["finished_at"] = utc_now();
    std::ofstream out(dir / "manifest.json");
    if (!out) throw DataError("cannot write " + (dir / "manifest.json").string());
    out << j.dump(2) << '\n';
  }

 private:
  std::string command_;
  std::vector<std::string> args_;
  std::string started_;
  ordered_json config_;
  ordered_json seeds_;
  ordered_json inputs_ = ordered_json::array();
  ordered_json outputs_ = ordered_json::array();
  ordered_json extra_ = ordered_json::object();
};

std::ofstream open_output(const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out.precision(17);
  return out;
}

void write_text(const fs::path& path, const std::string& text) {
  auto out = open_output(path);
  out << text;
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw DataError("cannot create output directory " + dir + ": " + ec.message());
}

RunConfig resolve_config(const std::string& path, const std::vector<std::string>& overrides,
                         const std::optional<std::uint64_t>& seed) {
  RunConfig cfg = load_config(path);
  for (const auto& kv : overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError(kv, "override must be key=value");
    apply_setting(cfg, kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (seed) apply_setting(cfg, "seed", std::to_string(*seed));
  cfg.validate();
  return cfg;
}

std::string join(const std::vector<std::string>& items) {
  std::string out;
  for (const auto& s : items) out += (out.empty() ? "" : ", ") + s;
  return out;
}

// Puts the panel's columns in checkpoint order; fails listing the
// difference when the node sets are not equal.
SeriesPanel align_nodes(const SeriesPanel& panel, const std::vector<std::string>& expected) {
  std::vector<std::string> missing, extra;
  for (const auto& n : expected) {
    if (std::find(panel.node_names.begin(), panel.node_names.end(), n) == panel.node_names.end()) missing.push_back(n);
  }
  for (const auto& n : panel.node_names) {
    if (std::find(expected.begin(), expected.end(), n) == expected.end()) extra.push_back(n);
  }
  if (!missing.empty() || !extra.empty()) {
    throw DataError("data nodes do not match the checkpoint; missing: [" + join(missing) + "]; extra: [" +
                    join(extra) + "]");
  }
  if (panel.node_names == expected) return panel;
  SeriesPanel out = panel;
  out.node_names = expected;
  std::vector<std::size_t> source;
  for (const auto& n : expected) {
    source.push_back(static_cast<std::size_t>(
        std::find(panel.node_names.begin(), panel.node_names.end(), n) - panel.node_names.begin()));
  }
  for (std::size_t t = 0; t < panel.length(); ++t) {
    for (std::size_t d = 0; d < expected.size(); ++d) out.value(t, d) = panel.value(t, source[d]);
  }
  return out;
}

struct TrainArgs {
  std::string config, data, out;
  std::optional<std::uint64_t> seed;
  std::vector<std::string> overrides;
};

int cmd_train(const TrainArgs& a, const std::vector<std::string>& argv, std::ostream& out) {
  Manifest manifest("train", argv);
  const RunConfig cfg = resolve_config(a.config, a.overrides, a.seed);
  manifest.input("config", a.config);
  manifest.input("data", a.data);
  const SeriesPanel panel = load_panel(a.data, cfg.granularity);
  const RollingSplit split = rolling_test_split(panel.length(), cfg.window);
  const PreparedData data = prepare_data(panel, cfg, split.train_end);
  ensure_dir(a.out);

  FitOptions options;
  options.on_epoch = [&out](std::size_t epoch, double loss) {
    out << "epoch " << epoch + 1 << " loss " << format_value(loss) << '\n';
  };
  FitResult fitted = fit(data, cfg, options);

  const fs::path dir(a.out);
  save_checkpoint(dir / "checkpoint.json",
                  Checkpoint{cfg, panel.node_names, panel.granularity, data.normalization, std::move(fitted.model)});
  manifest.output(dir / "checkpoint.json");
  {
    auto csv = open_output(dir / "loss.csv");
    csv << "epoch,loss,validation_loss\n";
    for (std::size_t e = 0; e < fitted.epoch_loss.size(); ++e) {
      csv << e + 1 << ',' << format_value(fitted.epoch_loss[e]) << ',';
      if (e < fitted.validation_loss.size()) csv << format_value(fitted.validation_loss[e]);
      csv << '\n';
    }
  }
  manifest.output(dir / "loss.csv");
  write_text(dir / "config.txt", format_config(cfg));
  manifest.output(dir / "config.txt");
  manifest.config(cfg);
  manifest.seeds(cfg.train.seed, {"init", "noise", "shuffle", "dropout"});
  manifest.set("train_end", split.train_end);
  manifest.set("steps", fitted.steps);
  manifest.write(dir);
  out << "wrote " << (dir / "checkpoint.json").string() << '\n';
  return kExitOk;
}

struct ForecastArgs {
  std::string checkpoint, data, out;
  std::size_t samples = 100;
  std::optional<std::uint64_t> seed;
};

int cmd_forecast(const ForecastArgs& a, const std::vector<std::string>& argv, std::ostream& out) {
  Manifest manifest("forecast", argv);
  if (a.samples < 1) throw ConfigError("samples", "must be >= 1");
  manifest.input("checkpoint", a.checkpoint);
  manifest.input("data", a.data);
  Checkpoint ckpt = load_checkpoint(a.checkpoint);
  const SeriesPanel panel = align_nodes(load_panel(a.data, ckpt.granularity), ckpt.node_names);
  const RunConfig& cfg = ckpt.config;
  const RollingSplit split = rolling_test_split(panel.length(), cfg.window);

  // Imputation follows the run config; scaling reuses the training statistics.
  PreparedData data = prepare_data(panel, cfg, split.train_end);
  data.normalization = ckpt.normalization;
  data.standardized = apply_standardize(data.raw_imputed, data.normalization);

  const std::uint64_t run_seed = a.seed.value_or(cfg.train.seed);
  const std::uint64_t noise_seed = derive_seed(run_seed, "forecast");
  ForecastEnsemble ens = forecast_windows(ckpt.model, data, cfg, split.windows, a.samples, noise_seed);
  const TruthBlocks truth = truth_blocks(data, split.windows);

  ensure_dir(a.out);
  const fs::path dir(a.out);
  write_ensemble_files(dir / "ensemble.csv", ens);
  manifest.output(dir / "ensemble.csv");
  manifest.output(dir / "ensemble.json");
  {
    auto csv = open_output(dir / "quantiles.csv");
    write_quantile_csv(csv, forecast_quantiles(ens, kSummaryLevels), ens.window_starts, ens.node_names);
  }
  manifest.output(dir / "quantiles.csv");
  {
    auto csv = open_output(dir / "truth.csv");
    write_truth_csv(csv, truth);
  }
  manifest.output(dir / "truth.csv");
  manifest.config(cfg);
  manifest.seeds(run_seed, {"forecast"});
  manifest.set("samples", a.samples);
  manifest.write(dir);
  out << "wrote " << ens.samples << " samples x " << ens.windows << " windows to " << (dir / "ensemble.csv").string()
      << '\n';
  return kExitOk;
}

struct EvaluateArgs {
  std::vector<std::string> ensembles;
  std::string truth, out, dataset;
  bool unnormalized = false;
  std::size_t qq_points = 100;
};

int cmd_evaluate(const EvaluateArgs& a, const std::vector<std::string>& argv, std::ostream& out) {
  Manifest manifest("evaluate", argv);
  if (a.qq_points < 1) throw ConfigError("qq-points", "must be >= 1");
  manifest.input("truth", a.truth);
  const TruthBlocks truth = read_truth_csv(a.truth);
  std::vector<ForecastEnsemble> runs;
  for (const auto& path : a.ensembles) {
    manifest.input("ensemble", path);
    runs.push_back(read_ensemble_csv(path));
  }
  const std::string dataset = a.dataset.empty() ? fs::path(a.truth).stem().string() : a.dataset;
  const MetricReport report = build_report(dataset, truth, runs, !a.unnormalized);

  ensure_dir(a.out);
  const fs::path dir(a.out);
  write_text(dir / "report.json", report_json(report));
  manifest.output(dir / "report.json");
  {
    auto csv = open_output(dir / "pit_qq.csv");
    write_qq_csv(csv, pit_qq_points(report.pit, a.qq_points));
  }
  manifest.output(dir / "pit_qq.csv");
  manifest.set("normalized", report.normalized);
  manifest.write(dir);
  out << "CRPS_sum " << format_value(report.crps_sum.mean) << " NRMSE_sum " << format_value(report.nrmse_sum.mean)
      << '\n';
  return kExitOk;
}

struct TuneArgs {
  std::string config, data, out, space;
  std::size_t budget = 0;
  std::optional<std::uint64_t> seed;
  std::vector<std::string> overrides;
};

int cmd_tune(const TuneArgs& a, const std::vector<std::string>& argv, std::ostream& out, std::ostream& err) {
  Manifest manifest("tune", argv);
  const RunConfig base = resolve_config(a.config, a.overrides, a.seed);
  manifest.input("config", a.config);
  manifest.input("data", a.data);
  SearchSpace space;
  if (!a.space.empty()) {
    manifest.input("space", a.space);
    space = load_search_space(a.space);
  }
  const SeriesPanel panel = load_panel(a.data, base.granularity);
  const RollingSplit split = rolling_test_split(panel.length(), base.window);
  ensure_dir(a.out);
  const fs::path dir(a.out);

  auto write_log = [&](const std::vector<Trial>& trials) {
    write_text(dir / "trials.jsonl", trial_log_jsonl(trials));
    manifest.output(dir / "trials.jsonl");
  };
  SearchResult result;
  try {
    result = random_search(space, a.budget, panel, split.train_end, base, base.train.seed);
  } catch (const SearchFailed& e) {
    write_log(e.trials());
    manifest.write(dir);
    err << "trial log written to " << (dir / "trials.jsonl").string() << '\n';
    throw;
  }
  write_log(result.trials);
  write_text(dir / "best_config.txt", format_config(result.best));
  manifest.output(dir / "best_config.txt");
  manifest.config(base);
  manifest.seeds(base.train.seed, {"search"});
  manifest.set("budget", a.budget);
  manifest.set("best_trial", result.best_index);
  manifest.write(dir);
  out << "best trial " << result.best_index << " validation CRPS_sum "
      << format_value(result.trials[result.best_index].validation_crps_sum) << '\n';
  return kExitOk;
}

struct RankArgs {
  std::string scores, out;
  double alpha = 0.05;
};

int cmd_rank(const RankArgs& a, const std::vector<std::string>& argv, std::ostream& out) {
  Manifest manifest("rank", argv);
  manifest.input("scores", a.scores);
  const RankTable table = mcb_ranks(load_score_table(a.scores), a.alpha);
  ensure_dir(a.out);
  const fs::path dir(a.out);
  write_text(dir / "ranks.json", rank_table_json(table));
  manifest.output(dir / "ranks.json");
  const std::string text = render_rank_table(table);
  write_text(dir / "ranks.txt", text);
  manifest.output(dir / "ranks.txt");
  manifest.write(dir);
  out << text;
  return kExitOk;
}

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// Replays the recorded arguments, optionally into another output directory,
// after checking that every recorded input is unchanged.
int cmd_rerun(const std::string& manifest_path, const std::string& new_out, std::ostream& out, std::ostream& err) {
  std::ifstream in(manifest_path);
  if (!in) throw DataError("cannot open manifest " + manifest_path);
  ordered_json j;
  try {
    j = ordered_json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw DataError("manifest " + manifest_path + " is not valid JSON: " + e.what());
  }
  for (const auto& input : j.at("inputs")) {
    const auto path = input.at("path").get<std::string>();
    if (sha256_file(path) != input.at("sha256").get<std::string>()) {
      throw DataError("input changed since the recorded run: " + path);
    }
  }
  auto args = j.at("arguments").get<std::vector<std::string>>();
  if (!new_out.empty()) {
    for (std::size_t i = 0; i < args.size(); ++i) {
      if (args[i] == "--out" && i + 1 < args.size()) args[i + 1] = new_out;
      else if (args[i].rfind("--out=", 0) == 0) args[i] = "--out=" + new_out;
    }
  }
  if (!args.empty() && args.front() == "rerun") throw ConfigError("manifest", "refusing to rerun a rerun");
  return dispatch(args, out, err);
}

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Engression-trained Transformer for probabilistic multivariate forecasting", "entransformer"};
  app.set_version_flag("--version", kToolVersion);
  app.require_subcommand(1);

  TrainArgs train;
  std::uint64_t train_seed = 0;
  auto* train_cmd = app.add_subcommand("train", "Fit a model and write a checkpoint");
  train_cmd->add_option("--config", train.config, "Run configuration file")->required();
  train_cmd->add_option("--data", train.data, "Panel CSV")->required();
  train_cmd->add_option("--out", train.out, "Output directory")->required();
  auto* train_seed_opt = train_cmd->add_option("--seed", train_seed, "Run seed (overrides the config)");
  train_cmd->add_option("--set", train.overrides, "Config override key=value (repeatable)");

  ForecastArgs forecast;
  std::uint64_t forecast_seed = 0;
  auto* forecast_cmd = app.add_subcommand("forecast", "Sample forecast ensembles for the rolling test windows");
  forecast_cmd->add_option("--checkpoint", forecast.checkpoint, "Checkpoint written by train")->required();
  forecast_cmd->add_option("--data", forecast.data, "Panel CSV")->required();
  forecast_cmd->add_option("--out", forecast.out, "Output directory")->required();
  forecast_cmd->add_option("--samples", forecast.samples, "Ensemble size")->capture_default_str();
  auto* forecast_seed_opt = forecast_cmd->add_option("--seed", forecast_seed, "Sampling seed (default: run seed)");

  EvaluateArgs evaluate;
  auto* evaluate_cmd = app.add_subcommand("evaluate", "Score ensembles against the truth");
  evaluate_cmd->add_option("--ensemble", evaluate.ensembles, "Ensemble CSV, one per evaluation run")->required();
  evaluate_cmd->add_option("--truth", evaluate.truth, "Truth CSV")->required();
  evaluate_cmd->add_option("--out", evaluate.out, "Output directory")->required();
  evaluate_cmd->add_option("--dataset", evaluate.dataset, "Dataset id for the report");
  evaluate_cmd->add_flag("--unnormalized", evaluate.unnormalized, "Report CRPS_sum without target scaling");
  evaluate_cmd->add_option("--qq-points", evaluate.qq_points, "Number of PIT Q-Q points")->capture_default_str();

  TuneArgs tune;
  std::uint64_t tune_seed = 0;
  auto* tune_cmd = app.add_subcommand("tune", "Random hyperparameter search");
  tune_cmd->add_option("--config", tune.config, "Base configuration file")->required();
  tune_cmd->add_option("--data", tune.data, "Panel CSV")->required();
  tune_cmd->add_option("--out", tune.out, "Output directory")->required();
  tune_cmd->add_option("--budget", tune.budget, "Number of trials")->required();
  tune_cmd->add_option("--space", tune.space, "Search-space overrides");
  auto* tune_seed_opt = tune_cmd->add_option("--seed", tune_seed, "Search seed (overrides the config)");
  tune_cmd->add_option("--set", tune.overrides, "Config override key=value (repeatable)");

  RankArgs rank;
  auto* rank_cmd = app.add_subcommand("rank", "Average ranks with MCB intervals");
  rank_cmd->add_option("--scores", rank.scores, "Scores CSV (models x datasets)")->required();
  rank_cmd->add_option("--out", rank.out, "Output directory")->required();
  rank_cmd->add_option("--alpha", rank.alpha, "Significance level")->capture_default_str();

  std::string manifest_path, rerun_out;
  auto* rerun_cmd = app.add_subcommand("rerun", "Repeat a recorded run from its manifest");
  rerun_cmd->add_option("--manifest", manifest_path, "manifest.json of the run")->required();
  rerun_cmd->add_option("--out", rerun_out, "Output directory (default: the recorded one)");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitConfig;
  }

  if (*train_cmd) {
    if (*train_seed_opt) train.seed = train_seed;
    return cmd_train(train, args, out);
  }
  if (*forecast_cmd) {
    if (*forecast_seed_opt) forecast.seed = forecast_seed;
    return cmd_forecast(forecast, args, out);
  }
  if (*evaluate_cmd) return cmd_evaluate(evaluate, args, out);
  if (*tune_cmd) {
    if (*tune_seed_opt) tune.seed = tune_seed;
    return cmd_tune(tune, args, out, err);
  }
  if (*rank_cmd) return cmd_rank(rank, args, out);
  return cmd_rerun(manifest_path, rerun_out, out, err);
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  try {
    return dispatch(args, out, err);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const NumericError& e) {
    err << "numeric error: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const DimensionError& e) {
    err << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
}

}  // namespace entransformer
