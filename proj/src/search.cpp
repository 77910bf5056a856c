#include "entransformer/search.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "entransformer/metrics.hpp"
#include "entransformer/trainer.hpp"

namespace entransformer {

namespace {

template <typename T>
const T& pick(const std::vector<T>& values, std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> dist(0, values.size() - 1);
  return values[dist(rng)];
}

double uniform(double lo, double hi, std::mt19937_64& rng) {
  return lo == hi ? lo : std::uniform_real_distribution<double>(lo, hi)(rng);
}

std::vector<std::string> split_list(const std::string& value) {
  std::vector<std::string> out;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto b = item.find_first_not_of(" \t");
    const auto e = item.find_last_not_of(" \t");
    if (b != std::string::npos) out.push_back(item.substr(b, e - b + 1));
  }
  return out;
}

std::vector<std::size_t> parse_sizes(const std::string& key, const std::string& value) {
  std::vector<std::size_t> out;
  for (const auto& item : split_list(value)) {
    try {
      std::size_t pos = 0;
      const unsigned long long v = std::stoull(item, &pos);
      if (pos != item.size() || item.front() == '-') throw std::invalid_argument(item);
      out.push_back(static_cast<std::size_t>(v));
    } catch (const std::exception&) {
      throw ConfigError(key, "expected a list of unsigned integers, got '" + value + "'");
    }
  }
  if (out.empty()) throw ConfigError(key, "candidate list is empty");
  return out;
}

std::pair<double, double> parse_interval(const std::string& key, const std::string& value) {
  const auto items = split_list(value);
  if (items.size() != 2) throw ConfigError(key, "expected 'lo,hi', got '" + value + "'");
  try {
    return {std::stod(items[0]), std::stod(items[1])};
  } catch (const std::exception&) {
    throw ConfigError(key, "expected 'lo,hi', got '" + value + "'");
  }
}

}  // namespace

void SearchSpace::validate() const {
  auto require = [](bool ok, const char* key, const char* what) {
    if (!ok) throw ConfigError(key, what);
  };
  require(!n_head.empty(), "n_head", "candidate list is empty");
  require(!d_model_multiplier.empty(), "d_model_multiplier", "candidate list is empty");
  require(!n_layers.empty(), "n_layers", "candidate list is empty");
  require(!d_ff.empty(), "d_ff", "candidate list is empty");
  require(!activation.empty(), "activation", "candidate list is empty");
  require(!batch_size.empty(), "batch_size", "candidate list is empty");
  require(!noise.empty(), "noise", "candidate list is empty");
  require(!m_train.empty(), "m_train", "candidate list is empty");
  require(0.0 <= dropout_min && dropout_min <= dropout_max && dropout_max <= 0.4, "dropout",
          "interval must lie in [0, 0.4]");
  require(0.0 < learning_rate_min && learning_rate_min <= learning_rate_max, "learning_rate",
          "interval must be positive and ordered");
  require(0.0 <= sigma_min && sigma_min <= sigma_max, "sigma", "interval must be non-negative and ordered");
  for (auto h : n_head) require(h >= 1, "n_head", "must be >= 1");
  for (auto m : d_model_multiplier) require(m >= 1, "d_model_multiplier", "must be >= 1");
  for (auto m : m_train) require(m >= 2, "m_train", "must be >= 2");
  for (auto b : batch_size) require(b == 32 || b == 64 || b == 128, "batch_size", "must be one of 32, 64, 128");
}

SearchSpace parse_search_space(const std::string& text) {
  SearchSpace space;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("line " + std::to_string(line_no), "expected 'key = value', got '" + line + "'");
    }
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      const auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key == "n_head") space.n_head = parse_sizes(key, value);
    else if (key == "d_model_multiplier") space.d_model_multiplier = parse_sizes(key, value);
    else if (key == "n_layers") space.n_layers = parse_sizes(key, value);
    else if (key == "d_ff") space.d_ff = parse_sizes(key, value);
    else if (key == "batch_size") space.batch_size = parse_sizes(key, value);
    else if (key == "m_train") space.m_train = parse_sizes(key, value);
    else if (key == "activation") {
      space.activation.clear();
      for (const auto& a : split_list(value)) {
        try {
          space.activation.push_back(parse_activation(a));
        } catch (const std::exception&) {
          throw ConfigError(key, "unknown activation '" + a + "'");
        }
      }
    } else if (key == "noise") {
      space.noise.clear();
      for (const auto& n : split_list(value)) {
        try {
          space.noise.push_back(parse_noise_distribution(n));
        } catch (const std::exception&) {
          throw ConfigError(key, "unknown noise distribution '" + n + "'");
        }
      }
    } else if (key == "dropout") std::tie(space.dropout_min, space.dropout_max) = parse_interval(key, value);
    else if (key == "learning_rate") std::tie(space.learning_rate_min, space.learning_rate_max) = parse_interval(key, value);
    else if (key == "sigma") std::tie(space.sigma_min, space.sigma_max) = parse_interval(key, value);
    else throw ConfigError(key, "unknown search-space key");
  }
  space.validate();
  return space;
}

SearchSpace load_search_space(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("space", "cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_search_space(ss.str());
}

RunConfig sample_config(const SearchSpace& space, const RunConfig& base, std::mt19937_64& rng) {
  RunConfig cfg = base;
  cfg.model.n_head = pick(space.n_head, rng);
  cfg.model.d_model = cfg.model.n_head * pick(space.d_model_multiplier, rng);
  cfg.model.n_layers = pick(space.n_layers, rng);
  cfg.model.d_ff = pick(space.d_ff, rng);
  cfg.model.dropout = uniform(space.dropout_min, space.dropout_max, rng);
  cfg.model.activation = pick(space.activation, rng);
  cfg.train.learning_rate =
      std::exp(uniform(std::log(space.learning_rate_min), std::log(space.learning_rate_max), rng));
  cfg.train.batch_size = pick(space.batch_size, rng);
  cfg.noise.distribution = pick(space.noise, rng);
  cfg.noise.sigma = uniform(space.sigma_min, space.sigma_max, rng);
  cfg.train.m_train = pick(space.m_train, rng);
  return cfg;
}

SearchResult random_search(const SearchSpace& space, std::size_t budget, const SeriesPanel& panel,
                           std::size_t train_end, const RunConfig& base, std::uint64_t seed,
                           const SearchOptions& options) {
  if (budget < 1) throw ConfigError("budget", "must be >= 1");
  space.validate();
  const std::size_t q = base.window.horizon;
  if (train_end > panel.length() || train_end < q + 1) {
    throw DataError("training range too short for a validation block of " + std::to_string(q) + " rows");
  }
  const std::size_t val_begin = train_end - q;
  const std::vector<EvalWindow> val_windows{{val_begin - 1, {val_begin, train_end}}};

  std::mt19937_64 rng(derive_seed(seed, "search"));
  SearchResult result;
  bool found = false;
  for (std::size_t i = 0; i < budget; ++i) {
    Trial trial;
    trial.config = sample_config(space, base, rng);
    trial.config.train.seed = derive_seed(seed, "trial-" + std::to_string(i));
    trial.config.noise.rng_seed = derive_seed(trial.config.train.seed, "noise");
    const auto start = std::chrono::steady_clock::now();
    try {
      trial.config.validate();
      // Normalization and imputation see only rows before the validation block.
      const PreparedData data = prepare_data(panel, trial.config, val_begin);
      FitOptions fit_options;
      fit_options.on_epoch = [&trial](std::size_t epoch, double) { trial.epochs_completed = epoch + 1; };
      const FitResult fitted = fit(data, trial.config, fit_options);
      const ForecastEnsemble ens =
          forecast_windows(fitted.model, data, trial.config, val_windows, options.validation_samples,
                           derive_seed(trial.config.train.seed, "forecast"));
      trial.validation_crps_sum = crps_sum(truth_blocks(data, val_windows), ens, /*normalize=*/true).value;
      if (!std::isfinite(trial.validation_crps_sum)) throw NumericError("validation CRPS_sum is not finite");
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception& e) {
      trial.validation_crps_sum = std::numeric_limits<double>::quiet_NaN();
      trial.error = e.what();
    }
    trial.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (std::isfinite(trial.validation_crps_sum) &&
        (!found || trial.validation_crps_sum < result.trials[result.best_index].validation_crps_sum)) {
      result.best_index = i;
      found = true;
    }
    result.trials.push_back(std::move(trial));
  }
  if (!found) throw SearchFailed("all " + std::to_string(budget) + " trials failed", result.trials);
  result.best = result.trials[result.best_index].config;
  return result;
}

std::string trial_log_jsonl(const std::vector<Trial>& trials) {
  std::string out;
  for (const auto& t : trials) {
    nlohmann::ordered_json record;
    nlohmann::ordered_json config = nlohmann::ordered_json::object();
    for (const auto& [key, value] : config_settings(t.config)) config[key] = value;
    record["config"] = config;
    record["validation_crps_sum"] =
        std::isfinite(t.validation_crps_sum) ? nlohmann::ordered_json(t.validation_crps_sum) : nlohmann::ordered_json(nullptr);
    record["epochs_completed"] = t.epochs_completed;
    record["wall_seconds"] = t.wall_seconds;
    if (!t.error.empty()) record["error"] = t.error;
    out += record.dump() + "\n";
  }
  return out;
}

}  // namespace entransformer
