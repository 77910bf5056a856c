#include "entransformer/config.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "entransformer/errors.hpp"

namespace entransformer {
namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return {};
  return s.substr(first, s.find_last_not_of(" \t\r\n") - first + 1);
}

std::vector<std::string> split_list(const std::string& value) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(value);
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::size_t to_count(const std::string& key, const std::string& value) {
  std::size_t pos = 0;
  long long v = -1;
  try {
    v = std::stoll(value, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos != value.size() || value.empty() || v < 0) {
    throw ConfigError(key, "expected a non-negative integer, got '" + value + "'");
  }
  return static_cast<std::size_t>(v);
}

std::uint64_t to_u64(const std::string& key, const std::string& value) {
  std::size_t pos = 0;
  unsigned long long v = 0;
  try {
    v = std::stoull(value, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos != value.size() || value.empty() || value[0] == '-') {
    throw ConfigError(key, "expected an unsigned integer, got '" + value + "'");
  }
  return v;
}

double to_real(const std::string& key, const std::string& value) {
  char* end = nullptr;
  const double v = std::strtod(value.c_str(), &end);
  if (value.empty() || end != value.c_str() + value.size() || !std::isfinite(v)) {
    throw ConfigError(key, "expected a number, got '" + value + "'");
  }
  return v;
}

std::string real_text(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

void TrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("epochs", "must be >= 1");
  if (batch_size != 32 && batch_size != 64 && batch_size != 128) {
    throw ConfigError("batch_size", "must be one of 32, 64, 128");
  }
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate", "must be > 0");
  if (m_train < 2) throw ConfigError("m_train", "must be >= 2 (the energy score divides by M - 1)");
  if (!(validation_fraction >= 0.0 && validation_fraction < 1.0)) {
    throw ConfigError("validation_fraction", "must lie in [0, 1)");
  }
  if (!(grad_clip > 0.0)) throw ConfigError("grad_clip", "must be > 0");
}

std::string to_string(Imputation imp) { return imp == Imputation::kZero ? "zero" : "seasonal_mean"; }

Imputation parse_imputation(const std::string& name) {
  if (name == "zero") return Imputation::kZero;
  if (name == "seasonal_mean" || name == "seasonal") return Imputation::kSeasonalMean;
  throw ConfigError("imputation", "unknown imputation '" + name + "' (expected seasonal_mean or zero)");
}

TransformerConfig RunConfig::model_for(std::size_t nodes) const {
  TransformerConfig m = model;
  m.context_len = window.context;
  m.horizon = window.horizon;
  m.output_dim = nodes;
  m.input_dim = window.input_dim(nodes);
  return m;
}

void RunConfig::validate() const {
  window.validate();
  model_for(1).validate();
  noise.validate();
  train.validate();
}

void apply_setting(RunConfig& cfg, const std::string& key, const std::string& raw) {
  const std::string value = trim(raw);
  if (key == "context_length") {
    cfg.window.context = to_count(key, value);
  } else if (key == "horizon") {
    cfg.window.horizon = to_count(key, value);
  } else if (key == "lags") {
    cfg.window.lags.clear();
    for (const auto& item : split_list(value)) cfg.window.lags.push_back(to_count(key, item));
  } else if (key == "rolling_windows") {
    cfg.window.rolling_windows = to_count(key, value);
  } else if (key == "calendar") {
    cfg.window.calendar.clear();
    for (const auto& item : split_list(value)) cfg.window.calendar.push_back(parse_calendar_feature(item));
  } else if (key == "granularity") {
    if (value.empty() || value == "auto") {
      cfg.granularity.reset();
    } else {
      cfg.granularity = parse_granularity(value);
    }
  } else if (key == "n_head") {
    cfg.model.n_head = to_count(key, value);
  } else if (key == "d_model") {
    cfg.model.d_model = to_count(key, value);
  } else if (key == "n_layers") {
    cfg.model.n_layers = to_count(key, value);
  } else if (key == "d_ff") {
    cfg.model.d_ff = to_count(key, value);
  } else if (key == "dropout") {
    cfg.model.dropout = to_real(key, value);
  } else if (key == "activation") {
    cfg.model.activation = parse_activation(value);
  } else if (key == "noise") {
    cfg.noise.distribution = parse_noise_distribution(value);
  } else if (key == "sigma") {
    cfg.noise.sigma = to_real(key, value);
  } else if (key == "epochs") {
    cfg.train.epochs = to_count(key, value);
  } else if (key == "batch_size") {
    cfg.train.batch_size = to_count(key, value);
  } else if (key == "learning_rate") {
    cfg.train.learning_rate = to_real(key, value);
  } else if (key == "m_train") {
    cfg.train.m_train = to_count(key, value);
  } else if (key == "seed") {
    cfg.train.seed = to_u64(key, value);
    cfg.noise.rng_seed = derive_seed(cfg.train.seed, "noise");
  } else if (key == "validation_fraction") {
    cfg.train.validation_fraction = to_real(key, value);
  } else if (key == "grad_clip") {
    cfg.train.grad_clip = to_real(key, value);
  } else if (key == "train_imputation") {
    cfg.train_imputation = parse_imputation(value);
  } else if (key == "test_imputation") {
    cfg.test_imputation = parse_imputation(value);
  } else {
    throw ConfigError(key, "unknown configuration key");
  }
}

RunConfig parse_config(const std::string& text) {
  RunConfig cfg;
  cfg.noise.rng_seed = derive_seed(cfg.train.seed, "noise");
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("line " + std::to_string(line_no), "expected 'key = value', got '" + line + "'");
    }
    apply_setting(cfg, trim(line.substr(0, eq)), line.substr(eq + 1));
  }
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config", "cannot open " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

std::map<std::string, std::string> config_settings(const RunConfig& cfg) {
  std::map<std::string, std::string> kv;
  kv["context_length"] = std::to_string(cfg.window.context);
  kv["horizon"] = std::to_string(cfg.window.horizon);
  std::string lags;
  for (std::size_t i = 0; i < cfg.window.lags.size(); ++i) lags += (i ? "," : "") + std::to_string(cfg.window.lags[i]);
  kv["lags"] = lags;
  kv["rolling_windows"] = std::to_string(cfg.window.rolling_windows);
  std::string cal;
  for (std::size_t i = 0; i < cfg.window.calendar.size(); ++i) cal += (i ? "," : "") + to_string(cfg.window.calendar[i]);
  kv["calendar"] = cal;
  kv["granularity"] = cfg.granularity ? to_string(*cfg.granularity) : "auto";
  kv["n_head"] = std::to_string(cfg.model.n_head);
  kv["d_model"] = std::to_string(cfg.model.d_model);
  kv["n_layers"] = std::to_string(cfg.model.n_layers);
  kv["d_ff"] = std::to_string(cfg.model.d_ff);
  kv["dropout"] = real_text(cfg.model.dropout);
  kv["activation"] = to_string(cfg.model.activation);
  kv["noise"] = to_string(cfg.noise.distribution);
  kv["sigma"] = real_text(cfg.noise.sigma);
  kv["epochs"] = std::to_string(cfg.train.epochs);
  kv["batch_size"] = std::to_string(cfg.train.batch_size);
  kv["learning_rate"] = real_text(cfg.train.learning_rate);
  kv["m_train"] = std::to_string(cfg.train.m_train);
  kv["seed"] = std::to_string(cfg.train.seed);
  kv["validation_fraction"] = real_text(cfg.train.validation_fraction);
  kv["grad_clip"] = real_text(cfg.train.grad_clip);
  kv["train_imputation"] = to_string(cfg.train_imputation);
  kv["test_imputation"] = to_string(cfg.test_imputation);
  return kv;
}

std::string format_config(const RunConfig& cfg) {
  std::string out;
  for (const auto& [k, v] : config_settings(cfg)) out += k + " = " + v + "\n";
  return out;
}

std::uint64_t derive_seed(std::uint64_t seed, const std::string& purpose) {
  // FNV-1a over the purpose tag, mixed into the seed with splitmix64.
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : purpose) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  std::uint64_t z = seed ^ h;
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace entransformer
