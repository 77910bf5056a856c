#include "entransformer/ensemble.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "entransformer/errors.hpp"
#include "entransformer/ops.hpp"

namespace entransformer {
namespace {

constexpr std::size_t kMaxRowsPerChunk = 2048;

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) {
    if (!field.empty() && field.back() == '\r') field.pop_back();
    out.push_back(field);
  }
  return out;
}

std::size_t parse_index(const std::string& text, const std::string& where) {
  std::size_t pos = 0;
  unsigned long v = 0;
  try {
    v = std::stoul(text, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos != text.size() || text.empty()) throw DataError(where + ": expected a non-negative integer, got '" + text + "'");
  return v;
}

double parse_number(const std::string& text, const std::string& where) {
  char* end = nullptr;
  const double v = std::strtod(text.c_str(), &end);
  if (text.empty() || end != text.c_str() + text.size()) throw DataError(where + ": unparseable value '" + text + "'");
  return v;
}

// Assigns dense indices to keys in order of first appearance.
template <class Key>
std::size_t intern(std::map<Key, std::size_t>& table, std::vector<Key>& order, const Key& key) {
  auto [it, inserted] = table.emplace(key, order.size());
  if (inserted) order.push_back(key);
  return it->second;
}

}  // namespace

std::string format_value(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

ForecastEnsemble generate_ensemble(const TransformerModel& model, const WindowBatch& batch, std::size_t samples,
                                   const NoiseConfig& noise, std::mt19937_64& rng, const Normalization& norm) {
  if (samples < 1) throw ContractViolation("generate_ensemble: ensemble size must be >= 1");
  const auto& cfg = model.config();
  const std::size_t windows = batch.inputs.dim(0);
  const std::size_t q = cfg.horizon, nodes = cfg.output_dim;
  if (norm.nodes() != nodes) throw DimensionError("generate_ensemble: normalization node count mismatch");

  ForecastEnsemble ens;
  ens.samples = samples;
  ens.windows = windows;
  ens.horizon = q;
  ens.nodes = nodes;
  ens.seed = noise.rng_seed;
  ens.values.assign(samples * windows * q * nodes, 0.0);

  ForwardContext ctx;  // inference: dropout off
  const std::size_t chunk = std::max<std::size_t>(1, kMaxRowsPerChunk / samples);
  const std::size_t row = batch.inputs.size() / std::max<std::size_t>(windows, 1);
  for (std::size_t w0 = 0; w0 < windows; w0 += chunk) {
    const std::size_t w1 = std::min(windows, w0 + chunk);
    Shape shape = batch.inputs.shape();
    shape[0] = w1 - w0;
    std::vector<double> part(batch.inputs.data().begin() + w0 * row, batch.inputs.data().begin() + w1 * row);
    Tensor expanded = expand_batch(Tensor::from(shape, std::move(part)), samples);
    Tensor raw = forward_pass(model, expanded, samples, noise, rng, ctx);
    // raw rows are ordered (window, sample); scatter into (M, W, q, D).
    const std::size_t block = q * nodes;
    for (std::size_t w = w0; w < w1; ++w) {
      for (std::size_t m = 0; m < samples; ++m) {
        const double* src = raw.data().data() + ((w - w0) * samples + m) * block;
        for (std::size_t s = 0; s < q; ++s) {
          for (std::size_t d = 0; d < nodes; ++d) {
            ens.values[ens.index(m, w, s, d)] = norm.destandardize(src[s * nodes + d], d);
          }
        }
      }
    }
  }
  for (double v : ens.values) {
    if (!std::isfinite(v)) throw NumericError("generate_ensemble: non-finite forecast value");
  }
  return ens;
}

void write_ensemble_csv(std::ostream& out, const ForecastEnsemble& ens) {
  out << "window_start,sample_id,step,node,value\n";
  for (std::size_t w = 0; w < ens.windows; ++w) {
    const std::string start = format_timestamp(ens.window_starts.at(w));
    for (std::size_t m = 0; m < ens.samples; ++m) {
      for (std::size_t s = 0; s < ens.horizon; ++s) {
        for (std::size_t d = 0; d < ens.nodes; ++d) {
          out << start << ',' << m << ',' << s << ',' << ens.node_names.at(d) << ',' << format_value(ens.at(m, w, s, d))
              << '\n';
        }
      }
    }
  }
}

void write_ensemble_files(const std::filesystem::path& csv_path, const ForecastEnsemble& ens) {
  {
    std::ofstream out(csv_path);
    if (!out) throw DataError("cannot write " + csv_path.string());
    write_ensemble_csv(out, ens);
  }
  nlohmann::ordered_json sidecar;
  sidecar["M"] = ens.samples;
  sidecar["q"] = ens.horizon;
  sidecar["D"] = ens.nodes;
  sidecar["windows"] = ens.windows;
  sidecar["seed"] = ens.seed;
  sidecar["nodes"] = ens.node_names;
  std::filesystem::path json_path = csv_path;
  json_path.replace_extension(".json");
  std::ofstream out(json_path);
  out << sidecar.dump(2) << '\n';
}

ForecastEnsemble read_ensemble_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open ensemble file " + path.string());
  std::string line;
  if (!std::getline(in, line) || split_fields(line) != std::vector<std::string>{"window_start", "sample_id", "step",
                                                                               "node", "value"}) {
    throw DataError(path.string() + ":1: expected header window_start,sample_id,step,node,value");
  }
  struct Record {
    std::size_t w, m, s, d;
    double v;
  };
  std::map<std::int64_t, std::size_t> window_ids;
  std::vector<std::int64_t> window_order;
  std::map<std::string, std::size_t> node_ids;
  std::vector<std::string> node_order;
  std::vector<Record> records;
  std::size_t max_m = 0, max_s = 0;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const std::string where = path.string() + ":" + std::to_string(line_no);
    auto f = split_fields(line);
    if (f.size() != 5) throw DataError(where + ": expected 5 fields");
    auto ts = parse_timestamp(f[0]);
    if (!ts) throw DataError(where + ": unparseable window_start '" + f[0] + "'");
    Record r{intern(window_ids, window_order, *ts), parse_index(f[1], where), parse_index(f[2], where),
             intern(node_ids, node_order, f[3]), parse_number(f[4], where)};
    max_m = std::max(max_m, r.m);
    max_s = std::max(max_s, r.s);
    records.push_back(r);
  }
  if (records.empty()) throw DataError(path.string() + ": no ensemble rows");
  ForecastEnsemble ens;
  ens.samples = max_m + 1;
  ens.windows = window_order.size();
  ens.horizon = max_s + 1;
  ens.nodes = node_order.size();
  ens.window_starts = window_order;
  ens.node_names = node_order;
  if (records.size() != ens.samples * ens.windows * ens.horizon * ens.nodes) {
    throw DataError(path.string() + ": ensemble is incomplete (" + std::to_string(records.size()) +
                    " rows, expected M*W*q*D = " +
                    std::to_string(ens.samples * ens.windows * ens.horizon * ens.nodes) + ")");
  }
  ens.values.assign(records.size(), std::numeric_limits<double>::quiet_NaN());
  for (const Record& r : records) ens.values[ens.index(r.m, r.w, r.s, r.d)] = r.v;
  for (double v : ens.values) {
    if (std::isnan(v)) throw DataError(path.string() + ": duplicate or missing ensemble cells");
  }
  std::filesystem::path sidecar_path = path;
  sidecar_path.replace_extension(".json");
  if (std::filesystem::exists(sidecar_path)) {
    std::ifstream sin(sidecar_path);
    auto sidecar = nlohmann::json::parse(sin, nullptr, false);
    if (!sidecar.is_discarded() && sidecar.contains("seed")) ens.seed = sidecar["seed"].get<std::uint64_t>();
  }
  return ens;
}

void write_truth_csv(std::ostream& out, const TruthBlocks& truth) {
  out << "window_start,step,node,value\n";
  for (std::size_t w = 0; w < truth.windows; ++w) {
    const std::string start = format_timestamp(truth.window_starts.at(w));
    for (std::size_t s = 0; s < truth.horizon; ++s) {
      for (std::size_t d = 0; d < truth.nodes; ++d) {
        out << start << ',' << s << ',' << truth.node_names.at(d) << ',' << format_value(truth.at(w, s, d)) << '\n';
      }
    }
  }
}

TruthBlocks read_truth_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open truth file " + path.string());
  std::string line;
  if (!std::getline(in, line) ||
      split_fields(line) != std::vector<std::string>{"window_start", "step", "node", "value"}) {
    throw DataError(path.string() + ":1: expected header window_start,step,node,value");
  }
  struct Record {
    std::size_t w, s, d;
    double v;
  };
  std::map<std::int64_t, std::size_t> window_ids;
  std::vector<std::int64_t> window_order;
  std::map<std::string, std::size_t> node_ids;
  std::vector<std::string> node_order;
  std::vector<Record> records;
  std::size_t max_s = 0;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const std::string where = path.string() + ":" + std::to_string(line_no);
    auto f = split_fields(line);
    if (f.size() != 4) throw DataError(where + ": expected 4 fields");
    auto ts = parse_timestamp(f[0]);
    if (!ts) throw DataError(where + ": unparseable window_start '" + f[0] + "'");
    Record r{intern(window_ids, window_order, *ts), parse_index(f[1], where), intern(node_ids, node_order, f[2]),
             parse_number(f[3], where)};
    max_s = std::max(max_s, r.s);
    records.push_back(r);
  }
  if (records.empty()) throw DataError(path.string() + ": no truth rows");
  TruthBlocks truth;
  truth.windows = window_order.size();
  truth.horizon = max_s + 1;
  truth.nodes = node_order.size();
  truth.window_starts = window_order;
  truth.node_names = node_order;
  if (records.size() != truth.windows * truth.horizon * truth.nodes) {
    throw DataError(path.string() + ": truth blocks are incomplete");
  }
  truth.values.assign(records.size(), std::numeric_limits<double>::quiet_NaN());
  for (const Record& r : records) truth.values[(r.w * truth.horizon + r.s) * truth.nodes + r.d] = r.v;
  for (double v : truth.values) {
    if (std::isnan(v)) throw DataError(path.string() + ": duplicate or missing truth cells");
  }
  return truth;
}

}  // namespace entransformer
