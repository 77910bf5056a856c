#include "entransformer/checkpoint.hpp"

#include <fstream>

#include <json.hpp>

#include "entransformer/errors.hpp"

namespace entransformer {

using nlohmann::ordered_json;

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  ordered_json doc;
  doc["format"] = "entransformer-checkpoint";
  doc["version"] = kCheckpointVersion;
  ordered_json cfg = ordered_json::object();
  for (const auto& [k, v] : config_settings(ckpt.config)) cfg[k] = v;
  doc["config"] = cfg;
  doc["nodes"] = ckpt.node_names;
  doc["granularity"] = to_string(ckpt.granularity);
  doc["normalization"] = {{"mean", ckpt.normalization.mean}, {"stddev", ckpt.normalization.stddev}};
  ordered_json params = ordered_json::array();
  for (const auto& p : ckpt.model.parameters()) {
    ordered_json entry;
    entry["name"] = p.name;
    entry["shape"] = p.value.shape();
    entry["data"] = std::vector<double>(p.value.data().begin(), p.value.data().end());
    params.push_back(std::move(entry));
  }
  doc["parameters"] = std::move(params);
  std::ofstream out(path);
  if (!out) throw DataError("cannot write checkpoint " + path.string());
  out << doc.dump() << '\n';
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open checkpoint " + path.string());
  ordered_json doc;
  try {
    doc = ordered_json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw DataError("checkpoint " + path.string() + " is not valid JSON: " + e.what());
  }
  if (doc.value("format", "") != "entransformer-checkpoint") {
    throw DataError(path.string() + " is not an entransformer checkpoint");
  }
  const int version = doc.value("version", 0);
  if (version != kCheckpointVersion) {
    throw DataError("unsupported checkpoint version " + std::to_string(version));
  }
  try {
    std::string text;
    for (const auto& [k, v] : doc.at("config").items()) text += k + " = " + v.get<std::string>() + "\n";
    RunConfig config = parse_config(text);
    auto nodes = doc.at("nodes").get<std::vector<std::string>>();
    Normalization norm{doc.at("normalization").at("mean").get<std::vector<double>>(),
                       doc.at("normalization").at("stddev").get<std::vector<double>>()};
    if (norm.mean.size() != nodes.size() || norm.stddev.size() != nodes.size()) {
      throw DataError("checkpoint normalization does not match its node list");
    }
    TransformerModel model(config.model_for(nodes.size()), 0);
    auto& params = model.parameters();
    const auto& stored = doc.at("parameters");
    if (stored.size() != params.size()) {
      throw DataError("checkpoint holds " + std::to_string(stored.size()) + " parameters, model expects " +
                      std::to_string(params.size()));
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
      const auto& entry = stored[i];
      const auto name = entry.at("name").get<std::string>();
      const auto shape = entry.at("shape").get<Shape>();
      const auto data = entry.at("data").get<std::vector<double>>();
      if (name != params[i].name || shape != params[i].value.shape() || data.size() != params[i].value.size()) {
        throw DataError("checkpoint parameter '" + name + "' does not match model parameter '" + params[i].name +
                        "' " + shape_string(params[i].value.shape()));
      }
      std::copy(data.begin(), data.end(), params[i].value.mutable_data().begin());
    }
    return Checkpoint{std::move(config), std::move(nodes), parse_granularity(doc.at("granularity").get<std::string>()),
                      std::move(norm), std::move(model)};
  } catch (const nlohmann::json::exception& e) {
    throw DataError("malformed checkpoint " + path.string() + ": " + e.what());
  }
}

}  // namespace entransformer
