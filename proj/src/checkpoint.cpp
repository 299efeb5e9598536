#include "rewirenet/checkpoint.hpp"

#include <json.hpp>

#include "rewirenet/errors.hpp"
#include "rewirenet/trajectory_io.hpp"

namespace rewirenet {

namespace {

using ordered_json = nlohmann::ordered_json;

ordered_json vector_to_json(const Eigen::VectorXd& v) {
  auto a = ordered_json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

Eigen::VectorXd vector_from_json(const ordered_json& a, const std::string& where) {
  if (!a.is_array()) throw ParseError(where + ": expected an array");
  Eigen::VectorXd v(static_cast<Eigen::Index>(a.size()));
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!a[i].is_number()) throw ParseError(where + "[" + std::to_string(i) + "]: expected a number");
    v(static_cast<Eigen::Index>(i)) = a[i].get<double>();
  }
  return v;
}

ordered_json mlp_to_json(const MlpParams& p) {
  ordered_json j;
  j["activation"] = std::string(to_string(p.activation));
  j["residual"] = p.residual;
  j["activate_output"] = p.activate_output;
  j["layers"] = ordered_json::array();
  for (const auto& l : p.layers) {
    ordered_json layer;
    layer["rows"] = l.weight.rows();
    layer["cols"] = l.weight.cols();
    auto w = ordered_json::array();
    for (Eigen::Index r = 0; r < l.weight.rows(); ++r) {
      for (Eigen::Index c = 0; c < l.weight.cols(); ++c) w.push_back(l.weight(r, c));
    }
    layer["weight"] = std::move(w);
    layer["bias"] = vector_to_json(l.bias);
    j["layers"].push_back(std::move(layer));
  }
  return j;
}

const ordered_json& field(const ordered_json& j, const char* key, const std::string& where) {
  if (!j.is_object() || !j.contains(key)) throw ParseError(where + ": missing key '" + key + "'");
  return j.at(key);
}

MlpParams mlp_from_json(const ordered_json& j, const std::string& where) {
  MlpParams p;
  p.activation = activation_from_string(field(j, "activation", where).get<std::string>());
  p.residual = field(j, "residual", where).get<bool>();
  p.activate_output = field(j, "activate_output", where).get<bool>();
  const auto& layers = field(j, "layers", where);
  for (std::size_t k = 0; k < layers.size(); ++k) {
    const auto lw = where + ".layers[" + std::to_string(k) + "]";
    const auto rows = field(layers[k], "rows", lw).get<Eigen::Index>();
    const auto cols = field(layers[k], "cols", lw).get<Eigen::Index>();
    const auto flat = vector_from_json(field(layers[k], "weight", lw), lw + ".weight");
    if (flat.size() != rows * cols) throw InvariantError(lw + ".weight: expected " + std::to_string(rows * cols) + " entries");
    DenseLayer layer{Eigen::MatrixXd(rows, cols), vector_from_json(field(layers[k], "bias", lw), lw + ".bias")};
    for (Eigen::Index r = 0; r < rows; ++r) {
      for (Eigen::Index c = 0; c < cols; ++c) layer.weight(r, c) = flat(r * cols + c);
    }
    p.layers.push_back(std::move(layer));
  }
  return p;
}

ordered_json stats_to_json(const FeatureStats& s) {
  ordered_json j;
  j["mean"] = vector_to_json(s.mean);
  j["std"] = vector_to_json(s.std);
  return j;
}

FeatureStats stats_from_json(const ordered_json& j, const std::string& where) {
  return FeatureStats{vector_from_json(field(j, "mean", where), where + ".mean"),
                      vector_from_json(field(j, "std", where), where + ".std")};
}

}  // namespace

std::string serialize_checkpoint(const ModelCheckpoint& ckpt) {
  ordered_json doc;
  doc["format"] = "rewirenet-model";
  doc["version"] = kCheckpointVersion;

  ordered_json model;
  model["layers"] = ckpt.config.layers;
  model["hidden_dim"] = ckpt.config.hidden_dim;
  model["mlp_hidden_layers"] = ckpt.config.mlp_hidden_layers;
  model["activation"] = std::string(to_string(ckpt.config.activation));
  model["residual"] = ckpt.config.residual;
  model["pressure"] = ckpt.config.features.pressure;
  model["density"] = ckpt.config.features.density;
  doc["model"] = std::move(model);

  ordered_json rewire;
  rewire["alpha"] = ckpt.rewire.alpha_percent;
  rewire["beta"] = ckpt.rewire.beta;
  rewire["variant"] = std::string(to_string(ckpt.rewire.variant));
  doc["rewire"] = std::move(rewire);

  const auto& p = ckpt.params;
  ordered_json stats;
  stats["node"] = stats_to_json(p.node_stats);
  stats["edge"] = stats_to_json(p.edge_stats);
  stats["target"] = stats_to_json(p.target_stats);
  doc["stats"] = std::move(stats);

  ordered_json weights;
  weights["node_encoder"] = mlp_to_json(p.node_encoder);
  weights["edge_encoder"] = mlp_to_json(p.edge_encoder);
  weights["blocks"] = ordered_json::array();
  for (const auto& b : p.blocks) {
    ordered_json block;
    block["edge_mlp"] = mlp_to_json(b.edge_mlp);
    block["node_mlp"] = mlp_to_json(b.node_mlp);
    weights["blocks"].push_back(std::move(block));
  }
  weights["decoder"] = mlp_to_json(p.decoder);
  doc["weights"] = std::move(weights);
  return doc.dump() + "\n";
}

ModelCheckpoint parse_checkpoint(std::string_view text) {
  ordered_json doc;
  try {
    doc = ordered_json::parse(text.begin(), text.end());
  } catch (const ordered_json::parse_error& e) {
    throw ParseError(std::string("malformed JSON: ") + e.what());
  }
  ModelCheckpoint ckpt;
  try {
    if (field(doc, "format", "root").get<std::string>() != "rewirenet-model") throw ParseError("not a model checkpoint");
    const int version = field(doc, "version", "root").get<int>();
    if (version != kCheckpointVersion) throw ParseError("unsupported checkpoint version " + std::to_string(version));

    const auto& model = field(doc, "model", "root");
    ckpt.config.layers = field(model, "layers", "model").get<int>();
    ckpt.config.hidden_dim = field(model, "hidden_dim", "model").get<int>();
    ckpt.config.mlp_hidden_layers = field(model, "mlp_hidden_layers", "model").get<int>();
    ckpt.config.activation = activation_from_string(field(model, "activation", "model").get<std::string>());
    ckpt.config.residual = field(model, "residual", "model").get<bool>();
    ckpt.config.features.pressure = field(model, "pressure", "model").get<bool>();
    ckpt.config.features.density = field(model, "density", "model").get<bool>();

    const auto& rewire = field(doc, "rewire", "root");
    ckpt.rewire.alpha_percent = field(rewire, "alpha", "rewire").get<double>();
    ckpt.rewire.beta = field(rewire, "beta", "rewire").get<double>();
    ckpt.rewire.variant = variant_from_string(field(rewire, "variant", "rewire").get<std::string>());
    ckpt.rewire.layers = ckpt.config.layers;

    auto& p = ckpt.params;
    p.hidden_dim = ckpt.config.hidden_dim;
    p.layers = ckpt.config.layers;
    p.residual = ckpt.config.residual;
    p.features = ckpt.config.features;
    const auto& stats = field(doc, "stats", "root");
    p.node_stats = stats_from_json(field(stats, "node", "stats"), "stats.node");
    p.edge_stats = stats_from_json(field(stats, "edge", "stats"), "stats.edge");
    p.target_stats = stats_from_json(field(stats, "target", "stats"), "stats.target");

    const auto& weights = field(doc, "weights", "root");
    p.node_encoder = mlp_from_json(field(weights, "node_encoder", "weights"), "weights.node_encoder");
    p.edge_encoder = mlp_from_json(field(weights, "edge_encoder", "weights"), "weights.edge_encoder");
    const auto& blocks = field(weights, "blocks", "weights");
    for (std::size_t l = 0; l < blocks.size(); ++l) {
      const auto where = "weights.blocks[" + std::to_string(l) + "]";
      p.blocks.push_back({mlp_from_json(field(blocks[l], "edge_mlp", where), where + ".edge_mlp"),
                          mlp_from_json(field(blocks[l], "node_mlp", where), where + ".node_mlp")});
    }
    p.decoder = mlp_from_json(field(weights, "decoder", "weights"), "weights.decoder");
  } catch (const ordered_json::exception& e) {
    throw ParseError(std::string("checkpoint: ") + e.what());
  } catch (const ValidationError& e) {
    throw ParseError(std::string("checkpoint: ") + e.what());
  }
  try {
    ckpt.params.validate();
  } catch (const std::invalid_argument& e) {
    throw InvariantError(std::string("checkpoint: ") + e.what());
  }
  return ckpt;
}

void save_checkpoint(const ModelCheckpoint& ckpt, const std::filesystem::path& path) {
  write_text_file(path, serialize_checkpoint(ckpt));
}

ModelCheckpoint load_checkpoint(const std::filesystem::path& path) {
  return parse_checkpoint(read_text_file(path));
}

}  // namespace rewirenet
