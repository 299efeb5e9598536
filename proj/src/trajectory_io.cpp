#include "rewirenet/trajectory_io.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "rewirenet/errors.hpp"

namespace rewirenet {

namespace {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

const json& require(const json& obj, const char* key, const std::string& where) {
  if (!obj.is_object()) throw ParseError(where + ": expected an object");
  auto it = obj.find(key);
  if (it == obj.end()) throw ParseError(where + ": missing key '" + key + "'");
  return *it;
}

double as_number(const json& v, const std::string& where) {
  if (!v.is_number()) throw ParseError(where + ": expected a number");
  return v.get<double>();
}

std::int64_t as_integer(const json& v, const std::string& where) {
  if (!v.is_number_integer()) throw ParseError(where + ": expected an integer");
  return v.get<std::int64_t>();
}

Vec2 as_vec2(const json& v, const std::string& where) {
  if (!v.is_array() || v.size() != 2) throw ParseError(where + ": expected [x, y]");
  return {as_number(v[0], where + "[0]"), as_number(v[1], where + "[1]")};
}

std::vector<double> as_scalars(const json& v, const std::string& where) {
  if (!v.is_array()) throw ParseError(where + ": expected an array");
  std::vector<double> out;
  out.reserve(v.size());
  for (std::size_t k = 0; k < v.size(); ++k) out.push_back(as_number(v[k], where + "[" + std::to_string(k) + "]"));
  return out;
}

}  // namespace

Trajectory parse_trajectory(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("malformed JSON: ") + e.what());
  }

  const auto& nodes = require(doc, "nodes", "root");
  if (!nodes.is_array()) throw ParseError("nodes: expected an array");
  std::vector<Vec2> positions;
  std::vector<NodeType> types;
  for (std::size_t k = 0; k < nodes.size(); ++k) {
    const auto where = "nodes[" + std::to_string(k) + "]";
    const auto id = as_integer(require(nodes[k], "id", where), where + ".id");
    if (id != static_cast<std::int64_t>(k)) {
      throw InvariantError(where + ".id: expected " + std::to_string(k) + ", found " + std::to_string(id));
    }
    positions.push_back(as_vec2(require(nodes[k], "pos", where), where + ".pos"));
    const auto& type = require(nodes[k], "type", where);
    if (!type.is_string()) throw ParseError(where + ".type: expected a string");
    try {
      types.push_back(node_type_from_string(type.get<std::string>()));
    } catch (const ParseError& e) {
      throw ParseError(where + ".type: " + e.what());
    }
  }

  const auto& edges_json = require(doc, "edges", "root");
  if (!edges_json.is_array()) throw ParseError("edges: expected an array");
  std::vector<std::pair<NodeId, NodeId>> edges;
  for (std::size_t k = 0; k < edges_json.size(); ++k) {
    const auto where = "edges[" + std::to_string(k) + "]";
    const auto& e = edges_json[k];
    if (!e.is_array() || e.size() != 2) throw ParseError(where + ": expected [i, j]");
    const auto a = as_integer(e[0], where);
    const auto b = as_integer(e[1], where);
    if (a < 0 || b < 0 || a >= static_cast<std::int64_t>(positions.size()) ||
        b >= static_cast<std::int64_t>(positions.size())) {
      throw InvariantError(where + ": index out of range");
    }
    edges.emplace_back(static_cast<NodeId>(a), static_cast<NodeId>(b));
  }

  Trajectory traj;
  traj.graph = MeshGraph(std::move(positions), std::move(types), std::move(edges));

  const auto& frames = require(doc, "frames", "root");
  if (!frames.is_array()) throw ParseError("frames: expected an array");
  for (std::size_t k = 0; k < frames.size(); ++k) {
    const auto where = "frames[" + std::to_string(k) + "]";
    const auto& f = frames[k];
    FrameState frame;
    frame.time_index = as_integer(require(f, "t", where), where + ".t");
    const auto& vel = require(f, "velocity", where);
    if (!vel.is_array()) throw ParseError(where + ".velocity: expected an array");
    for (std::size_t i = 0; i < vel.size(); ++i) {
      frame.velocity.push_back(as_vec2(vel[i], where + ".velocity[" + std::to_string(i) + "]"));
    }
    if (auto it = f.find("pressure"); it != f.end() && !it->is_null()) {
      frame.pressure = as_scalars(*it, where + ".pressure");
    }
    if (auto it = f.find("density"); it != f.end() && !it->is_null()) {
      frame.density = as_scalars(*it, where + ".density");
    }
    try {
      validate_frame(traj.graph, frame);
    } catch (const InvariantError& e) {
      throw InvariantError(where + ": " + e.what());
    }
    traj.frames.push_back(std::move(frame));
  }
  validate_trajectory(traj);
  return traj;
}

std::string serialize_trajectory(const Trajectory& traj) {
  ordered_json doc;
  doc["nodes"] = ordered_json::array();
  for (std::size_t i = 0; i < traj.graph.node_count(); ++i) {
    const auto id = static_cast<NodeId>(i);
    ordered_json node;
    node["id"] = id;
    node["pos"] = {traj.graph.position(id)[0], traj.graph.position(id)[1]};
    node["type"] = std::string(to_string(traj.graph.type(id)));
    doc["nodes"].push_back(std::move(node));
  }
  doc["edges"] = ordered_json::array();
  for (auto [a, b] : traj.graph.undirected_edges()) doc["edges"].push_back({a, b});
  doc["frames"] = ordered_json::array();
  for (const auto& f : traj.frames) {
    ordered_json frame;
    frame["t"] = f.time_index;
    frame["velocity"] = ordered_json::array();
    for (const auto& v : f.velocity) frame["velocity"].push_back({v[0], v[1]});
    if (f.pressure) frame["pressure"] = *f.pressure;
    if (f.density) frame["density"] = *f.density;
    doc["frames"].push_back(std::move(frame));
  }
  return doc.dump() + "\n";
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::filesystem::path& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw std::runtime_error("write failed for '" + path.string() + "'");
}

Trajectory load_trajectory(const std::filesystem::path& path) {
  const auto text = read_text_file(path);
  try {
    return parse_trajectory(text);
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  } catch (const InvariantError& e) {
    throw InvariantError(path.string() + ": " + e.what());
  }
}

void save_trajectory(const Trajectory& traj, const std::filesystem::path& path) {
  write_text_file(path, serialize_trajectory(traj));
}

}  // namespace rewirenet
