#include "rewirenet/synth.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <string>

#include "rewirenet/errors.hpp"
#include "rewirenet/training.hpp"

namespace rewirenet {

std::string_view to_string(InflowPattern p) {
  switch (p) {
    case InflowPattern::step: return "step";
    case InflowPattern::pulse: return "pulse";
    case InflowPattern::sine: return "sine";
  }
  return "?";
}

InflowPattern inflow_pattern_from_string(std::string_view s) {
  for (auto p : {InflowPattern::step, InflowPattern::pulse, InflowPattern::sine}) {
    if (to_string(p) == s) return p;
  }
  throw ValidationError("unknown inflow profile '" + std::string(s) + "'");
}

std::string_view to_string(Field f) {
  switch (f) {
    case Field::velocity: return "velocity";
    case Field::pressure: return "pressure";
    case Field::density: return "density";
  }
  return "?";
}

Field field_from_string(std::string_view s) {
  for (auto f : {Field::velocity, Field::pressure, Field::density}) {
    if (to_string(f) == s) return f;
  }
  throw ValidationError("unknown field '" + std::string(s) + "'");
}

void SynthConfig::validate() const {
  if (rows < 2 || cols < 2) throw ValidationError("grid needs rows, cols >= 2");
  if (steps < 2) throw ValidationError("synthetic trajectory needs steps >= 2");
  if (!(diffusion >= 0.0) || !std::isfinite(diffusion)) throw ValidationError("diffusion must be >= 0");
  if (!(advection >= 0.0) || !std::isfinite(advection)) throw ValidationError("advection must be >= 0 (flow runs in +x)");
  if (advection + 4.0 * diffusion >= 1.0) {
    throw ValidationError("CFL violation: advection + 4*diffusion = " + std::to_string(advection + 4.0 * diffusion) +
                          " >= 1");
  }
  if (!std::isfinite(amplitude)) throw ValidationError("amplitude must be finite");
  if (pulse_width < 1) throw ValidationError("pulse width must be >= 1");
  if (sine_period < 1) throw ValidationError("sine period must be >= 1");
  if (!(initial_noise >= 0.0) || !std::isfinite(initial_noise)) throw ValidationError("initial noise must be >= 0");
  if (obstacle) {
    const auto& [c, r] = obstacle->center;
    const double rad = obstacle->radius;
    if (!(rad > 0.0) || c - rad <= 0.0 || c + rad >= cols - 1 || r - rad <= 0.0 || r + rad >= rows - 1) {
      throw ValidationError("obstacle must lie strictly inside the domain");
    }
  }
  if (hot_spot && (hot_spot->row < 0 || hot_spot->row >= rows || hot_spot->col < 0 || hot_spot->col >= cols)) {
    throw ValidationError("hot spot outside the grid");
  }
}

double inflow_value(const SynthConfig& config, int t) {
  switch (config.pattern) {
    case InflowPattern::step: return config.amplitude;
    case InflowPattern::pulse: return t < config.pulse_width ? config.amplitude : 0.0;
    case InflowPattern::sine:
      return config.amplitude * std::sin(2.0 * std::numbers::pi * t / config.sine_period);
  }
  return 0.0;
}

MeshGraph grid_mesh(const SynthConfig& config) {
  config.validate();
  const int rows = config.rows, cols = config.cols;
  auto id = [cols](int r, int c) { return static_cast<NodeId>(r * cols + c); };
  std::vector<Vec2> pos;
  std::vector<NodeType> types;
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      pos.push_back({static_cast<double>(c), static_cast<double>(r)});
      NodeType t = NodeType::fluid;
      if (r == 0 || r == rows - 1) {
        t = NodeType::wall;
      } else if (c == 0) {
        t = NodeType::inflow;
      } else if (c == cols - 1) {
        t = NodeType::outflow;
      } else if (config.obstacle) {
        const double dx = c - config.obstacle->center[0], dy = r - config.obstacle->center[1];
        if (std::hypot(dx, dy) <= config.obstacle->radius) t = NodeType::wall;
      }
      types.push_back(t);
    }
  }
  std::vector<std::pair<NodeId, NodeId>> edges;
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      if (c + 1 < cols) edges.emplace_back(id(r, c), id(r, c + 1));
      if (r + 1 < rows) edges.emplace_back(id(r, c), id(r + 1, c));
      if (r + 1 < rows && c + 1 < cols) edges.emplace_back(id(r, c), id(r + 1, c + 1));
    }
  }
  return MeshGraph(std::move(pos), std::move(types), std::move(edges));
}

Trajectory gen_synthetic(const SynthConfig& config) {
  config.validate();
  Trajectory traj;
  traj.graph = grid_mesh(config);
  const auto& g = traj.graph;
  const int rows = config.rows, cols = config.cols;
  auto id = [cols](int r, int c) { return static_cast<std::size_t>(r * cols + c); };

  FrameState f0;
  f0.velocity.assign(g.node_count(), Vec2{0.0, 0.0});
  std::mt19937_64 rng(config.seed);
  std::uniform_real_distribution<double> noise(-1.0, 1.0);
  for (std::size_t i = 0; i < g.node_count(); ++i) {
    // Draw for every node so the stream does not depend on the obstacle.
    const double nx = noise(rng), ny = noise(rng);
    if (g.type(static_cast<NodeId>(i)) == NodeType::fluid) {
      f0.velocity[i] = {config.initial_noise * nx, config.initial_noise * ny};
    }
  }
  if (config.hot_spot) f0.velocity[id(config.hot_spot->row, config.hot_spot->col)][0] += config.hot_spot->value;
  for (int r = 0; r < rows; ++r) {
    if (g.type(static_cast<NodeId>(id(r, 0))) == NodeType::inflow) f0.velocity[id(r, 0)] = {inflow_value(config, 0), 0.0};
  }
  traj.frames.push_back(std::move(f0));

  const double a = config.advection, d = config.diffusion;
  auto is_fluid = [&](int r, int c) {
    return r >= 0 && r < rows && c >= 0 && c < cols && g.type(static_cast<NodeId>(id(r, c))) == NodeType::fluid;
  };
  constexpr int kDr[4] = {-1, 1, 0, 0};
  constexpr int kDc[4] = {0, 0, -1, 1};

  for (int t = 1; t <= config.steps; ++t) {
    const auto& u = traj.frames.back().velocity;
    FrameState next;
    next.time_index = t;
    next.velocity = u;
    for (int r = 0; r < rows; ++r) {
      for (int c = 0; c < cols; ++c) {
        const auto i = id(r, c);
        const auto type = g.type(static_cast<NodeId>(i));
        if (type == NodeType::wall) continue;
        if (type == NodeType::inflow) {
          next.velocity[i] = {inflow_value(config, t), 0.0};
          continue;
        }
        for (int k = 0; k < 2; ++k) {
          double v = u[i][k];
          v -= a * (u[i][k] - u[id(r, c - 1)][k]);
          if (type == NodeType::fluid) {
            for (int n = 0; n < 4; ++n) {
              if (is_fluid(r + kDr[n], c + kDc[n])) v += d * (u[id(r + kDr[n], c + kDc[n])][k] - u[i][k]);
            }
          }
          next.velocity[i][k] = v;
        }
      }
    }
    traj.frames.push_back(std::move(next));
  }
  return traj;
}

namespace {

std::size_t components(const FrameState& f, Field field) {
  switch (field) {
    case Field::velocity: return 2;
    case Field::pressure: return f.pressure ? 1 : 0;
    case Field::density: return f.density ? 1 : 0;
  }
  return 0;
}

double component(const FrameState& f, Field field, std::size_t node, std::size_t k) {
  switch (field) {
    case Field::velocity: return f.velocity[node][k];
    case Field::pressure: return (*f.pressure)[node];
    case Field::density: return (*f.density)[node];
  }
  return 0.0;
}

}  // namespace

double rmse(const Trajectory& predicted, const Trajectory& truth, std::optional<int> horizon, Field field) {
  if (!(predicted.graph == truth.graph)) throw ValidationError("rmse: predicted and truth graphs differ");
  if (truth.frames.empty()) throw ValidationError("rmse: empty truth trajectory");
  const int available = static_cast<int>(truth.frames.size()) - 1;
  const int h = horizon.value_or(available);
  if (h < 1) throw ValidationError("rmse: horizon must be >= 1");
  if (h > available) {
    throw ValidationError("rmse: horizon " + std::to_string(h) + " exceeds truth length " + std::to_string(available));
  }
  if (static_cast<int>(predicted.frames.size()) - 1 < h) {
    throw ValidationError("rmse: predicted trajectory shorter than horizon " + std::to_string(h));
  }
  double sum = 0.0;
  std::size_t count = 0;
  for (int t = 1; t <= h; ++t) {
    const auto& p = predicted.frames[static_cast<std::size_t>(t)];
    const auto& q = truth.frames[static_cast<std::size_t>(t)];
    const auto m = components(q, field);
    if (m == 0 || components(p, field) != m) {
      throw ValidationError("rmse: field '" + std::string(to_string(field)) + "' missing at frame " + std::to_string(t));
    }
    for (std::size_t i = 0; i < truth.graph.node_count(); ++i) {
      if (truth.graph.type(static_cast<NodeId>(i)) != NodeType::fluid) continue;
      for (std::size_t k = 0; k < m; ++k) {
        const double e = component(p, field, i, k) - component(q, field, i, k);
        sum += e * e;
        ++count;
      }
    }
  }
  if (count == 0) throw ValidationError("rmse: no fluid nodes");
  return std::sqrt(sum / static_cast<double>(count));
}

RmseBreakdown evaluate(const ProcessorParams& params, const Trajectory& truth, const RewireParams& rewire,
                       const std::vector<int>& horizons, Field field) {
  validate_trajectory(truth);
  if (truth.frames.size() < 2) throw ValidationError("evaluate: trajectory needs at least two frames");
  const int available = static_cast<int>(truth.frames.size()) - 1;
  RmseBreakdown out;
  out.field = field;
  out.one_step = rmse(teacher_forced(params, truth, rewire), truth, std::nullopt, field);
  for (int k : horizons) {
    if (k < 1) throw ValidationError("evaluate: rollout horizon must be >= 1");
  }
  try {
    const auto rolled = rollout(params, truth.graph, truth.frames.front(), available, rewire, &truth);
    for (int k : horizons) {
      if (k <= available) out.rollout_k[k] = rmse(rolled, truth, k, field);
    }
    out.rollout_all = rmse(rolled, truth, std::nullopt, field);
  } catch (const DivergenceError&) {
    // A rollout that leaves the finite range scores as unbounded error.
    for (int k : horizons) {
      if (k <= available) out.rollout_k[k] = std::numeric_limits<double>::infinity();
    }
    out.rollout_all = std::numeric_limits<double>::infinity();
  }
  return out;
}

}  // namespace rewirenet
