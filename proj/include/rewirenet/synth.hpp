#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string_view>
#include <vector>

#include "rewirenet/meshgraph.hpp"
#include "rewirenet/processor.hpp"
#include "rewirenet/rewiring.hpp"

namespace rewirenet {

enum class InflowPattern { step, pulse, sine };

std::string_view to_string(InflowPattern p);
InflowPattern inflow_pattern_from_string(std::string_view s);

struct Disk {
  Vec2 center{0.0, 0.0};  // grid coordinates (column, row)
  double radius = 0.0;
};

/// Point disturbance added to the x velocity of one node in frame 0.
struct HotSpot {
  int row = 0;
  int col = 0;
  double value = 1.0;
};

struct SynthConfig {
  int rows = 12;
  int cols = 12;
  std::optional<Disk> obstacle;
  InflowPattern pattern = InflowPattern::pulse;
  double amplitude = 1.0;
  int pulse_width = 3;
  int sine_period = 20;
  double diffusion = 0.05;
  double advection = 0.5;
  int steps = 40;
  std::uint64_t seed = 0;
  double initial_noise = 0.01;
  std::optional<HotSpot> hot_spot;

  /// Throws ValidationError, including for advection + 4*diffusion >= 1.
  void validate() const;
};

/// Inflow x velocity at frame t.
double inflow_value(const SynthConfig& config, int t);

/// rows x cols grid: node r*cols + c at (c, r); horizontal, vertical and one
/// (r,c)-(r+1,c+1) diagonal edge per cell. Top and bottom rows and obstacle
/// nodes are walls, the remaining left column inflow, right column outflow.
MeshGraph grid_mesh(const SynthConfig& config);

/// Explicit upwind advection in +x plus 4-neighbour diffusion between fluid
/// nodes (walls, inflow and outflow are no-flux for diffusion). Returns
/// `steps` + 1 frames; the seed only perturbs the initial fluid velocities.
Trajectory gen_synthetic(const SynthConfig& config);

enum class Field { velocity, pressure, density };

std::string_view to_string(Field f);
Field field_from_string(std::string_view s);

/// Root mean squared error over fluid nodes, field components and frames
/// 1..horizon (all frames when horizon is empty). Throws ValidationError on
/// graph mismatch, short trajectories or a missing field.
double rmse(const Trajectory& predicted, const Trajectory& truth, std::optional<int> horizon, Field field);

struct RmseBreakdown {
  double one_step = 0.0;
  std::map<int, double> rollout_k;
  double rollout_all = 0.0;
  Field field = Field::velocity;
};

/// one_step: teacher-forced predictions over every frame. rollout_k: the
/// autoregressive rollout from frame 0 scored over frames 1..k, for each k
/// in `horizons` not exceeding the trajectory; rollout_all: full horizon.
/// A rollout that diverges scores +inf on every rollout metric.
RmseBreakdown evaluate(const ProcessorParams& params, const Trajectory& truth, const RewireParams& rewire,
                       const std::vector<int>& horizons, Field field = Field::velocity);

}  // namespace rewirenet
