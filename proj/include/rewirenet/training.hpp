#pragma once

#include <cstdint>
#include <vector>

#include "rewirenet/processor.hpp"
#include "rewirenet/rewiring.hpp"

namespace rewirenet {

struct TrainConfig {
  ModelConfig model;
  RewireParams rewire;
  double step_size = 1e-3;
  int epochs = 100;
  int batch = 4;
  std::uint64_t seed = 0;

  void validate() const;
};

struct TrainResult {
  ProcessorParams params;
  std::vector<double> loss_curve;  // mean minibatch loss over each epoch
};

/// One (graph, frame_t, frame_t+1) training sample with its precomputed schedule.
struct Sample {
  const MeshGraph* graph = nullptr;
  const FrameState* current = nullptr;
  const FrameState* next = nullptr;
  RewireSchedule schedule;
};

/// All consecutive frame pairs, schedules built from the current frame.
/// Samples point into `trajectories`, which must outlive them.
std::vector<Sample> make_samples(const std::vector<Trajectory>& trajectories, const RewireParams& rewire);
std::vector<Sample> make_samples(std::vector<Trajectory>&&, const RewireParams&) = delete;

/// Fits node, edge and target statistics on the training samples.
void fit_normalization(ProcessorParams& params, const std::vector<Sample>& samples);

/// Mean loss and mean gradient over `indices`. Per-sample gradients run in
/// parallel and are reduced in ascending index order.
LossGrad batch_loss_and_grad(const ProcessorParams& params, const std::vector<Sample>& samples,
                             const std::vector<std::size_t>& indices);

/// Serial reference for batch_loss_and_grad.
LossGrad batch_loss_and_grad_serial(const ProcessorParams& params, const std::vector<Sample>& samples,
                                    const std::vector<std::size_t>& indices);

/// Mini-batch gradient descent with a fixed step. Throws ValidationError for
/// a bad config and DivergenceError when the loss or weights go non-finite.
TrainResult train(const TrainConfig& config, const std::vector<Trajectory>& trajectories);

/// Autoregressive prediction of `steps` frames from frame0, rebuilding the
/// schedule from each predicted frame. With `boundary`, non-fluid nodes of
/// each new frame are copied from the boundary frame of the same time index.
Trajectory rollout(const ProcessorParams& params, const MeshGraph& graph, const FrameState& frame0, int steps,
                   const RewireParams& rewire, const Trajectory* boundary = nullptr);

/// Each frame k >= 1 predicted from truth frame k-1 (teacher forcing).
Trajectory teacher_forced(const ProcessorParams& params, const Trajectory& truth, const RewireParams& rewire);

}  // namespace rewirenet
