#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "rewirenet/processor.hpp"
#include "rewirenet/rewiring.hpp"

namespace rewirenet {

/// Everything needed to reproduce predictions: weights, frozen statistics,
/// architecture and rewiring settings.
struct ModelCheckpoint {
  ModelConfig config;
  RewireParams rewire;
  ProcessorParams params;
};

inline constexpr int kCheckpointVersion = 1;

/// JSON container; doubles are written in shortest round-trip form so
/// save -> load -> save is byte-identical.
std::string serialize_checkpoint(const ModelCheckpoint& ckpt);
ModelCheckpoint parse_checkpoint(std::string_view text);

void save_checkpoint(const ModelCheckpoint& ckpt, const std::filesystem::path& path);
ModelCheckpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace rewirenet
