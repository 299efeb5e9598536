#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "rewirenet/meshgraph.hpp"

namespace rewirenet {

/// Trajectory file format (UTF-8 JSON):
///
///   {"nodes":[{"id":0,"pos":[x,y],"type":"fluid"},...],
///    "edges":[[i,j],...],
///    "frames":[{"t":0,"velocity":[[vx,vy],...],"pressure":[...],"density":[...]},...]}
///
/// Node ids must run 0..n-1 in order. Each undirected edge appears once;
/// the writer emits i<j in ascending order.
Trajectory parse_trajectory(std::string_view text);
std::string serialize_trajectory(const Trajectory& traj);

Trajectory load_trajectory(const std::filesystem::path& path);
void save_trajectory(const Trajectory& traj, const std::filesystem::path& path);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view text);

}  // namespace rewirenet
