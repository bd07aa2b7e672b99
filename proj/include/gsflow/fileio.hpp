#pragma once

#include "gsflow/rasterize.hpp"

#include <string>
#include <vector>

namespace gsflow {

// "GMAP" snapshot: u32 count, then per Gaussian little-endian f32 fields in
// declaration order (mean xyz, quaternion coeffs xyzw, scale xyz, opacity,
// color rgb) plus u32 keyframe_id.
void write_map_file(const std::string& path, const GaussianMap& map);
GaussianMap read_map_file(const std::string& path);

// Trajectory text: one "timestamp tx ty tz qx qy qz qw" line per pose,
// camera-to-world (camera center and orientation in world coordinates).
struct TrajectoryEntry {
  double timestamp = 0.0;
  PoseSE3 pose;  // world-to-camera, converted on read/write
};

void write_trajectory(const std::string& path, const std::vector<TrajectoryEntry>& traj);
std::vector<TrajectoryEntry> read_trajectory(const std::string& path);

}  // namespace gsflow
