#pragma once

#include "gsflow/rasterize.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace gsflow {

enum class SceneLayout { Wall, Room, RandomBlobs };
enum class TrajectoryKind { Orbit, Line, Lissajous };
enum class ColorMode { Random, Checker };

SceneLayout parse_layout(const std::string& s);
TrajectoryKind parse_trajectory(const std::string& s);
ColorMode parse_color_mode(const std::string& s);

struct SceneSpec {
  int n_gaussians = 150;
  double extent = 4.0;  // world units
  SceneLayout layout = SceneLayout::Wall;
  ColorMode color_mode = ColorMode::Random;
  TrajectoryKind trajectory = TrajectoryKind::Orbit;
  int n_frames = 16;
  int image_size = 64;
  double focal = 0.0;  // pixels; 0 = image_size (about 53 degree fov)
  double flow_noise_sigma = 0.0;      // px
  double confidence_dropout = 0.0;    // fraction of pixels zeroed
  std::uint64_t seed = 1;

  void validate() const;
};

struct GeneratedScene {
  GaussianMap gt_map;
  std::vector<PoseSE3> trajectory;  // world-to-camera, one per frame
  std::vector<Keyframe> frames;     // rendered ground-truth images, id = frame index
  std::vector<GridXd> depths;       // rendered ground-truth depth
  std::vector<GridXd> silhouettes;
  CameraIntrinsics intrinsics;
};

// Deterministic under the seed. Ground-truth images come from the project
// rasterizer; frames failing 95% silhouette coverage trigger a resample of
// the layout (up to 100 attempts).
GeneratedScene generate_scene(const SceneSpec& spec);

// Camera looking at a target, y-down optical convention; returns
// world-to-camera.
PoseSE3 look_at(const Vec3& eye, const Vec3& target, const Vec3& up = Vec3(0, 1, 0));

}  // namespace gsflow
