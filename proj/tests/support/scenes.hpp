// Shared random scene builders for tests.
#pragma once

#include "gsflow/rasterize.hpp"

#include <random>

namespace test_scenes {

inline gsflow::CameraIntrinsics square_camera(int size, double focal = 0.0) {
  gsflow::CameraIntrinsics k;
  k.width = k.height = size;
  k.fx = k.fy = focal > 0 ? focal : size;
  k.cx = k.cy = 0.5 * size;
  k.near = 0.05;
  k.far = 200.0;
  return k;
}

inline gsflow::GaussianMap random_cloud(std::uint64_t seed, int n, double extent = 4.0,
                                        double z_center = 5.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  gsflow::GaussianMap map;
  for (int i = 0; i < n; ++i) {
    gsflow::Gaussian3D g;
    g.mean = gsflow::Vec3((unit(rng) - 0.5) * extent, (unit(rng) - 0.5) * extent,
                          z_center + (unit(rng) - 0.5) * 0.4 * extent);
    const double base = 0.4 * extent / std::sqrt(static_cast<double>(n));
    g.scale = gsflow::Vec3((0.5 + unit(rng)) * base, (0.5 + unit(rng)) * base,
                           (0.5 + unit(rng)) * base);
    g.rotation = gsflow::Quat(gauss(rng), gauss(rng), gauss(rng), gauss(rng)).normalized();
    g.opacity = 0.2 + 0.6 * unit(rng);
    g.color = gsflow::Vec3(0.1 + 0.8 * unit(rng), 0.1 + 0.8 * unit(rng), 0.1 + 0.8 * unit(rng));
    g.keyframe_id = 0;
    map.gaussians.push_back(g);
  }
  return map;
}

inline gsflow::Keyframe camera_at_origin(int size, double focal = 0.0) {
  gsflow::Keyframe f;
  f.id = 0;
  f.intrinsics = square_camera(size, focal);
  f.image = gsflow::ImageRGB::Zero(static_cast<Eigen::Index>(size) * size, 3);
  return f;  // identity pose looks down +z
}

// Dense, nearly opaque double-layer wall with smooth depth undulation around
// z = 0: saturated silhouette, depth variety, no occlusion boundaries. The
// standard fixture wherever rendered GaussianFlow is compared against the
// reprojection oracle.
inline gsflow::GaussianMap bumpy_wall(std::uint64_t seed, int n, double extent) {
  using namespace gsflow;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  GaussianMap map;
  const int grid = std::max(1, static_cast<int>(std::ceil(std::sqrt(n / 2.0))));
  const double he = 0.85 * extent;
  const double spacing = 2.0 * he / grid;
  for (int layer = 0; layer < 2 && static_cast<int>(map.gaussians.size()) < n; ++layer)
    for (int iy = 0; iy < grid && static_cast<int>(map.gaussians.size()) < n; ++iy)
      for (int ix = 0; ix < grid && static_cast<int>(map.gaussians.size()) < n; ++ix) {
        Gaussian3D g;
        const double x = -he + (ix + 0.5 + 0.5 * layer) * spacing + 0.3 * spacing * (unit(rng) - 0.5);
        const double y = -he + (iy + 0.5 + 0.5 * layer) * spacing + 0.3 * spacing * (unit(rng) - 0.5);
        const double z = 0.22 * extent * std::sin(2.0 * M_PI * x / extent) *
                             std::cos(1.5 * M_PI * y / extent) +
                         0.03 * spacing * (unit(rng) - 0.5);
        g.mean = gsflow::Vec3(x, y, z);
        g.scale = gsflow::Vec3((0.7 + 0.3 * unit(rng)) * spacing, (0.7 + 0.3 * unit(rng)) * spacing,
                               0.08 * spacing);
        g.opacity = 0.97 + 0.02 * unit(rng);
        g.color = gsflow::Vec3(0.05 + 0.9 * unit(rng), 0.05 + 0.9 * unit(rng),
                               0.05 + 0.9 * unit(rng));
        g.keyframe_id = 0;
        map.gaussians.push_back(g);
      }
  return map;
}

// Camera at a lateral offset looking straight down +z from stand_off in
// front of the bumpy wall; all rig poses share the identity orientation.
inline gsflow::PoseSE3 wall_rig_pose(const gsflow::Vec3& eye) {
  gsflow::PoseSE3 pose;
  pose.rotation = gsflow::Mat3::Identity();
  pose.translation = -eye;
  return pose;
}

}  // namespace test_scenes
