#include "gsflow/flow_oracle.hpp"

#include <cmath>
#include <random>

namespace gsflow {

FlowField flow_oracle_from_depth(const GridXd& depth_a, const GridXd& silhouette_a,
                                 const GridXd& depth_b, const PoseSE3& pose_a,
                                 const PoseSE3& pose_b, const CameraIntrinsics& k,
                                 const FlowNoise& noise) {
  const int w = k.width, h = k.height;
  FlowField out = FlowField::zeros(w, h);

  const PoseSE3 a_to_b = pose_b.compose(pose_a.inverse());
  std::mt19937_64 rng(noise.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      // draw per-pixel randomness unconditionally so dropout does not shift
      // the noise sequence of other pixels
      const double nx = gauss(rng) * noise.sigma;
      const double ny = gauss(rng) * noise.sigma;
      const bool dropped = unit(rng) < noise.dropout;

      const double z = depth_a(y, x);
      if (!(silhouette_a(y, x) > 0.5) || z <= 0.0) continue;

      const Vec2 p(x + 0.5, y + 0.5);
      const Vec3 cam_a(z * (p.x() - k.cx) / k.fx, z * (p.y() - k.cy) / k.fy, z);
      const Vec3 cam_b = a_to_b.apply(cam_a);
      if (cam_b.z() <= 1e-9) continue;

      const Vec2 proj_b(k.fx * cam_b.x() / cam_b.z() + k.cx, k.fy * cam_b.y() / cam_b.z() + k.cy);
      const int bx = static_cast<int>(std::floor(proj_b.x()));
      const int by = static_cast<int>(std::floor(proj_b.y()));
      if (bx < 0 || bx >= w || by < 0 || by >= h) continue;

      const double seen_z = depth_b(by, bx);
      const bool occluded = seen_z > 0.0 && std::abs(cam_b.z() - seen_z) > 0.05 * seen_z;

      const Eigen::Index px = pixel_index(x, y, w);
      out.flow(px, 0) = proj_b.x() - p.x() + nx;
      out.flow(px, 1) = proj_b.y() - p.y() + ny;
      if (!occluded && !dropped) {
        out.confidence(y, x) = 1.0;
        out.validity(y, x) = true;
      }
    }
  }
  return out;
}

FlowField flow_oracle(const GaussianMap& gt_map, const PoseSE3& pose_a, const PoseSE3& pose_b,
                      const CameraIntrinsics& k, const FlowNoise& noise) {
  Keyframe shell;
  shell.intrinsics = k;
  shell.image = ImageRGB::Zero(static_cast<Eigen::Index>(k.width) * k.height, 3);
  shell.pose = pose_a;
  const RenderOutputs ra = rasterize(gt_map, shell);
  shell.pose = pose_b;
  const RenderOutputs rb = rasterize(gt_map, shell);
  return flow_oracle_from_depth(ra.depth, ra.silhouette, rb.depth, pose_a, pose_b, k, noise);
}

}  // namespace gsflow
