// Brute-force single-threaded renderer: every pixel walks every Gaussian in
// depth order with the same per-pixel contribution rule as the tile pipeline.
// Used as the equivalence oracle for rasterize / rasterize_flow.
#pragma once

#include "gsflow/rasterize.hpp"

#include <algorithm>
#include <numeric>
#include <vector>

namespace reference {

struct ReferenceRender {
  gsflow::ImageRGB color;
  gsflow::GridXd depth;
  gsflow::GridXd silhouette;
  gsflow::Image2 flow;
  gsflow::GridXb flow_valid;
};

inline ReferenceRender render_all(const gsflow::GaussianMap& map, const gsflow::Keyframe& frame,
                                  const gsflow::PoseSE3* pose_next = nullptr) {
  using namespace gsflow;
  const int w = frame.intrinsics.width;
  const int h = frame.intrinsics.height;

  ReferenceRender out;
  out.color = ImageRGB::Zero(static_cast<Eigen::Index>(w) * h, 3);
  out.depth = GridXd::Zero(h, w);
  out.silhouette = GridXd::Zero(h, w);
  out.flow = Image2::Zero(static_cast<Eigen::Index>(w) * h, 2);
  out.flow_valid = GridXb::Constant(h, w, false);

  std::vector<Projected2D> proj(map.size());
  std::vector<Projected2D> proj_next(map.size());
  std::vector<Mat2> transfer(map.size(), Mat2::Identity());
  for (std::size_t i = 0; i < map.size(); ++i) {
    proj[i] = project_gaussian(map.gaussians[i], frame.pose, frame.intrinsics);
    if (pose_next) {
      proj_next[i] = project_gaussian(map.gaussians[i], *pose_next, frame.intrinsics, false);
      if (!proj_next[i].behind_camera) {
        const Mat2 b_next = mat_pow_half(proj_next[i].decomp, 0.5).M;
        const Mat2 b_t_inv = mat_pow_half(proj[i].decomp, -0.5).M;
        transfer[i] = b_next * b_t_inv;
      }
    }
  }

  std::vector<int> order(map.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (proj[a].depth != proj[b].depth) return proj[a].depth < proj[b].depth;
    return a < b;
  });

  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const Vec2 p(x + 0.5, y + 0.5);
      const Eigen::Index px = pixel_index(x, y, w);
      double T = 1.0, sil = 0.0, depth_acc = 0.0;
      Vec3 color = Vec3::Zero();
      Vec2 flow = Vec2::Zero();
      bool any_behind = false;

      for (int gi : order) {
        if (proj[gi].culled) continue;
        const Vec2 delta = p - proj[gi].mu;
        const double maha = delta.dot(proj[gi].sigma2d_inv.matrix() * delta);
        if (maha > kMahalanobisCut) continue;
        double alpha = map.gaussians[gi].opacity * std::exp(-0.5 * maha);
        if (alpha < kAlphaMin) continue;
        alpha = std::min(alpha, kAlphaClamp);
        const double wgt = alpha * T;
        color += wgt * map.gaussians[gi].color;
        depth_acc += wgt * proj[gi].depth;
        sil += wgt;
        if (pose_next) {
          if (proj_next[gi].behind_camera)
            any_behind = true;
          else
            flow += wgt * (transfer[gi] * delta + proj_next[gi].mu - p);
        }
        T *= 1.0 - alpha;
        if (T < kTransmittanceStop) break;
      }

      out.color.row(px) = color.transpose();
      out.silhouette(y, x) = sil;
      out.depth(y, x) = sil > kSilhouetteEps ? depth_acc / sil : 0.0;
      out.flow.row(px) = flow.transpose();
      out.flow_valid(y, x) = sil > kFlowValidMin && !any_behind;
    }
  }
  return out;
}

}  // namespace reference
