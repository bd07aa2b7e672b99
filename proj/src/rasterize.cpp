#include "gsflow/rasterize.hpp"

#include "gsflow/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace gsflow {

namespace {

struct TileGrid {
  int tiles_x = 0, tiles_y = 0;
  std::vector<std::vector<std::int32_t>> lists;
};

// Tile lists from the 3-sigma bounding box, each sorted by (depth, index) so
// every pixel sees contributors in a total order independent of input order.
TileGrid build_tile_lists(const std::vector<Projected2D>& projections, int width, int height) {
  TileGrid grid;
  grid.tiles_x = (width + kTileSize - 1) / kTileSize;
  grid.tiles_y = (height + kTileSize - 1) / kTileSize;
  grid.lists.resize(static_cast<std::size_t>(grid.tiles_x) * grid.tiles_y);

  for (std::int32_t i = 0; i < static_cast<std::int32_t>(projections.size()); ++i) {
    const Projected2D& p = projections[i];
    if (p.culled) continue;
    const int x0 = std::clamp(static_cast<int>(std::floor((p.mu.x() - p.radius) / kTileSize)), 0, grid.tiles_x - 1);
    const int x1 = std::clamp(static_cast<int>(std::floor((p.mu.x() + p.radius) / kTileSize)), 0, grid.tiles_x - 1);
    const int y0 = std::clamp(static_cast<int>(std::floor((p.mu.y() - p.radius) / kTileSize)), 0, grid.tiles_y - 1);
    const int y1 = std::clamp(static_cast<int>(std::floor((p.mu.y() + p.radius) / kTileSize)), 0, grid.tiles_y - 1);
    for (int ty = y0; ty <= y1; ++ty)
      for (int tx = x0; tx <= x1; ++tx)
        grid.lists[static_cast<std::size_t>(ty) * grid.tiles_x + tx].push_back(i);
  }

  for (auto& list : grid.lists) {
    std::sort(list.begin(), list.end(), [&](std::int32_t a, std::int32_t b) {
      if (projections[a].depth != projections[b].depth) return projections[a].depth < projections[b].depth;
      return a < b;
    });
  }
  return grid;
}

}  // namespace

RenderOutputs rasterize(const GaussianMap& map, const Keyframe& frame) {
  frame.intrinsics.validate();
  const int width = frame.intrinsics.width;
  const int height = frame.intrinsics.height;
  const Eigen::Index n_px = static_cast<Eigen::Index>(width) * height;

  RenderOutputs out;
  out.color = ImageRGB::Zero(n_px, 3);
  out.depth = GridXd::Zero(height, width);
  out.silhouette = GridXd::Zero(height, width);
  out.records.width = width;
  out.records.height = height;
  out.records.map_generation = map.generation;
  out.records.pixels.resize(static_cast<std::size_t>(n_px));
  out.records.final_transmittance.assign(static_cast<std::size_t>(n_px), 1.0);

  out.projections.resize(map.size());
  for (std::size_t i = 0; i < map.size(); ++i)
    out.projections[i] = project_gaussian(map.gaussians[i], frame.pose, frame.intrinsics);

  const TileGrid grid = build_tile_lists(out.projections, width, height);

  parallel_for(grid.lists.size(), [&](std::size_t tile) {
    const auto& list = grid.lists[tile];
    if (list.empty()) return;
    const int tx = static_cast<int>(tile) % grid.tiles_x;
    const int ty = static_cast<int>(tile) / grid.tiles_x;
    const int px0 = tx * kTileSize, px1 = std::min(px0 + kTileSize, width);
    const int py0 = ty * kTileSize, py1 = std::min(py0 + kTileSize, height);

    for (int y = py0; y < py1; ++y) {
      for (int x = px0; x < px1; ++x) {
        const Vec2 p(x + 0.5, y + 0.5);
        const std::size_t px = static_cast<std::size_t>(y) * width + x;
        auto& recs = out.records.pixels[px];
        double T = 1.0;
        Vec3 color = Vec3::Zero();
        double depth_acc = 0.0, sil = 0.0;

        for (std::int32_t gi : list) {
          const Projected2D& proj = out.projections[gi];
          const Vec2 delta = p - proj.mu;
          const Mat2 inv = proj.sigma2d_inv.matrix();
          const double maha = delta.dot(inv * delta);
          if (maha > kMahalanobisCut) continue;
          double alpha = map.gaussians[gi].opacity * std::exp(-0.5 * maha);
          if (alpha < kAlphaMin) continue;
          alpha = std::min(alpha, kAlphaClamp);
          const double w = alpha * T;
          color += w * map.gaussians[gi].color;
          depth_acc += w * proj.depth;
          sil += w;
          recs.push_back(BlendEntry{gi, alpha, w, delta});
          T *= 1.0 - alpha;
          if (T < kTransmittanceStop) break;
        }

        out.records.final_transmittance[px] = T;
        out.color.row(px) = color.transpose();
        out.silhouette(y, x) = sil;
        out.depth(y, x) = sil > kSilhouetteEps ? depth_acc / sil : 0.0;
      }
    }
  });

  return out;
}

FlowRenderOutputs rasterize_flow(const GaussianMap& map, const Keyframe& frame_t,
                                 const PoseSE3& pose_next, const RenderOutputs& forward) {
  if (forward.records.map_generation != map.generation)
    throw std::runtime_error("rasterize_flow: blend records are stale (map generation mismatch)");
  const int width = forward.records.width;
  const int height = forward.records.height;

  FlowRenderOutputs out;
  out.zeta = FlowField::zeros(width, height);
  out.transfers.resize(map.size());
  out.projections_next.resize(map.size());

  // Target-frame projections are evaluated without image-bounds culling:
  // the flow transfer is defined by projection, not visibility.
  for (std::size_t i = 0; i < map.size(); ++i)
    out.projections_next[i] = project_gaussian(map.gaussians[i], pose_next, frame_t.intrinsics,
                                               /*clip_to_image=*/false);

  for (const auto& pixel : forward.records.pixels)
    for (const BlendEntry& e : pixel) out.transfers[e.gaussian].active = true;

  for (std::size_t i = 0; i < map.size(); ++i) {
    FlowTransferRecord& tr = out.transfers[i];
    if (!tr.active) continue;
    const Projected2D& next = out.projections_next[i];
    if (next.behind_camera) {
      tr.behind_camera = true;
      continue;
    }
    tr.decomp_t = forward.projections[i].decomp;
    tr.decomp_next = next.decomp;
    tr.B_t_inv = mat_pow_half(tr.decomp_t, -0.5).M;
    tr.B_next = mat_pow_half(tr.decomp_next, 0.5).M;
    tr.M = tr.B_next * tr.B_t_inv;
    tr.mu_next = next.mu;
  }

  parallel_for(static_cast<std::size_t>(height), [&](std::size_t y) {
    for (int x = 0; x < width; ++x) {
      const std::size_t px = static_cast<std::size_t>(y) * width + x;
      const Vec2 p(x + 0.5, y + 0.5);
      Vec2 zeta = Vec2::Zero();
      bool any_behind = false;
      for (const BlendEntry& e : forward.records.pixels[px]) {
        const FlowTransferRecord& tr = out.transfers[e.gaussian];
        if (tr.behind_camera) {
          any_behind = true;
          continue;
        }
        zeta += e.weight * (tr.M * e.delta + tr.mu_next - p);
      }
      const double sil = forward.silhouette(static_cast<int>(y), x);
      out.zeta.flow.row(px) = zeta.transpose();
      out.zeta.confidence(static_cast<int>(y), x) = sil;
      out.zeta.validity(static_cast<int>(y), x) = sil > kFlowValidMin && !any_behind;
    }
  });

  return out;
}

}  // namespace gsflow
