#pragma once

#include "gsflow/core.hpp"
#include "gsflow/projection.hpp"

#include <cstdint>
#include <vector>

namespace gsflow {

// The mutable set of Gaussians under optimization. The generation counter
// invalidates cached blend records whenever the set is edited structurally.
struct GaussianMap {
  std::vector<Gaussian3D> gaussians;
  std::uint64_t generation = 0;

  std::size_t size() const { return gaussians.size(); }
};

constexpr int kTileSize = 16;
constexpr double kAlphaClamp = 0.99;
constexpr double kAlphaMin = 1.0 / 255.0;
constexpr double kTransmittanceStop = 1e-4;
constexpr double kMahalanobisCut = 9.0;  // 3-sigma ellipse, applied in both renderers
constexpr double kSilhouetteEps = 1e-4;
constexpr double kFlowValidMin = 1e-2;

struct BlendEntry {
  std::int32_t gaussian;
  double alpha;
  double weight;  // alpha * transmittance at arrival
  Vec2 delta;     // pixel center - mu
};

// Per-pixel ordered contributor lists captured during rasterization; the
// substrate of every backward pass. Entries are in strictly increasing depth
// order (index tiebreak), weight = alpha * prod(1 - alpha_earlier).
struct BlendRecords {
  int width = 0, height = 0;
  std::uint64_t map_generation = 0;
  std::vector<std::vector<BlendEntry>> pixels;  // size width*height
  std::vector<double> final_transmittance;      // per pixel

  const std::vector<BlendEntry>& at(int x, int y) const {
    return pixels[static_cast<std::size_t>(y) * width + x];
  }
};

struct RenderOutputs {
  ImageRGB color;        // H*W x 3
  GridXd depth;          // weight-normalized blended z; 0 where uncovered
  GridXd silhouette;     // accumulated density sum_i w_ij
  BlendRecords records;
  std::vector<Projected2D> projections;  // per map Gaussian, culled flagged
};

// Per-Gaussian cache for flow rendering and its backward pass:
// M = B_{t+1} * B_t^{-1} with B = Sigma'^{1/2}.
struct FlowTransferRecord {
  Mat2 M = Mat2::Identity();
  Vec2 mu_next = Vec2::Zero();
  Mat2 B_next = Mat2::Identity();      // Sigma'_{t+1}^{+1/2}
  Mat2 B_t_inv = Mat2::Identity();     // Sigma'_{t}^{-1/2}
  EigenDecomp2 decomp_t;
  EigenDecomp2 decomp_next;
  bool behind_camera = false;
  bool active = false;  // appears in some blend record
};

struct FlowRenderOutputs {
  FlowField zeta;
  std::vector<FlowTransferRecord> transfers;       // per map Gaussian
  std::vector<Projected2D> projections_next;       // unclipped, per map Gaussian
};

// Front-to-back tile-based alpha blending over 16x16 tiles. Per pixel, a
// Gaussian contributes when its Mahalanobis distance is within 3 sigma and
// alpha >= 1/255; blending stops once transmittance drops below 1e-4.
RenderOutputs rasterize(const GaussianMap& map, const Keyframe& frame);

// Renders the projected motion of the map between frame_t's pose and
// pose_next: per pixel, sum_i w_ij * (M_i delta + mu_{i,t+1} - p). Validity
// requires silhouette > 1e-2 and no behind-camera contributor; confidence is
// the silhouette. Records must come from rasterize() on the same generation.
FlowRenderOutputs rasterize_flow(const GaussianMap& map, const Keyframe& frame_t,
                                 const PoseSE3& pose_next, const RenderOutputs& forward);

}  // namespace gsflow
