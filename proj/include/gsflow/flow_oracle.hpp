#pragma once

#include "gsflow/rasterize.hpp"

#include <cstdint>

namespace gsflow {

struct FlowNoise {
  double sigma = 0.0;    // additive Gaussian noise per component, px
  double dropout = 0.0;  // fraction of pixels with confidence zeroed
  std::uint64_t seed = 0;
};

// Geometry-derived observed flow: backprojects each pixel through the
// ground-truth rendered depth at pose_a, reprojects into pose_b, and checks
// occlusion by depth consistency (5% relative). Dropped or occluded pixels
// carry confidence 0.
FlowField flow_oracle(const GaussianMap& gt_map, const PoseSE3& pose_a, const PoseSE3& pose_b,
                      const CameraIntrinsics& k, const FlowNoise& noise = {});

// Same, but reusing already-rendered depth/silhouette maps.
FlowField flow_oracle_from_depth(const GridXd& depth_a, const GridXd& silhouette_a,
                                 const GridXd& depth_b, const PoseSE3& pose_a,
                                 const PoseSE3& pose_b, const CameraIntrinsics& k,
                                 const FlowNoise& noise = {});

}  // namespace gsflow
