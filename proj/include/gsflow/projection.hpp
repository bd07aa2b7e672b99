#pragma once

#include "gsflow/core.hpp"
#include "gsflow/symmat2.hpp"

namespace gsflow {

// Screen-space footprint of one Gaussian, with everything the backward passes
// need cached: the perspective Jacobian, the pose rotation, the camera-frame
// point, and the eigendecomposition of the dilated 2D covariance.
struct Projected2D {
  Vec2 mu = Vec2::Zero();
  SymMat2 sigma2d;       // after the 0.3 px low-pass dilation
  SymMat2 sigma2d_inv;
  double depth = 0;      // camera-frame z
  double radius = 0;     // 3 * sqrt(lambda_max), pixels
  EigenDecomp2 decomp;   // of sigma2d
  Mat23 jacobian;        // d(pixel)/d(camera point)
  Mat3 rotation;         // pose rotation W
  Vec3 cam_point;        // X_c = W x + t
  bool behind_camera = false;
  bool culled = false;   // depth or image-bounds cull (rasterization path)
};

constexpr double kPixelDilation = 0.3;

// EWA projection: mu = pinhole(W x + t), Sigma' = J W Sigma W^T J^T + 0.3 I.
// With clip_to_image the Gaussian is culled when depth leaves (near, far) or
// the 3-sigma box misses the image; without it (the flow target path) only a
// behind-camera flag is raised and the unclipped projection is kept.
Projected2D project_gaussian(const Gaussian3D& g, const PoseSE3& pose,
                             const CameraIntrinsics& k, bool clip_to_image = true);

}  // namespace gsflow
