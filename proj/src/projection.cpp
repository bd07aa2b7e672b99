#include "gsflow/projection.hpp"

namespace gsflow {

Projected2D project_gaussian(const Gaussian3D& g, const PoseSE3& pose,
                             const CameraIntrinsics& k, bool clip_to_image) {
  Projected2D out;
  out.rotation = pose.rotation;
  out.cam_point = pose.apply(g.mean);
  const double z = out.cam_point.z();
  out.depth = z;

  if (z <= 1e-9) {
    out.behind_camera = true;
    out.culled = true;
    return out;
  }

  const double inv_z = 1.0 / z;
  out.mu.x() = k.fx * out.cam_point.x() * inv_z + k.cx;
  out.mu.y() = k.fy * out.cam_point.y() * inv_z + k.cy;

  out.jacobian << k.fx * inv_z, 0.0, -k.fx * out.cam_point.x() * inv_z * inv_z,
                  0.0, k.fy * inv_z, -k.fy * out.cam_point.y() * inv_z * inv_z;

  const Mat3 cov_world = covariance3d(g.rotation, g.scale);
  const Mat23 JW = out.jacobian * pose.rotation;
  Mat2 cov2 = JW * cov_world * JW.transpose();
  cov2(0, 0) += kPixelDilation;
  cov2(1, 1) += kPixelDilation;
  out.sigma2d = SymMat2::from_matrix(cov2);
  out.sigma2d_inv = out.sigma2d.inverse();
  out.decomp = eigendecompose(out.sigma2d);
  out.radius = 3.0 * std::sqrt(out.decomp.S(0));

  if (clip_to_image) {
    const bool depth_ok = z > k.near && z < k.far;
    const bool on_image = out.mu.x() + out.radius > 0.0 && out.mu.x() - out.radius < k.width &&
                          out.mu.y() + out.radius > 0.0 && out.mu.y() - out.radius < k.height;
    out.culled = !(depth_ok && on_image);
  }
  return out;
}

}  // namespace gsflow
