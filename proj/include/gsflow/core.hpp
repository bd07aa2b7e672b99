#pragma once

#include "gsflow/se3.hpp"
#include "gsflow/types.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

namespace gsflow {

// One anisotropic 3D Gaussian. Scale stores per-axis standard deviations;
// the 3D covariance is R * diag(scale^2) * R^T. The keyframe id is assigned
// at first rasterization (insertion or split) and never changes afterwards.
struct Gaussian3D {
  Vec3 mean = Vec3::Zero();
  Quat rotation = Quat::Identity();
  Vec3 scale = Vec3::Ones();
  double opacity = 0.5;
  Vec3 color = Vec3::Constant(0.5);
  int keyframe_id = -1;
};

inline double logit(double p) { return std::log(p / (1.0 - p)); }
inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

inline Mat3 covariance3d(const Quat& rotation, const Vec3& scale) {
  if (!rotation.coeffs().allFinite() || !scale.allFinite())
    throw std::invalid_argument("covariance3d: non-finite inputs");
  const Mat3 R = rotation.normalized().toRotationMatrix();
  const Mat3 M = R * scale.asDiagonal();
  return M * M.transpose();
}

struct CameraIntrinsics {
  double fx = 0, fy = 0;
  double cx = 0, cy = 0;
  int width = 0, height = 0;
  double near = 0.01, far = 1000.0;

  void validate() const {
    if (!(fx > 0) || !(fy > 0)) throw std::invalid_argument("intrinsics: focal lengths must be positive");
    if (!(near > 0) || !(near < far)) throw std::invalid_argument("intrinsics: need 0 < near < far");
    if (width <= 0 || height <= 0) throw std::invalid_argument("intrinsics: empty image");
  }
};

struct Keyframe {
  int id = -1;
  ImageRGB image;  // H*W x 3, values in [0,1]
  PoseSE3 pose;    // world-to-camera
  CameraIntrinsics intrinsics;
};

// Dense per-pixel 2D displacement field with confidence in [0,1]. Pixels
// carrying no information have confidence 0 and validity false.
struct FlowField {
  int width = 0, height = 0;
  Image2 flow;        // H*W x 2
  GridXd confidence;  // H x W
  GridXb validity;    // H x W

  static FlowField zeros(int w, int h) {
    FlowField f;
    f.width = w;
    f.height = h;
    f.flow = Image2::Zero(static_cast<Eigen::Index>(w) * h, 2);
    f.confidence = GridXd::Zero(h, w);
    f.validity = GridXb::Constant(h, w, false);
    return f;
  }
};

struct LossConfig {
  double lambda1 = 1.0;      // tracking flow weight
  double lambda2 = 0.5;      // mapping flow weight
  double lambda3 = 1.0;      // isotropic weight
  double lambda4 = 0.01;     // opacity-entropy weight
  double lambda_dssim = 0.2;
  double fisk_alpha = 1.0;   // log-logistic scale, pixels
  double fisk_beta = 1.0;    // log-logistic shape
  double nu = 0.0;           // uniform outlier density; <= 0 means 1/(4*W*H)

  double nu_for(int width, int height) const {
    return nu > 0 ? nu : 1.0 / (4.0 * width * height);
  }
};

struct ManagementConfig {
  double eta_s1 = 0.2;
  double eta_s2 = 0.1;
  double eta_r1 = 10.0;
  double eta_r2 = 40.0;
  double eta_r3 = 5.0;
  double eta_r4 = 7.0;
  double eta_g1 = 0.0001;
  double eta_p1 = 0.6;
  double eta_p2 = 0.2;
  double eta_p3 = 1.5;
  double eta_o1 = 0.05;
};

}  // namespace gsflow
