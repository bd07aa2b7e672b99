#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <cmath>
#include <stdexcept>

namespace gsflow {

// Rigid transform mapping world points into the camera frame: X_cam = R*x + t.
// Tangent vectors are 6-vectors (rotation first, translation second) applied
// as left-multiplicative increments, see pose_retract.
template <typename Scalar>
struct PoseSE3T {
  Eigen::Matrix<Scalar, 3, 3> rotation = Eigen::Matrix<Scalar, 3, 3>::Identity();
  Eigen::Matrix<Scalar, 3, 1> translation = Eigen::Matrix<Scalar, 3, 1>::Zero();

  Eigen::Matrix<Scalar, 3, 1> apply(const Eigen::Matrix<Scalar, 3, 1>& x) const {
    return rotation * x + translation;
  }

  PoseSE3T inverse() const {
    PoseSE3T out;
    out.rotation = rotation.transpose();
    out.translation = -(rotation.transpose() * translation);
    return out;
  }

  PoseSE3T compose(const PoseSE3T& rhs) const {
    PoseSE3T out;
    out.rotation = rotation * rhs.rotation;
    out.translation = rotation * rhs.translation + translation;
    return out;
  }

  // Camera center in world coordinates.
  Eigen::Matrix<Scalar, 3, 1> center() const { return -(rotation.transpose() * translation); }
};

using PoseSE3 = PoseSE3T<double>;

template <typename Scalar>
Eigen::Matrix<Scalar, 3, 3> skew(const Eigen::Matrix<Scalar, 3, 1>& v) {
  Eigen::Matrix<Scalar, 3, 3> m;
  m << Scalar(0), -v.z(), v.y(),
       v.z(), Scalar(0), -v.x(),
       -v.y(), v.x(), Scalar(0);
  return m;
}

// Exact SE(3) exponential: Rodrigues rotation plus the V-matrix applied to the
// translational part. Below theta = 1e-8 the closed form is replaced by its
// series to avoid 0/0.
template <typename Scalar>
PoseSE3T<Scalar> se3_exp(const Eigen::Matrix<Scalar, 6, 1>& tangent) {
  if (!tangent.allFinite()) throw std::invalid_argument("se3_exp: non-finite tangent");
  const Eigen::Matrix<Scalar, 3, 1> omega = tangent.template head<3>();
  const Eigen::Matrix<Scalar, 3, 1> u = tangent.template tail<3>();
  const Scalar theta = omega.norm();
  const Eigen::Matrix<Scalar, 3, 3> ox = skew(omega);
  const Eigen::Matrix<Scalar, 3, 3> ox2 = ox * ox;

  Scalar a, b, c;  // sin/theta, (1-cos)/theta^2, (theta-sin)/theta^3
  if (theta < Scalar(1e-8)) {
    const Scalar t2 = theta * theta;
    a = Scalar(1) - t2 / Scalar(6);
    b = Scalar(0.5) - t2 / Scalar(24);
    c = Scalar(1) / Scalar(6) - t2 / Scalar(120);
  } else {
    a = std::sin(theta) / theta;
    b = (Scalar(1) - std::cos(theta)) / (theta * theta);
    c = (theta - std::sin(theta)) / (theta * theta * theta);
  }

  PoseSE3T<Scalar> out;
  out.rotation = Eigen::Matrix<Scalar, 3, 3>::Identity() + a * ox + b * ox2;
  const Eigen::Matrix<Scalar, 3, 3> V = Eigen::Matrix<Scalar, 3, 3>::Identity() + b * ox + c * ox2;
  out.translation = V * u;
  return out;
}

// Left-multiplicative retraction: exp(tangent) composed onto pose. All pose
// gradients in this project are expressed in this convention.
template <typename Scalar>
PoseSE3T<Scalar> pose_retract(const PoseSE3T<Scalar>& pose,
                              const Eigen::Matrix<Scalar, 6, 1>& tangent) {
  return se3_exp(tangent).compose(pose);
}

}  // namespace gsflow
