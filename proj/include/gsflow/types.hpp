#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <cstdint>
#include <vector>

namespace gsflow {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Vec4 = Eigen::Vector4d;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat2 = Eigen::Matrix2d;
using Mat3 = Eigen::Matrix3d;
using Mat23 = Eigen::Matrix<double, 2, 3>;
using Quat = Eigen::Quaterniond;

// Dense row-major scalar image, H rows by W columns.
using GridXd = Eigen::Array<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using GridXb = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// H*W x C storage for multi-channel images, pixel-major (row j*W + i).
template <int C>
using PixelArray = Eigen::Matrix<double, Eigen::Dynamic, C, Eigen::RowMajor>;

using ImageRGB = PixelArray<3>;
using Image2 = PixelArray<2>;

inline Eigen::Index pixel_index(int x, int y, int width) {
  return static_cast<Eigen::Index>(y) * width + x;
}

}  // namespace gsflow
