#include "gsflow/metrics.hpp"

#include "gsflow/objectives.hpp"

#include <Eigen/SVD>

#include <cmath>
#include <limits>
#include <stdexcept>

namespace gsflow {

double ate_rmse_points(const std::vector<Vec3>& estimated, const std::vector<Vec3>& ground_truth) {
  if (estimated.size() != ground_truth.size())
    throw std::runtime_error("ate_rmse: trajectory lengths differ");
  const std::size_t n = estimated.size();
  if (n < 3) throw std::runtime_error("ate_rmse: need at least 3 poses");

  Vec3 mean_p = Vec3::Zero(), mean_g = Vec3::Zero();
  for (std::size_t i = 0; i < n; ++i) {
    mean_p += estimated[i];
    mean_g += ground_truth[i];
  }
  mean_p /= static_cast<double>(n);
  mean_g /= static_cast<double>(n);

  Mat3 cov = Mat3::Zero();
  double var_p = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const Vec3 dp = estimated[i] - mean_p;
    const Vec3 dg = ground_truth[i] - mean_g;
    cov += dg * dp.transpose();
    var_p += dp.squaredNorm();
  }
  cov /= static_cast<double>(n);
  var_p /= static_cast<double>(n);

  Eigen::JacobiSVD<Mat3> svd(cov, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Vec3 s_diag = Vec3::Ones();
  if ((svd.matrixU() * svd.matrixV().transpose()).determinant() < 0.0) s_diag(2) = -1.0;
  const Mat3 R = svd.matrixU() * s_diag.asDiagonal() * svd.matrixV().transpose();
  const double scale =
      var_p > 0.0 ? (svd.singularValues().cwiseProduct(s_diag)).sum() / var_p : 1.0;
  const Vec3 t = mean_g - scale * R * mean_p;

  double sq = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    sq += (scale * R * estimated[i] + t - ground_truth[i]).squaredNorm();
  return std::sqrt(sq / static_cast<double>(n));
}

double ate_rmse(const std::vector<PoseSE3>& estimated, const std::vector<PoseSE3>& ground_truth) {
  std::vector<Vec3> pe, pg;
  pe.reserve(estimated.size());
  pg.reserve(ground_truth.size());
  for (const PoseSE3& p : estimated) pe.push_back(p.center());
  for (const PoseSE3& p : ground_truth) pg.push_back(p.center());
  return ate_rmse_points(pe, pg);
}

double psnr(const ImageRGB& a, const ImageRGB& b) {
  if (a.rows() != b.rows()) throw std::runtime_error("psnr: dimension mismatch");
  const double mse = (a - b).squaredNorm() / static_cast<double>(a.size());
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return -10.0 * std::log10(mse);
}

double ssim(const ImageRGB& a, const ImageRGB& b, int width, int height) {
  return ssim_full(a, b, width, height).mean;
}

}  // namespace gsflow
