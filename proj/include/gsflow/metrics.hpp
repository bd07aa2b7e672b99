#pragma once

#include "gsflow/se3.hpp"
#include "gsflow/types.hpp"

#include <vector>

namespace gsflow {

// RMSE of translation residuals after closed-form Sim(3) alignment of the
// estimated camera centers onto ground truth (scale is unobservable from
// monocular input). Needs at least 3 poses.
double ate_rmse(const std::vector<PoseSE3>& estimated, const std::vector<PoseSE3>& ground_truth);
double ate_rmse_points(const std::vector<Vec3>& estimated, const std::vector<Vec3>& ground_truth);

// -10 log10(MSE) over all pixels and channels, peak 1. Identical images
// report +infinity.
double psnr(const ImageRGB& a, const ImageRGB& b);

// Mean SSIM with the same 11x11 sigma-1.5 window the DSSIM loss uses, so
// DSSIM = (1 - SSIM)/2 holds by construction.
double ssim(const ImageRGB& a, const ImageRGB& b, int width, int height);

}  // namespace gsflow
