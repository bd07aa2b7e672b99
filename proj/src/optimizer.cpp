#include "gsflow/optimizer.hpp"

#include "gsflow/core.hpp"

#include <cmath>
#include <stdexcept>

namespace gsflow {

void adam_step(AdamState& state, Eigen::Ref<Eigen::ArrayXd> params, const Eigen::ArrayXd& grads,
               const Eigen::ArrayXd& lr) {
  if (params.size() != grads.size() || params.size() != state.m.size())
    throw std::runtime_error("adam_step: shape mismatch");
  state.step_count += 1;
  state.m = kAdamBeta1 * state.m + (1.0 - kAdamBeta1) * grads;
  state.v = kAdamBeta2 * state.v + (1.0 - kAdamBeta2) * grads.square();
  const double bc1 = 1.0 - std::pow(kAdamBeta1, static_cast<double>(state.step_count));
  const double bc2 = 1.0 - std::pow(kAdamBeta2, static_cast<double>(state.step_count));
  params -= lr * (state.m / bc1) / ((state.v / bc2).sqrt() + kAdamEps);
}

void adam_step(AdamState& state, Eigen::Ref<Eigen::ArrayXd> params, const Eigen::ArrayXd& grads,
               double lr) {
  adam_step(state, params, grads, Eigen::ArrayXd::Constant(params.size(), lr));
}

void MapOptimizer::reset(std::size_t n) {
  mean_.init(static_cast<Eigen::Index>(3 * n));
  quat_.init(static_cast<Eigen::Index>(4 * n));
  logscale_.init(static_cast<Eigen::Index>(3 * n));
  logit_opacity_.init(static_cast<Eigen::Index>(n));
  color_.init(static_cast<Eigen::Index>(3 * n));
  skipped_ = 0;
}

void MapOptimizer::remap(const std::vector<int>& new_to_old) {
  const Eigen::Index n = static_cast<Eigen::Index>(new_to_old.size());
  auto remap_state = [&](AdamState& s, int stride) {
    AdamState fresh;
    fresh.init(n * stride);
    fresh.step_count = s.step_count;
    for (Eigen::Index i = 0; i < n; ++i) {
      const int old = new_to_old[static_cast<std::size_t>(i)];
      if (old < 0) continue;
      fresh.m.segment(i * stride, stride) = s.m.segment(old * stride, stride);
      fresh.v.segment(i * stride, stride) = s.v.segment(old * stride, stride);
    }
    s = std::move(fresh);
  };
  remap_state(mean_, 3);
  remap_state(quat_, 4);
  remap_state(logscale_, 3);
  remap_state(logit_opacity_, 1);
  remap_state(color_, 3);
}

void MapOptimizer::step(GaussianMap& map, const MapGradients& grads, const LearningRates& lr,
                        double scene_extent) {
  const std::size_t n = map.size();
  if (grads.size() != n || static_cast<Eigen::Index>(n) != logit_opacity_.m.size())
    throw std::runtime_error("MapOptimizer::step: size mismatch");

  Eigen::ArrayXd p_mean(3 * n), g_mean(3 * n), p_quat(4 * n), g_quat(4 * n);
  Eigen::ArrayXd p_ls(3 * n), g_ls(3 * n), p_lo(n), g_lo(n), p_col(3 * n), g_col(3 * n);
  std::vector<char> skip(n, 0);

  for (std::size_t i = 0; i < n; ++i) {
    const bool finite = grads.d_mean[i].allFinite() && grads.d_quat[i].allFinite() &&
                        grads.d_logscale[i].allFinite() &&
                        std::isfinite(grads.d_logit_opacity[i]) && grads.d_color[i].allFinite();
    if (!finite) {
      skip[i] = 1;
      ++skipped_;
    }
    const Gaussian3D& g = map.gaussians[i];
    p_mean.segment(3 * i, 3) = g.mean.array();
    p_quat.segment(4 * i, 4) = g.rotation.coeffs().array();
    p_ls.segment(3 * i, 3) = g.scale.array().log();
    p_lo(i) = logit(g.opacity);
    p_col.segment(3 * i, 3) = g.color.array();
    if (skip[i]) {
      g_mean.segment(3 * i, 3).setZero();
      g_quat.segment(4 * i, 4).setZero();
      g_ls.segment(3 * i, 3).setZero();
      g_lo(i) = 0.0;
      g_col.segment(3 * i, 3).setZero();
    } else {
      g_mean.segment(3 * i, 3) = grads.d_mean[i].array();
      g_quat.segment(4 * i, 4) = grads.d_quat[i].array();
      g_ls.segment(3 * i, 3) = grads.d_logscale[i].array();
      g_lo(i) = grads.d_logit_opacity[i];
      g_col.segment(3 * i, 3) = grads.d_color[i].array();
    }
  }

  adam_step(mean_, p_mean, g_mean, lr.mean * scene_extent);
  adam_step(quat_, p_quat, g_quat, lr.quat);
  adam_step(logscale_, p_ls, g_ls, lr.logscale);
  adam_step(logit_opacity_, p_lo, g_lo, lr.logit_opacity);
  adam_step(color_, p_col, g_col, lr.color);

  for (std::size_t i = 0; i < n; ++i) {
    Gaussian3D& g = map.gaussians[i];
    if (skip[i]) continue;  // moments advanced with zero grad; parameters unchanged
    g.mean = p_mean.segment(3 * i, 3).matrix();
    Vec4 qc = p_quat.segment(4 * i, 4).matrix();
    qc.normalize();
    g.rotation = Quat(qc(3), qc(0), qc(1), qc(2));
    g.scale = p_ls.segment(3 * i, 3).array().exp().matrix();
    g.opacity = sigmoid(p_lo(i));
    g.color = p_col.segment(3 * i, 3).cwiseMax(0.0).cwiseMin(1.0).matrix();
  }
}

void PoseOptimizer::step(PoseSE3& pose, const Vec6& d_tau, const LearningRates& lr) {
  if (!d_tau.allFinite()) return;
  Eigen::ArrayXd tangent = Eigen::ArrayXd::Zero(6);
  Eigen::ArrayXd lr_vec(6);
  lr_vec << lr.pose_rot, lr.pose_rot, lr.pose_rot, lr.pose_trans, lr.pose_trans, lr.pose_trans;
  adam_step(state_, tangent, d_tau.array(), lr_vec);
  pose = pose_retract(pose, Vec6(tangent.matrix()));
}

}  // namespace gsflow
