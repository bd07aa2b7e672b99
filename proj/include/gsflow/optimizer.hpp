#pragma once

#include "gsflow/backward.hpp"

#include <Eigen/Core>

namespace gsflow {

// Adaptive-moment update with bias correction, beta = (0.9, 0.999),
// eps = 1e-15. One state per parameter tensor.
struct AdamState {
  Eigen::ArrayXd m, v;
  long step_count = 0;

  void init(Eigen::Index n) {
    m = Eigen::ArrayXd::Zero(n);
    v = Eigen::ArrayXd::Zero(n);
    step_count = 0;
  }
};

constexpr double kAdamBeta1 = 0.9;
constexpr double kAdamBeta2 = 0.999;
constexpr double kAdamEps = 1e-15;

// In-place descent step; lr may be per-coordinate.
void adam_step(AdamState& state, Eigen::Ref<Eigen::ArrayXd> params, const Eigen::ArrayXd& grads,
               const Eigen::ArrayXd& lr);
void adam_step(AdamState& state, Eigen::Ref<Eigen::ArrayXd> params, const Eigen::ArrayXd& grads,
               double lr);

struct LearningRates {
  double mean = 1.6e-4;  // scaled by the scene extent at use
  double logscale = 5e-3;
  double quat = 1e-3;
  double logit_opacity = 5e-2;
  double color = 2.5e-3;
  double pose_rot = 1e-3;
  double pose_trans = 2e-3;
};

// Adam over the five per-Gaussian tensors. Steps act on log-scale and
// logit-opacity so the positivity and (0,1) invariants hold unconditionally;
// quaternions are renormalized after every step. Gaussians with any
// non-finite gradient are skipped and counted.
class MapOptimizer {
 public:
  explicit MapOptimizer(std::size_t n_gaussians) { reset(n_gaussians); }

  void reset(std::size_t n_gaussians);

  // Rebuild after a management edit: new_to_old maps each new index to its
  // previous index, or -1 for freshly created Gaussians (zero moments).
  void remap(const std::vector<int>& new_to_old);

  void step(GaussianMap& map, const MapGradients& grads, const LearningRates& lr,
            double scene_extent);

  long steps() const { return mean_.step_count; }
  long skipped_nonfinite() const { return skipped_; }

 private:
  AdamState mean_, quat_, logscale_, logit_opacity_, color_;
  long skipped_ = 0;
};

// Adam on a 6-vector pose tangent with split rotational/translational rates;
// each step retracts onto SE(3).
class PoseOptimizer {
 public:
  PoseOptimizer() { state_.init(6); }
  void reset() { state_.init(6); }
  void step(PoseSE3& pose, const Vec6& d_tau, const LearningRates& lr);

 private:
  AdamState state_;
};

}  // namespace gsflow
