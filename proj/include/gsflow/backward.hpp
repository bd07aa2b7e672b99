#pragma once

#include "gsflow/rasterize.hpp"

namespace gsflow {

// Gradients w.r.t. every Gaussian parameter, in optimizer coordinates:
// log-scale and logit-opacity include the reparameterization Jacobians, the
// quaternion gradient is projected onto the unit-sphere tangent. Gaussians
// absent from all blend records keep exact zeros.
struct MapGradients {
  std::vector<Vec3> d_mean;
  std::vector<Vec4> d_quat;  // w.r.t. quaternion coeffs (x, y, z, w)
  std::vector<Vec3> d_logscale;
  std::vector<double> d_logit_opacity;
  std::vector<Vec3> d_color;
  std::vector<double> pos_grad_2d;  // max ||dL/dmu|| seen per Gaussian

  void resize(std::size_t n);
  void add_scaled(const MapGradients& other, double s);
  std::size_t size() const { return d_mean.size(); }
};

// Left-trivialized tangent gradients (rotation first, translation second),
// matching pose_retract's convention.
struct PoseGradients {
  Vec6 d_tau_t = Vec6::Zero();
  Vec6 d_tau_next = Vec6::Zero();
};

// Screen-space gradients per contributing Gaussian for the two frames of a
// flow pass (slot 0 = rasterized frame t, slot 1 = target frame t+1). The
// image backward fills slot 0 only.
struct Intermediate2DGradients {
  std::vector<Vec2> d_mu_t, d_mu_next;
  std::vector<Mat2> A_t, A_next;            // dL/dB_t^{-1} and dL/dB_{t+1}
  std::vector<Mat2> d_Q_t, d_Q_next;
  std::vector<Mat2> d_Spow_t, d_Spow_next;
  std::vector<Mat2> d_sigma2d_t, d_sigma2d_next;  // symmetric representatives
  std::vector<double> d_opacity;
  std::vector<Vec3> d_color;
  std::vector<char> touched;
  bool has_next = false;

  void resize(std::size_t n);
  std::size_t size() const { return d_opacity.size(); }
};

struct BackwardOptions {
  bool alpha_path = true;       // differentiate through w_ij (test ablation)
  bool sigma_mean_term = true;  // dSigma'/dx through the perspective Jacobian
};

// Flow-loss backward to screen space: the direct center terms, the
// A = <(B_{t+1} v, v B_t^{-T})> accumulations into the eigen factors, the
// closed-form pullback to Sigma' entries, and the alpha-blending weight
// path. Accumulation is per tile row with a fixed-order reduction, so results
// do not depend on processing order.
Intermediate2DGradients backward_flow_2d(const Image2& dL_dzeta, const RenderOutputs& forward,
                                         const FlowRenderOutputs& flow, const GaussianMap& map,
                                         const BackwardOptions& opts = {});

// Image-loss backward to screen space (color, opacity, mu, Sigma' through the
// blending weights). Slot 0 only.
Intermediate2DGradients backward_image_2d(const ImageRGB& dL_dpixel, const RenderOutputs& forward,
                                          const GaussianMap& map, const BackwardOptions& opts = {});

// Pulls screen-space gradients to world parameters: mu and Sigma' through the
// projection (including the Jacobian's dependence on the mean), then
// Sigma -> (quaternion, log-scale). Accumulates into out.
void backward_to_world(const Intermediate2DGradients& g2d, const RenderOutputs& forward,
                       const FlowRenderOutputs* flow, const GaussianMap& map, double weight,
                       MapGradients& out, const BackwardOptions& opts = {});

// Pose tangent gradients for the rasterized frame (slot 0) and, when a flow
// pass is present, the target frame (slot 1).
PoseGradients backward_to_pose(const Intermediate2DGradients& g2d, const RenderOutputs& forward,
                               const FlowRenderOutputs* flow, const GaussianMap& map);

struct ImageBackward {
  MapGradients map_grads;
  Vec6 d_tau = Vec6::Zero();
};

// Full image-loss backward: all Gaussian parameters plus the rendering pose.
ImageBackward backward_image(const ImageRGB& dL_dpixel, const RenderOutputs& forward,
                             const GaussianMap& map, const BackwardOptions& opts = {});

}  // namespace gsflow
