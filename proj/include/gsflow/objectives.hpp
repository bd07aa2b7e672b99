#pragma once

#include "gsflow/backward.hpp"
#include "gsflow/robustflow.hpp"

#include <optional>

namespace gsflow {

struct LossMaps {
  GridXd dssim_map;      // per-pixel DSSIM, channel mean
  GridXd l1_map;         // per-pixel L1, channel mean
  GridXd flow_loss_map;  // confidence-weighted flow loss, filled by flow passes
};

// 11x11 Gaussian window (sigma 1.5) convolution with reflect-101 borders, and
// its adjoint (the exact transpose, needed by the SSIM backward).
GridXd gaussian_blur(const GridXd& img);
GridXd gaussian_blur_adjoint(const GridXd& g);

// Mean SSIM between two images plus the per-pixel per-channel map.
struct SsimResult {
  double mean = 0.0;
  std::vector<GridXd> per_channel;  // H x W per channel
};
SsimResult ssim_full(const ImageRGB& a, const ImageRGB& b, int width, int height);

struct ImageLossResult {
  double total = 0.0;
  LossMaps maps;
  ImageRGB dL_dpixel;  // exact derivative of total w.r.t. the rendered image
};

// (1 - lambda)*mean L1 + lambda*mean DSSIM, DSSIM = (1 - SSIM)/2.
ImageLossResult image_loss(const ImageRGB& rendered, const ImageRGB& target, int width, int height,
                           double lambda_dssim);

// mean_i ||s_i - mean(s_i) 1||_1 with exact subgradient (0 at ties), returned
// in log-scale coordinates.
std::pair<double, std::vector<Vec3>> iso_loss(const GaussianMap& map);

// mean_i of the binary entropy of opacity, gradient in logit coordinates.
std::pair<double, std::vector<double>> opacity_entropy_loss(const GaussianMap& map);

struct TrackingResult {
  double total = 0.0;
  double l_image = 0.0;
  double l_flow = 0.0;  // sum of both edges, unweighted
  Vec6 d_tau_new = Vec6::Zero();
};

// Pose objective for a new keyframe: its image loss plus lambda1 times the
// flow losses rendered from the two preceding keyframes toward it. Only the
// new pose's gradient is produced. Optional precomputed forward renders of
// prev/prev2 avoid re-rasterizing per iteration (the map is frozen here).
TrackingResult tracking_objective(const Keyframe& new_frame, const Keyframe& prev,
                                  const Keyframe& prev2, const GaussianMap& map,
                                  const FlowField& flow_prev_to_new,
                                  const FlowField& flow_prev2_to_new, const LossConfig& cfg,
                                  const RenderOutputs* fwd_prev = nullptr,
                                  const RenderOutputs* fwd_prev2 = nullptr);

struct MappingResult {
  double total = 0.0;
  double l_image = 0.0, l_flow = 0.0, l_iso = 0.0, l_opa = 0.0;
  MapGradients grads;
  // Artifacts of the rendered edge frame, consumed by Gaussian management.
  RenderOutputs render_a;
  GridXd dssim_map;
  GridXd flow_map;
};

// Map objective over one window edge (a, b): image loss at a, lambda2 times
// the flow loss a->b, plus the isotropic and opacity-entropy regularizers.
// Poses are held fixed; pose gradients are discarded.
MappingResult mapping_objective(const std::vector<Keyframe>& window, int edge_a, int edge_b,
                                const GaussianMap& map, const FlowField& observed_ab,
                                const LossConfig& cfg, const BackwardOptions& opts = {});

}  // namespace gsflow
