#pragma once

#include "gsflow/backward.hpp"
#include "gsflow/robustflow.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace gsflow {

// Randomized two-frame scene for gradient verification: a Gaussian cloud, a
// camera pair with small relative motion, oracle observed flow, and a
// ground-truth image for the photometric check. The evaluated map is jittered
// away from the one that produced the observations so residuals are nonzero;
// observed pixels whose baseline flow residual is under 1e-3 px carry zero
// confidence (the loss has a cone point at zero residual).
struct TwoFrameScene {
  GaussianMap map;
  Keyframe frame_t;   // pose_t and the photometric target image
  PoseSE3 pose_next;
  FlowField observed;
  RobustFlowModel model;
  double extent = 4.0;
};

TwoFrameScene make_gradcheck_scene(std::uint64_t seed, int n_gaussians, int image_size);

struct GradcheckRow {
  std::string param_class;
  int id = 0;     // gaussian index, or -1 for poses
  int coord = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  double rel_err = 0.0;
  bool pass = false;
};

struct GradcheckReport {
  std::vector<GradcheckRow> rows;
  std::size_t n_pass = 0;
  std::size_t n_total = 0;
  double pass_fraction() const {
    return n_total == 0 ? 1.0 : static_cast<double>(n_pass) / static_cast<double>(n_total);
  }
};

// Flow-loss gradcheck over {mean, quaternion, log-scale, logit-opacity,
// tau_t, tau_next}, central differences at 1e-5 times the parameter scale.
GradcheckReport gradcheck_flow(const TwoFrameScene& scene, double tolerance = 1e-4);

// Image-loss gradcheck over all Gaussian parameters (including color) and
// the rendering pose.
GradcheckReport gradcheck_image(const TwoFrameScene& scene, double tolerance = 1e-4);

void write_gradcheck_csv(const std::string& path, const GradcheckReport& report);

}  // namespace gsflow
