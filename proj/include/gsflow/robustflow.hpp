#pragma once

#include "gsflow/core.hpp"

#include <string>

namespace gsflow {

// Log-logistic (Fisk) inlier density over the flow residual magnitude, mixed
// with a uniform outlier density nu. beta = 1 keeps the loss finite with zero
// gradient at perfect alignment; for beta > 1 the density vanishes at r = 0,
// so evaluation is floored at epsilon_r there.
struct RobustFlowModel {
  double alpha = 1.0;     // scale, pixels
  double beta = 1.0;      // shape
  double nu = 1e-4;       // uniform outlier density, 1/px^2
  double epsilon_r = 1e-3;

  static RobustFlowModel from_config(const LossConfig& cfg, int width, int height) {
    RobustFlowModel m;
    m.alpha = cfg.fisk_alpha;
    m.beta = cfg.fisk_beta;
    m.nu = cfg.nu_for(width, height);
    return m;
  }
};

double loglogistic_pdf(double r, const RobustFlowModel& model);

// d(pdf)/dr, with the same epsilon_r flooring as the pdf.
double loglogistic_pdf_deriv(double r, const RobustFlowModel& model);

// psi(r) = -log(f(r) / (f(r) + nu)) and its derivative in r.
double flow_psi(double r, const RobustFlowModel& model);
double flow_psi_deriv(double r, const RobustFlowModel& model);

struct FlowLossOutput {
  double total = 0.0;
  GridXd psi_map;   // unweighted per-pixel loss, 0 where not evaluated
  GridXd f_map;     // confidence-weighted loss map q * psi
  Image2 dL_dzeta;  // gradient w.r.t. the rendered flow
};

// Confidence-weighted robust flow loss: total = sum_j q_j * psi(|zeta_j - X_j|)
// over pixels valid in both fields. The gradient is zeroed where the residual
// is below 1e-8 to avoid the undefined unit direction.
FlowLossOutput flow_loss(const FlowField& zeta, const FlowField& observed,
                         const RobustFlowModel& model);

// "GFLO" flow file: u32 width, u32 height, then w*h little-endian f32 (u, v)
// pairs row-major, then w*h f32 confidences. Validity is confidence > 0.
void write_flow_file(const std::string& path, const FlowField& field);
FlowField read_flow_file(const std::string& path);

}  // namespace gsflow
