#include "gsflow/backward.hpp"

#include "gsflow/parallel.hpp"

#include <algorithm>
#include <map>
#include <stdexcept>

namespace gsflow {

void MapGradients::resize(std::size_t n) {
  d_mean.assign(n, Vec3::Zero());
  d_quat.assign(n, Vec4::Zero());
  d_logscale.assign(n, Vec3::Zero());
  d_logit_opacity.assign(n, 0.0);
  d_color.assign(n, Vec3::Zero());
  pos_grad_2d.assign(n, 0.0);
}

void MapGradients::add_scaled(const MapGradients& other, double s) {
  for (std::size_t i = 0; i < size(); ++i) {
    d_mean[i] += s * other.d_mean[i];
    d_quat[i] += s * other.d_quat[i];
    d_logscale[i] += s * other.d_logscale[i];
    d_logit_opacity[i] += s * other.d_logit_opacity[i];
    d_color[i] += s * other.d_color[i];
    pos_grad_2d[i] = std::max(pos_grad_2d[i], std::abs(s) * other.pos_grad_2d[i]);
  }
}

void Intermediate2DGradients::resize(std::size_t n) {
  d_mu_t.assign(n, Vec2::Zero());
  d_mu_next.assign(n, Vec2::Zero());
  A_t.assign(n, Mat2::Zero());
  A_next.assign(n, Mat2::Zero());
  d_Q_t.assign(n, Mat2::Zero());
  d_Q_next.assign(n, Mat2::Zero());
  d_Spow_t.assign(n, Mat2::Zero());
  d_Spow_next.assign(n, Mat2::Zero());
  d_sigma2d_t.assign(n, Mat2::Zero());
  d_sigma2d_next.assign(n, Mat2::Zero());
  d_opacity.assign(n, 0.0);
  d_color.assign(n, Vec3::Zero());
  touched.assign(n, 0);
}

namespace {

// Per-Gaussian partial sums gathered within one accumulation stripe.
struct Partial {
  Vec2 d_mu_t = Vec2::Zero();
  Vec2 d_mu_next = Vec2::Zero();
  Mat2 A_t = Mat2::Zero();
  Mat2 A_next = Mat2::Zero();
  Mat2 d_lambda = Mat2::Zero();  // dL/d(Sigma'^{-1}) from the alpha path
  double d_opacity = 0.0;
  Vec3 d_color = Vec3::Zero();
};

using StripeAccum = std::map<std::int32_t, Partial>;

// Shared alpha-path recurrence for one pixel. dL/dw_e is supplied by the
// caller per entry; suffix sums over later entries give dL/dalpha through the
// transmittance products. Entries with clamped alpha get zero alpha-gradient
// but still shade later-entry sums.
template <typename EntryGradFn>
void accumulate_pixel(const std::vector<BlendEntry>& entries, const GaussianMap& map,
                      const RenderOutputs& forward, bool alpha_path, StripeAccum& accum,
                      const EntryGradFn& entry_fn) {
  double suffix = 0.0;
  for (auto it = entries.rbegin(); it != entries.rend(); ++it) {
    const BlendEntry& e = *it;
    Partial& part = accum[e.gaussian];
    const double dL_dw = entry_fn(e, part);
    if (!alpha_path) continue;
    const bool clamped = e.alpha >= kAlphaClamp;
    if (!clamped) {
      const double dL_dalpha = dL_dw * e.weight / e.alpha - suffix / (1.0 - e.alpha);
      const double common = dL_dalpha * e.alpha;
      const Mat2 inv = forward.projections[e.gaussian].sigma2d_inv.matrix();
      part.d_opacity += dL_dalpha * e.alpha / map.gaussians[e.gaussian].opacity;
      part.d_mu_t += common * (inv * e.delta);
      part.d_lambda += common * (-0.5) * (e.delta * e.delta.transpose());
    }
    suffix += dL_dw * e.weight;
  }
}

// dL/dSigma' from the alpha path: Lambda = Sigma'^{-1}, so
// dL/dSigma' = -Lambda * (dL/dLambda) * Lambda.
Mat2 lambda_to_sigma(const Mat2& d_lambda, const SymMat2& sigma_inv) {
  const Mat2 inv = sigma_inv.matrix();
  return -inv * d_lambda * inv;
}

// Stripes are row-bands of kTileSize pixels; partials are reduced in stripe
// order, then Gaussian-index order, which pins the floating-point sum.
template <typename PixelFn>
std::vector<StripeAccum> accumulate_stripes(int width, int height, const PixelFn& pixel_fn) {
  const int n_stripes = (height + kTileSize - 1) / kTileSize;
  std::vector<StripeAccum> stripes(static_cast<std::size_t>(n_stripes));
  parallel_for(stripes.size(), [&](std::size_t s) {
    const int y0 = static_cast<int>(s) * kTileSize;
    const int y1 = std::min(y0 + kTileSize, height);
    for (int y = y0; y < y1; ++y)
      for (int x = 0; x < width; ++x) pixel_fn(x, y, stripes[s]);
  });
  return stripes;
}

void reduce_stripes(const std::vector<StripeAccum>& stripes, Intermediate2DGradients& g) {
  for (const StripeAccum& stripe : stripes) {
    for (const auto& [gi, part] : stripe) {
      g.touched[gi] = 1;
      g.d_mu_t[gi] += part.d_mu_t;
      g.d_mu_next[gi] += part.d_mu_next;
      g.A_t[gi] += part.A_t;
      g.A_next[gi] += part.A_next;
      g.d_sigma2d_t[gi] += part.d_lambda;  // still in Lambda coordinates here
      g.d_opacity[gi] += part.d_opacity;
      g.d_color[gi] += part.d_color;
    }
  }
}

Mat2 diag_pow(const EigenDecomp2& d, double s) {
  Mat2 p = Mat2::Zero();
  p(0, 0) = std::pow(std::max(d.S(0), 1e-12), s);
  p(1, 1) = std::pow(std::max(d.S(1), 1e-12), s);
  return p;
}

}  // namespace

Intermediate2DGradients backward_flow_2d(const Image2& dL_dzeta, const RenderOutputs& forward,
                                         const FlowRenderOutputs& flow, const GaussianMap& map,
                                         const BackwardOptions& opts) {
  if (forward.records.map_generation != map.generation)
    throw std::runtime_error("backward_flow_2d: forward state does not match map generation");
  if (dL_dzeta.rows() != static_cast<Eigen::Index>(forward.records.width) * forward.records.height)
    throw std::runtime_error("backward_flow_2d: gradient buffer dimension mismatch");

  const int width = forward.records.width;
  const int height = forward.records.height;

  Intermediate2DGradients g;
  g.resize(map.size());
  g.has_next = true;

  auto stripes = accumulate_stripes(width, height, [&](int x, int y, StripeAccum& accum) {
    const std::size_t px = static_cast<std::size_t>(y) * width + x;
    const Vec2 D = dL_dzeta.row(px).transpose();
    if (D.isZero(0.0)) return;
    const Vec2 p(x + 0.5, y + 0.5);
    accumulate_pixel(forward.records.pixels[px], map, forward, opts.alpha_path, accum,
                     [&](const BlendEntry& e, Partial& part) {
                       const FlowTransferRecord& tr = flow.transfers[e.gaussian];
                       if (tr.behind_camera) return 0.0;  // pixel is invalid, D should be 0
                       const Vec2 target = tr.M * e.delta + tr.mu_next - p;
                       part.d_mu_t += e.weight * (-(tr.M.transpose() * D));
                       part.d_mu_next += e.weight * D;
                       const Mat2 v = D * e.delta.transpose();
                       part.A_t += e.weight * (tr.B_next * v);
                       part.A_next += e.weight * (v * tr.B_t_inv);
                       return D.dot(target);
                     });
  });
  reduce_stripes(stripes, g);

  // Eigen-factor gradients and the pullback to Sigma' entries, per frame:
  // s = -1/2 on the rasterized frame (through B_t^{-1}), +1/2 on the target.
  for (std::size_t i = 0; i < map.size(); ++i) {
    if (!g.touched[i]) continue;
    const FlowTransferRecord& tr = flow.transfers[i];
    const Mat2 d_lambda = g.d_sigma2d_t[i];
    g.d_sigma2d_t[i] = opts.alpha_path
                           ? lambda_to_sigma(d_lambda, forward.projections[i].sigma2d_inv)
                           : Mat2::Zero();
    if (tr.behind_camera) continue;

    g.d_Q_t[i] = (g.A_t[i] + g.A_t[i].transpose()) * tr.decomp_t.Q * diag_pow(tr.decomp_t, -0.5);
    g.d_Spow_t[i] = tr.decomp_t.Q.transpose() * g.A_t[i] * tr.decomp_t.Q;
    g.d_sigma2d_t[i] += backprop_eigen(g.d_Q_t[i], g.d_Spow_t[i], tr.decomp_t, -0.5).full();

    g.d_Q_next[i] = (g.A_next[i] + g.A_next[i].transpose()) * tr.decomp_next.Q * diag_pow(tr.decomp_next, 0.5);
    g.d_Spow_next[i] = tr.decomp_next.Q.transpose() * g.A_next[i] * tr.decomp_next.Q;
    g.d_sigma2d_next[i] = backprop_eigen(g.d_Q_next[i], g.d_Spow_next[i], tr.decomp_next, 0.5).full();
  }
  return g;
}

Intermediate2DGradients backward_image_2d(const ImageRGB& dL_dpixel, const RenderOutputs& forward,
                                          const GaussianMap& map, const BackwardOptions& opts) {
  if (forward.records.map_generation != map.generation)
    throw std::runtime_error("backward_image_2d: forward state does not match map generation");
  const int width = forward.records.width;
  const int height = forward.records.height;

  Intermediate2DGradients g;
  g.resize(map.size());

  auto stripes = accumulate_stripes(width, height, [&](int x, int y, StripeAccum& accum) {
    const std::size_t px = static_cast<std::size_t>(y) * width + x;
    const Vec3 D = dL_dpixel.row(px).transpose();
    if (D.isZero(0.0)) return;
    accumulate_pixel(forward.records.pixels[px], map, forward, opts.alpha_path, accum,
                     [&](const BlendEntry& e, Partial& part) {
                       part.d_color += e.weight * D;
                       return map.gaussians[e.gaussian].color.dot(D);
                     });
  });
  reduce_stripes(stripes, g);

  for (std::size_t i = 0; i < map.size(); ++i) {
    if (!g.touched[i]) continue;
    g.d_sigma2d_t[i] = opts.alpha_path
                           ? lambda_to_sigma(g.d_sigma2d_t[i], forward.projections[i].sigma2d_inv)
                           : Mat2::Zero();
  }
  return g;
}

namespace {

// dL/dX_c for one frame slot: the mu path J^T dmu plus, through the entries
// of J, the Sigma'-path sensitivity to the camera-space point.
Vec3 camera_point_gradient(const Vec2& d_mu, const Mat2& d_sigma, const Projected2D& proj,
                           const Mat3& cov_world, bool include_jacobian_term) {
  Vec3 dXc = proj.jacobian.transpose() * d_mu;
  if (!include_jacobian_term) return dXc;

  const Mat3 t3 = proj.rotation * cov_world * proj.rotation.transpose();
  const Mat23 H = (d_sigma + d_sigma.transpose()) * proj.jacobian * t3;

  const double z = proj.cam_point.z();
  const double inv_z2 = 1.0 / (z * z);
  const double fx = proj.jacobian(0, 0) * z;
  const double fy = proj.jacobian(1, 1) * z;
  const double xc = proj.cam_point.x();
  const double yc = proj.cam_point.y();

  dXc.x() += H(0, 2) * (-fx * inv_z2);
  dXc.y() += H(1, 2) * (-fy * inv_z2);
  dXc.z() += H(0, 0) * (-fx * inv_z2) + H(1, 1) * (-fy * inv_z2) +
             H(0, 2) * (2.0 * fx * xc * inv_z2 / z) + H(1, 2) * (2.0 * fy * yc * inv_z2 / z);
  return dXc;
}

// d(quaternion coeffs x,y,z,w) from dL/dR, tangent-projected at unit q.
Vec4 quaternion_gradient(const Quat& q, const Mat3& dR) {
  const double w = q.w(), x = q.x(), y = q.y(), z = q.z();
  Mat3 dRdw, dRdx, dRdy, dRdz;
  dRdw << 0, -z, y, z, 0, -x, -y, x, 0;
  dRdx << 0, y, z, y, -2 * x, -w, z, w, -2 * x;
  dRdy << -2 * y, x, w, x, 0, z, -w, z, -2 * y;
  dRdz << -2 * z, -w, x, w, -2 * z, y, x, y, 0;

  Vec4 raw;  // coeffs order (x, y, z, w)
  raw(0) = 2.0 * dR.cwiseProduct(dRdx).sum();
  raw(1) = 2.0 * dR.cwiseProduct(dRdy).sum();
  raw(2) = 2.0 * dR.cwiseProduct(dRdz).sum();
  raw(3) = 2.0 * dR.cwiseProduct(dRdw).sum();

  const Vec4 qc = q.coeffs();
  return raw - qc * qc.dot(raw);
}

}  // namespace

void backward_to_world(const Intermediate2DGradients& g2d, const RenderOutputs& forward,
                       const FlowRenderOutputs* flow, const GaussianMap& map, double weight,
                       MapGradients& out, const BackwardOptions& opts) {
  if (out.size() != map.size()) throw std::runtime_error("backward_to_world: output size mismatch");

  for (std::size_t i = 0; i < map.size(); ++i) {
    if (!g2d.touched[i]) continue;
    const Gaussian3D& gauss = map.gaussians[i];
    const Mat3 cov_world = covariance3d(gauss.rotation, gauss.scale);

    Vec3 d_mean = Vec3::Zero();
    Mat3 d_cov = Mat3::Zero();
    double pos_grad = g2d.d_mu_t[i].norm();

    auto pull_slot = [&](const Vec2& d_mu, const Mat2& d_sigma, const Projected2D& proj) {
      const Vec3 dXc = camera_point_gradient(d_mu, d_sigma, proj, cov_world, opts.sigma_mean_term);
      d_mean += proj.rotation.transpose() * dXc;
      const Mat23 JW = proj.jacobian * proj.rotation;
      d_cov += JW.transpose() * d_sigma * JW;
    };

    pull_slot(g2d.d_mu_t[i], g2d.d_sigma2d_t[i], forward.projections[i]);
    if (g2d.has_next && flow && !flow->transfers[i].behind_camera) {
      pull_slot(g2d.d_mu_next[i], g2d.d_sigma2d_next[i], flow->projections_next[i]);
      pos_grad = std::max(pos_grad, g2d.d_mu_next[i].norm());
    }

    // Sigma = M3 M3^T with M3 = R diag(scale)
    const Mat3 R = gauss.rotation.toRotationMatrix();
    const Mat3 M3 = R * gauss.scale.asDiagonal();
    const Mat3 dM3 = (d_cov + d_cov.transpose()) * M3;
    const Vec3 d_scale = (R.transpose() * dM3).diagonal();
    const Mat3 dR = dM3 * gauss.scale.asDiagonal();

    out.d_mean[i] += weight * d_mean;
    out.d_logscale[i] += weight * (d_scale.cwiseProduct(gauss.scale));
    out.d_quat[i] += weight * quaternion_gradient(gauss.rotation, dR);
    out.d_logit_opacity[i] += weight * g2d.d_opacity[i] * gauss.opacity * (1.0 - gauss.opacity);
    out.d_color[i] += weight * g2d.d_color[i];
    out.pos_grad_2d[i] = std::max(out.pos_grad_2d[i], std::abs(weight) * pos_grad);
  }
}

PoseGradients backward_to_pose(const Intermediate2DGradients& g2d, const RenderOutputs& forward,
                               const FlowRenderOutputs* flow, const GaussianMap& map) {
  PoseGradients out;

  auto pull_slot = [&](const Vec2& d_mu, const Mat2& d_sigma, const Projected2D& proj,
                       const Mat3& cov_world, Vec6& d_tau) {
    // X_c varies as omega x X_c + u under the left increment; W as omega^ W.
    const Vec3 dXc = camera_point_gradient(d_mu, d_sigma, proj, cov_world, true);
    d_tau.tail<3>() += dXc;
    d_tau.head<3>() += proj.cam_point.cross(dXc);

    const Mat3 dW = proj.jacobian.transpose() * (d_sigma + d_sigma.transpose()) * proj.jacobian *
                    proj.rotation * cov_world;
    const Mat3 K = dW * proj.rotation.transpose();
    d_tau.head<3>() += Vec3(K(2, 1) - K(1, 2), K(0, 2) - K(2, 0), K(1, 0) - K(0, 1));
  };

  for (std::size_t i = 0; i < map.size(); ++i) {
    if (!g2d.touched[i]) continue;
    const Gaussian3D& gauss = map.gaussians[i];
    const Mat3 cov_world = covariance3d(gauss.rotation, gauss.scale);
    pull_slot(g2d.d_mu_t[i], g2d.d_sigma2d_t[i], forward.projections[i], cov_world, out.d_tau_t);
    if (g2d.has_next && flow && !flow->transfers[i].behind_camera)
      pull_slot(g2d.d_mu_next[i], g2d.d_sigma2d_next[i], flow->projections_next[i], cov_world,
                out.d_tau_next);
  }
  return out;
}

ImageBackward backward_image(const ImageRGB& dL_dpixel, const RenderOutputs& forward,
                             const GaussianMap& map, const BackwardOptions& opts) {
  ImageBackward out;
  out.map_grads.resize(map.size());
  const Intermediate2DGradients g2d = backward_image_2d(dL_dpixel, forward, map, opts);
  backward_to_world(g2d, forward, nullptr, map, 1.0, out.map_grads, opts);
  out.d_tau = backward_to_pose(g2d, forward, nullptr, map).d_tau_t;
  return out;
}

}  // namespace gsflow
