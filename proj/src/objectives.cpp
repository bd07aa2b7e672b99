#include "gsflow/objectives.hpp"

#include <array>
#include <cmath>
#include <stdexcept>

namespace gsflow {

namespace {

constexpr int kWindow = 11;
constexpr int kHalf = kWindow / 2;
constexpr double kSsimC1 = 0.01 * 0.01;
constexpr double kSsimC2 = 0.03 * 0.03;

const std::array<double, kWindow>& window_taps() {
  static const std::array<double, kWindow> taps = [] {
    std::array<double, kWindow> t{};
    double sum = 0.0;
    for (int i = 0; i < kWindow; ++i) {
      const double d = i - kHalf;
      t[i] = std::exp(-d * d / (2.0 * 1.5 * 1.5));
      sum += t[i];
    }
    for (double& v : t) v /= sum;
    return t;
  }();
  return taps;
}

inline int reflect101(int i, int n) {
  if (n == 1) return 0;
  while (i < 0 || i >= n) {
    if (i < 0) i = -i;
    if (i >= n) i = 2 * (n - 1) - i;
  }
  return i;
}

GridXd blur_rows(const GridXd& src, bool adjoint) {
  const auto& taps = window_taps();
  GridXd dst = GridXd::Zero(src.rows(), src.cols());
  const int n = static_cast<int>(src.cols());
  for (int y = 0; y < src.rows(); ++y) {
    for (int x = 0; x < n; ++x) {
      for (int k = 0; k < kWindow; ++k) {
        const int xs = reflect101(x + k - kHalf, n);
        if (adjoint)
          dst(y, xs) += taps[k] * src(y, x);
        else
          dst(y, x) += taps[k] * src(y, xs);
      }
    }
  }
  return dst;
}

GridXd blur_cols(const GridXd& src, bool adjoint) {
  const auto& taps = window_taps();
  GridXd dst = GridXd::Zero(src.rows(), src.cols());
  const int n = static_cast<int>(src.rows());
  for (int x = 0; x < src.cols(); ++x) {
    for (int y = 0; y < n; ++y) {
      for (int k = 0; k < kWindow; ++k) {
        const int ys = reflect101(y + k - kHalf, n);
        if (adjoint)
          dst(ys, x) += taps[k] * src(y, x);
        else
          dst(y, x) += taps[k] * src(ys, x);
      }
    }
  }
  return dst;
}

GridXd channel_to_grid(const ImageRGB& img, int c, int width, int height) {
  GridXd g(height, width);
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) g(y, x) = img(pixel_index(x, y, width), c);
  return g;
}

struct SsimMoments {
  GridXd mu_x, mu_y, sigma_x2, sigma_y2, sigma_xy;
  GridXd n1, n2, d1, d2, ssim;
};

SsimMoments ssim_moments(const GridXd& x, const GridXd& y) {
  SsimMoments m;
  m.mu_x = gaussian_blur(x);
  m.mu_y = gaussian_blur(y);
  m.sigma_x2 = gaussian_blur(x * x) - m.mu_x * m.mu_x;
  m.sigma_y2 = gaussian_blur(y * y) - m.mu_y * m.mu_y;
  m.sigma_xy = gaussian_blur(x * y) - m.mu_x * m.mu_y;
  m.n1 = 2.0 * m.mu_x * m.mu_y + kSsimC1;
  m.n2 = 2.0 * m.sigma_xy + kSsimC2;
  m.d1 = m.mu_x * m.mu_x + m.mu_y * m.mu_y + kSsimC1;
  m.d2 = m.sigma_x2 + m.sigma_y2 + kSsimC2;
  m.ssim = (m.n1 * m.n2) / (m.d1 * m.d2);
  return m;
}

// d ssim / d x, with a per-pixel upstream weight g already folded in.
GridXd ssim_backward_x(const SsimMoments& m, const GridXd& x, const GridXd& y, const GridXd& g) {
  const GridXd dd = m.d1 * m.d2;
  const GridXd dS_dmux = 2.0 * m.mu_y * m.n2 / dd - 2.0 * m.mu_x * m.ssim / m.d1;
  const GridXd dS_dsx2 = -m.ssim / m.d2;
  const GridXd dS_dsxy = 2.0 * m.n1 / dd;

  const GridXd f1 = g * (dS_dmux - 2.0 * m.mu_x * dS_dsx2 - m.mu_y * dS_dsxy);
  const GridXd f2 = g * dS_dsx2;
  const GridXd f3 = g * dS_dsxy;

  return gaussian_blur_adjoint(f1) + 2.0 * x * gaussian_blur_adjoint(f2) +
         y * gaussian_blur_adjoint(f3);
}

}  // namespace

GridXd gaussian_blur(const GridXd& img) { return blur_cols(blur_rows(img, false), false); }

GridXd gaussian_blur_adjoint(const GridXd& g) { return blur_rows(blur_cols(g, true), true); }

SsimResult ssim_full(const ImageRGB& a, const ImageRGB& b, int width, int height) {
  if (a.rows() != b.rows() || a.rows() != static_cast<Eigen::Index>(width) * height)
    throw std::runtime_error("ssim: image dimensions mismatch");
  SsimResult out;
  double sum = 0.0;
  for (int c = 0; c < 3; ++c) {
    const GridXd x = channel_to_grid(a, c, width, height);
    const GridXd y = channel_to_grid(b, c, width, height);
    out.per_channel.push_back(ssim_moments(x, y).ssim);
    sum += out.per_channel.back().mean();
  }
  out.mean = sum / 3.0;
  return out;
}

ImageLossResult image_loss(const ImageRGB& rendered, const ImageRGB& target, int width, int height,
                           double lambda_dssim) {
  const Eigen::Index n_px = static_cast<Eigen::Index>(width) * height;
  if (rendered.rows() != n_px || target.rows() != n_px)
    throw std::runtime_error("image_loss: image dimensions mismatch");

  ImageLossResult out;
  out.dL_dpixel = ImageRGB::Zero(n_px, 3);
  out.maps.l1_map = GridXd::Zero(height, width);
  out.maps.dssim_map = GridXd::Zero(height, width);
  out.maps.flow_loss_map = GridXd::Zero(height, width);

  // identical images sit at the global minimum: the gradient is exactly
  // zero, which the SSIM backward only reproduces up to rounding
  if ((rendered - target).cwiseAbs().maxCoeff() == 0.0) return out;

  const double n_total = static_cast<double>(n_px) * 3.0;
  double l1_sum = 0.0;
  for (Eigen::Index px = 0; px < n_px; ++px) {
    double per_px = 0.0;
    for (int c = 0; c < 3; ++c) {
      const double diff = rendered(px, c) - target(px, c);
      l1_sum += std::abs(diff);
      per_px += std::abs(diff);
      const double sgn = diff > 0.0 ? 1.0 : (diff < 0.0 ? -1.0 : 0.0);
      out.dL_dpixel(px, c) = (1.0 - lambda_dssim) * sgn / n_total;
    }
    out.maps.l1_map(static_cast<int>(px) / width, static_cast<int>(px) % width) = per_px / 3.0;
  }

  double ssim_sum = 0.0;
  for (int c = 0; c < 3; ++c) {
    const GridXd x = channel_to_grid(rendered, c, width, height);
    const GridXd y = channel_to_grid(target, c, width, height);
    const SsimMoments m = ssim_moments(x, y);
    ssim_sum += m.ssim.mean();
    for (int yy = 0; yy < height; ++yy)
      for (int xx = 0; xx < width; ++xx)
        out.maps.dssim_map(yy, xx) += (1.0 - m.ssim(yy, xx)) * 0.5 / 3.0;

    // d mean-DSSIM / dx = -1/(2 n) * d ssim / dx per channel
    const GridXd g = GridXd::Constant(height, width, 1.0);
    const GridXd dx = ssim_backward_x(m, x, y, g);
    for (int yy = 0; yy < height; ++yy)
      for (int xx = 0; xx < width; ++xx)
        out.dL_dpixel(pixel_index(xx, yy, width), c) +=
            lambda_dssim * (-0.5 / n_total) * dx(yy, xx);
  }

  const double mean_l1 = l1_sum / n_total;
  const double mean_dssim = (1.0 - ssim_sum / 3.0) * 0.5;
  out.total = (1.0 - lambda_dssim) * mean_l1 + lambda_dssim * mean_dssim;
  return out;
}

std::pair<double, std::vector<Vec3>> iso_loss(const GaussianMap& map) {
  const std::size_t n = map.size();
  std::vector<Vec3> d_logscale(n, Vec3::Zero());
  if (n == 0) return {0.0, d_logscale};

  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const Vec3& s = map.gaussians[i].scale;
    const double mean = s.mean();
    Vec3 sgn;
    double sgn_sum = 0.0;
    for (int k = 0; k < 3; ++k) {
      const double d = s(k) - mean;
      total += std::abs(d);
      sgn(k) = d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0);
      sgn_sum += sgn(k);
    }
    const Vec3 d_s = (sgn.array() - sgn_sum / 3.0) / static_cast<double>(n);
    d_logscale[i] = d_s.cwiseProduct(s);
  }
  return {total / static_cast<double>(n), d_logscale};
}

std::pair<double, std::vector<double>> opacity_entropy_loss(const GaussianMap& map) {
  const std::size_t n = map.size();
  std::vector<double> d_logit(n, 0.0);
  if (n == 0) return {0.0, d_logit};

  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double o = map.gaussians[i].opacity;
    total += -o * std::log(o) - (1.0 - o) * std::log(1.0 - o);
    // dH/do = log((1-o)/o); chain through the sigmoid
    d_logit[i] = std::log((1.0 - o) / o) * o * (1.0 - o) / static_cast<double>(n);
  }
  return {total / static_cast<double>(n), d_logit};
}

TrackingResult tracking_objective(const Keyframe& new_frame, const Keyframe& prev,
                                  const Keyframe& prev2, const GaussianMap& map,
                                  const FlowField& flow_prev_to_new,
                                  const FlowField& flow_prev2_to_new, const LossConfig& cfg,
                                  const RenderOutputs* fwd_prev, const RenderOutputs* fwd_prev2) {
  if (flow_prev_to_new.width == 0 || flow_prev2_to_new.width == 0)
    throw std::runtime_error("tracking_objective: missing observed flow");

  TrackingResult out;

  const RenderOutputs rendered = rasterize(map, new_frame);
  const ImageLossResult img = image_loss(rendered.color, new_frame.image,
                                         new_frame.intrinsics.width, new_frame.intrinsics.height,
                                         cfg.lambda_dssim);
  out.l_image = img.total;
  out.d_tau_new = backward_image(img.dL_dpixel, rendered, map).d_tau;

  const RobustFlowModel model =
      RobustFlowModel::from_config(cfg, new_frame.intrinsics.width, new_frame.intrinsics.height);

  auto flow_edge = [&](const Keyframe& source, const FlowField& observed,
                       const RenderOutputs* cached) {
    RenderOutputs local;
    const RenderOutputs* fwd = cached;
    if (!fwd) {
      local = rasterize(map, source);
      fwd = &local;
    }
    const FlowRenderOutputs zeta = rasterize_flow(map, source, new_frame.pose, *fwd);
    const FlowLossOutput loss = flow_loss(zeta.zeta, observed, model);
    const Intermediate2DGradients g2d = backward_flow_2d(loss.dL_dzeta, *fwd, zeta, map);
    const PoseGradients pg = backward_to_pose(g2d, *fwd, &zeta, map);
    out.l_flow += loss.total;
    out.d_tau_new += cfg.lambda1 * pg.d_tau_next;
  };

  flow_edge(prev, flow_prev_to_new, fwd_prev);
  flow_edge(prev2, flow_prev2_to_new, fwd_prev2);

  out.total = out.l_image + cfg.lambda1 * out.l_flow;
  return out;
}

MappingResult mapping_objective(const std::vector<Keyframe>& window, int edge_a, int edge_b,
                                const GaussianMap& map, const FlowField& observed_ab,
                                const LossConfig& cfg, const BackwardOptions& opts) {
  if (edge_a < 0 || edge_b < 0 || edge_a >= static_cast<int>(window.size()) ||
      edge_b >= static_cast<int>(window.size()) || edge_a == edge_b)
    throw std::runtime_error("mapping_objective: edge endpoints outside window");

  const Keyframe& frame_a = window[edge_a];
  const Keyframe& frame_b = window[edge_b];
  const int width = frame_a.intrinsics.width;
  const int height = frame_a.intrinsics.height;

  MappingResult out;
  out.grads.resize(map.size());

  out.render_a = rasterize(map, frame_a);
  const ImageLossResult img =
      image_loss(out.render_a.color, frame_a.image, width, height, cfg.lambda_dssim);
  out.l_image = img.total;
  out.dssim_map = img.maps.dssim_map;
  {
    const Intermediate2DGradients g2d = backward_image_2d(img.dL_dpixel, out.render_a, map, opts);
    backward_to_world(g2d, out.render_a, nullptr, map, 1.0, out.grads, opts);
  }

  const RobustFlowModel model = RobustFlowModel::from_config(cfg, width, height);
  const FlowRenderOutputs zeta = rasterize_flow(map, frame_a, frame_b.pose, out.render_a);
  const FlowLossOutput floss = flow_loss(zeta.zeta, observed_ab, model);
  out.l_flow = floss.total;
  out.flow_map = floss.f_map;
  if (cfg.lambda2 != 0.0) {
    const Intermediate2DGradients g2d = backward_flow_2d(floss.dL_dzeta, out.render_a, zeta, map, opts);
    backward_to_world(g2d, out.render_a, &zeta, map, cfg.lambda2, out.grads, opts);
  }

  auto [liso, d_iso] = iso_loss(map);
  auto [lopa, d_opa] = opacity_entropy_loss(map);
  out.l_iso = liso;
  out.l_opa = lopa;
  for (std::size_t i = 0; i < map.size(); ++i) {
    out.grads.d_logscale[i] += cfg.lambda3 * d_iso[i];
    out.grads.d_logit_opacity[i] += cfg.lambda4 * d_opa[i];
  }

  out.total = out.l_image + cfg.lambda2 * out.l_flow + cfg.lambda3 * out.l_iso + cfg.lambda4 * out.l_opa;
  return out;
}

}  // namespace gsflow
