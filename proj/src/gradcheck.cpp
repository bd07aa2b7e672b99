#include "gsflow/gradcheck.hpp"

#include "gsflow/flow_oracle.hpp"
#include "gsflow/objectives.hpp"

#include <cmath>
#include <fstream>
#include <functional>
#include <random>

namespace gsflow {

namespace {

GaussianMap random_cloud(std::mt19937_64& rng, int n, double extent) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  GaussianMap map;
  for (int i = 0; i < n; ++i) {
    Gaussian3D g;
    g.mean = Vec3((unit(rng) - 0.5) * extent, (unit(rng) - 0.5) * extent,
                  (unit(rng) - 0.5) * 0.3 * extent);
    const double base = 0.35 * extent / std::sqrt(static_cast<double>(n));
    g.scale = Vec3((0.6 + 0.8 * unit(rng)) * base, (0.6 + 0.8 * unit(rng)) * base,
                   (0.6 + 0.8 * unit(rng)) * base);
    g.rotation = Quat(gauss(rng), gauss(rng), gauss(rng), gauss(rng)).normalized();
    g.opacity = 0.25 + 0.5 * unit(rng);
    g.color = Vec3(0.1 + 0.8 * unit(rng), 0.1 + 0.8 * unit(rng), 0.1 + 0.8 * unit(rng));
    g.keyframe_id = 0;
    map.gaussians.push_back(g);
  }
  return map;
}

}  // namespace

TwoFrameScene make_gradcheck_scene(std::uint64_t seed, int n_gaussians, int image_size) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);

  TwoFrameScene scene;
  scene.extent = 4.0;

  CameraIntrinsics k;
  k.width = image_size;
  k.height = image_size;
  k.fx = k.fy = image_size;
  k.cx = k.cy = 0.5 * image_size;
  k.near = 0.05;
  k.far = 100.0;

  const GaussianMap gt = random_cloud(rng, n_gaussians, scene.extent);

  PoseSE3 pose_t;  // camera on +z looking down the axis toward the cloud
  pose_t.rotation << 1, 0, 0, 0, 1, 0, 0, 0, 1;
  pose_t.translation = Vec3(0, 0, 1.2 * scene.extent);

  // relative motion: rotation up to ~10 degrees, translation ~4% extent
  Vec6 rel;
  rel.head<3>() = Vec3(gauss(rng), gauss(rng), gauss(rng)).normalized() * (0.17 * unit(rng));
  rel.tail<3>() = 0.04 * scene.extent * Vec3(gauss(rng), gauss(rng), gauss(rng)).normalized();
  scene.pose_next = pose_retract(pose_t, rel);

  scene.frame_t.id = 0;
  scene.frame_t.pose = pose_t;
  scene.frame_t.intrinsics = k;
  {
    Keyframe shell = scene.frame_t;
    shell.image = ImageRGB::Zero(static_cast<Eigen::Index>(image_size) * image_size, 3);
    scene.frame_t.image = rasterize(gt, shell).color;
  }

  scene.observed = flow_oracle(gt, pose_t, scene.pose_next, k);
  scene.model = RobustFlowModel::from_config(LossConfig{}, image_size, image_size);

  // evaluate at a map jittered away from the observation-generating one
  scene.map = gt;
  for (Gaussian3D& g : scene.map.gaussians) {
    g.mean += 0.01 * scene.extent * Vec3(gauss(rng), gauss(rng), gauss(rng));
    g.scale *= (0.95 + 0.1 * unit(rng));
    g.opacity = std::clamp(g.opacity + 0.05 * gauss(rng), 0.1, 0.9);
  }

  // mask pixels whose baseline residual sits at the loss cone point
  {
    const RenderOutputs fwd = rasterize(scene.map, scene.frame_t);
    const FlowRenderOutputs flw = rasterize_flow(scene.map, scene.frame_t, scene.pose_next, fwd);
    for (int y = 0; y < image_size; ++y) {
      for (int x = 0; x < image_size; ++x) {
        const Eigen::Index px = pixel_index(x, y, image_size);
        const double r = (flw.zeta.flow.row(px) - scene.observed.flow.row(px)).norm();
        if (r < 1e-3) {
          scene.observed.confidence(y, x) = 0.0;
          scene.observed.validity(y, x) = false;
        }
      }
    }
  }
  return scene;
}

namespace {

struct Coordinate {
  std::string param_class;
  int id;
  int coord;
  double step;
  std::function<void(GaussianMap&, PoseSE3&, PoseSE3&, double)> apply;  // adds h
  double analytic;
};

GradcheckReport run_rows(const TwoFrameScene& scene, std::vector<Coordinate>& coords,
                         const std::function<double(const GaussianMap&, const PoseSE3&,
                                                    const PoseSE3&)>& loss,
                         double tolerance) {
  GradcheckReport report;
  {
    const double base0 = loss(scene.map, scene.frame_t.pose, scene.pose_next);
    const double base1 = loss(scene.map, scene.frame_t.pose, scene.pose_next);
    if (base0 != base1) throw std::runtime_error("gradcheck: loss evaluator is not deterministic");
  }
  for (Coordinate& c : coords) {
    GaussianMap m = scene.map;
    PoseSE3 pt = scene.frame_t.pose;
    PoseSE3 pn = scene.pose_next;
    c.apply(m, pt, pn, c.step);
    const double plus = loss(m, pt, pn);
    m = scene.map;
    pt = scene.frame_t.pose;
    pn = scene.pose_next;
    c.apply(m, pt, pn, -c.step);
    const double minus = loss(m, pt, pn);

    GradcheckRow row;
    row.param_class = c.param_class;
    row.id = c.id;
    row.coord = c.coord;
    row.analytic = c.analytic;
    row.numeric = (plus - minus) / (2.0 * c.step);
    row.rel_err = std::abs(row.analytic - row.numeric) /
                  std::max({1.0, std::abs(row.analytic), std::abs(row.numeric)});
    row.pass = row.rel_err <= tolerance;
    report.rows.push_back(row);
    report.n_total += 1;
    if (row.pass) report.n_pass += 1;
  }
  return report;
}

void add_gaussian_coords(std::vector<Coordinate>& coords, const MapGradients& grads,
                         const TwoFrameScene& scene, bool include_color) {
  const double h_small = 1e-5;
  const double h_mean = 1e-5 * scene.extent;
  for (int i = 0; i < static_cast<int>(scene.map.size()); ++i) {
    for (int c = 0; c < 3; ++c)
      coords.push_back({"mean", i, c, h_mean,
                        [i, c](GaussianMap& m, PoseSE3&, PoseSE3&, double h) {
                          m.gaussians[i].mean(c) += h;
                        },
                        grads.d_mean[i](c)});
    for (int c = 0; c < 4; ++c)
      coords.push_back({"quaternion", i, c, h_small,
                        [i, c](GaussianMap& m, PoseSE3&, PoseSE3&, double h) {
                          Vec4 q = m.gaussians[i].rotation.coeffs();
                          q(c) += h;
                          q.normalize();
                          m.gaussians[i].rotation = Quat(q(3), q(0), q(1), q(2));
                        },
                        grads.d_quat[i](c)});
    for (int c = 0; c < 3; ++c)
      coords.push_back({"log_scale", i, c, h_small,
                        [i, c](GaussianMap& m, PoseSE3&, PoseSE3&, double h) {
                          m.gaussians[i].scale(c) = std::exp(std::log(m.gaussians[i].scale(c)) + h);
                        },
                        grads.d_logscale[i](c)});
    coords.push_back({"logit_opacity", i, 0, h_small,
                      [i](GaussianMap& m, PoseSE3&, PoseSE3&, double h) {
                        m.gaussians[i].opacity = sigmoid(logit(m.gaussians[i].opacity) + h);
                      },
                      grads.d_logit_opacity[i]});
    if (include_color)
      for (int c = 0; c < 3; ++c)
        coords.push_back({"color", i, c, h_small,
                          [i, c](GaussianMap& m, PoseSE3&, PoseSE3&, double h) {
                            m.gaussians[i].color(c) += h;
                          },
                          grads.d_color[i](c)});
  }
}

void add_pose_coords(std::vector<Coordinate>& coords, const std::string& name, bool next_pose,
                     const Vec6& analytic, double extent) {
  for (int c = 0; c < 6; ++c) {
    const double h = c < 3 ? 1e-5 : 1e-5 * extent;
    coords.push_back({name, -1, c, h,
                      [c, next_pose](GaussianMap&, PoseSE3& pt, PoseSE3& pn, double hh) {
                        Vec6 tau = Vec6::Zero();
                        tau(c) = hh;
                        if (next_pose)
                          pn = pose_retract(pn, tau);
                        else
                          pt = pose_retract(pt, tau);
                      },
                      analytic(c)});
  }
}

}  // namespace

GradcheckReport gradcheck_flow(const TwoFrameScene& scene, double tolerance) {
  const RenderOutputs fwd = rasterize(scene.map, scene.frame_t);
  const FlowRenderOutputs flw = rasterize_flow(scene.map, scene.frame_t, scene.pose_next, fwd);
  const FlowLossOutput loss = flow_loss(flw.zeta, scene.observed, scene.model);
  const Intermediate2DGradients g2d = backward_flow_2d(loss.dL_dzeta, fwd, flw, scene.map);
  MapGradients grads;
  grads.resize(scene.map.size());
  backward_to_world(g2d, fwd, &flw, scene.map, 1.0, grads);
  const PoseGradients pg = backward_to_pose(g2d, fwd, &flw, scene.map);

  std::vector<Coordinate> coords;
  add_gaussian_coords(coords, grads, scene, /*include_color=*/false);
  add_pose_coords(coords, "tau_t", false, pg.d_tau_t, scene.extent);
  add_pose_coords(coords, "tau_next", true, pg.d_tau_next, scene.extent);

  auto loss_fn = [&](const GaussianMap& m, const PoseSE3& pt, const PoseSE3& pn) {
    Keyframe ft = scene.frame_t;
    ft.pose = pt;
    const RenderOutputs f = rasterize(m, ft);
    const FlowRenderOutputs z = rasterize_flow(m, ft, pn, f);
    return flow_loss(z.zeta, scene.observed, scene.model).total;
  };
  return run_rows(scene, coords, loss_fn, tolerance);
}

GradcheckReport gradcheck_image(const TwoFrameScene& scene, double tolerance) {
  const int w = scene.frame_t.intrinsics.width;
  const int h = scene.frame_t.intrinsics.height;
  const RenderOutputs fwd = rasterize(scene.map, scene.frame_t);
  const ImageLossResult loss = image_loss(fwd.color, scene.frame_t.image, w, h, 0.2);
  const ImageBackward back = backward_image(loss.dL_dpixel, fwd, scene.map);

  std::vector<Coordinate> coords;
  add_gaussian_coords(coords, back.map_grads, scene, /*include_color=*/true);
  add_pose_coords(coords, "tau_t", false, back.d_tau, scene.extent);

  auto loss_fn = [&](const GaussianMap& m, const PoseSE3& pt, const PoseSE3&) {
    Keyframe ft = scene.frame_t;
    ft.pose = pt;
    const RenderOutputs f = rasterize(m, ft);
    return image_loss(f.color, scene.frame_t.image, w, h, 0.2).total;
  };
  return run_rows(scene, coords, loss_fn, tolerance);
}

void write_gradcheck_csv(const std::string& path, const GradcheckReport& report) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("write_gradcheck_csv: cannot open " + path);
  f << "param_class,gaussian_or_pose_id,coord,analytic,numeric,rel_err,pass\n";
  f.precision(17);
  for (const GradcheckRow& r : report.rows)
    f << r.param_class << "," << r.id << "," << r.coord << "," << r.analytic << "," << r.numeric
      << "," << r.rel_err << "," << (r.pass ? 1 : 0) << "\n";
}

}  // namespace gsflow
