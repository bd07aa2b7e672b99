#include "gsflow/backward.hpp"
#include "gsflow/finite_diff.hpp"
#include "gsflow/gradcheck.hpp"
#include "gsflow/objectives.hpp"
#include "gsflow/parallel.hpp"

#include "support/scenes.hpp"

#include <doctest.h>

#include <random>

using namespace gsflow;

TEST_CASE("finite_diff oracle on a quadratic and a constant") {
  const auto grad = finite_diff_gradient(
      [](const std::vector<double>& x) { return x[0] * x[0] + x[1] * x[1]; }, {1.0, 2.0}, 1e-6);
  CHECK(grad[0] == doctest::Approx(2.0).epsilon(1e-8));
  CHECK(grad[1] == doctest::Approx(4.0).epsilon(1e-8));

  const auto zero =
      finite_diff_gradient([](const std::vector<double>&) { return 3.5; }, {1.0, -2.0}, 1e-6);
  CHECK(zero[0] == 0.0);
  CHECK(zero[1] == 0.0);
}

TEST_CASE("finite_diff oracle rejects non-deterministic evaluators") {
  int calls = 0;
  CHECK_THROWS_AS(finite_diff_gradient(
                      [&](const std::vector<double>&) { return static_cast<double>(calls++); },
                      {0.0}, 1e-6),
                  std::runtime_error);
}

TEST_CASE("zero upstream gradient produces zero intermediate gradients") {
  const GaussianMap map = test_scenes::random_cloud(3, 40);
  const Keyframe frame = test_scenes::camera_at_origin(48);
  const RenderOutputs fwd = rasterize(map, frame);
  const FlowRenderOutputs flow = rasterize_flow(map, frame, frame.pose, fwd);

  const Image2 zero_d = Image2::Zero(48 * 48, 2);
  const Intermediate2DGradients g2d = backward_flow_2d(zero_d, fwd, flow, map);
  for (std::size_t i = 0; i < map.size(); ++i) {
    CHECK(g2d.d_mu_t[i].norm() == 0.0);
    CHECK(g2d.d_mu_next[i].norm() == 0.0);
    CHECK(g2d.d_sigma2d_t[i].norm() == 0.0);
    CHECK(g2d.d_opacity[i] == 0.0);
  }

  MapGradients mg;
  mg.resize(map.size());
  backward_to_world(g2d, fwd, &flow, map, 1.0, mg);
  const PoseGradients pg = backward_to_pose(g2d, fwd, &flow, map);
  CHECK(pg.d_tau_t.norm() == 0.0);
  CHECK(pg.d_tau_next.norm() == 0.0);
  for (std::size_t i = 0; i < map.size(); ++i) CHECK(mg.d_mean[i].norm() == 0.0);
}

TEST_CASE("center-term hand case: single Gaussian, M = I, one pixel, alpha path frozen") {
  GaussianMap map;
  Gaussian3D g;
  g.mean = Vec3(0, 0, 5.0);
  g.scale = Vec3::Constant(0.3);
  g.opacity = 0.8;
  map.gaussians.push_back(g);

  Keyframe frame = test_scenes::camera_at_origin(64, 64.0);
  frame.intrinsics.cx = 32.5;
  frame.intrinsics.cy = 32.5;

  const RenderOutputs fwd = rasterize(map, frame);
  const FlowRenderOutputs flow = rasterize_flow(map, frame, frame.pose, fwd);

  Image2 d = Image2::Zero(64 * 64, 2);
  d(pixel_index(32, 32, 64), 0) = 1.0;  // D = (1, 0) at the center pixel

  BackwardOptions opts;
  opts.alpha_path = false;
  const Intermediate2DGradients g2d = backward_flow_2d(d, fwd, flow, map, opts);

  const double w = fwd.records.at(32, 32)[0].weight;
  CHECK(g2d.d_mu_t[0].x() == doctest::Approx(-w).epsilon(1e-12));
  CHECK(g2d.d_mu_t[0].y() == doctest::Approx(0.0));
  CHECK(g2d.d_mu_next[0].x() == doctest::Approx(w).epsilon(1e-12));
  CHECK(g2d.d_mu_next[0].y() == doctest::Approx(0.0));

  // delta = 0 at the center pixel, so A_t = A_next = 0
  CHECK(g2d.A_t[0].norm() == doctest::Approx(0.0));
  CHECK(g2d.A_next[0].norm() == doctest::Approx(0.0));
}

TEST_CASE("matrix-root gradient accumulations against a direct sum") {
  const GaussianMap map = test_scenes::random_cloud(41, 25);
  const Keyframe frame = test_scenes::camera_at_origin(32);
  Vec6 rel;
  rel << 0.02, -0.01, 0.03, 0.05, 0.02, -0.04;
  const PoseSE3 pose_next = pose_retract(frame.pose, rel);

  const RenderOutputs fwd = rasterize(map, frame);
  const FlowRenderOutputs flow = rasterize_flow(map, frame, pose_next, fwd);

  std::mt19937_64 rng(6);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Image2 d = Image2::Zero(32 * 32, 2);
  for (Eigen::Index px = 0; px < d.rows(); ++px) d.row(px) << gauss(rng), gauss(rng);
  // zero out where the flow is invalid, as flow_loss would
  for (int y = 0; y < 32; ++y)
    for (int x = 0; x < 32; ++x)
      if (!flow.zeta.validity(y, x)) d.row(pixel_index(x, y, 32)).setZero();

  const Intermediate2DGradients g2d = backward_flow_2d(d, fwd, flow, map);

  std::vector<Mat2> a_t(map.size(), Mat2::Zero()), a_next(map.size(), Mat2::Zero());
  for (int y = 0; y < 32; ++y)
    for (int x = 0; x < 32; ++x) {
      const Eigen::Index px = pixel_index(x, y, 32);
      const Vec2 dd = d.row(px).transpose();
      for (const BlendEntry& e : fwd.records.at(x, y)) {
        const Mat2 v = dd * e.delta.transpose();
        a_t[e.gaussian] += e.weight * flow.transfers[e.gaussian].B_next * v;
        a_next[e.gaussian] += e.weight * v * flow.transfers[e.gaussian].B_t_inv;
      }
    }
  for (std::size_t i = 0; i < map.size(); ++i) {
    CHECK((g2d.A_t[i] - a_t[i]).norm() <= 1e-12 * std::max(1.0, a_t[i].norm()));
    CHECK((g2d.A_next[i] - a_next[i]).norm() <= 1e-12 * std::max(1.0, a_next[i].norm()));
  }
}

TEST_CASE("Gaussians absent from all records get exactly zero gradient") {
  GaussianMap map = test_scenes::random_cloud(13, 20);
  Gaussian3D far_away;
  far_away.mean = Vec3(500.0, 500.0, 5.0);  // projects far off-screen
  far_away.scale = Vec3::Constant(0.1);
  map.gaussians.push_back(far_away);

  const Keyframe frame = test_scenes::camera_at_origin(32);
  const RenderOutputs fwd = rasterize(map, frame);
  const FlowRenderOutputs flow = rasterize_flow(map, frame, frame.pose, fwd);

  std::mt19937_64 rng(8);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Image2 d = Image2::Zero(32 * 32, 2);
  for (Eigen::Index px = 0; px < d.rows(); ++px) d.row(px) << gauss(rng), gauss(rng);
  for (int y = 0; y < 32; ++y)
    for (int x = 0; x < 32; ++x)
      if (!flow.zeta.validity(y, x)) d.row(pixel_index(x, y, 32)).setZero();

  const Intermediate2DGradients g2d = backward_flow_2d(d, fwd, flow, map);
  MapGradients mg;
  mg.resize(map.size());
  backward_to_world(g2d, fwd, &flow, map, 1.0, mg);

  const std::size_t last = map.size() - 1;
  CHECK(g2d.touched[last] == 0);
  CHECK(mg.d_mean[last].norm() == 0.0);
  CHECK(mg.d_quat[last].norm() == 0.0);
  CHECK(mg.d_logscale[last].norm() == 0.0);
  CHECK(mg.d_logit_opacity[last] == 0.0);
}

TEST_CASE("flow path never produces color gradients") {
  const TwoFrameScene scene = make_gradcheck_scene(21, 25, 32);
  const RenderOutputs fwd = rasterize(scene.map, scene.frame_t);
  const FlowRenderOutputs flow = rasterize_flow(scene.map, scene.frame_t, scene.pose_next, fwd);
  const FlowLossOutput loss = flow_loss(flow.zeta, scene.observed, scene.model);
  const Intermediate2DGradients g2d = backward_flow_2d(loss.dL_dzeta, fwd, flow, scene.map);
  MapGradients mg;
  mg.resize(scene.map.size());
  backward_to_world(g2d, fwd, &flow, scene.map, 1.0, mg);
  for (std::size_t i = 0; i < scene.map.size(); ++i) CHECK(mg.d_color[i].norm() == 0.0);
}

TEST_CASE("stationary point: identical poses and observed = rendered flow") {
  const GaussianMap map = test_scenes::random_cloud(19, 60);
  const Keyframe frame = test_scenes::camera_at_origin(48);
  const RenderOutputs fwd = rasterize(map, frame);
  const FlowRenderOutputs flow = rasterize_flow(map, frame, frame.pose, fwd);

  FlowField observed = flow.zeta;
  observed.confidence.setConstant(1.0);

  RobustFlowModel model;
  const FlowLossOutput loss = flow_loss(flow.zeta, observed, model);
  CHECK(loss.dL_dzeta.cwiseAbs().maxCoeff() == 0.0);

  const Intermediate2DGradients g2d = backward_flow_2d(loss.dL_dzeta, fwd, flow, map);
  const PoseGradients pg = backward_to_pose(g2d, fwd, &flow, map);
  CHECK(pg.d_tau_t.norm() == 0.0);
  CHECK(pg.d_tau_next.norm() == 0.0);
}

TEST_CASE("gradient accumulation is independent of worker count") {
  const TwoFrameScene scene = make_gradcheck_scene(77, 40, 32);
  auto compute = [&]() {
    const RenderOutputs fwd = rasterize(scene.map, scene.frame_t);
    const FlowRenderOutputs flow = rasterize_flow(scene.map, scene.frame_t, scene.pose_next, fwd);
    const FlowLossOutput loss = flow_loss(flow.zeta, scene.observed, scene.model);
    const Intermediate2DGradients g2d = backward_flow_2d(loss.dL_dzeta, fwd, flow, scene.map);
    MapGradients mg;
    mg.resize(scene.map.size());
    backward_to_world(g2d, fwd, &flow, scene.map, 1.0, mg);
    return mg;
  };

  set_num_threads(1);
  const MapGradients serial = compute();
  set_num_threads(4);
  const MapGradients parallel = compute();
  set_num_threads(1);

  for (std::size_t i = 0; i < serial.size(); ++i) {
    CHECK((serial.d_mean[i] - parallel.d_mean[i]).norm() == 0.0);
    CHECK((serial.d_quat[i] - parallel.d_quat[i]).norm() == 0.0);
    CHECK((serial.d_logscale[i] - parallel.d_logscale[i]).norm() == 0.0);
    CHECK(serial.d_logit_opacity[i] == parallel.d_logit_opacity[i]);
  }
}

TEST_CASE("image backward hand case: d_color is the weighted pixel gradient sum") {
  GaussianMap map;
  Gaussian3D g;
  g.mean = Vec3(0, 0, 5.0);
  g.scale = Vec3::Constant(0.4);
  g.opacity = 0.7;
  g.color = Vec3(0.3, 0.6, 0.9);
  map.gaussians.push_back(g);
  const Keyframe frame = test_scenes::camera_at_origin(32);

  const RenderOutputs fwd = rasterize(map, frame);
  ImageRGB d = ImageRGB::Zero(32 * 32, 3);
  d.col(0).setConstant(1.0);
  d.col(1).setConstant(-0.5);
  d.col(2).setConstant(0.25);

  const ImageBackward back = backward_image(d, fwd, map);
  double w_sum = 0.0;
  for (int y = 0; y < 32; ++y)
    for (int x = 0; x < 32; ++x)
      for (const BlendEntry& e : fwd.records.at(x, y)) w_sum += e.weight;
  CHECK(back.map_grads.d_color[0].x() == doctest::Approx(w_sum * 1.0).epsilon(1e-10));
  CHECK(back.map_grads.d_color[0].y() == doctest::Approx(w_sum * -0.5).epsilon(1e-10));
  CHECK(back.map_grads.d_color[0].z() == doctest::Approx(w_sum * 0.25).epsilon(1e-10));
}

TEST_CASE("world pullback symmetry: on-axis isotropic Gaussian, identity d_sigma2d") {
  GaussianMap map;
  Gaussian3D g;
  g.mean = Vec3(0, 0, 5.0);
  g.scale = Vec3::Constant(0.3);
  g.opacity = 0.8;
  map.gaussians.push_back(g);
  const Keyframe frame = test_scenes::camera_at_origin(64);
  const RenderOutputs fwd = rasterize(map, frame);

  Intermediate2DGradients g2d;
  g2d.resize(1);
  g2d.touched[0] = 1;
  g2d.d_sigma2d_t[0] = Mat2::Identity();

  MapGradients out;
  out.resize(1);
  backward_to_world(g2d, fwd, nullptr, map, 1.0, out);

  // the x and y log-scale components are forced equal by symmetry and the
  // quaternion gradient vanishes for an isotropic covariance
  CHECK(out.d_logscale[0](0) == doctest::Approx(out.d_logscale[0](1)).epsilon(1e-12));
  CHECK(out.d_quat[0].norm() < 1e-12);
}

TEST_CASE("full-chain flow gradcheck on a small scene") {
  const TwoFrameScene scene = make_gradcheck_scene(5, 12, 32);
  const GradcheckReport report = gradcheck_flow(scene);
  CHECK(report.pass_fraction() >= 0.995);
}

TEST_CASE("full-chain image gradcheck on a small scene") {
  const TwoFrameScene scene = make_gradcheck_scene(6, 12, 32);
  const GradcheckReport report = gradcheck_image(scene);
  // the rare failures are finite steps sweeping pixels across the hard
  // alpha-cutoff boundary of the rasterizer, not gradient errors
  CHECK(report.pass_fraction() >= 0.98);
}
