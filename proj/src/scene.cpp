#include "gsflow/scene.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

namespace gsflow {

SceneLayout parse_layout(const std::string& s) {
  if (s == "wall") return SceneLayout::Wall;
  if (s == "room") return SceneLayout::Room;
  if (s == "random-blobs") return SceneLayout::RandomBlobs;
  throw std::runtime_error("unknown layout: " + s);
}

TrajectoryKind parse_trajectory(const std::string& s) {
  if (s == "orbit") return TrajectoryKind::Orbit;
  if (s == "line") return TrajectoryKind::Line;
  if (s == "lissajous") return TrajectoryKind::Lissajous;
  throw std::runtime_error("unknown trajectory: " + s);
}

ColorMode parse_color_mode(const std::string& s) {
  if (s == "random") return ColorMode::Random;
  if (s == "checker") return ColorMode::Checker;
  throw std::runtime_error("unknown color mode: " + s);
}

void SceneSpec::validate() const {
  if (n_gaussians < 1) throw std::runtime_error("scene spec: n_gaussians must be >= 1");
  if (n_frames < 2) throw std::runtime_error("scene spec: n_frames must be >= 2");
  if (extent <= 0) throw std::runtime_error("scene spec: extent must be positive");
  if (image_size < 8) throw std::runtime_error("scene spec: image_size too small");
}

PoseSE3 look_at(const Vec3& eye, const Vec3& target, const Vec3& up) {
  const Vec3 fwd = (target - eye).normalized();
  Vec3 right = fwd.cross(up);
  if (right.norm() < 1e-9) right = fwd.cross(Vec3(1, 0, 0));
  right.normalize();
  const Vec3 down = fwd.cross(right);

  PoseSE3 pose;
  pose.rotation.row(0) = right.transpose();
  pose.rotation.row(1) = down.transpose();
  pose.rotation.row(2) = fwd.transpose();
  pose.translation = -(pose.rotation * eye);
  return pose;
}

namespace {

struct PlaneFrame {
  Vec3 origin, u_axis, v_axis, normal;
};

// Jittered grid of flattened Gaussians covering a plane patch of the given
// half-extent.
void fill_plane(std::vector<Gaussian3D>& out, const PlaneFrame& plane, double half_extent,
                int count, ColorMode color_mode, std::mt19937_64& rng) {
  const int grid = std::max(1, static_cast<int>(std::ceil(std::sqrt(static_cast<double>(count)))));
  const double spacing = 2.0 * half_extent / grid;
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  int made = 0;
  for (int iy = 0; iy < grid && made < count; ++iy) {
    for (int ix = 0; ix < grid && made < count; ++ix, ++made) {
      Gaussian3D g;
      const double ju = (unit(rng) - 0.5) * 0.4 * spacing;
      const double jv = (unit(rng) - 0.5) * 0.4 * spacing;
      const double jn = (unit(rng) - 0.5) * 0.05 * spacing;
      const double cu = -half_extent + (ix + 0.5) * spacing + ju;
      const double cv = -half_extent + (iy + 0.5) * spacing + jv;
      g.mean = plane.origin + cu * plane.u_axis + cv * plane.v_axis + jn * plane.normal;

      const double su = (0.75 + 0.25 * unit(rng)) * spacing;
      const double sv = (0.75 + 0.25 * unit(rng)) * spacing;
      g.scale = Vec3(su, sv, 0.1 * spacing);
      Mat3 basis;
      basis.col(0) = plane.u_axis;
      basis.col(1) = plane.v_axis;
      basis.col(2) = plane.normal;
      g.rotation = Quat(basis).normalized();

      g.opacity = 0.75 + 0.22 * unit(rng);
      if (color_mode == ColorMode::Checker) {
        const Vec3 base = ((ix + iy) % 2 == 0) ? Vec3(0.85, 0.75, 0.2) : Vec3(0.15, 0.3, 0.7);
        g.color = base + 0.1 * Vec3(unit(rng) - 0.5, unit(rng) - 0.5, unit(rng) - 0.5);
      } else {
        g.color = Vec3(0.05 + 0.9 * unit(rng), 0.05 + 0.9 * unit(rng), 0.05 + 0.9 * unit(rng));
      }
      g.color = g.color.cwiseMax(0.0).cwiseMin(1.0);
      g.keyframe_id = 0;
      out.push_back(g);
    }
  }
}

GaussianMap build_layout(const SceneSpec& spec, std::mt19937_64& rng) {
  GaussianMap map;
  const double he = 0.5 * spec.extent;
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  switch (spec.layout) {
    case SceneLayout::Wall: {
      // overfill the frustum so lateral camera sweeps stay covered
      const PlaneFrame wall{Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0), Vec3(0, 0, 1)};
      fill_plane(map.gaussians, wall, 1.7 * he, spec.n_gaussians, spec.color_mode, rng);
      break;
    }
    case SceneLayout::Room: {
      // back wall plus floor/ceiling/left/right, viewed from +z
      const std::vector<PlaneFrame> planes = {
          {Vec3(0, 0, -he), Vec3(1, 0, 0), Vec3(0, 1, 0), Vec3(0, 0, 1)},
          {Vec3(0, -he, 0), Vec3(1, 0, 0), Vec3(0, 0, 1), Vec3(0, 1, 0)},
          {Vec3(0, he, 0), Vec3(1, 0, 0), Vec3(0, 0, 1), Vec3(0, -1, 0)},
          {Vec3(-he, 0, 0), Vec3(0, 0, 1), Vec3(0, 1, 0), Vec3(1, 0, 0)},
          {Vec3(he, 0, 0), Vec3(0, 0, 1), Vec3(0, 1, 0), Vec3(-1, 0, 0)},
      };
      const int per = (spec.n_gaussians + 4) / 5;
      for (const PlaneFrame& p : planes)
        fill_plane(map.gaussians, p, he, per, spec.color_mode, rng);
      map.gaussians.resize(std::min<std::size_t>(map.gaussians.size(),
                                                 static_cast<std::size_t>(spec.n_gaussians) * 2));
      break;
    }
    case SceneLayout::RandomBlobs: {
      for (int i = 0; i < spec.n_gaussians; ++i) {
        Gaussian3D g;
        g.mean = Vec3((unit(rng) - 0.5) * spec.extent, (unit(rng) - 0.5) * spec.extent,
                      (unit(rng) - 0.5) * 0.4 * spec.extent);
        const double base = spec.extent / std::sqrt(static_cast<double>(spec.n_gaussians));
        g.scale = Vec3((0.4 + 0.5 * unit(rng)) * base, (0.4 + 0.5 * unit(rng)) * base,
                       (0.4 + 0.5 * unit(rng)) * base);
        const Vec3 axis = Vec3(unit(rng) - 0.5, unit(rng) - 0.5, unit(rng) - 0.5).normalized();
        g.rotation = Quat(Eigen::AngleAxisd(unit(rng) * 3.0, axis)).normalized();
        g.opacity = 0.6 + 0.35 * unit(rng);
        g.color = Vec3(0.05 + 0.9 * unit(rng), 0.05 + 0.9 * unit(rng), 0.05 + 0.9 * unit(rng));
        g.keyframe_id = 0;
        map.gaussians.push_back(g);
      }
      break;
    }
  }
  return map;
}

std::vector<PoseSE3> build_trajectory(const SceneSpec& spec) {
  std::vector<PoseSE3> traj;
  const double stand_off = (spec.layout == SceneLayout::Room) ? 0.30 * spec.extent : 0.95 * spec.extent;
  const double sweep = 0.18 * spec.extent;
  const Vec3 target = (spec.layout == SceneLayout::Room) ? Vec3(0, 0, -0.25 * spec.extent)
                                                         : Vec3(0, 0, 0);
  for (int k = 0; k < spec.n_frames; ++k) {
    const double s = spec.n_frames > 1 ? static_cast<double>(k) / (spec.n_frames - 1) : 0.0;
    Vec3 eye;
    bool fixed_orientation = false;
    switch (spec.trajectory) {
      case TrajectoryKind::Orbit: {
        const double ang = 2.0 * M_PI * s;
        eye = Vec3(sweep * std::cos(ang), sweep * std::sin(ang), stand_off);
        break;
      }
      case TrajectoryKind::Line:
        // a dolly: pure translation, orientation fixed
        eye = Vec3(-sweep + 2.0 * sweep * s, 0.0, stand_off);
        fixed_orientation = true;
        break;
      case TrajectoryKind::Lissajous:
        eye = Vec3(sweep * std::sin(2.0 * M_PI * s),
                   0.6 * sweep * std::sin(4.0 * M_PI * s + 1.0),
                   stand_off + 0.1 * sweep * std::sin(2.0 * M_PI * s + 0.5));
        break;
    }
    if (fixed_orientation) {
      PoseSE3 pose = look_at(Vec3(0, 0, stand_off), target);
      pose.translation = -(pose.rotation * eye);
      traj.push_back(pose);
    } else {
      traj.push_back(look_at(eye, target));
    }
  }
  return traj;
}

}  // namespace

GeneratedScene generate_scene(const SceneSpec& spec) {
  spec.validate();

  GeneratedScene scene;
  scene.intrinsics.width = spec.image_size;
  scene.intrinsics.height = spec.image_size;
  scene.intrinsics.fx = spec.focal > 0 ? spec.focal : static_cast<double>(spec.image_size);
  scene.intrinsics.fy = scene.intrinsics.fx;
  scene.intrinsics.cx = 0.5 * spec.image_size;
  scene.intrinsics.cy = 0.5 * spec.image_size;
  scene.intrinsics.near = 0.01 * spec.extent;
  scene.intrinsics.far = 20.0 * spec.extent;

  scene.trajectory = build_trajectory(spec);

  const double coverage_needed = 0.95;
  for (int attempt = 0; attempt < 100; ++attempt) {
    std::mt19937_64 rng(spec.seed + 0x51ed270b * static_cast<std::uint64_t>(attempt));
    GaussianMap candidate = build_layout(spec, rng);

    scene.frames.clear();
    scene.depths.clear();
    scene.silhouettes.clear();
    bool covered = true;
    for (int k = 0; k < spec.n_frames; ++k) {
      Keyframe frame;
      frame.id = k;
      frame.pose = scene.trajectory[k];
      frame.intrinsics = scene.intrinsics;
      frame.image = ImageRGB::Zero(static_cast<Eigen::Index>(spec.image_size) * spec.image_size, 3);
      RenderOutputs render = rasterize(candidate, frame);
      const double coverage =
          static_cast<double>((render.silhouette > 0.5).count()) / render.silhouette.size();
      if (coverage < coverage_needed) {
        covered = false;
        break;
      }
      frame.image = render.color;
      scene.frames.push_back(std::move(frame));
      scene.depths.push_back(std::move(render.depth));
      scene.silhouettes.push_back(std::move(render.silhouette));
    }
    if (covered) {
      scene.gt_map = std::move(candidate);
      return scene;
    }
  }
  throw std::runtime_error("generate_scene: could not reach 95% coverage in 100 resamples");
}

}  // namespace gsflow
