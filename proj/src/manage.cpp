#include "gsflow/manage.hpp"

#include <algorithm>
#include <random>
#include <stdexcept>

namespace gsflow {

namespace {
constexpr double kDensityFloor = 1e-8;
constexpr double kSplitScaleDivisor = 1.6;
}  // namespace

std::vector<double> gaussian_error(const BlendRecords& records, const GridXd& loss_map,
                                   std::size_t n_gaussians) {
  if (loss_map.rows() != records.height || loss_map.cols() != records.width)
    throw std::runtime_error("gaussian_error: loss map dimensions mismatch");
  std::vector<double> e(n_gaussians, 0.0);
  for (int y = 0; y < records.height; ++y) {
    for (int x = 0; x < records.width; ++x) {
      const double val = loss_map(y, x);
      for (const BlendEntry& entry : records.at(x, y)) e[entry.gaussian] += entry.weight * val;
    }
  }
  return e;
}

std::vector<double> normalized_error(const std::vector<double>& e, const std::vector<double>& d) {
  std::vector<double> out(e.size(), 0.0);
  for (std::size_t i = 0; i < e.size(); ++i)
    if (d[i] > kDensityFloor) out[i] = e[i] / d[i];
  return out;
}

GaussianErrorStats compute_error_stats(const RenderOutputs& forward, const GridXd& dssim_map,
                                       const GridXd& flow_map, const std::vector<double>& pos_grad,
                                       const GaussianMap& map) {
  const std::size_t n = map.size();
  GaussianErrorStats stats;
  stats.e_dssim = gaussian_error(forward.records, dssim_map, n);
  stats.e_flow = gaussian_error(forward.records, flow_map, n);
  stats.density = gaussian_error(forward.records, forward.silhouette, n);
  stats.en_dssim = normalized_error(stats.e_dssim, stats.density);
  stats.en_flow = normalized_error(stats.e_flow, stats.density);
  stats.normalized_defined.resize(n);
  stats.radius.resize(n);
  stats.opacity.resize(n);
  stats.pos_grad = pos_grad.empty() ? std::vector<double>(n, 0.0) : pos_grad;
  if (stats.pos_grad.size() != n) throw std::runtime_error("compute_error_stats: pos_grad size");
  for (std::size_t i = 0; i < n; ++i) {
    stats.normalized_defined[i] = stats.density[i] > kDensityFloor;
    stats.radius[i] = forward.projections[i].behind_camera ? 0.0 : forward.projections[i].radius;
    stats.opacity[i] = map.gaussians[i].opacity;
  }
  return stats;
}

DensifyMasks densify_masks(const GaussianErrorStats& stats, const ManagementConfig& cfg) {
  DensifyMasks out;
  for (int i = 0; i < static_cast<int>(stats.size()); ++i) {
    const bool in_m1 = stats.e_dssim[i] > cfg.eta_s1 && stats.radius[i] > cfg.eta_r1 &&
                       stats.pos_grad[i] < cfg.eta_g1;
    const bool in_m2 =
        stats.normalized_defined[i] && stats.en_dssim[i] > cfg.eta_s2 && stats.radius[i] > cfg.eta_r1;
    const bool in_m3 = stats.radius[i] > cfg.eta_r2;
    if (in_m1)
      out.m1.push_back(i);
    else if (in_m2)
      out.m2.push_back(i);
    else if (in_m3)
      out.m3.push_back(i);
  }
  return out;
}

PruneMasks prune_masks(const GaussianErrorStats& stats, const ManagementConfig& cfg) {
  PruneMasks out;
  for (int i = 0; i < static_cast<int>(stats.size()); ++i) {
    const bool defined = stats.normalized_defined[i];
    if (defined && (stats.en_dssim[i] > cfg.eta_p1 || stats.en_flow[i] > cfg.eta_p2) &&
        stats.radius[i] < cfg.eta_r3)
      out.m4.push_back(i);
    if (defined && stats.en_dssim[i] > cfg.eta_p3 && stats.radius[i] < cfg.eta_r4)
      out.m5.push_back(i);
    if (stats.opacity[i] < cfg.eta_o1) out.m6.push_back(i);
  }
  return out;
}

std::pair<Gaussian3D, Gaussian3D> split_gaussian(const Gaussian3D& g, std::uint64_t rng_seed,
                                                 int keyframe_id) {
  std::mt19937_64 rng(rng_seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  const Mat3 rot = g.rotation.toRotationMatrix();
  auto sample_mean = [&]() -> Vec3 {
    const Vec3 z(normal(rng), normal(rng), normal(rng));
    return g.mean + rot * g.scale.cwiseProduct(z);  // R diag(s) z has covariance Sigma
  };

  Gaussian3D a = g, b = g;
  a.mean = sample_mean();
  b.mean = sample_mean();
  a.scale = g.scale / kSplitScaleDivisor;
  b.scale = g.scale / kSplitScaleDivisor;
  a.keyframe_id = keyframe_id;
  b.keyframe_id = keyframe_id;
  return {a, b};
}

EditReport apply_management(GaussianMap& map, const DensifyMasks& densify, const PruneMasks& prune,
                            std::uint64_t rng_seed, int keyframe_id,
                            std::uint64_t masks_generation) {
  if (masks_generation != map.generation)
    throw std::runtime_error("apply_management: masks are stale (map generation mismatch)");

  const std::size_t n = map.size();
  std::vector<char> pruned(n, 0), split(n, 0);
  for (int i : prune.m4) pruned[i] = 1;
  for (int i : prune.m5) pruned[i] = 1;
  for (int i : prune.m6) pruned[i] = 1;
  auto mark_split = [&](const std::vector<int>& mask) {
    for (int i : mask)
      if (!pruned[i]) split[i] = 1;  // prune precedence
  };
  mark_split(densify.m1);
  mark_split(densify.m2);
  mark_split(densify.m3);

  EditReport report;
  report.size_before = n;
  report.pruned_m4 = prune.m4.size();
  report.pruned_m5 = prune.m5.size();
  report.pruned_m6 = prune.m6.size();
  auto count_kept = [&](const std::vector<int>& mask) {
    return static_cast<std::size_t>(
        std::count_if(mask.begin(), mask.end(), [&](int i) { return !pruned[i]; }));
  };
  report.split_m1 = count_kept(densify.m1);
  report.split_m2 = count_kept(densify.m2);
  report.split_m3 = count_kept(densify.m3);

  std::vector<Gaussian3D> next;
  next.reserve(n + report.split_m1 + report.split_m2 + report.split_m3);
  for (std::size_t i = 0; i < n; ++i) {
    if (pruned[i]) continue;
    if (split[i]) {
      auto [a, b] = split_gaussian(map.gaussians[i], rng_seed ^ (0x9e3779b97f4a7c15ULL * (i + 1)),
                                   keyframe_id);
      next.push_back(a);
      next.push_back(b);
      report.new_to_old.push_back(-1);
      report.new_to_old.push_back(-1);
    } else {
      next.push_back(map.gaussians[i]);
      report.new_to_old.push_back(static_cast<int>(i));
    }
  }

  map.gaussians = std::move(next);
  map.generation += 1;
  report.size_after = map.size();
  return report;
}

}  // namespace gsflow
