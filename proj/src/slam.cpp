#include "gsflow/slam.hpp"

#include "gsflow/fileio.hpp"
#include "gsflow/flow_oracle.hpp"
#include "gsflow/metrics.hpp"
#include "gsflow/robustflow.hpp"

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <sstream>

namespace gsflow {

namespace {

using json = nlohmann::ordered_json;

json json_metric(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (std::isnan(v)) return "nan";
  return v;
}

}  // namespace

std::string SlamReport::to_json() const {
  json j;
  j["ate_rmse"] = json_metric(ate_rmse);
  j["n_keyframes"] = n_keyframes;
  j["final_map_size"] = final_map_size;
  j["mean_psnr"] = json_metric(mean_psnr);
  j["mean_ssim"] = json_metric(mean_ssim);
  j["depth_abs_rel_median"] = json_metric(depth_abs_rel_median);
  j["mapping_disabled"] = mapping_disabled;
  j["diverged"] = diverged;
  if (diverged) j["divergence_info"] = divergence_info;
  j["map_size_history"] = map_size_history;
  json views = json::array();
  for (const HeldOutView& v : held_out) {
    json e;
    e["frame"] = v.frame_index;
    e["psnr"] = json_metric(v.psnr);
    e["ssim"] = json_metric(v.ssim);
    views.push_back(e);
  }
  j["held_out"] = views;
  return j.dump(2) + "\n";
}

FlowProvider make_oracle_provider(const GeneratedScene& scene, const SceneSpec& spec) {
  // capture by value so the provider outlives the caller's locals
  const auto* sc = &scene;
  const double sigma = spec.flow_noise_sigma;
  const double dropout = spec.confidence_dropout;
  const std::uint64_t seed = spec.seed;
  return [sc, sigma, dropout, seed](int a, int b) {
    FlowNoise noise;
    noise.sigma = sigma;
    noise.dropout = dropout;
    noise.seed = seed ^ (0x9e3779b97f4a7c15ULL * (static_cast<std::uint64_t>(a) * 4096 + b + 1));
    return flow_oracle_from_depth(sc->depths[a], sc->silhouettes[a], sc->depths[b],
                                  sc->trajectory[a], sc->trajectory[b], sc->intrinsics, noise);
  };
}

FlowProvider make_file_provider(const std::string& dir) {
  return [dir](int a, int b) {
    std::ostringstream name;
    name << dir << "/flow_" << a << "_" << b << ".gflo";
    return read_flow_file(name.str());
  };
}

MappingPhaseResult run_mapping_phase(
    GaussianMap& map, MapOptimizer& optimizer, const std::vector<Keyframe>& window,
    const std::vector<std::pair<int, int>>& edges,
    const std::function<const FlowField&(int, int)>& observed, const SlamConfig& cfg,
    double scene_extent, int iterations, bool allow_management, int rasterizing_keyframe_id,
    std::uint64_t manage_seed, long& iteration_counter, int& edge_cursor) {
  MappingPhaseResult result;
  if (edges.empty() || map.size() == 0) return result;

  std::vector<double> pos_grad_max(map.size(), 0.0);

  for (int it = 0; it < iterations; ++it) {
    const auto [a, b] = edges[edge_cursor % edges.size()];
    edge_cursor = (edge_cursor + 1) % static_cast<int>(edges.size());

    MappingResult step = mapping_objective(window, a, b, map, observed(a, b), cfg.loss);
    for (std::size_t i = 0; i < map.size(); ++i)
      pos_grad_max[i] = std::max(pos_grad_max[i], step.grads.pos_grad_2d[i]);

    optimizer.step(map, step.grads, cfg.lr, scene_extent);

    ++iteration_counter;
    result.log.push_back({iteration_counter, step.total, step.l_image, step.l_flow, step.l_iso,
                          step.l_opa});

    const bool manage_now =
        allow_management && cfg.schedule.manage_every > 0 && (it + 1) % cfg.schedule.manage_every == 0;
    if (manage_now) {
      const GaussianErrorStats stats =
          compute_error_stats(step.render_a, step.dssim_map, step.flow_map, pos_grad_max, map);
      const DensifyMasks densify = densify_masks(stats, cfg.manage);
      const PruneMasks prune = prune_masks(stats, cfg.manage);
      const EditReport edit =
          apply_management(map, densify, prune, manage_seed + static_cast<std::uint64_t>(it),
                           window[a].id >= 0 ? window[a].id : rasterizing_keyframe_id,
                           step.render_a.records.map_generation);
      optimizer.remap(edit.new_to_old);
      pos_grad_max.assign(map.size(), 0.0);
      result.edits.push_back(edit);
    }
  }
  return result;
}

namespace {

struct WindowState {
  std::vector<Keyframe> frames;     // estimated poses live here
  std::vector<int> frame_indices;   // scene frame index per window slot

  std::vector<std::pair<int, int>> edges(int gap_max) const {
    std::vector<std::pair<int, int>> out;
    for (int a = 0; a < static_cast<int>(frames.size()); ++a)
      for (int b = 0; b < static_cast<int>(frames.size()); ++b)
        if (a != b && std::abs(a - b) <= gap_max) out.emplace_back(a, b);
    return out;
  }
};

// Observed-flow cache keyed by scene frame pairs.
class FlowCache {
 public:
  FlowCache(FlowProvider provider) : provider_(std::move(provider)) {}

  const FlowField& get(int frame_a, int frame_b) {
    const auto key = std::make_pair(frame_a, frame_b);
    auto it = cache_.find(key);
    if (it == cache_.end()) it = cache_.emplace(key, provider_(frame_a, frame_b)).first;
    return it->second;
  }

 private:
  FlowProvider provider_;
  std::map<std::pair<int, int>, FlowField> cache_;
};

struct RayHit {
  Vec3 point;
  double depth_new;
  bool ok = false;
};

RayHit triangulate_midpoint(const PoseSE3& pose_new, const PoseSE3& pose_prev,
                            const CameraIntrinsics& k, const Vec2& px_new, const Vec2& px_prev) {
  RayHit hit;
  const Vec3 c1 = pose_new.center();
  const Vec3 c2 = pose_prev.center();
  const Vec3 d1 = (pose_new.rotation.transpose() *
                   Vec3((px_new.x() - k.cx) / k.fx, (px_new.y() - k.cy) / k.fy, 1.0))
                      .normalized();
  const Vec3 d2 = (pose_prev.rotation.transpose() *
                   Vec3((px_prev.x() - k.cx) / k.fx, (px_prev.y() - k.cy) / k.fy, 1.0))
                      .normalized();

  const Vec3 b = c2 - c1;
  const double d11 = 1.0, d22 = 1.0;
  const double d12 = d1.dot(d2);
  const double det = d12 * d12 - d11 * d22;
  if (std::abs(det) < 1e-8) return hit;  // near-parallel rays
  const double t1 = (-d22 * d1.dot(b) + d12 * d2.dot(b)) / det;
  const double t2 = (-d12 * d1.dot(b) + d11 * d2.dot(b)) / det;
  if (t1 <= 0.0 || t2 <= 0.0) return hit;

  hit.point = 0.5 * ((c1 + t1 * d1) + (c2 + t2 * d2));
  hit.depth_new = pose_new.apply(hit.point).z();
  hit.ok = hit.depth_new > k.near && hit.depth_new < 0.5 * k.far;
  return hit;
}

// Unprojects a sparse pixel grid through flow triangulation into
// low-silhouette regions of the new keyframe.
int insert_gaussians(GaussianMap& map, MapOptimizer& optimizer, const Keyframe& new_frame,
                     const Keyframe& prev_frame, const FlowField& flow_new_to_prev,
                     const Schedule& schedule, std::uint64_t seed) {
  const CameraIntrinsics& k = new_frame.intrinsics;
  RenderOutputs current = rasterize(map, new_frame);

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> jitter(0.9, 1.1);

  const std::size_t before = map.size();
  const int stride = std::max(1, schedule.insert_grid_stride);
  int inserted = 0;
  for (int y = stride / 2; y < k.height && inserted < schedule.max_insert_per_keyframe; y += stride) {
    for (int x = stride / 2; x < k.width && inserted < schedule.max_insert_per_keyframe;
         x += stride) {
      const double u = jitter(rng);  // consumed per probe to keep runs aligned
      if (current.silhouette(y, x) >= 0.5) continue;
      if (!flow_new_to_prev.validity(y, x)) continue;

      const Vec2 p(x + 0.5, y + 0.5);
      const Eigen::Index px = pixel_index(x, y, k.width);
      const Vec2 q = p + flow_new_to_prev.flow.row(px).transpose();
      RayHit hit = triangulate_midpoint(new_frame.pose, prev_frame.pose, k, p, q);
      if (!hit.ok) continue;

      // multiplicative depth jitter along the new frame's ray
      const Vec3 c = new_frame.pose.center();
      hit.point = c + u * (hit.point - c);
      hit.depth_new *= u;

      Gaussian3D g;
      g.mean = hit.point;
      const double sigma = 0.6 * hit.depth_new * stride / k.fx;
      g.scale = Vec3::Constant(sigma);
      g.rotation = Quat::Identity();
      g.opacity = 0.7;
      g.color = new_frame.image.row(px).transpose().cwiseMax(0.0).cwiseMin(1.0);
      g.keyframe_id = new_frame.id;
      map.gaussians.push_back(g);
      ++inserted;
    }
  }

  if (inserted > 0) {
    map.generation += 1;
    std::vector<int> new_to_old(map.size());
    for (std::size_t i = 0; i < map.size(); ++i)
      new_to_old[i] = i < before ? static_cast<int>(i) : -1;
    optimizer.remap(new_to_old);
  }
  return inserted;
}

struct TrackingRun {
  int iterations = 0;
  bool diverged = false;
  double final_loss = 0.0;
};

// First-order pose optimization with a two-phase schedule: full rate for the
// approach, then exponential decay to damp the oscillation near the optimum.
// The translational rate scales with the scene extent.
TrackingRun run_tracking(Keyframe& new_frame, const Keyframe& prev, const Keyframe& prev2,
                         const GaussianMap& map, const FlowField& flow_prev,
                         const FlowField& flow_prev2, const SlamConfig& cfg, int iterations,
                         double scene_extent) {
  TrackingRun run;
  PoseOptimizer popt;
  const RenderOutputs fwd_prev = rasterize(map, prev);
  const RenderOutputs fwd_prev2 = rasterize(map, prev2);

  DivergenceGuard guard;
  for (int it = 0; it < iterations; ++it) {
    const TrackingResult res = tracking_objective(new_frame, prev, prev2, map, flow_prev,
                                                  flow_prev2, cfg.loss, &fwd_prev, &fwd_prev2);
    LearningRates lr = cfg.lr;
    const double frac = static_cast<double>(it) / std::max(1, iterations);
    const double decay = frac < 0.6 ? 1.0 : std::pow(0.01, (frac - 0.6) / 0.4);
    lr.pose_rot *= decay;
    lr.pose_trans *= decay * scene_extent;
    popt.step(new_frame.pose, res.d_tau_new, lr);
    run.final_loss = res.total;
    ++run.iterations;
    if (guard.update(res.total)) {
      run.diverged = true;
      return run;
    }
  }
  return run;
}

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

SlamReport run_slam(const SceneSpec& spec, const SlamConfig& cfg, const std::string& out_dir,
                    FlowProvider provider) {
  const auto t_start = std::chrono::steady_clock::now();
  spec.validate();

  const GeneratedScene scene = generate_scene(spec);
  if (!provider) provider = make_oracle_provider(scene, spec);
  FlowCache flows(provider);

  const Schedule& sched = cfg.schedule;
  std::vector<int> keyframe_indices;
  for (int f = 0; f < spec.n_frames; f += sched.keyframe_stride) keyframe_indices.push_back(f);

  SlamReport report;
  report.n_keyframes = static_cast<int>(keyframe_indices.size());
  report.mapping_disabled = sched.n_mapping <= 0;

  GaussianMap map;
  MapOptimizer optimizer(0);
  WindowState window;
  std::vector<LossRow> loss_log;
  std::vector<EditReport> edit_log;
  std::map<int, PoseSE3> estimated_poses;  // scene frame index -> pose
  long iteration_counter = 0;
  int edge_cursor = 0;

  auto window_flow = [&](int a, int b) -> const FlowField& {
    return flows.get(window.frame_indices[a], window.frame_indices[b]);
  };

  for (std::size_t kf_pos = 0; kf_pos < keyframe_indices.size(); ++kf_pos) {
    const int frame_index = keyframe_indices[kf_pos];
    Keyframe kf;
    kf.id = frame_index;
    kf.image = scene.frames[frame_index].image;
    kf.intrinsics = scene.intrinsics;

    if (kf_pos < 2) {
      kf.pose = scene.trajectory[frame_index];  // bootstrap anchor
    } else {
      kf.pose = window.frames.back().pose;  // init from the previous keyframe
      const Keyframe& prev = window.frames[window.frames.size() - 1];
      const Keyframe& prev2 = window.frames[window.frames.size() - 2];
      const TrackingRun run =
          run_tracking(kf, prev, prev2, map, flows.get(prev.id, frame_index),
                       flows.get(prev2.id, frame_index), cfg, sched.n_track, spec.extent);
      if (run.diverged) {
        report.diverged = true;
        std::ostringstream info;
        info << "tracking diverged at keyframe " << frame_index << " after " << run.iterations
             << " iterations (loss " << run.final_loss << ")";
        report.divergence_info = info.str();
        break;
      }
    }

    window.frames.push_back(kf);
    window.frame_indices.push_back(frame_index);
    if (static_cast<int>(window.frames.size()) > sched.window_max) {
      estimated_poses[window.frame_indices.front()] = window.frames.front().pose;
      window.frames.erase(window.frames.begin());
      window.frame_indices.erase(window.frame_indices.begin());
    }

    if (window.frames.size() >= 2) {
      const Keyframe& newest = window.frames.back();
      const Keyframe& previous = window.frames[window.frames.size() - 2];
      insert_gaussians(map, optimizer, newest, previous, flows.get(newest.id, previous.id),
                       sched, spec.seed ^ (0xabcd1234u + frame_index));
    }

    if (window.frames.size() >= 2 && sched.n_mapping > 0) {
      MappingPhaseResult phase = run_mapping_phase(
          map, optimizer, window.frames, window.edges(sched.edge_gap_max), window_flow, cfg,
          spec.extent, sched.n_mapping, /*allow_management=*/true, frame_index,
          spec.seed ^ (0x5151u + 977u * frame_index), iteration_counter, edge_cursor);
      loss_log.insert(loss_log.end(), phase.log.begin(), phase.log.end());
      edit_log.insert(edit_log.end(), phase.edits.begin(), phase.edits.end());

      // multi-pose refinement: poses only, map frozen, round-robin sweeps
      for (int sweep = 0; sweep < sched.dba_sweeps; ++sweep) {
        for (std::size_t wi = 0; wi < window.frames.size(); ++wi) {
          if (window.frame_indices[wi] == keyframe_indices[0]) continue;  // gauge anchor
          if (window.frames.size() < 3) continue;
          std::size_t n1 = wi == 0 ? 1 : wi - 1;
          std::size_t n2 = wi + 1 < window.frames.size() ? wi + 1 : wi - 2;
          if (n1 == wi || n2 == wi || n1 == n2) continue;
          run_tracking(window.frames[wi], window.frames[n1], window.frames[n2], map,
                       flows.get(window.frames[n1].id, window.frames[wi].id),
                       flows.get(window.frames[n2].id, window.frames[wi].id), cfg,
                       sched.refine_iters_per_pose, spec.extent);
        }
      }
    }

    report.map_size_history.push_back(map.size());
  }

  // final refinement, management disabled
  if (!report.diverged && window.frames.size() >= 2 && sched.final_refine > 0 && sched.n_mapping > 0) {
    MappingPhaseResult phase = run_mapping_phase(
        map, optimizer, window.frames, window.edges(sched.edge_gap_max), window_flow, cfg,
        spec.extent, sched.final_refine, /*allow_management=*/false, window.frames.back().id,
        spec.seed, iteration_counter, edge_cursor);
    loss_log.insert(loss_log.end(), phase.log.begin(), phase.log.end());
  }

  for (std::size_t wi = 0; wi < window.frames.size(); ++wi)
    estimated_poses[window.frame_indices[wi]] = window.frames[wi].pose;

  // trajectory metrics over keyframes
  std::vector<PoseSE3> est_traj, gt_traj;
  std::vector<TrajectoryEntry> est_entries, gt_entries;
  for (int fi : keyframe_indices) {
    if (!estimated_poses.count(fi)) continue;
    est_traj.push_back(estimated_poses[fi]);
    gt_traj.push_back(scene.trajectory[fi]);
    est_entries.push_back({static_cast<double>(fi), estimated_poses[fi]});
    gt_entries.push_back({static_cast<double>(fi), scene.trajectory[fi]});
  }
  report.ate_rmse = est_traj.size() >= 3 ? ate_rmse(est_traj, gt_traj) : 0.0;
  report.final_map_size = map.size();

  // held-out rendering metrics: every 5th non-keyframe, never optimized
  if (map.size() > 0) {
    int ordinal = 0;
    double psnr_sum = 0.0, ssim_sum = 0.0;
    for (int f = 0; f < spec.n_frames; ++f) {
      if (std::find(keyframe_indices.begin(), keyframe_indices.end(), f) != keyframe_indices.end())
        continue;
      if (ordinal++ % 5 != 0) continue;
      Keyframe eval;
      eval.id = f;
      eval.pose = scene.trajectory[f];
      eval.intrinsics = scene.intrinsics;
      eval.image = scene.frames[f].image;
      const RenderOutputs render = rasterize(map, eval);
      HeldOutView view;
      view.frame_index = f;
      view.psnr = psnr(render.color, eval.image);
      view.ssim = ssim(render.color, eval.image, spec.image_size, spec.image_size);
      psnr_sum += std::min(view.psnr, 99.0);
      ssim_sum += view.ssim;
      report.held_out.push_back(view);
    }
    if (!report.held_out.empty()) {
      report.mean_psnr = psnr_sum / report.held_out.size();
      report.mean_ssim = ssim_sum / report.held_out.size();
    }

    // depth error against ground truth at keyframe views
    std::vector<double> abs_rel;
    for (int fi : keyframe_indices) {
      Keyframe eval;
      eval.pose = scene.trajectory[fi];
      eval.intrinsics = scene.intrinsics;
      eval.image = scene.frames[fi].image;
      const RenderOutputs render = rasterize(map, eval);
      for (int y = 0; y < spec.image_size; ++y)
        for (int x = 0; x < spec.image_size; ++x)
          if (scene.silhouettes[fi](y, x) > 0.5 && render.depth(y, x) > 0.0)
            abs_rel.push_back(std::abs(render.depth(y, x) - scene.depths[fi](y, x)) /
                              scene.depths[fi](y, x));
    }
    report.depth_abs_rel_median = median(std::move(abs_rel));
  }

  report.wall_clock_sec =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();

  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    {
      std::ofstream f(out_dir + "/report.json");
      f << report.to_json();
    }
    {
      std::ofstream f(out_dir + "/losses.csv");
      f << "iteration,L_total,L_image,L_flow,L_iso,L_opa\n" << std::setprecision(17);
      for (const LossRow& r : loss_log)
        f << r.iteration << "," << r.total << "," << r.image << "," << r.flow << "," << r.iso
          << "," << r.opa << "\n";
    }
    {
      std::ofstream f(out_dir + "/edits.jsonl");
      int event = 0;
      for (const EditReport& e : edit_log) {
        json j;
        j["event"] = event++;
        j["pruned"] = {{"m4", e.pruned_m4}, {"m5", e.pruned_m5}, {"m6", e.pruned_m6}};
        j["split"] = {{"m1", e.split_m1}, {"m2", e.split_m2}, {"m3", e.split_m3}};
        j["size_before"] = e.size_before;
        j["size_after"] = e.size_after;
        f << j.dump() << "\n";
      }
    }
    write_trajectory(out_dir + "/traj_est.txt", est_entries);
    write_trajectory(out_dir + "/traj_gt.txt", gt_entries);
    write_map_file(out_dir + "/final_map.gmap", map);
  }

  return report;
}

}  // namespace gsflow
