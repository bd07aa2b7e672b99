#pragma once

#include "gsflow/manage.hpp"
#include "gsflow/objectives.hpp"
#include "gsflow/optimizer.hpp"
#include "gsflow/scene.hpp"

#include <functional>
#include <limits>
#include <string>

namespace gsflow {

struct Schedule {
  int n_track = 100;            // tracking iterations per new keyframe
  int n_mapping = 150;          // mapping iterations per keyframe
  int manage_every = 5;         // management cadence in mapping iterations
  int final_refine = 500;       // final refinement iterations (management off)
  int keyframe_stride = 4;      // fixed-stride keyframing
  int window_max = 8;
  int edge_gap_max = 3;         // flow edges between window members this close
  int dba_sweeps = 2;           // multi-pose refinement sweeps per keyframe
  int refine_iters_per_pose = 20;
  int insert_grid_stride = 4;   // px between insertion probes
  int max_insert_per_keyframe = 400;
};

struct SlamConfig {
  LossConfig loss;
  ManagementConfig manage;
  LearningRates lr;
  Schedule schedule;
};

struct HeldOutView {
  int frame_index = 0;
  double psnr = 0.0;
  double ssim = 0.0;
};

struct SlamReport {
  double ate_rmse = 0.0;
  int n_keyframes = 0;
  std::size_t final_map_size = 0;
  std::vector<HeldOutView> held_out;
  double mean_psnr = 0.0;
  double mean_ssim = 0.0;
  double depth_abs_rel_median = 0.0;
  std::vector<std::size_t> map_size_history;  // after each keyframe's mapping
  bool mapping_disabled = false;
  bool diverged = false;
  std::string divergence_info;
  double wall_clock_sec = 0.0;  // excluded from the JSON report

  std::string to_json() const;  // deterministic serialization
};

// Observed flow between two scene frame indices (source -> target).
using FlowProvider = std::function<FlowField(int frame_a, int frame_b)>;

// Oracle provider over the generated scene's ground truth; the per-edge noise
// seed is derived from (spec seed, frame pair) so results are reproducible.
FlowProvider make_oracle_provider(const GeneratedScene& scene, const SceneSpec& spec);

// Provider reading flow_<a>_<b>.gflo files from a directory.
FlowProvider make_file_provider(const std::string& dir);

struct LossRow {
  long iteration = 0;
  double total = 0, image = 0, flow = 0, iso = 0, opa = 0;
};

// Aborts tracking when the loss rises for 50 consecutive iterations.
class DivergenceGuard {
 public:
  bool update(double loss) {
    rises_ = loss > last_ ? rises_ + 1 : 0;
    last_ = loss;
    return rises_ >= 50;
  }

 private:
  double last_ = std::numeric_limits<double>::infinity();
  int rises_ = 0;
};

struct MappingPhaseResult {
  std::vector<LossRow> log;
  std::vector<EditReport> edits;
};

// Round-robin mapping over the given window edges with optional periodic
// management. Shared by the SLAM loop and the standalone experiments.
// `observed` is indexed by window positions; `edge_cursor` persists the
// round-robin position across phases.
MappingPhaseResult run_mapping_phase(
    GaussianMap& map, MapOptimizer& optimizer, const std::vector<Keyframe>& window,
    const std::vector<std::pair<int, int>>& edges,
    const std::function<const FlowField&(int, int)>& observed, const SlamConfig& cfg,
    double scene_extent, int iterations, bool allow_management, int rasterizing_keyframe_id,
    std::uint64_t manage_seed, long& iteration_counter, int& edge_cursor);

// Full alternating loop: fixed-stride keyframing, tracking, triangulated
// insertion, windowed mapping with management, multi-pose refinement, final
// refinement, and evaluation. When out_dir is non-empty, writes report.json,
// losses.csv, edits.jsonl, traj_est.txt, traj_gt.txt and final_map.gmap.
SlamReport run_slam(const SceneSpec& spec, const SlamConfig& cfg, const std::string& out_dir = "",
                    FlowProvider provider = nullptr);

}  // namespace gsflow
