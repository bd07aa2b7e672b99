#pragma once

#include "gsflow/rasterize.hpp"

#include <cstdint>
#include <utility>

namespace gsflow {

// Per-Gaussian error statistics for one frame. E is blend-weighted loss-map
// mass; D is the same accumulation of the silhouette (the density
// contribution); normalized errors are E/D and defined only where D > 1e-8.
struct GaussianErrorStats {
  std::vector<double> e_dssim;   // E[S_t]
  std::vector<double> e_flow;    // E[F_t]
  std::vector<double> density;   // D = E[H_t]
  std::vector<double> en_dssim;  // E[S]/D
  std::vector<double> en_flow;   // E[F]/D
  std::vector<char> normalized_defined;
  std::vector<double> radius;    // max projected radius this frame, px
  std::vector<double> pos_grad;  // max position-gradient magnitude since last edit
  std::vector<double> opacity;

  std::size_t size() const { return e_dssim.size(); }
};

// E_i = sum_{j in Omega_i} w_ij * loss_map(p_j).
std::vector<double> gaussian_error(const BlendRecords& records, const GridXd& loss_map,
                                   std::size_t n_gaussians);

std::vector<double> normalized_error(const std::vector<double>& e, const std::vector<double>& d);

GaussianErrorStats compute_error_stats(const RenderOutputs& forward, const GridXd& dssim_map,
                                       const GridXd& flow_map, const std::vector<double>& pos_grad,
                                       const GaussianMap& map);

// Split masks M1..M3, disjointified with lower-numbered masks taking
// precedence, so the per-mask counts sum to the union size.
struct DensifyMasks {
  std::vector<int> m1, m2, m3;
  std::size_t total() const { return m1.size() + m2.size() + m3.size(); }
};

// Prune masks M4..M6 as raw predicate sets; they may overlap.
struct PruneMasks {
  std::vector<int> m4, m5, m6;
};

DensifyMasks densify_masks(const GaussianErrorStats& stats, const ManagementConfig& cfg);
PruneMasks prune_masks(const GaussianErrorStats& stats, const ManagementConfig& cfg);

// Two children with means drawn from N(mean, Sigma), scales divided by 1.6,
// everything else copied; both children take the rasterizing keyframe's id.
std::pair<Gaussian3D, Gaussian3D> split_gaussian(const Gaussian3D& g, std::uint64_t rng_seed,
                                                 int keyframe_id);

struct EditReport {
  std::size_t pruned_m4 = 0, pruned_m5 = 0, pruned_m6 = 0;
  std::size_t split_m1 = 0, split_m2 = 0, split_m3 = 0;
  std::size_t size_before = 0, size_after = 0;
  // new index -> old index, -1 for split children; drives optimizer remap
  std::vector<int> new_to_old;
};

// Pruning first (M4 u M5 u M6), then splitting of survivors in M1 u M2 u M3;
// bumps the map generation. Masks must have been computed for this
// generation.
EditReport apply_management(GaussianMap& map, const DensifyMasks& densify, const PruneMasks& prune,
                            std::uint64_t rng_seed, int keyframe_id,
                            std::uint64_t masks_generation);

}  // namespace gsflow
