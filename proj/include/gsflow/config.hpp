#pragma once

#include "gsflow/scene.hpp"
#include "gsflow/slam.hpp"

#include <string>

namespace gsflow {

// Configuration text: one "key = value" per line, '#' starts a comment.
// Unknown keys are a hard error. Keys are the flat field names of
// LossConfig, ManagementConfig, LearningRates (lr_ prefix) and Schedule.
SlamConfig parse_slam_config(const std::string& text);
SlamConfig load_slam_config(const std::string& path);

// Scene description in the same format: n_gaussians, extent, layout,
// color_mode, trajectory, n_frames, image_size, focal, flow_noise_sigma,
// confidence_dropout, seed.
SceneSpec parse_scene_spec(const std::string& text);
SceneSpec load_scene_spec(const std::string& path);

}  // namespace gsflow
