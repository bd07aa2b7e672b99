#include "gsflow/config.hpp"

#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <stdexcept>

namespace gsflow {

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return "";
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

// Walks "key = value" lines and dispatches on the key; unknown keys throw.
void parse_lines(const std::string& text,
                 const std::map<std::string, std::function<void(const std::string&)>>& setters) {
  std::istringstream stream(text);
  std::string line;
  int line_no = 0;
  while (std::getline(stream, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error("config line " + std::to_string(line_no) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    const auto it = setters.find(key);
    if (it == setters.end())
      throw std::runtime_error("config line " + std::to_string(line_no) + ": unknown key '" + key + "'");
    it->second(value);
  }
}

double to_double(const std::string& v) {
  std::size_t used = 0;
  const double d = std::stod(v, &used);
  if (used != v.size()) throw std::runtime_error("config: bad numeric value '" + v + "'");
  return d;
}

int to_int(const std::string& v) {
  std::size_t used = 0;
  const int i = std::stoi(v, &used);
  if (used != v.size()) throw std::runtime_error("config: bad integer value '" + v + "'");
  return i;
}

std::string read_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open config file " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

}  // namespace

SlamConfig parse_slam_config(const std::string& text) {
  SlamConfig cfg;
  std::map<std::string, std::function<void(const std::string&)>> setters;

  auto dbl = [&](const std::string& key, double* field) {
    setters[key] = [field](const std::string& v) { *field = to_double(v); };
  };
  auto integer = [&](const std::string& key, int* field) {
    setters[key] = [field](const std::string& v) { *field = to_int(v); };
  };

  dbl("lambda1", &cfg.loss.lambda1);
  dbl("lambda2", &cfg.loss.lambda2);
  dbl("lambda3", &cfg.loss.lambda3);
  dbl("lambda4", &cfg.loss.lambda4);
  dbl("lambda_dssim", &cfg.loss.lambda_dssim);
  dbl("fisk_alpha", &cfg.loss.fisk_alpha);
  dbl("fisk_beta", &cfg.loss.fisk_beta);
  dbl("nu", &cfg.loss.nu);

  dbl("eta_s1", &cfg.manage.eta_s1);
  dbl("eta_s2", &cfg.manage.eta_s2);
  dbl("eta_r1", &cfg.manage.eta_r1);
  dbl("eta_r2", &cfg.manage.eta_r2);
  dbl("eta_r3", &cfg.manage.eta_r3);
  dbl("eta_r4", &cfg.manage.eta_r4);
  dbl("eta_g1", &cfg.manage.eta_g1);
  dbl("eta_p1", &cfg.manage.eta_p1);
  dbl("eta_p2", &cfg.manage.eta_p2);
  dbl("eta_p3", &cfg.manage.eta_p3);
  dbl("eta_o1", &cfg.manage.eta_o1);

  dbl("lr_mean", &cfg.lr.mean);
  dbl("lr_logscale", &cfg.lr.logscale);
  dbl("lr_quat", &cfg.lr.quat);
  dbl("lr_logit_opacity", &cfg.lr.logit_opacity);
  dbl("lr_color", &cfg.lr.color);
  dbl("lr_pose_rot", &cfg.lr.pose_rot);
  dbl("lr_pose_trans", &cfg.lr.pose_trans);

  integer("n_track", &cfg.schedule.n_track);
  integer("n_mapping", &cfg.schedule.n_mapping);
  integer("manage_every", &cfg.schedule.manage_every);
  integer("final_refine", &cfg.schedule.final_refine);
  integer("keyframe_stride", &cfg.schedule.keyframe_stride);
  integer("window_max", &cfg.schedule.window_max);
  integer("edge_gap_max", &cfg.schedule.edge_gap_max);
  integer("dba_sweeps", &cfg.schedule.dba_sweeps);
  integer("refine_iters_per_pose", &cfg.schedule.refine_iters_per_pose);
  integer("insert_grid_stride", &cfg.schedule.insert_grid_stride);
  integer("max_insert_per_keyframe", &cfg.schedule.max_insert_per_keyframe);

  parse_lines(text, setters);

  if (cfg.loss.lambda1 < 0 || cfg.loss.lambda2 < 0 || cfg.loss.lambda3 < 0 || cfg.loss.lambda4 < 0)
    throw std::runtime_error("config: loss weights must be nonnegative");
  if (cfg.loss.fisk_alpha <= 0 || cfg.loss.fisk_beta <= 0)
    throw std::runtime_error("config: fisk parameters must be positive");
  if (cfg.loss.nu < 0)
    throw std::runtime_error("config: nu must be positive (or 0 for the 1/(4WH) default)");
  return cfg;
}

SlamConfig load_slam_config(const std::string& path) { return parse_slam_config(read_file(path)); }

SceneSpec parse_scene_spec(const std::string& text) {
  SceneSpec spec;
  std::map<std::string, std::function<void(const std::string&)>> setters;

  setters["n_gaussians"] = [&](const std::string& v) { spec.n_gaussians = to_int(v); };
  setters["extent"] = [&](const std::string& v) { spec.extent = to_double(v); };
  setters["layout"] = [&](const std::string& v) { spec.layout = parse_layout(v); };
  setters["color_mode"] = [&](const std::string& v) { spec.color_mode = parse_color_mode(v); };
  setters["trajectory"] = [&](const std::string& v) { spec.trajectory = parse_trajectory(v); };
  setters["n_frames"] = [&](const std::string& v) { spec.n_frames = to_int(v); };
  setters["image_size"] = [&](const std::string& v) { spec.image_size = to_int(v); };
  setters["focal"] = [&](const std::string& v) { spec.focal = to_double(v); };
  setters["flow_noise_sigma"] = [&](const std::string& v) { spec.flow_noise_sigma = to_double(v); };
  setters["confidence_dropout"] = [&](const std::string& v) {
    spec.confidence_dropout = to_double(v);
  };
  setters["seed"] = [&](const std::string& v) { spec.seed = std::stoull(v); };

  parse_lines(text, setters);
  spec.validate();
  return spec;
}

SceneSpec load_scene_spec(const std::string& path) { return parse_scene_spec(read_file(path)); }

}  // namespace gsflow
