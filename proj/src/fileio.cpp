#include "gsflow/fileio.hpp"

#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>

namespace gsflow {

namespace {

void write_f32(std::ostream& s, double v) {
  const float f = static_cast<float>(v);
  s.write(reinterpret_cast<const char*>(&f), 4);
}

double read_f32(std::istream& s) {
  float f = 0;
  s.read(reinterpret_cast<char*>(&f), 4);
  return f;
}

}  // namespace

void write_map_file(const std::string& path, const GaussianMap& map) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("write_map_file: cannot open " + path);
  f.write("GMAP", 4);
  const std::uint32_t count = static_cast<std::uint32_t>(map.size());
  f.write(reinterpret_cast<const char*>(&count), 4);
  for (const Gaussian3D& g : map.gaussians) {
    for (int k = 0; k < 3; ++k) write_f32(f, g.mean(k));
    for (int k = 0; k < 4; ++k) write_f32(f, g.rotation.coeffs()(k));
    for (int k = 0; k < 3; ++k) write_f32(f, g.scale(k));
    write_f32(f, g.opacity);
    for (int k = 0; k < 3; ++k) write_f32(f, g.color(k));
    const std::uint32_t kf = static_cast<std::uint32_t>(g.keyframe_id);
    f.write(reinterpret_cast<const char*>(&kf), 4);
  }
  if (!f) throw std::runtime_error("write_map_file: write failed for " + path);
}

GaussianMap read_map_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("read_map_file: cannot open " + path);
  char magic[4];
  f.read(magic, 4);
  if (!f || std::memcmp(magic, "GMAP", 4) != 0)
    throw std::runtime_error("read_map_file: bad magic in " + path);
  std::uint32_t count = 0;
  f.read(reinterpret_cast<char*>(&count), 4);
  if (count > 100000000u) throw std::runtime_error("read_map_file: implausible count in " + path);
  GaussianMap map;
  map.gaussians.resize(count);
  for (Gaussian3D& g : map.gaussians) {
    for (int k = 0; k < 3; ++k) g.mean(k) = read_f32(f);
    Vec4 q;
    for (int k = 0; k < 4; ++k) q(k) = read_f32(f);
    q.normalize();
    g.rotation = Quat(q(3), q(0), q(1), q(2));
    for (int k = 0; k < 3; ++k) g.scale(k) = read_f32(f);
    g.opacity = read_f32(f);
    for (int k = 0; k < 3; ++k) g.color(k) = read_f32(f);
    std::uint32_t kf = 0;
    f.read(reinterpret_cast<char*>(&kf), 4);
    g.keyframe_id = static_cast<int>(kf);
  }
  if (!f) throw std::runtime_error("read_map_file: truncated file " + path);
  return map;
}

void write_trajectory(const std::string& path, const std::vector<TrajectoryEntry>& traj) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("write_trajectory: cannot open " + path);
  f << std::setprecision(17);
  for (const TrajectoryEntry& e : traj) {
    const PoseSE3 cam_to_world = e.pose.inverse();
    const Quat q(cam_to_world.rotation);
    f << e.timestamp << " " << cam_to_world.translation.x() << " " << cam_to_world.translation.y()
      << " " << cam_to_world.translation.z() << " " << q.x() << " " << q.y() << " " << q.z() << " "
      << q.w() << "\n";
  }
  if (!f) throw std::runtime_error("write_trajectory: write failed for " + path);
}

std::vector<TrajectoryEntry> read_trajectory(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("read_trajectory: cannot open " + path);
  std::vector<TrajectoryEntry> out;
  std::string line;
  while (std::getline(f, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ss(line);
    double ts, tx, ty, tz, qx, qy, qz, qw;
    if (!(ss >> ts >> tx >> ty >> tz >> qx >> qy >> qz >> qw))
      throw std::runtime_error("read_trajectory: malformed line in " + path + ": " + line);
    TrajectoryEntry e;
    e.timestamp = ts;
    PoseSE3 cam_to_world;
    cam_to_world.rotation = Quat(qw, qx, qy, qz).normalized().toRotationMatrix();
    cam_to_world.translation = Vec3(tx, ty, tz);
    e.pose = cam_to_world.inverse();
    out.push_back(e);
  }
  return out;
}

}  // namespace gsflow
