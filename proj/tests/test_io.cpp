#include "gsflow/fileio.hpp"
#include "gsflow/image_io.hpp"

#include "support/scenes.hpp"

#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <random>

using namespace gsflow;

TEST_CASE("PPM header and payload") {
  ImageRGB img = ImageRGB::Zero(4 * 2, 3);
  img(0, 0) = 1.0;       // top-left red
  img(7, 2) = 0.5;       // bottom-right half blue
  img(3, 1) = 2.0;       // clamped to 255
  write_ppm("t.ppm", img, 4, 2);

  std::ifstream f("t.ppm", std::ios::binary);
  std::string magic;
  int w, h, maxval;
  f >> magic >> w >> h >> maxval;
  CHECK(magic == "P6");
  CHECK(w == 4);
  CHECK(h == 2);
  CHECK(maxval == 255);
  f.get();
  std::vector<unsigned char> data(4 * 2 * 3);
  f.read(reinterpret_cast<char*>(data.data()), data.size());
  CHECK(data[0] == 255);
  CHECK(data[3 * 3 + 1] == 255);
  CHECK(data[7 * 3 + 2] == 128);
  std::remove("t.ppm");
}

TEST_CASE("PFM round trip") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> gauss(0.0, 1.0);
  GridXd img(5, 7);
  for (int y = 0; y < 5; ++y)
    for (int x = 0; x < 7; ++x) img(y, x) = gauss(rng);
  write_pfm("t.pfm", img);
  const GridXd back = read_pfm("t.pfm");
  std::remove("t.pfm");
  CHECK(back.rows() == 5);
  CHECK(back.cols() == 7);
  CHECK((back - img).abs().maxCoeff() < 1e-6);
}

TEST_CASE("GMAP round trip preserves every field") {
  const GaussianMap map = test_scenes::random_cloud(17, 25);
  write_map_file("t.gmap", map);
  const GaussianMap back = read_map_file("t.gmap");
  std::remove("t.gmap");

  REQUIRE(back.size() == map.size());
  for (std::size_t i = 0; i < map.size(); ++i) {
    CHECK((back.gaussians[i].mean - map.gaussians[i].mean).norm() < 1e-6);
    CHECK(std::abs(std::abs(back.gaussians[i].rotation.dot(map.gaussians[i].rotation)) - 1.0) <
          1e-6);
    CHECK((back.gaussians[i].scale - map.gaussians[i].scale).norm() < 1e-6);
    CHECK(back.gaussians[i].opacity == doctest::Approx(map.gaussians[i].opacity).epsilon(1e-6));
    CHECK((back.gaussians[i].color - map.gaussians[i].color).norm() < 1e-6);
    CHECK(back.gaussians[i].keyframe_id == map.gaussians[i].keyframe_id);
  }
}

TEST_CASE("GMAP rejects a bad magic") {
  std::ofstream f("bad.gmap", std::ios::binary);
  f << "NOPE";
  f.close();
  CHECK_THROWS_AS(read_map_file("bad.gmap"), std::runtime_error);
  std::remove("bad.gmap");
}

TEST_CASE("trajectory round trip in camera-to-world convention") {
  std::vector<TrajectoryEntry> traj;
  std::mt19937_64 rng(5);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (int k = 0; k < 4; ++k) {
    Vec6 tau;
    for (int c = 0; c < 6; ++c) tau(c) = 0.5 * gauss(rng);
    traj.push_back({static_cast<double>(k), se3_exp(tau)});
  }
  write_trajectory("t.traj", traj);

  // the file stores camera centers directly
  std::ifstream f("t.traj");
  double ts, tx, ty, tz, qx, qy, qz, qw;
  f >> ts >> tx >> ty >> tz >> qx >> qy >> qz >> qw;
  CHECK((Vec3(tx, ty, tz) - traj[0].pose.center()).norm() < 1e-12);

  const auto back = read_trajectory("t.traj");
  std::remove("t.traj");
  REQUIRE(back.size() == 4);
  for (int k = 0; k < 4; ++k) {
    CHECK(back[k].timestamp == doctest::Approx(traj[k].timestamp));
    CHECK((back[k].pose.rotation - traj[k].pose.rotation).norm() < 1e-12);
    CHECK((back[k].pose.translation - traj[k].pose.translation).norm() < 1e-12);
  }
}

TEST_CASE("trajectory rejects malformed lines") {
  std::ofstream f("bad.traj");
  f << "1.0 2.0 3.0\n";
  f.close();
  CHECK_THROWS_AS(read_trajectory("bad.traj"), std::runtime_error);
  std::remove("bad.traj");
}
