#include "gsflow/image_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace gsflow {

void write_ppm(const std::string& path, const ImageRGB& image, int width, int height) {
  if (image.rows() != static_cast<Eigen::Index>(width) * height)
    throw std::runtime_error("write_ppm: dimension mismatch");
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("write_ppm: cannot open " + path);
  f << "P6\n" << width << " " << height << "\n255\n";
  std::vector<std::uint8_t> row(static_cast<std::size_t>(width) * 3);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      for (int c = 0; c < 3; ++c) {
        const double v = std::clamp(image(pixel_index(x, y, width), c), 0.0, 1.0);
        row[static_cast<std::size_t>(x) * 3 + c] = static_cast<std::uint8_t>(std::lround(v * 255.0));
      }
    }
    f.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size()));
  }
  if (!f) throw std::runtime_error("write_ppm: write failed for " + path);
}

void write_pfm(const std::string& path, const GridXd& image) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("write_pfm: cannot open " + path);
  f << "Pf\n" << image.cols() << " " << image.rows() << "\n-1.0\n";
  for (Eigen::Index y = image.rows() - 1; y >= 0; --y) {
    for (Eigen::Index x = 0; x < image.cols(); ++x) {
      const float v = static_cast<float>(image(y, x));
      f.write(reinterpret_cast<const char*>(&v), 4);
    }
  }
  if (!f) throw std::runtime_error("write_pfm: write failed for " + path);
}

GridXd read_pfm(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("read_pfm: cannot open " + path);
  std::string magic;
  int width = 0, height = 0;
  double scale = 0.0;
  f >> magic >> width >> height >> scale;
  if (magic != "Pf" || width <= 0 || height <= 0)
    throw std::runtime_error("read_pfm: bad header in " + path);
  if (scale >= 0.0) throw std::runtime_error("read_pfm: big-endian PFM not supported");
  f.get();  // single whitespace after the header
  GridXd img(height, width);
  for (int y = height - 1; y >= 0; --y) {
    for (int x = 0; x < width; ++x) {
      float v = 0;
      f.read(reinterpret_cast<char*>(&v), 4);
      img(y, x) = v;
    }
  }
  if (!f) throw std::runtime_error("read_pfm: truncated file " + path);
  return img;
}

}  // namespace gsflow
