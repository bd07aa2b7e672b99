#pragma once

#include "gsflow/types.hpp"

#include <string>

namespace gsflow {

// Binary PPM (P6, maxval 255); values clamped to [0,1] and rounded.
void write_ppm(const std::string& path, const ImageRGB& image, int width, int height);

// Grayscale PFM, little-endian (scale -1.0), rows bottom-to-top per the
// format convention.
void write_pfm(const std::string& path, const GridXd& image);
GridXd read_pfm(const std::string& path);

}  // namespace gsflow
