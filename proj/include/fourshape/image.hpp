#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "fourshape/raster.hpp"

namespace fourshape {

// Row-major, channel-last pixel buffer with values in [0, 1].
struct NaturalImage {
  int height = 0;
  int width = 0;
  int channels = 1;
  std::vector<double> values;

  static NaturalImage filled(int height, int width, int channels, double value);

  std::size_t index(int row, int col, int channel) const noexcept {
    return (static_cast<std::size_t>(row) * width + col) * channels + channel;
  }
  double at(int row, int col, int channel) const { return values[index(row, col, channel)]; }
  double& at(int row, int col, int channel) { return values[index(row, col, channel)]; }
  std::size_t element_count() const noexcept { return values.size(); }

  void validate() const;
};

// Axis-aligned box in pixel coordinates, centre + extent.
struct BoundingBox {
  double cx = 0.0;
  double cy = 0.0;
  double w = 0.0;
  double h = 0.0;
  std::string label;
};

// The normalized mask as a single-channel image (model input for the
// shape-generation objective).
NaturalImage image_from_grid(const RasterGrid& grid);

}  // namespace fourshape
