#include "fourshape/image.hpp"

#include <cmath>

namespace fourshape {

NaturalImage NaturalImage::filled(int height, int width, int channels, double value) {
  NaturalImage img;
  img.height = height;
  img.width = width;
  img.channels = channels;
  img.values.assign(static_cast<std::size_t>(height) * width * channels, value);
  img.validate();
  return img;
}

void NaturalImage::validate() const {
  if (height < 1 || width < 1) {
    raise(ErrorCode::invalid_argument, "image dimensions must be positive");
  }
  if (channels != 1 && channels != 3) {
    raise(ErrorCode::invalid_argument, "image must have 1 or 3 channels");
  }
  if (values.size() != static_cast<std::size_t>(height) * width * channels) {
    raise(ErrorCode::shape_mismatch, "image buffer size does not match dimensions");
  }
  for (double v : values) {
    if (!(v >= 0.0 && v <= 1.0)) {
      raise(ErrorCode::invalid_argument, "image values must lie in [0, 1]");
    }
  }
}

NaturalImage image_from_grid(const RasterGrid& grid) {
  NaturalImage img;
  img.height = grid.canvas.height;
  img.width = grid.canvas.width;
  img.channels = 1;
  img.values = grid.values;
  img.validate();
  return img;
}

}  // namespace fourshape
