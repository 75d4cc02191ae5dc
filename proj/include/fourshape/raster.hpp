#pragma once

#include <span>
#include <vector>

#include "fourshape/contour.hpp"

namespace fourshape {

// Pixel grid over a rectangle in contour coordinates. A pixel (col, row) is
// evaluated at the centre of its cell:
//   x = x_min + (col + 0.5) * (x_max - x_min) / width
//   y = y_min + (row + 0.5) * (y_max - y_min) / height
struct CanvasSpec {
  int width = 224;
  int height = 224;
  double x_min = -1.0, x_max = 1.0;
  double y_min = -1.0, y_max = 1.0;
  double epsilon = 1e-9;  // winding denominator guard, canvas-units^2

  double pitch_x() const noexcept { return (x_max - x_min) / width; }
  double pitch_y() const noexcept { return (y_max - y_min) / height; }
  double pixel_x(int col) const noexcept { return x_min + (col + 0.5) * pitch_x(); }
  double pixel_y(int row) const noexcept { return y_min + (row + 0.5) * pitch_y(); }
  std::size_t pixel_count() const noexcept {
    return static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
  }

  void validate() const;
};

// H x W field of winding values (raw) or normalized mask values in [0, 1],
// stored row-major: values[row * width + col].
struct RasterGrid {
  CanvasSpec canvas;
  std::vector<double> values;

  double at(int row, int col) const { return values[static_cast<std::size_t>(row) * canvas.width + col]; }
  double& at(int row, int col) { return values[static_cast<std::size_t>(row) * canvas.width + col]; }
  double mean() const;
};

// dL/d(a_k, b_k) for all k, aligned with the flat coefficient layout.
struct CoefficientGradient {
  int order = 0;
  std::vector<double> values;

  static CoefficientGradient zeros(int order);
  void accumulate_scaled(const CoefficientGradient& other, double scale);
  bool all_finite() const noexcept;
};

// Discrete winding sum of the contour around (p.x, p.y):
//   (1/N) sum_j [(f-x0) g' - (g-y0) f'] / [(f-x0)^2 + (g-y0)^2 + eps]
// evaluated at t_j = j*(2*pi/N). Near 1 inside a simple counter-clockwise
// contour, near 0 outside, sign flips with orientation.
double winding_number(const FourierCoefficients& c, Point p, int sample_count, double epsilon = 1e-9);
double winding_number(const ContourSamples& samples, Point p, double epsilon);

// Winding sum at every pixel centre. Each pixel is an independent evaluation
// of winding_number, so the result does not depend on traversal order.
RasterGrid rasterize_raw(const FourierCoefficients& c, const CanvasSpec& canvas, int sample_count);

// abs -> clip normalization: out = min(|raw|, 1). Idempotent; maps interior
// regions of either orientation (winding near +1 or -1) to values near 1.
RasterGrid normalize(const RasterGrid& raw);

// normalize(rasterize_raw(...))
RasterGrid rasterize_mask(const FourierCoefficients& c, const CanvasSpec& canvas, int sample_count);

// Reverse-mode gradient of sum_p upstream[p] * I_norm(p) with respect to the
// flat coefficient vector. `upstream` is row-major H x W and must match the
// canvas. The abs/clip kinks use the subgradient sign(raw) gated to
// 0 < |raw| < 1; reduction runs row-major over pixels, then ascending j.
CoefficientGradient rasterize_backward(const FourierCoefficients& c, const CanvasSpec& canvas,
                                       int sample_count, std::span<const double> upstream);

// Contour evaluated at M uniform parameter values; closed implicitly.
std::vector<Point> polygonize(const FourierCoefficients& c, int vertex_count);

}  // namespace fourshape
