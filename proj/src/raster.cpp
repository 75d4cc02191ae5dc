#include "fourshape/raster.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

namespace fourshape {

void CanvasSpec::validate() const {
  if (width < 1 || height < 1) {
    raise(ErrorCode::config, "canvas must be at least 1x1 pixels");
  }
  if (!(x_max > x_min) || !(y_max > y_min)) {
    raise(ErrorCode::config, "canvas coordinate ranges must be non-degenerate");
  }
  if (!(epsilon > 0.0) || !std::isfinite(epsilon)) {
    raise(ErrorCode::config, "canvas epsilon must be a positive finite value");
  }
}

double RasterGrid::mean() const {
  double acc = 0.0;
  for (double v : values) acc += v;
  return values.empty() ? 0.0 : acc / static_cast<double>(values.size());
}

CoefficientGradient CoefficientGradient::zeros(int order) {
  CoefficientGradient g;
  g.order = order;
  g.values.assign(2 * static_cast<std::size_t>(2 * order + 1), 0.0);
  return g;
}

void CoefficientGradient::accumulate_scaled(const CoefficientGradient& other, double scale) {
  if (other.values.size() != values.size()) {
    raise(ErrorCode::shape_mismatch, "gradient layouts differ");
  }
  for (std::size_t i = 0; i < values.size(); ++i) values[i] += scale * other.values[i];
}

bool CoefficientGradient::all_finite() const noexcept {
  return std::all_of(values.begin(), values.end(), [](double v) { return std::isfinite(v); });
}

double winding_number(const ContourSamples& s, Point p, double epsilon) {
  double acc = 0.0;
  for (int j = 0; j < s.count; ++j) {
    const double rx = s.x[j] - p.x;
    const double ry = s.y[j] - p.y;
    const double numer = rx * s.dy[j] - ry * s.dx[j];
    const double denom = rx * rx + ry * ry + epsilon;
    acc += numer / denom;
  }
  return acc / s.count;
}

double winding_number(const FourierCoefficients& c, Point p, int sample_count, double epsilon) {
  if (!std::isfinite(p.x) || !std::isfinite(p.y)) {
    raise(ErrorCode::invalid_argument, "winding evaluation point must be finite");
  }
  const ContourSamples s = sample_contour(c, sample_count);
  return winding_number(s, p, epsilon);
}

RasterGrid rasterize_raw(const FourierCoefficients& c, const CanvasSpec& canvas, int sample_count) {
  canvas.validate();
  const ContourSamples s = sample_contour(c, sample_count);
  RasterGrid grid;
  grid.canvas = canvas;
  grid.values.resize(canvas.pixel_count());
  for (int row = 0; row < canvas.height; ++row) {
    const double y = canvas.pixel_y(row);
    for (int col = 0; col < canvas.width; ++col) {
      grid.at(row, col) = winding_number(s, {canvas.pixel_x(col), y}, canvas.epsilon);
    }
  }
  return grid;
}

RasterGrid normalize(const RasterGrid& raw) {
  RasterGrid out = raw;
  for (double& v : out.values) v = std::min(std::abs(v), 1.0);
  return out;
}

RasterGrid rasterize_mask(const FourierCoefficients& c, const CanvasSpec& canvas, int sample_count) {
  return normalize(rasterize_raw(c, canvas, sample_count));
}

CoefficientGradient rasterize_backward(const FourierCoefficients& c, const CanvasSpec& canvas,
                                       int sample_count, std::span<const double> upstream) {
  canvas.validate();
  if (upstream.size() != canvas.pixel_count()) {
    raise(ErrorCode::shape_mismatch,
          "upstream field has " + std::to_string(upstream.size()) + " values, canvas has " +
              std::to_string(canvas.pixel_count()) + " pixels");
  }
  const ContourSamples s = sample_contour(c, sample_count);
  const int n = s.count;
  const double inv_n = 1.0 / n;

  // Adjoints of the per-sample quantities f, g, f', g', accumulated over
  // pixels in row-major order.
  std::vector<double> ax(n, 0.0), ay(n, 0.0), adx(n, 0.0), ady(n, 0.0);

  for (int row = 0; row < canvas.height; ++row) {
    const double y0 = canvas.pixel_y(row);
    for (int col = 0; col < canvas.width; ++col) {
      const double u = upstream[static_cast<std::size_t>(row) * canvas.width + col];
      if (u == 0.0) continue;
      const double x0 = canvas.pixel_x(col);

      double w = 0.0;
      for (int j = 0; j < n; ++j) {
        const double rx = s.x[j] - x0;
        const double ry = s.y[j] - y0;
        w += (rx * s.dy[j] - ry * s.dx[j]) / (rx * rx + ry * ry + canvas.epsilon);
      }
      w *= inv_n;

      // d(normalize)/d(raw): sign(raw) inside 0 < |raw| < 1, zero elsewhere.
      const double mag = std::abs(w);
      if (mag <= 0.0 || mag >= 1.0) continue;
      const double gate = u * (w > 0.0 ? 1.0 : -1.0) * inv_n;

      for (int j = 0; j < n; ++j) {
        const double rx = s.x[j] - x0;
        const double ry = s.y[j] - y0;
        const double denom = rx * rx + ry * ry + canvas.epsilon;
        const double numer = rx * s.dy[j] - ry * s.dx[j];
        const double inv_d = 1.0 / denom;
        const double common = -2.0 * numer * inv_d * inv_d;
        ax[j] += gate * (s.dy[j] * inv_d + common * rx);
        ay[j] += gate * (-s.dx[j] * inv_d + common * ry);
        adx[j] += gate * (-ry * inv_d);
        ady[j] += gate * (rx * inv_d);
      }
    }
  }

  // Chain the sample adjoints to the coefficients:
  //   f_j = sum a_k cos(k t_j) - b_k sin(k t_j)
  //   g_j = sum a_k sin(k t_j) + b_k cos(k t_j)
  //   f'_j = sum k (-a_k sin(k t_j) - b_k cos(k t_j))
  //   g'_j = sum k ( a_k cos(k t_j) - b_k sin(k t_j))
  CoefficientGradient grad = CoefficientGradient::zeros(c.order());
  for (int k = -c.order(); k <= c.order(); ++k) {
    double ga = 0.0, gb = 0.0;
    for (int j = 0; j < n; ++j) {
      const double ck = std::cos(k * s.t[j]);
      const double sk = std::sin(k * s.t[j]);
      ga += ax[j] * ck + ay[j] * sk + k * (-adx[j] * sk + ady[j] * ck);
      gb += -ax[j] * sk + ay[j] * ck + k * (-adx[j] * ck - ady[j] * sk);
    }
    const std::size_t i = FourierCoefficients::flat_index(k, c.order());
    grad.values[i] = ga;
    grad.values[i + 1] = gb;
  }
  return grad;
}

std::vector<Point> polygonize(const FourierCoefficients& c, int vertex_count) {
  if (vertex_count < 3) {
    raise(ErrorCode::invalid_argument, "polygonization needs at least 3 vertices");
  }
  c.require_finite();
  std::vector<Point> poly(static_cast<std::size_t>(vertex_count));
  const double step = 2.0 * std::numbers::pi / vertex_count;
  const auto flat = c.flat();
  for (int m = 0; m < vertex_count; ++m) {
    // same evaluation path as evaluate_contour, without re-validating per vertex
    double x = 0.0, y = 0.0;
    const double t = m * step;
    for (int k = -c.order(); k <= c.order(); ++k) {
      const std::size_t i = FourierCoefficients::flat_index(k, c.order());
      const double a = flat[i], b = flat[i + 1];
      const double ck = std::cos(k * t), sk = std::sin(k * t);
      x += a * ck - b * sk;
      y += a * sk + b * ck;
    }
    poly[static_cast<std::size_t>(m)] = {x, y};
  }
  return poly;
}

}  // namespace fourshape
