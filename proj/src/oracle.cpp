#include "fourshape/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace fourshape::oracle {

namespace {

bool segment_hits_kink(double lo, double hi, double band) {
  for (const double kink : {-1.0, 0.0, 1.0}) {
    if (lo <= kink && kink <= hi) return true;
    const double margin = std::min(band, 4.0 * (hi - lo));
    if (std::min(std::abs(lo - kink), std::abs(hi - kink)) <= margin) return true;
  }
  return false;
}

}  // namespace

FdResult fd_gradient(const ProbeFn& probe, std::span<const double> params,
                     const FiniteDiffConfig& cfg) {
  if (!(cfg.h > 0.0)) {
    raise(ErrorCode::config, "finite-difference step must be positive");
  }
  const std::size_t n = params.size();
  FdResult out;
  out.gradient.assign(n, 0.0);
  out.excluded.assign(n, false);

  std::vector<double> work(params.begin(), params.end());
  for (std::size_t i = 0; i < n; ++i) {
    const double saved = work[i];
    work[i] = saved + cfg.h;
    const FdProbe hi = probe(work);
    work[i] = saved - cfg.h;
    const FdProbe lo = probe(work);
    work[i] = saved;

    if (!std::isfinite(hi.loss) || !std::isfinite(lo.loss)) {
      raise(ErrorCode::numeric, "non-finite loss while probing parameter " + std::to_string(i));
    }
    out.gradient[i] = (hi.loss - lo.loss) / (2.0 * cfg.h);

    if (hi.kink_values.size() != lo.kink_values.size()) {
      raise(ErrorCode::shape_mismatch, "kink probes returned mismatched value counts");
    }
    for (std::size_t q = 0; q < hi.kink_values.size(); ++q) {
      const double a = lo.kink_values[q], b = hi.kink_values[q];
      if (segment_hits_kink(std::min(a, b), std::max(a, b), cfg.kink_exclusion_band)) {
        out.excluded[i] = true;
        break;
      }
    }
  }
  return out;
}

FdResult fd_gradient(const LossFn& loss, std::span<const double> params,
                     const FiniteDiffConfig& cfg) {
  return fd_gradient([&loss](std::span<const double> p) { return FdProbe{loss(p), {}}; }, params,
                     cfg);
}

PointClass point_in_polygon(Point p, std::span<const Point> polygon) {
  const std::size_t n = polygon.size();
  if (n < 3) {
    raise(ErrorCode::invalid_argument, "polygon needs at least 3 vertices");
  }
  if (distance_to_polygon(p, polygon) <= 1e-9) return PointClass::boundary;

  // even-odd rule: count edges crossed by the ray going in +x
  bool inside = false;
  for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
    const Point& a = polygon[i];
    const Point& b = polygon[j];
    if ((a.y > p.y) != (b.y > p.y)) {
      const double x_cross = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
      if (p.x < x_cross) inside = !inside;
    }
  }
  return inside ? PointClass::inside : PointClass::outside;
}

double distance_to_polygon(Point p, std::span<const Point> polygon) {
  const std::size_t n = polygon.size();
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
    const Point& a = polygon[j];
    const Point& b = polygon[i];
    const double ex = b.x - a.x, ey = b.y - a.y;
    const double len2 = ex * ex + ey * ey;
    double s = 0.0;
    if (len2 > 0.0) {
      s = std::clamp(((p.x - a.x) * ex + (p.y - a.y) * ey) / len2, 0.0, 1.0);
    }
    const double dx = p.x - (a.x + s * ex);
    const double dy = p.y - (a.y + s * ey);
    best = std::min(best, std::hypot(dx, dy));
  }
  return best;
}

double quadrature_winding(const FourierCoefficients& c, Point p, int sample_count,
                          double epsilon) {
  if (sample_count < 4096) {
    raise(ErrorCode::config, "quadrature reference expects at least 4096 samples");
  }
  const double step = 2.0 * std::numbers::pi / sample_count;
  double acc = 0.0;
  for (int j = 0; j < sample_count; ++j) {
    const double t = j * step;
    const Point f = evaluate_contour(c, t);
    const Point d = evaluate_derivative(c, t);
    const double rx = f.x - p.x;
    const double ry = f.y - p.y;
    acc += (rx * d.y - ry * d.x) / (rx * rx + ry * ry + epsilon);
  }
  return acc / sample_count;
}

GradCheckReport compare_gradients(std::span<const double> analytic, const FdResult& fd,
                                  double rel_tol, double abs_tol) {
  if (analytic.size() != fd.gradient.size()) {
    raise(ErrorCode::shape_mismatch, "gradient sizes differ in comparison");
  }
  GradCheckReport report;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    if (fd.excluded[i]) {
      ++report.excluded;
      continue;
    }
    ++report.checked;
    const double diff = std::abs(analytic[i] - fd.gradient[i]);
    const double scale = std::max(std::abs(analytic[i]), std::abs(fd.gradient[i]));
    report.max_abs_error = std::max(report.max_abs_error, diff);
    if (scale > 0.0) {
      report.max_rel_error = std::max(report.max_rel_error, diff / scale);
    }
    if (diff > abs_tol && diff > rel_tol * scale) {
      ++report.failed;
      report.failed_indices.push_back(i);
    }
  }
  return report;
}

}  // namespace fourshape::oracle
