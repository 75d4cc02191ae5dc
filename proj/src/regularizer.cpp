#include "fourshape/regularizer.hpp"

#include <cmath>

namespace fourshape {

void RegularizerConfig::validate() const {
  if (!(lambda > 1.0) || !std::isfinite(lambda)) {
    raise(ErrorCode::config, "regularizer lambda must be finite and > 1");
  }
  if (!(gamma > 0.0) || !(gamma < 1.0)) {
    raise(ErrorCode::config, "regularizer gamma must lie in (0, 1)");
  }
  if (!(lambda_reg >= 0.0) || !std::isfinite(lambda_reg) || !(lambda_area >= 0.0) ||
      !std::isfinite(lambda_area)) {
    raise(ErrorCode::config, "regularizer weights must be finite and non-negative");
  }
}

SpectrumSums fundamental_and_harmonic_sums(const FourierCoefficients& c) {
  c.require_finite();
  SpectrumSums sums;
  const int order = c.order();
  for (int k = -order; k <= order; ++k) {
    if (k == 0) continue;
    const double amp = std::hypot(c.a(k), c.b(k));
    if (k == 1 || k == -1) {
      sums.fundamental += amp;
    } else {
      sums.harmonic += amp;
    }
  }
  return sums;
}

namespace {

// d|c_k|/d(a_k, b_k); zero at the origin.
void add_unit_direction(CoefficientGradient& grad, const FourierCoefficients& c, int k, double scale) {
  const double amp = std::hypot(c.a(k), c.b(k));
  if (amp == 0.0) return;
  const std::size_t i = FourierCoefficients::flat_index(k, c.order());
  grad.values[i] += scale * c.a(k) / amp;
  grad.values[i + 1] += scale * c.b(k) / amp;
}

}  // namespace

RegLoss reg_loss(const FourierCoefficients& c, const RegularizerConfig& cfg) {
  cfg.validate();
  const SpectrumSums sums = fundamental_and_harmonic_sums(c);

  RegLoss out;
  out.grad = CoefficientGradient::zeros(c.order());
  const int order = c.order();

  const double dominance_violation = cfg.lambda * sums.harmonic - sums.fundamental;
  if (dominance_violation > 0.0) {
    out.value += dominance_violation;
    for (int k = -order; k <= order; ++k) {
      if (k == 0) continue;
      if (k == 1 || k == -1) {
        add_unit_direction(out.grad, c, k, -1.0);
      } else {
        add_unit_direction(out.grad, c, k, cfg.lambda);
      }
    }
  }

  for (int k = -order; k <= order; ++k) {
    if (std::abs(k) < 2) continue;
    const double amp = std::hypot(c.a(k), c.b(k));
    const double cap_violation = amp - cfg.gamma * sums.fundamental;
    if (cap_violation > 0.0) {
      out.value += cap_violation;
      add_unit_direction(out.grad, c, k, 1.0);
      add_unit_direction(out.grad, c, 1, -cfg.gamma);
      add_unit_direction(out.grad, c, -1, -cfg.gamma);
    }
  }
  return out;
}

AreaTerm area_term(const RasterGrid& mask) {
  AreaTerm out;
  out.value = mask.mean();
  const double adj = 1.0 / static_cast<double>(mask.values.size());
  out.upstream.assign(mask.values.size(), adj);
  return out;
}

}  // namespace fourshape
