#include "fourshape/optimizer.hpp"

#include <chrono>
#include <cmath>

#include "fourshape/io.hpp"
#include "fourshape/rng.hpp"

namespace fourshape {

void OptimizerConfig::validate() const {
  if (steps < 1) raise(ErrorCode::config, "optimizer needs at least one step");
  if (!(lr > 0.0) || !std::isfinite(lr)) raise(ErrorCode::config, "learning rate must be positive");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    raise(ErrorCode::config, "Adam betas must lie in [0, 1)");
  }
  if (!(eps_adam > 0.0)) raise(ErrorCode::config, "Adam epsilon must be positive");
  if (log_every < 1) raise(ErrorCode::config, "log_every must be at least 1");
  if (patience < 1) raise(ErrorCode::config, "patience must be at least 1");
}

FourierCoefficients init_coefficients(const OptimizerConfig& cfg, int order) {
  switch (cfg.init.kind) {
    case InitSpec::Kind::circle:
      return FourierCoefficients::circle(order, cfg.init.radius);
    case InitSpec::Kind::random: {
      FourierCoefficients c(order);
      Rng rng(cfg.seed);
      auto& flat = c.flat_mutable();
      for (double& v : flat) v = rng.uniform(-cfg.init.scale, cfg.init.scale);
      // guarantee a non-degenerate fundamental: |c_1| >= 0.3, phase kept
      const std::complex<double> c1 = c.coeff(1);
      const double amp = std::abs(c1);
      if (amp < 0.3) {
        c.set_coeff(1, amp == 0.0 ? std::complex<double>(0.3, 0.0) : c1 * (0.3 / amp));
      }
      return c;
    }
    case InitSpec::Kind::file: {
      FourierCoefficients c = load_coefficients_json(cfg.init.path);
      if (c.order() != order) {
        raise(ErrorCode::config, "coefficient file " + cfg.init.path.string() + " has K = " +
                                     std::to_string(c.order()) + ", the run is configured for K = " +
                                     std::to_string(order));
      }
      return c;
    }
  }
  raise(ErrorCode::config, "unhandled init kind");
}

void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state,
               const OptimizerConfig& cfg) {
  if (params.size() != grads.size()) {
    raise(ErrorCode::shape_mismatch, "parameter and gradient sizes differ");
  }
  if (state.m.empty()) {
    state.m.assign(params.size(), 0.0);
    state.v.assign(params.size(), 0.0);
    state.t = 0;
  }
  if (state.m.size() != params.size()) {
    raise(ErrorCode::shape_mismatch, "Adam state does not match the parameter vector");
  }
  state.t += 1;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * g;
    state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * g * g;
    const double m_hat = state.m[i] / bc1;
    const double v_hat = state.v[i] / bc2;
    params[i] -= cfg.lr * m_hat / (std::sqrt(v_hat) + cfg.eps_adam);
  }
}

OptimizationTrace run_optimization(ObjectiveEngine& engine, const OptimizerConfig& cfg, int order,
                                   StepSink* sink) {
  cfg.validate();
  FourierCoefficients coeffs = init_coefficients(cfg, order);

  AdamState state;
  OptimizationTrace trace;
  trace.records.reserve(static_cast<std::size_t>(cfg.steps));

  const std::size_t c0_a = FourierCoefficients::flat_index(0, order);
  double best_total = std::numeric_limits<double>::infinity();
  int success_streak = 0;
  const auto run_start = std::chrono::steady_clock::now();

  for (int step = 1; step <= cfg.steps; ++step) {
    LossBreakdown loss = engine.evaluate(coeffs);
    if (!std::isfinite(loss.total) || !loss.grad.all_finite()) {
      raise(ErrorCode::numeric,
            "non-finite loss or gradient at step " + std::to_string(step) + "; aborting");
    }
    if (cfg.freeze_c0) {
      loss.grad.values[c0_a] = 0.0;
      loss.grad.values[c0_a + 1] = 0.0;
    }

    adam_step(coeffs.flat_mutable(), loss.grad.values, state, cfg);
    if (!coeffs.all_finite()) {
      raise(ErrorCode::numeric, "parameters became non-finite at step " + std::to_string(step));
    }

    best_total = std::min(best_total, loss.total);
    const bool ok = engine.success(loss, cfg.success_threshold);
    success_streak = ok ? success_streak + 1 : 0;
    if (ok && trace.first_success_step < 0) trace.first_success_step = step;

    TraceRecord record;
    record.step = step;
    record.total = loss.total;
    record.data = loss.data;
    record.reg = loss.reg;
    record.area = loss.area;
    record.best_total = best_total;
    record.success = ok;
    record.clamped = loss.clamped;
    record.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - run_start).count();
    trace.records.push_back(record);
    trace.steps_run = step;

    const bool stopping = success_streak >= cfg.patience || step == cfg.steps;
    if (sink && (step % cfg.log_every == 0 || stopping)) {
      sink->on_step(record, coeffs);
    }
    if (success_streak >= cfg.patience) {
      trace.termination = "success";
      trace.succeeded = true;
      break;
    }
  }

  if (trace.termination.empty()) {
    trace.termination = "max_steps";
    trace.succeeded = !trace.records.empty() && trace.records.back().success;
  }
  trace.final_coefficients = std::move(coeffs);
  return trace;
}

}  // namespace fourshape
