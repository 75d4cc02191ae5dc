#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "fourshape/contour.hpp"
#include "fourshape/objective.hpp"

namespace fourshape {

struct InitSpec {
  enum class Kind { circle, random, file };
  Kind kind = Kind::circle;
  double radius = 0.5;   // circle
  double scale = 0.05;   // random: a_k, b_k ~ U(-scale, scale)
  std::filesystem::path path;  // file
};

struct OptimizerConfig {
  int steps = 1200;
  double lr = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps_adam = 1e-8;
  std::uint64_t seed = 0;
  InitSpec init;
  bool freeze_c0 = false;
  int log_every = 10;
  int patience = 50;  // consecutive successful steps before early stop
  double success_threshold = 0.5;

  void validate() const;
};

// circle(r): c_1 = r; random(s): seeded uniform draws with c_1 rescaled to
// at least 0.3 amplitude (phase preserved); file: loaded and validated.
FourierCoefficients init_coefficients(const OptimizerConfig& cfg, int order);

struct AdamState {
  std::vector<double> m, v;
  std::int64_t t = 0;
};

// One standard Adam update with bias correction; t is incremented.
void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state,
               const OptimizerConfig& cfg);

struct TraceRecord {
  int step = 0;
  double total = 0.0;
  double data = 0.0;
  double reg = 0.0;
  double area = 0.0;
  double best_total = 0.0;  // running minimum of total
  bool success = false;
  bool clamped = false;
  double wall_seconds = 0.0;  // not serialized; runs must replay bit-identically
};

struct OptimizationTrace {
  std::vector<TraceRecord> records;  // one per executed step
  FourierCoefficients final_coefficients{0};
  std::string termination;  // "max_steps" | "success"
  bool succeeded = false;
  int first_success_step = -1;
  int steps_run = 0;
};

// Observer for checkpointing; called on every log_every-th step and on the
// final step.
class StepSink {
public:
  virtual ~StepSink() = default;
  virtual void on_step(const TraceRecord& record, const FourierCoefficients& coeffs) = 0;
};

// loss -> gradient -> Adam, with freeze_c0 honoured by zeroing the c_0
// gradient, until the step budget runs out or the success rule has held for
// `patience` consecutive steps.
OptimizationTrace run_optimization(ObjectiveEngine& engine, const OptimizerConfig& cfg, int order,
                                   StepSink* sink = nullptr);

}  // namespace fourshape
