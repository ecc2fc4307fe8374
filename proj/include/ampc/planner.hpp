#pragma once

#include <functional>
#include <random>
#include <vector>

#include "ampc/linalg.hpp"

namespace ampc {

// one-step model the planner rolls out (learned or analytic)
using StepFn = std::function<Vector(const Vector& s, const Vector& a)>;

struct TaskSpec {
  std::function<double(const Vector& s, const Vector& a, const Vector& s_next)> reward;
  int horizon = 200;      // episode length T
  double discount = 1.0;  // within the planning window
};

enum class PlannerKind { random_shooting, mppi };

struct ControllerConfig {
  PlannerKind planner = PlannerKind::mppi;
  int n_a = 64;     // candidate action sequences per step
  int horizon = 8;  // planning horizon H (kept <= K by the run config)
  double mppi_lambda = 1.0;
  Vector mppi_sigma;  // per action dim; empty = 0.3 * range
  Vector action_low, action_high;  // empty = [-1, 1] per dim

  double sigma_for(int dim) const;
  double low_for(int dim) const { return action_low.empty() ? -1.0 : action_low[dim]; }
  double high_for(int dim) const { return action_high.empty() ? 1.0 : action_high[dim]; }
  void validate() const;
};

struct PlanResult {
  Vector action;
  double best_return = 0.0;
  int best_index = -1;                // random shooting only
  std::vector<Vector> new_mean;       // MPPI only: weighted-average sequence
};

// MPPI weights: w_i = exp((R_i - max R) / lambda), normalized to sum 1.
// -inf returns (failed candidate rollouts) get weight zero.
Vector mppi_weights(const Vector& returns, double lambda);

// Uniform candidate sequences within bounds; executes the first action of
// the best. Ties break toward the lowest candidate index.
PlanResult plan_random_shooting(const StepFn& step, const Vector& s, const TaskSpec& task,
                                const ControllerConfig& cfg, int action_dim,
                                std::mt19937_64& rng);

// Gaussian perturbations around a warm-start mean sequence (shifted by the
// caller between steps, last entry zero), exponentially reward-weighted
// averaging with max subtraction.
PlanResult plan_mppi(const StepFn& step, const Vector& s, const TaskSpec& task,
                     const ControllerConfig& cfg, const std::vector<Vector>& warm_start_mean,
                     int action_dim, std::mt19937_64& rng);

// dispatch on cfg.planner; manages nothing across calls
PlanResult plan(const StepFn& step, const Vector& s, const TaskSpec& task,
                const ControllerConfig& cfg, const std::vector<Vector>& warm_start_mean,
                int action_dim, std::mt19937_64& rng);

// next warm start: drop the executed first entry, append zeros
std::vector<Vector> shift_mean(const std::vector<Vector>& mean, int action_dim);

}  // namespace ampc
