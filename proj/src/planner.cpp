#include "ampc/planner.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "ampc/errors.hpp"

namespace ampc {

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// return of one candidate sequence under the model; -inf when the rollout
// leaves the finite domain
double evaluate_candidate(const StepFn& step, const Vector& s0, const TaskSpec& task,
                          const std::vector<Vector>& actions) {
  double ret = 0.0;
  double gamma = 1.0;
  Vector s = s0;
  try {
    for (const Vector& a : actions) {
      Vector s_next = step(s, a);
      if (!all_finite(s_next)) return kNegInf;
      const double r = task.reward(s, a, s_next);
      if (!std::isfinite(r)) return kNegInf;
      ret += gamma * r;
      gamma *= task.discount;
      s = std::move(s_next);
    }
  } catch (const NumericError&) {
    return kNegInf;
  }
  return ret;
}

}  // namespace

double ControllerConfig::sigma_for(int dim) const {
  if (!mppi_sigma.empty()) return mppi_sigma[dim];
  return 0.3 * (high_for(dim) - low_for(dim));
}

void ControllerConfig::validate() const {
  if (n_a < 1) throw ConfigError("controller: n_A must be >= 1");
  if (horizon < 1) throw ConfigError("controller: H must be >= 1");
  if (planner == PlannerKind::mppi && mppi_lambda <= 0.0) {
    throw ConfigError("controller: MPPI temperature lambda must be > 0");
  }
}

Vector mppi_weights(const Vector& returns, double lambda) {
  if (lambda <= 0.0) throw ConfigError("mppi_weights: lambda must be > 0");
  if (returns.empty()) throw ArgumentError("mppi_weights: no returns");
  const double best = *std::max_element(returns.begin(), returns.end());
  if (best == kNegInf) throw ControlError("mppi: every candidate rollout failed");
  Vector w(returns.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < returns.size(); ++i) {
    w[i] = std::exp((returns[i] - best) / lambda);
    sum += w[i];
  }
  for (double& v : w) v /= sum;
  return w;
}

PlanResult plan_random_shooting(const StepFn& step, const Vector& s, const TaskSpec& task,
                                const ControllerConfig& cfg, int action_dim,
                                std::mt19937_64& rng) {
  cfg.validate();
  if (!all_finite(s)) throw ArgumentError("plan: non-finite state");
  PlanResult out;
  out.best_return = kNegInf;
  std::vector<Vector> candidate(cfg.horizon, Vector(action_dim));
  for (int i = 0; i < cfg.n_a; ++i) {
    for (int h = 0; h < cfg.horizon; ++h) {
      for (int d = 0; d < action_dim; ++d) {
        std::uniform_real_distribution<double> dist(cfg.low_for(d), cfg.high_for(d));
        candidate[h][d] = dist(rng);
      }
    }
    const double ret = evaluate_candidate(step, s, task, candidate);
    if (ret > out.best_return) {  // strict: ties keep the earlier candidate
      out.best_return = ret;
      out.best_index = i;
      out.action = candidate[0];
    }
  }
  if (out.best_index < 0) {
    throw ControlError("random shooting: every candidate rollout failed");
  }
  return out;
}

PlanResult plan_mppi(const StepFn& step, const Vector& s, const TaskSpec& task,
                     const ControllerConfig& cfg, const std::vector<Vector>& warm_start_mean,
                     int action_dim, std::mt19937_64& rng) {
  cfg.validate();
  if (!all_finite(s)) throw ArgumentError("plan: non-finite state");
  if (static_cast<int>(warm_start_mean.size()) != cfg.horizon) {
    throw DimensionError("plan_mppi: warm-start mean must have H entries");
  }

  std::vector<std::vector<Vector>> candidates(cfg.n_a,
                                              std::vector<Vector>(cfg.horizon, Vector(action_dim)));
  Vector returns(cfg.n_a);
  std::normal_distribution<double> noise(0.0, 1.0);
  for (int i = 0; i < cfg.n_a; ++i) {
    for (int h = 0; h < cfg.horizon; ++h) {
      for (int d = 0; d < action_dim; ++d) {
        const double v = warm_start_mean[h][d] + cfg.sigma_for(d) * noise(rng);
        candidates[i][h][d] = std::clamp(v, cfg.low_for(d), cfg.high_for(d));
      }
    }
    returns[i] = evaluate_candidate(step, s, task, candidates[i]);
  }

  const Vector w = mppi_weights(returns, cfg.mppi_lambda);

  PlanResult out;
  out.new_mean.assign(cfg.horizon, Vector(action_dim, 0.0));
  for (int i = 0; i < cfg.n_a; ++i) {
    for (int h = 0; h < cfg.horizon; ++h) {
      for (int d = 0; d < action_dim; ++d) out.new_mean[h][d] += w[i] * candidates[i][h][d];
    }
  }
  // the convex combination can exceed the bounds by rounding ulps
  for (int h = 0; h < cfg.horizon; ++h) {
    for (int d = 0; d < action_dim; ++d) {
      out.new_mean[h][d] = std::clamp(out.new_mean[h][d], cfg.low_for(d), cfg.high_for(d));
    }
  }
  out.action = out.new_mean[0];
  out.best_return = *std::max_element(returns.begin(), returns.end());
  return out;
}

PlanResult plan(const StepFn& step, const Vector& s, const TaskSpec& task,
                const ControllerConfig& cfg, const std::vector<Vector>& warm_start_mean,
                int action_dim, std::mt19937_64& rng) {
  if (cfg.planner == PlannerKind::random_shooting) {
    return plan_random_shooting(step, s, task, cfg, action_dim, rng);
  }
  return plan_mppi(step, s, task, cfg, warm_start_mean, action_dim, rng);
}

std::vector<Vector> shift_mean(const std::vector<Vector>& mean, int action_dim) {
  std::vector<Vector> next(mean.size(), Vector(action_dim, 0.0));
  for (std::size_t h = 1; h < mean.size(); ++h) next[h - 1] = mean[h];
  return next;
}

}  // namespace ampc
