#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "ampc/gru.hpp"
#include "ampc/mlp.hpp"

namespace ampc {

// one environment transition
struct Transition {
  Vector s;
  Vector a;
  Vector s_next;
  long episode_id = 0;
  int t = 0;
};

// Per-dimension whitening statistics for states, actions and state deltas,
// fit on the training dataset. Stds are floored at 1e-6.
struct Normalizer {
  Vector s_mean, s_std;
  Vector a_mean, a_std;
  Vector d_mean, d_std;

  static constexpr double kStdFloor = 1e-6;

  static Normalizer identity(int s_dim, int a_dim);
  static Normalizer fit(std::span<const Transition> data);

  Vector norm_s(const Vector& s) const;
  Vector norm_a(const Vector& a) const;
  Vector norm_delta(const Vector& d) const;
  Vector denorm_delta(const Vector& nd) const;

  int s_dim() const { return static_cast<int>(s_mean.size()); }
  int a_dim() const { return static_cast<int>(a_mean.size()); }

  nlohmann::json to_json() const;
  static Normalizer from_json(const nlohmann::json& j);
};

// Predictive model p(s'|s,a): Gaussian with fixed variance whose mean is
// s plus the denormalized network output (state-delta parameterization).
// With unit variance in normalized space the negative log likelihood is the
// normalized-space MSE up to an additive constant, so training minimizes MSE.
struct DynamicsModel {
  Mlp net;  // input |S|+|A|, output |S|
  Normalizer norm;
  double variance = 1.0;

  int s_dim() const { return norm.s_dim(); }
  int a_dim() const { return norm.a_dim(); }
};

// fast path: `net` carries the (possibly adapted) weights
Vector predict(const DynamicsModel& model, const Mlp& net, const Vector& s, const Vector& a);
double nll_loss(const DynamicsModel& model, const Mlp& net, std::span<const Transition> batch);
std::vector<Vector> rollout(const DynamicsModel& model, const Mlp& net, const Vector& s0,
                            const std::vector<Vector>& actions);

// ParamVector overloads matching the flat-parameter calling convention
Vector predict(const DynamicsModel& model, const ParamVector& theta, const Vector& s,
               const Vector& a);
double nll_loss(const DynamicsModel& model, const ParamVector& theta,
                std::span<const Transition> batch);
std::vector<Vector> rollout(const DynamicsModel& model, const ParamVector& theta, const Vector& s0,
                            const std::vector<Vector>& actions);

// (x, target) pairs in normalized space for supervised training
Batch to_training_batch(const Normalizer& norm, std::span<const Transition> data);

// Recurrence-conditioned model: a GRU consumes the normalized
// (s, a, s_next - s) tuples of the recent history; its final hidden state is
// the context, concatenated to the prediction head's input.
struct RecurrentDynamicsModel {
  RecurrentCell cell;  // input |S|+|A|+|S| normalized tuple
  Mlp head;            // input |S|+|A|+hidden, output |S|
  Normalizer norm;
  double variance = 1.0;

  int s_dim() const { return norm.s_dim(); }
  int a_dim() const { return norm.a_dim(); }
  int context_dim() const { return cell.hidden_dim(); }

  Vector zero_context() const { return Vector(cell.hidden_dim(), 0.0); }
};

// context inputs for the cell, one per transition
std::vector<Vector> context_inputs(const Normalizer& norm, std::span<const Transition> slice);

Vector predict_ctx(const RecurrentDynamicsModel& model, const Mlp& head, const Vector& context,
                   const Vector& s, const Vector& a);
double nll_loss_ctx(const RecurrentDynamicsModel& model, const Mlp& head, const Vector& context,
                    std::span<const Transition> batch);
std::vector<Vector> rollout_ctx(const RecurrentDynamicsModel& model, const Mlp& head,
                                const Vector& context, const Vector& s0,
                                const std::vector<Vector>& actions);

// newline-delimited JSON dataset of transitions
void save_transitions_ndjson(std::ostream& out, std::span<const Transition> data);
std::vector<Transition> load_transitions_ndjson(std::istream& in);

}  // namespace ampc
