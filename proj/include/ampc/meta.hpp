#pragma once

#include <random>
#include <span>
#include <string>
#include <vector>

#include "ampc/dynamics.hpp"
#include "ampc/replay.hpp"

namespace ampc {

enum class Variant { grbal, rebal, mb, mb_de, mb_oracle };

std::string variant_name(Variant v);
Variant variant_from_name(const std::string& name);

// Shared initialization theta* plus the update-rule parameters psi*:
// per-parameter inner rates for the gradient-based learner, the recurrent
// cell weights for the recurrence-based one. Empty psi = no update rule
// (plain model-based baseline).
struct MetaParams {
  ParamVector theta;
  ParamVector psi;
  bool psi_scalar = false;
};

struct TrainConfig {
  int m = 16;  // adaptation history length
  int k = 16;  // evaluation horizon of a segment

  double inner_lr = 0.01;  // initial per-parameter rate (also the MB+DE rate)
  double outer_lr = 0.001; // beta
  double psi_lr = 0.001;   // eta

  int meta_batch = 16;     // N segments per meta gradient step
  int epochs = 20;         // gradient epochs per aggregation round
  int max_steps_per_epoch = 40;  // cap on meta steps per epoch (desk scale)

  int rounds = 6;               // data aggregation rounds
  int tasks_per_round = 2;      // environments sampled per round
  int steps_per_round = 400;    // total env timesteps collected per round
  int horizon = 200;            // T, episode length

  bool psi_scalar = false;
  bool adam = false;  // adaptive-moment outer optimizer; plain SGD by default
  double adam_beta1 = 0.9, adam_beta2 = 0.999, adam_eps = 1e-8;

  std::vector<int> hidden{32, 32, 32};  // dynamics net hidden widths
  int context_hidden = 16;              // recurrent context size (ReBAL)

  // meta gradient iterations between task-sampling events (Alg-1 style view
  // of the round structure above)
  int sampling_frequency(std::size_t legal_positions) const {
    return epochs * steps_per_epoch(legal_positions);
  }
  int steps_per_epoch(std::size_t legal_positions) const {
    const int by_data = static_cast<int>(legal_positions / std::max(1, meta_batch));
    return std::max(1, std::min(by_data, max_steps_per_epoch));
  }

  void validate() const;
};

// One negative-gradient step on the adaptation-slice MSE with per-parameter
// rates psi (equivalently, one ascent step on the Gaussian log likelihood).
ParamVector grbal_update(const MetaParams& meta, const DynamicsModel& model,
                         std::span<const Transition> adaptation_slice);

// Hidden state after unrolling the recurrent cell over the slice's
// normalized (s, a, s_next - s) tuples from the zero initial state.
Vector rebal_update(const RecurrentDynamicsModel& model, const RecurrentCell& cell,
                    std::span<const Transition> adaptation_slice);

// mean over segments of the evaluation-slice NLL under adapted parameters
// (GrBAL) or recurrent context (ReBAL)
double meta_loss(const MetaParams& meta, const DynamicsModel& model,
                 std::span<const Segment> segments, Variant variant);
double meta_loss(const MetaParams& meta, const RecurrentDynamicsModel& model,
                 std::span<const Segment> segments);

struct MetaStepReport {
  double meta_loss = 0.0;        // before the parameter update
  double mean_inner_loss = 0.0;  // adaptation-slice loss at theta (GrBAL only)
};

// optimizer state for the (optional) adaptive-moment outer updates
struct OptState {
  Vector m_theta, v_theta, m_psi, v_psi;
  long step = 0;
};

// One outer update on (theta, psi): samples N segments, averages the
// per-segment meta-gradients, applies SGD (or Adam when configured).
MetaStepReport meta_train_step(MetaParams& meta, const DynamicsModel& model,
                               const ReplayBuffer& buffer, const TrainConfig& cfg,
                               std::mt19937_64& sampler_rng, OptState* opt = nullptr);
MetaStepReport meta_train_step(MetaParams& meta, const RecurrentDynamicsModel& model,
                               const ReplayBuffer& buffer, const TrainConfig& cfg,
                               std::mt19937_64& sampler_rng, OptState* opt = nullptr);

// plain supervised step for the non-adaptive baseline: one gradient step on
// a uniform batch of meta_batch * K transitions (the same number of target
// transitions one meta step consumes)
MetaStepReport mb_train_step(MetaParams& meta, const DynamicsModel& model,
                             const ReplayBuffer& buffer, const TrainConfig& cfg,
                             std::mt19937_64& sampler_rng, OptState* opt = nullptr);

// materialize the model's net with the given flat parameters
Mlp net_with(const DynamicsModel& model, const ParamVector& theta);
Mlp head_with(const RecurrentDynamicsModel& model, const ParamVector& theta);
RecurrentCell cell_with(const RecurrentDynamicsModel& model, const ParamVector& psi);

}  // namespace ampc
