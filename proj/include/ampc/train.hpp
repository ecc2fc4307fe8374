#pragma once

#include <functional>
#include <optional>

#include "ampc/episode.hpp"
#include "ampc/metrics.hpp"
#include "ampc/rng.hpp"

namespace ampc {

// one row of the training log CSV
struct TrainLogRow {
  long iteration = 0;  // cumulative meta gradient steps
  double meta_loss = 0.0;
  double pre_update_eval_error = 0.0;
  double post_update_eval_error = 0.0;
  long env_steps_collected = 0;
};

// Everything the training loop owns between rounds; checkpointing this plus
// the RNG set is enough to resume a run exactly.
struct TrainState {
  MetaParams params;
  ReplayBuffer buffer;
  OptState opt;
  int next_round = 0;
  long iteration = 0;
  long env_steps = 0;
  long episode_counter = 0;
};

struct Trainer {
  Variant variant = Variant::grbal;
  EnvDistribution dist;
  TrainConfig cfg;
  ControllerConfig collect_ctrl;  // planner used for on-policy collection

  // models carry architecture + normalizer; parameters live in TrainState
  DynamicsModel model;                  // grbal / mb / mb_oracle
  RecurrentDynamicsModel rmodel;        // rebal

  std::vector<TrainLogRow> log;

  // called after every aggregation round (checkpointing hook)
  std::function<void(const TrainState&, const Trainer&)> on_round_end;

  // fresh initialization of parameters and state
  TrainState init_state(RngSet& rngs) const;

  // run aggregation rounds [state.next_round, cfg.rounds)
  void run(TrainState& state, RngSet& rngs);

  // convenience: init + run
  TrainState train(RngSet& rngs);
};

// Plain supervised baseline trained on the identical aggregation schedule
// (Trainer with variant mb). The oracle variant trains on a single fixed
// test configuration with a larger budget; see harness.
Trainer make_trainer(Variant variant, const EnvDistribution& dist, const TrainConfig& cfg,
                     const ControllerConfig& collect_ctrl, std::uint64_t arch_seed);

void write_train_log_csv(std::ostream& out, const std::vector<TrainLogRow>& log);

}  // namespace ampc
