#pragma once

#include <iosfwd>
#include <optional>

#include "ampc/envs.hpp"
#include "ampc/meta.hpp"
#include "ampc/planner.hpp"

namespace ampc {

struct StepLog {
  int t = 0;
  Vector s, a, s_next;
  double r = 0.0;
  bool adapted = false;
  double planner_cost = 0.0;  // negative predicted return of the best candidate
};

struct EpisodeResult {
  std::vector<Transition> transitions;
  std::vector<StepLog> log;
  double ret = 0.0;
  bool truncated = false;  // planner failure cut the episode short
  bool fault = false;      // environment went non-finite
  long episode_id = 0;
};

struct EpisodeConfig {
  ControllerConfig ctrl;
  int horizon = 200;  // T
  int m = 16;         // adaptation history length
  Variant variant = Variant::grbal;
  double de_lr = 0.0;  // dynamic-evaluation rate (mb_de)
};

// Online model adaptation: at every timestep adapt from the most recent
// min(M, t) transitions (the first step plans with the prior), plan, execute,
// record; parameters reset to theta* before every adaptation.
EpisodeResult run_adaptive_episode(const MetaParams& meta, const DynamicsModel& model, Env& env,
                                   const TaskSpec& task, const EpisodeConfig& cfg, long episode_id,
                                   std::mt19937_64& planner_rng);

EpisodeResult run_adaptive_episode(const MetaParams& meta, const RecurrentDynamicsModel& model,
                                   Env& env, const TaskSpec& task, const EpisodeConfig& cfg,
                                   long episode_id, std::mt19937_64& planner_rng);

// uniform-random policy episode (first aggregation round, before any model)
EpisodeResult run_random_episode(Env& env, int horizon, long episode_id, std::mt19937_64& rng);

// task spec wired to the environment's own reward function
TaskSpec task_for(const Env& env);

// newline-delimited JSON episode log (t, s, a, r, s_next, adapted, planner_cost)
void save_episode_ndjson(std::ostream& out, const EpisodeResult& episode);

}  // namespace ampc
