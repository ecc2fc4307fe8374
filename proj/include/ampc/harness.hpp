#pragma once

#include <iosfwd>
#include <map>
#include <optional>
#include <string>

#include "ampc/train.hpp"

namespace ampc {

// scenarios from the test-time protocols: a mid-rollout failure switch, or
// evaluation on a configuration held out of the training distribution
enum class Scenario { fast_adaptation, generalization };

std::string scenario_name(Scenario s);
Scenario scenario_from_name(const std::string& name);

struct EvalConfig {
  Scenario scenario = Scenario::fast_adaptation;
  int episodes = 4;       // per seed
  int horizon = 200;      // T
  int m = 16;
  ControllerConfig ctrl;  // shared planner across methods
  double de_lr = 1e-3;    // dynamic-evaluation rate (mb_de)

  // fast adaptation: fixed start/switch configurations; empty = start from
  // the family nominal and switch to a test-split sample
  Vector fa_start, fa_target;
};

// per-(method, seed) evaluation artifacts
struct EvalCell {
  Variant method;
  std::uint64_t seed = 0;
  std::vector<double> returns;       // per episode
  std::vector<double> pre_errors;    // per held-out segment
  std::vector<double> post_errors;   // aligned one-to-one with pre_errors
  long train_env_steps = 0;
  long eval_env_steps = 0;
};

struct EvalReport {
  std::string env_family;
  Scenario scenario = Scenario::fast_adaptation;
  std::string config_hash;
  std::vector<EvalCell> cells;

  double mean_return(Variant method) const;
  double std_return(Variant method) const;
  std::vector<double> seed_mean_returns(Variant method) const;
};

// trained artifacts of one method on one seed
struct TrainedMethod {
  Variant variant;
  MetaParams params;
  DynamicsModel model;
  RecurrentDynamicsModel rmodel;
  long env_steps = 0;  // training budget actually consumed
};

// Train one method from scratch under the given seed (identical aggregation
// schedule across methods; budget parity is checked by the caller).
TrainedMethod train_method(Variant variant, const EnvDistribution& dist, const TrainConfig& cfg,
                           const ControllerConfig& collect_ctrl, std::uint64_t seed,
                           std::vector<TrainLogRow>* log = nullptr);

// The non-adaptive oracle: trained with extra budget on the single test
// configuration it will be evaluated on (normalization anchor for returns).
TrainedMethod train_oracle(const EnvDistribution& dist, const Vector& test_config,
                           const TrainConfig& cfg, const ControllerConfig& collect_ctrl,
                           std::uint64_t seed, int budget_multiplier = 4);

// episodes for a scenario; fast adaptation switches the configuration at
// T/2, generalization runs the held-out test configuration throughout
EpisodeResult run_scenario_episode(const TrainedMethod& method, const EnvDistribution& dist,
                                   const EvalConfig& cfg, std::uint64_t episode_seed,
                                   long episode_id);

// Full evaluation grid over methods and seeds: trains each method per seed
// on the identical aggregation schedule (mb_de reuses the mb model), runs
// the scenario episodes, computes held-out segment errors, and asserts
// budget parity across the non-oracle methods.
EvalReport eval_suite(const std::vector<Variant>& methods, const EnvDistribution& dist,
                      const TrainConfig& train_cfg, const ControllerConfig& collect_ctrl,
                      const EvalConfig& cfg, const std::vector<std::uint64_t>& seeds);

// Paired pre/post K-step errors over held-out episodes: for every legal t,
// the K-step open-loop error under theta* and under parameters adapted from
// the preceding M steps (plus per-timestep traces).
struct ErrorHistogram {
  std::vector<double> pre, post;              // paired by segment
  std::vector<std::vector<double>> trace_pre;  // per episode, per timestep
  std::vector<std::vector<double>> trace_post;
};

ErrorHistogram error_histogram(const MetaParams& meta, const DynamicsModel& model,
                               const std::vector<Episode>& heldout, int m, int k);
ErrorHistogram error_histogram(const MetaParams& meta, const RecurrentDynamicsModel& model,
                               const std::vector<Episode>& heldout, int m, int k);

// K = M sensitivity sweep (trains per value, evaluates, one row per value)
struct SweepRow {
  int k = 0;
  double mean_return = 0.0;
  double std_return = 0.0;
};
std::vector<SweepRow> sensitivity_sweep(const std::vector<int>& k_values,
                                        const EnvDistribution& dist, TrainConfig cfg,
                                        const ControllerConfig& collect_ctrl,
                                        const EvalConfig& eval_cfg,
                                        const std::vector<std::uint64_t>& seeds);

// meta-training-distribution sweep on the force-perturbed arm: equal
// datapoint budget per range, evaluated on a held-out constant force
struct DistributionRow {
  double train_range = 0.0;
  double test_error = 0.0;   // mean post-adaptation K-step error on test env
  double test_return = 0.0;  // median-seed mean return
  long env_steps = 0;
};
std::vector<DistributionRow> distribution_sweep(const std::vector<double>& force_ranges,
                                                double heldout_force, TrainConfig cfg,
                                                const ControllerConfig& collect_ctrl,
                                                const EvalConfig& eval_cfg,
                                                const std::vector<std::uint64_t>& seeds);

// collect episodes under a random policy on freshly sampled test envs
std::vector<Episode> collect_heldout_episodes(const EnvDistribution& dist, Split split,
                                              int episodes, int horizon, std::uint64_t seed,
                                              bool with_switch = false, int switch_at = 0);

void write_eval_report_csv(std::ostream& out, const EvalReport& report);
void write_eval_summary_json(std::ostream& out, const EvalReport& report);
void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows);
void write_distribution_csv(std::ostream& out, const std::vector<DistributionRow>& rows);

double median(std::vector<double> v);
double mean(const std::vector<double>& v);
double stddev(const std::vector<double>& v);

}  // namespace ampc
