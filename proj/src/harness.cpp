#include "ampc/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>

#include <json.hpp>

namespace ampc {

std::string scenario_name(Scenario s) {
  return s == Scenario::fast_adaptation ? "fast_adaptation" : "generalization";
}

Scenario scenario_from_name(const std::string& name) {
  if (name == "fast_adaptation") return Scenario::fast_adaptation;
  if (name == "generalization") return Scenario::generalization;
  throw ConfigError("unknown scenario '" + name + "'");
}

double median(std::vector<double> v) {
  if (v.empty()) throw ArgumentError("median of empty set");
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double mean(const std::vector<double>& v) {
  if (v.empty()) throw ArgumentError("mean of empty set");
  double acc = 0.0;
  for (double x : v) acc += x;
  return acc / static_cast<double>(v.size());
}

double stddev(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double mu = mean(v);
  double acc = 0.0;
  for (double x : v) acc += (x - mu) * (x - mu);
  return std::sqrt(acc / static_cast<double>(v.size() - 1));
}

double EvalReport::mean_return(Variant method) const {
  std::vector<double> all;
  for (const auto& cell : cells) {
    if (cell.method != method) continue;
    all.insert(all.end(), cell.returns.begin(), cell.returns.end());
  }
  return mean(all);
}

double EvalReport::std_return(Variant method) const {
  return stddev(seed_mean_returns(method));
}

std::vector<double> EvalReport::seed_mean_returns(Variant method) const {
  std::vector<double> out;
  for (const auto& cell : cells) {
    if (cell.method == method) out.push_back(mean(cell.returns));
  }
  return out;
}

TrainedMethod train_method(Variant variant, const EnvDistribution& dist, const TrainConfig& cfg,
                           const ControllerConfig& collect_ctrl, std::uint64_t seed,
                           std::vector<TrainLogRow>* log) {
  Trainer trainer = make_trainer(variant, dist, cfg, collect_ctrl, seed);
  RngSet rngs(seed);
  TrainState state = trainer.train(rngs);
  if (log) *log = trainer.log;
  TrainedMethod out;
  out.variant = variant;
  out.params = std::move(state.params);
  out.model = trainer.model;
  out.rmodel = trainer.rmodel;
  out.env_steps = state.env_steps;
  return out;
}

TrainedMethod train_oracle(const EnvDistribution& dist, const Vector& test_config,
                           const TrainConfig& cfg, const ControllerConfig& collect_ctrl,
                           std::uint64_t seed, int budget_multiplier) {
  EnvDistribution fixed = dist;
  fixed.train.choices = {test_config};
  fixed.train.lo.clear();
  fixed.train.hi.clear();
  TrainConfig big = cfg;
  big.rounds = cfg.rounds * budget_multiplier;
  TrainedMethod out = train_method(Variant::mb, fixed, big, collect_ctrl, seed);
  out.variant = Variant::mb_oracle;
  return out;
}

EpisodeResult run_scenario_episode(const TrainedMethod& method, const EnvDistribution& dist,
                                   const EvalConfig& cfg, std::uint64_t episode_seed,
                                   long episode_id) {
  std::mt19937_64 cfg_rng(derive_seed(episode_seed, "scenario_config"));
  Vector start_config;
  SwitchSchedule switches;
  if (cfg.scenario == Scenario::fast_adaptation) {
    start_config = cfg.fa_start.empty() ? nominal_config(dist.family) : cfg.fa_start;
    Vector target = cfg.fa_target.empty() ? dist.sample_config(Split::test, cfg_rng) : cfg.fa_target;
    switches.push_back({cfg.horizon / 2, std::move(target)});
  } else {
    start_config = dist.sample_config(Split::test, cfg_rng);
  }
  auto env = dist.make_env(start_config, switches, derive_seed(episode_seed, "scenario_env"));

  std::mt19937_64 planner_rng(derive_seed(episode_seed, "scenario_planner"));
  EpisodeConfig ecfg;
  ecfg.ctrl = cfg.ctrl;
  ecfg.horizon = cfg.horizon;
  ecfg.m = cfg.m;
  ecfg.variant = method.variant;
  ecfg.de_lr = cfg.de_lr;
  const TaskSpec task = task_for(*env);
  if (method.variant == Variant::rebal) {
    return run_adaptive_episode(method.params, method.rmodel, *env, task, ecfg, episode_id,
                                planner_rng);
  }
  return run_adaptive_episode(method.params, method.model, *env, task, ecfg, episode_id,
                              planner_rng);
}

std::vector<Episode> collect_heldout_episodes(const EnvDistribution& dist, Split split,
                                              int episodes, int horizon, std::uint64_t seed,
                                              bool with_switch, int switch_at) {
  std::vector<Episode> out;
  std::mt19937_64 rng(derive_seed(seed, "heldout"));
  for (int e = 0; e < episodes; ++e) {
    Vector config = with_switch ? nominal_config(dist.family) : dist.sample_config(split, rng);
    SwitchSchedule switches;
    if (with_switch) switches.push_back({switch_at, dist.sample_config(split, rng)});
    auto env = dist.make_env(config, switches, rng());
    EpisodeResult ep = run_random_episode(*env, horizon, e, rng);
    Episode stored;
    stored.descriptor = env->family() + "/heldout";
    stored.transitions = std::move(ep.transitions);
    out.push_back(std::move(stored));
  }
  return out;
}

namespace {

template <typename ModelT>
ErrorHistogram histogram_impl(const MetaParams& meta, const ModelT& model,
                              const std::vector<Episode>& heldout, int m, int k) {
  if (m < 1 || k < 1) throw ArgumentError("error_histogram: M and K must be >= 1");
  ErrorHistogram out;
  for (const auto& ep : heldout) {
    std::vector<double> tp, tq;
    const auto& tr = ep.transitions;
    const std::size_t window = static_cast<std::size_t>(m) + k;
    if (tr.size() >= window) {
      for (std::size_t start = 0; start + window <= tr.size(); ++start) {
        Segment seg;
        seg.adapt = std::span<const Transition>(tr.data() + start, static_cast<std::size_t>(m));
        seg.eval = std::span<const Transition>(tr.data() + start + m, static_cast<std::size_t>(k));
        seg.episode_id = tr[start].episode_id;
        seg.t0 = tr[start + m].t;
        const PrePostError e = pre_post_error(meta, model, seg);
        out.pre.push_back(e.pre);
        out.post.push_back(e.post);
        tp.push_back(e.pre);
        tq.push_back(e.post);
      }
    }
    out.trace_pre.push_back(std::move(tp));
    out.trace_post.push_back(std::move(tq));
  }
  return out;
}

}  // namespace

ErrorHistogram error_histogram(const MetaParams& meta, const DynamicsModel& model,
                               const std::vector<Episode>& heldout, int m, int k) {
  return histogram_impl(meta, model, heldout, m, k);
}

ErrorHistogram error_histogram(const MetaParams& meta, const RecurrentDynamicsModel& model,
                               const std::vector<Episode>& heldout, int m, int k) {
  return histogram_impl(meta, model, heldout, m, k);
}

EvalReport eval_suite(const std::vector<Variant>& methods, const EnvDistribution& dist,
                      const TrainConfig& train_cfg, const ControllerConfig& collect_ctrl,
                      const EvalConfig& cfg, const std::vector<std::uint64_t>& seeds) {
  EvalReport report;
  report.env_family = family_name(dist.family);
  report.scenario = cfg.scenario;
  if (seeds.empty()) return report;  // empty seed list: empty report, no failure

  for (std::uint64_t seed : seeds) {
    // held-out data for segment errors, shared across methods of this seed
    const std::vector<Episode> heldout = collect_heldout_episodes(
        dist, Split::test, 2, cfg.horizon, derive_seed(seed, "eval_data"),
        cfg.scenario == Scenario::fast_adaptation, cfg.horizon / 2);

    // mb_de evaluates the mb model; train each underlying model once
    std::map<Variant, TrainedMethod> trained;
    for (Variant v : methods) {
      Variant base = v == Variant::mb_de ? Variant::mb : v;
      if (v == Variant::mb_oracle) {
        std::mt19937_64 cfg_rng(derive_seed(seed, "oracle_config"));
        const Vector test_config = dist.sample_config(Split::test, cfg_rng);
        trained.emplace(v, train_oracle(dist, test_config, train_cfg, collect_ctrl, seed));
        continue;
      }
      if (!trained.count(base)) {
        trained.emplace(base, train_method(base, dist, train_cfg, collect_ctrl, seed));
      }
      if (v == Variant::mb_de) {
        TrainedMethod de = trained.at(Variant::mb);
        de.variant = Variant::mb_de;
        de.params.psi.assign(1, cfg.de_lr);
        de.params.psi_scalar = true;
        trained.emplace(v, std::move(de));
      }
    }

    for (Variant v : methods) {
      const TrainedMethod& method = trained.at(v);
      EvalCell cell;
      cell.method = v;
      cell.seed = seed;
      cell.train_env_steps = method.env_steps;
      for (int e = 0; e < cfg.episodes; ++e) {
        const std::uint64_t ep_seed = derive_seed(seed, "eval_ep" + std::to_string(e));
        EpisodeResult ep = run_scenario_episode(method, dist, cfg, ep_seed, e);
        cell.returns.push_back(ep.ret);
        cell.eval_env_steps += static_cast<long>(ep.transitions.size());
      }
      MetaParams err_params = method.params;
      if (v == Variant::mb_de) {
        err_params.psi.assign(1, cfg.de_lr);
        err_params.psi_scalar = true;
      }
      const ErrorHistogram hist =
          v == Variant::rebal ? error_histogram(err_params, method.rmodel, heldout, cfg.m,
                                                std::max(1, cfg.ctrl.horizon))
                              : error_histogram(err_params, method.model, heldout, cfg.m,
                                                std::max(1, cfg.ctrl.horizon));
      cell.pre_errors = hist.pre;
      cell.post_errors = hist.post;
      report.cells.push_back(std::move(cell));
    }

    // budget parity: every non-oracle method consumed the same env steps
    long ref_train = -1, ref_eval = -1;
    for (const auto& cell : report.cells) {
      if (cell.seed != seed || cell.method == Variant::mb_oracle) continue;
      if (ref_train < 0) {
        ref_train = cell.train_env_steps;
        ref_eval = cell.eval_env_steps;
      } else if (cell.train_env_steps != ref_train || cell.eval_env_steps != ref_eval) {
        throw DataError("eval_suite: budget parity violated (seed " + std::to_string(seed) + ")");
      }
    }
  }
  return report;
}

std::vector<SweepRow> sensitivity_sweep(const std::vector<int>& k_values,
                                        const EnvDistribution& dist, TrainConfig cfg,
                                        const ControllerConfig& collect_ctrl,
                                        const EvalConfig& eval_cfg,
                                        const std::vector<std::uint64_t>& seeds) {
  std::vector<SweepRow> rows;
  for (int k : k_values) {
    TrainConfig tc = cfg;
    tc.m = k;
    tc.k = k;
    ControllerConfig cc = collect_ctrl;
    cc.horizon = std::min(cc.horizon, k);  // planning horizon stays within K
    EvalConfig ec = eval_cfg;
    ec.m = k;
    ec.ctrl.horizon = std::min(ec.ctrl.horizon, k);

    std::vector<double> returns;
    for (std::uint64_t seed : seeds) {
      const TrainedMethod method = train_method(Variant::grbal, dist, tc, cc, seed);
      for (int e = 0; e < ec.episodes; ++e) {
        const std::uint64_t ep_seed = derive_seed(seed, "sweep_ep" + std::to_string(e));
        returns.push_back(run_scenario_episode(method, dist, ec, ep_seed, e).ret);
      }
    }
    SweepRow row;
    row.k = k;
    row.mean_return = mean(returns);
    row.std_return = stddev(returns);
    rows.push_back(row);
  }
  return rows;
}

std::vector<DistributionRow> distribution_sweep(const std::vector<double>& force_ranges,
                                                double heldout_force, TrainConfig cfg,
                                                const ControllerConfig& collect_ctrl,
                                                const EvalConfig& eval_cfg,
                                                const std::vector<std::uint64_t>& seeds) {
  std::vector<DistributionRow> rows;
  for (double range : force_ranges) {
    const EnvDistribution dist = reacher_force_distribution(range, heldout_force);
    std::vector<double> seed_returns, seed_errors;
    long env_steps = -1;
    for (std::uint64_t seed : seeds) {
      const TrainedMethod method = train_method(Variant::grbal, dist, cfg, collect_ctrl, seed);
      if (env_steps < 0) env_steps = method.env_steps;
      if (env_steps != method.env_steps) {
        throw DataError("distribution_sweep: unequal env-step budget across seeds");
      }
      std::vector<double> returns;
      EvalConfig ec = eval_cfg;
      ec.scenario = Scenario::generalization;
      for (int e = 0; e < ec.episodes; ++e) {
        const std::uint64_t ep_seed = derive_seed(seed, "dist_ep" + std::to_string(e));
        returns.push_back(run_scenario_episode(method, dist, ec, ep_seed, e).ret);
      }
      seed_returns.push_back(mean(returns));

      const std::vector<Episode> heldout = collect_heldout_episodes(
          dist, Split::test, 1, ec.horizon, derive_seed(seed, "dist_data"));
      const ErrorHistogram hist =
          error_histogram(method.params, method.model, heldout, ec.m, ec.ctrl.horizon);
      seed_errors.push_back(median(hist.post));
    }
    DistributionRow row;
    row.train_range = range;
    row.test_return = median(seed_returns);
    row.test_error = median(seed_errors);
    row.env_steps = env_steps;
    rows.push_back(row);
  }
  for (const auto& row : rows) {
    if (row.env_steps != rows.front().env_steps) {
      throw DataError("distribution_sweep: unequal env-step budget across ranges");
    }
  }
  return rows;
}

void write_eval_report_csv(std::ostream& out, const EvalReport& report) {
  out << "method,seed,episode,return\n";
  char buf[128];
  for (const auto& cell : report.cells) {
    for (std::size_t e = 0; e < cell.returns.size(); ++e) {
      std::snprintf(buf, sizeof(buf), "%s,%llu,%zu,%.12g\n", variant_name(cell.method).c_str(),
                    static_cast<unsigned long long>(cell.seed), e, cell.returns[e]);
      out << buf;
    }
  }
}

void write_eval_summary_json(std::ostream& out, const EvalReport& report) {
  nlohmann::json j;
  j["env_family"] = report.env_family;
  j["scenario"] = scenario_name(report.scenario);
  if (!report.config_hash.empty()) j["config_hash"] = report.config_hash;
  nlohmann::json methods = nlohmann::json::object();
  double oracle_mean = 0.0;
  bool has_oracle = false;
  for (const auto& cell : report.cells) {
    if (cell.method == Variant::mb_oracle) {
      oracle_mean += mean(cell.returns);
      has_oracle = true;
    }
  }
  std::map<Variant, int> oracle_count;
  if (has_oracle) {
    int n = 0;
    for (const auto& cell : report.cells) {
      if (cell.method == Variant::mb_oracle) ++n;
    }
    oracle_mean /= n;
  }
  std::map<std::string, bool> seen;
  for (const auto& cell : report.cells) {
    const std::string name = variant_name(cell.method);
    if (seen[name]) continue;
    seen[name] = true;
    nlohmann::json m;
    m["mean_return"] = report.mean_return(cell.method);
    m["std_return"] = report.std_return(cell.method);
    m["seed_mean_returns"] = report.seed_mean_returns(cell.method);
    std::vector<double> pre, post;
    long train_steps = 0, eval_steps = 0;
    for (const auto& c : report.cells) {
      if (c.method != cell.method) continue;
      pre.insert(pre.end(), c.pre_errors.begin(), c.pre_errors.end());
      post.insert(post.end(), c.post_errors.begin(), c.post_errors.end());
      train_steps += c.train_env_steps;
      eval_steps += c.eval_env_steps;
    }
    if (!pre.empty()) {
      m["median_pre_error"] = median(pre);
      m["median_post_error"] = median(post);
    }
    m["train_env_steps"] = train_steps;
    m["eval_env_steps"] = eval_steps;
    if (has_oracle && oracle_mean != 0.0) {
      m["normalized_return"] = report.mean_return(cell.method) / oracle_mean;
    }
    methods[name] = m;
  }
  j["methods"] = methods;
  out << j.dump(2) << "\n";
}

void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows) {
  out << "k,mean_return,std_return\n";
  char buf[96];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof(buf), "%d,%.12g,%.12g\n", r.k, r.mean_return, r.std_return);
    out << buf;
  }
}

void write_distribution_csv(std::ostream& out, const std::vector<DistributionRow>& rows) {
  out << "train_range,test_error,test_return,env_steps\n";
  char buf[128];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof(buf), "%.12g,%.12g,%.12g,%ld\n", r.train_range, r.test_error,
                  r.test_return, r.env_steps);
    out << buf;
  }
}

}  // namespace ampc
