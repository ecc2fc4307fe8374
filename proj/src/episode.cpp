#include "ampc/episode.hpp"

#include <ostream>

#include <json.hpp>

namespace ampc {

TaskSpec task_for(const Env& env) {
  TaskSpec task;
  task.reward = [&env](const Vector& s, const Vector& a, const Vector& s_next) {
    return env.reward(s, a, s_next);
  };
  return task;
}

namespace {

// shared episode loop; `adapt` returns the one-step model for this timestep
// given the transitions recorded so far
template <typename AdaptFn>
EpisodeResult episode_loop(Env& env, const TaskSpec& task, const EpisodeConfig& cfg,
                           long episode_id, std::mt19937_64& planner_rng, AdaptFn&& adapt) {
  EpisodeResult out;
  out.episode_id = episode_id;
  Vector s = env.reset();
  std::vector<Vector> mean(cfg.ctrl.horizon, Vector(env.action_dim(), 0.0));

  for (int t = 0; t < cfg.horizon; ++t) {
    const bool adapted = t > 0 && cfg.variant != Variant::mb && cfg.variant != Variant::mb_oracle;
    StepFn model_step = adapt(out.transitions, adapted);

    PlanResult planned;
    try {
      planned = plan(model_step, s, task, cfg.ctrl, mean, env.action_dim(), planner_rng);
    } catch (const ControlError&) {
      out.truncated = true;
      break;
    }
    if (cfg.ctrl.planner == PlannerKind::mppi) mean = shift_mean(planned.new_mean, env.action_dim());

    const StepResult res = env.step(planned.action);
    if (res.fault) {
      out.fault = true;
      out.truncated = true;
      break;
    }

    Transition tr;
    tr.s = s;
    tr.a = planned.action;
    tr.s_next = res.s_next;
    tr.episode_id = episode_id;
    tr.t = t;
    out.transitions.push_back(tr);

    StepLog log;
    log.t = t;
    log.s = s;
    log.a = planned.action;
    log.s_next = res.s_next;
    log.r = res.reward;
    log.adapted = adapted;
    log.planner_cost = -planned.best_return;
    out.log.push_back(std::move(log));

    out.ret += res.reward;
    s = res.s_next;
    if (res.done) break;
  }
  return out;
}

}  // namespace

EpisodeResult run_adaptive_episode(const MetaParams& meta, const DynamicsModel& model, Env& env,
                                   const TaskSpec& task, const EpisodeConfig& cfg, long episode_id,
                                   std::mt19937_64& planner_rng) {
  if (cfg.m < 1) throw ArgumentError("run_adaptive_episode: M must be >= 1");
  MetaParams effective = meta;
  if (cfg.variant == Variant::mb_de) {
    effective.psi.assign(1, cfg.de_lr);
    effective.psi_scalar = true;
  }

  // the adapted net lives across the closure; rebuilt each timestep
  auto net = std::make_shared<Mlp>(net_with(model, meta.theta));
  auto adapt = [&, net](const std::vector<Transition>& history, bool adapted) -> StepFn {
    if (!adapted || history.empty()) {
      unpack_params(meta.theta, *net);
    } else {
      const std::size_t m = std::min<std::size_t>(cfg.m, history.size());
      std::span<const Transition> slice(history.data() + history.size() - m, m);
      unpack_params(grbal_update(effective, model, slice), *net);
    }
    return [&model, net](const Vector& s, const Vector& a) { return predict(model, *net, s, a); };
  };
  return episode_loop(env, task, cfg, episode_id, planner_rng, adapt);
}

EpisodeResult run_adaptive_episode(const MetaParams& meta, const RecurrentDynamicsModel& model,
                                   Env& env, const TaskSpec& task, const EpisodeConfig& cfg,
                                   long episode_id, std::mt19937_64& planner_rng) {
  if (cfg.m < 1) throw ArgumentError("run_adaptive_episode: M must be >= 1");
  auto head = std::make_shared<Mlp>(head_with(model, meta.theta));
  auto cell = std::make_shared<RecurrentCell>(cell_with(model, meta.psi));
  auto context = std::make_shared<Vector>(model.zero_context());

  auto adapt = [&, head, cell, context](const std::vector<Transition>& history,
                                        bool adapted) -> StepFn {
    if (!adapted || history.empty()) {
      *context = model.zero_context();
    } else {
      const std::size_t m = std::min<std::size_t>(cfg.m, history.size());
      std::span<const Transition> slice(history.data() + history.size() - m, m);
      *context = rebal_update(model, *cell, slice);
    }
    return [&model, head, context](const Vector& s, const Vector& a) {
      return predict_ctx(model, *head, *context, s, a);
    };
  };
  return episode_loop(env, task, cfg, episode_id, planner_rng, adapt);
}

EpisodeResult run_random_episode(Env& env, int horizon, long episode_id, std::mt19937_64& rng) {
  EpisodeResult out;
  out.episode_id = episode_id;
  Vector s = env.reset();
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  for (int t = 0; t < horizon; ++t) {
    Vector a(env.action_dim());
    for (double& v : a) v = dist(rng);
    const StepResult res = env.step(a);
    if (res.fault) {
      out.fault = true;
      out.truncated = true;
      break;
    }
    Transition tr;
    tr.s = s;
    tr.a = a;
    tr.s_next = res.s_next;
    tr.episode_id = episode_id;
    tr.t = t;
    out.transitions.push_back(tr);
    out.ret += res.reward;
    s = res.s_next;
    if (res.done) break;
  }
  return out;
}

void save_episode_ndjson(std::ostream& out, const EpisodeResult& episode) {
  for (const auto& log : episode.log) {
    nlohmann::json j{{"t", log.t},
                     {"s", log.s},
                     {"a", log.a},
                     {"r", log.r},
                     {"s_next", log.s_next},
                     {"adapted", log.adapted},
                     {"planner_cost", log.planner_cost}};
    out << j.dump() << "\n";
  }
}

}  // namespace ampc
