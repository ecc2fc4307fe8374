#include "ampc/train.hpp"

#include <cstdio>
#include <ostream>

namespace ampc {

Trainer make_trainer(Variant variant, const EnvDistribution& dist, const TrainConfig& cfg,
                     const ControllerConfig& collect_ctrl, std::uint64_t) {
  cfg.validate();
  Trainer tr;
  tr.variant = variant;
  tr.dist = dist;
  tr.cfg = cfg;
  tr.collect_ctrl = collect_ctrl;

  const int s_dim = dist.state_dim();
  const int a_dim = dist.action_dim();
  tr.model.net = Mlp::make(s_dim + a_dim, cfg.hidden, s_dim);
  tr.model.norm = Normalizer::identity(s_dim, a_dim);
  tr.rmodel.cell = RecurrentCell::make(2 * s_dim + a_dim, cfg.context_hidden, s_dim);
  tr.rmodel.head = Mlp::make(s_dim + a_dim + cfg.context_hidden, cfg.hidden, s_dim);
  tr.rmodel.norm = tr.model.norm;
  return tr;
}

TrainState Trainer::init_state(RngSet& rngs) const {
  TrainState st;
  std::mt19937_64& init_rng = rngs.stream("init");
  if (variant == Variant::rebal) {
    RecurrentCell cell = rmodel.cell;
    Mlp head = rmodel.head;
    cell.init(init_rng);
    head.init(init_rng);
    st.params.theta = pack_params(head);
    st.params.psi = pack_params(cell);
  } else {
    Mlp net = model.net;
    net.init(init_rng);
    st.params.theta = pack_params(net);
    if (variant == Variant::grbal) {
      st.params.psi.assign(st.params.theta.size(), cfg.inner_lr);
      st.params.psi_scalar = cfg.psi_scalar;
      if (cfg.psi_scalar) st.params.psi.assign(1, cfg.inner_lr);
    }
  }
  return st;
}

void Trainer::run(TrainState& state, RngSet& rngs) {
  std::mt19937_64& env_rng = rngs.stream("env");
  std::mt19937_64& planner_rng = rngs.stream("planner");
  std::mt19937_64& sampler_rng = rngs.stream("sampler");
  std::mt19937_64& metrics_rng = rngs.stream("metrics");

  for (int round = state.next_round; round < cfg.rounds; ++round) {
    // --- data aggregation: sample environments, collect on-policy episodes
    // (round 0 uses a uniform-random policy; no model exists yet) ---
    std::vector<Vector> configs(cfg.tasks_per_round);
    for (auto& c : configs) c = dist.sample_config(Split::train, env_rng);
    const int episodes = std::max(1, (cfg.steps_per_round + cfg.horizon - 1) / cfg.horizon);
    for (int e = 0; e < episodes; ++e) {
      auto env = dist.make_env(configs[e % configs.size()], {}, env_rng());
      const long id = state.episode_counter++;
      EpisodeResult ep;
      if (round == 0) {
        ep = run_random_episode(*env, cfg.horizon, id, planner_rng);
      } else {
        EpisodeConfig ecfg;
        ecfg.ctrl = collect_ctrl;
        ecfg.horizon = cfg.horizon;
        ecfg.m = cfg.m;
        ecfg.variant = variant;
        const TaskSpec task = task_for(*env);
        if (variant == Variant::rebal) {
          ep = run_adaptive_episode(state.params, rmodel, *env, task, ecfg, id, planner_rng);
        } else {
          ep = run_adaptive_episode(state.params, model, *env, task, ecfg, id, planner_rng);
        }
      }
      state.env_steps += static_cast<long>(ep.transitions.size());
      Episode stored;
      stored.descriptor = env->family() + "/round" + std::to_string(round);
      stored.transitions = std::move(ep.transitions);
      if (!stored.transitions.empty()) state.buffer.add_episode(std::move(stored));
    }

    // --- refit the normalizer, then keep it frozen for this round's epochs ---
    const std::vector<Transition> all = state.buffer.all_transitions();
    const Normalizer norm = Normalizer::fit(all);
    model.norm = norm;
    rmodel.norm = norm;

    // --- gradient epochs ---
    const std::size_t positions = state.buffer.segment_positions(cfg.m, cfg.k);
    const int steps = cfg.steps_per_epoch(positions);
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
      double loss_acc = 0.0;
      for (int s = 0; s < steps; ++s) {
        MetaStepReport rep;
        switch (variant) {
          case Variant::grbal:
            rep = meta_train_step(state.params, model, state.buffer, cfg, sampler_rng, &state.opt);
            break;
          case Variant::rebal:
            rep = meta_train_step(state.params, rmodel, state.buffer, cfg, sampler_rng, &state.opt);
            break;
          default:
            rep = mb_train_step(state.params, model, state.buffer, cfg, sampler_rng, &state.opt);
            break;
        }
        loss_acc += rep.meta_loss;
        ++state.iteration;
      }

      // epoch diagnostics: pre/post K-step error on freshly sampled segments
      PrePostError err;
      const int n_eval = 16;
      for (int i = 0; i < n_eval; ++i) {
        const Segment seg = state.buffer.sample_segment(cfg.m, cfg.k, metrics_rng);
        const PrePostError e = variant == Variant::rebal
                                   ? pre_post_error(state.params, rmodel, seg)
                                   : pre_post_error(state.params, model, seg);
        err.pre += e.pre / n_eval;
        err.post += e.post / n_eval;
      }
      TrainLogRow row;
      row.iteration = state.iteration;
      row.meta_loss = steps > 0 ? loss_acc / steps : 0.0;
      row.pre_update_eval_error = err.pre;
      row.post_update_eval_error = err.post;
      row.env_steps_collected = state.env_steps;
      log.push_back(row);
    }

    state.next_round = round + 1;
    if (on_round_end) on_round_end(state, *this);
  }
}

TrainState Trainer::train(RngSet& rngs) {
  TrainState st = init_state(rngs);
  run(st, rngs);
  return st;
}

void write_train_log_csv(std::ostream& out, const std::vector<TrainLogRow>& log) {
  out << "iteration,meta_loss,pre_update_eval_error,post_update_eval_error,env_steps_collected\n";
  char buf[160];
  for (const auto& row : log) {
    std::snprintf(buf, sizeof(buf), "%ld,%.12g,%.12g,%.12g,%ld\n", row.iteration, row.meta_loss,
                  row.pre_update_eval_error, row.post_update_eval_error,
                  row.env_steps_collected);
    out << buf;
  }
}

}  // namespace ampc
