#include "ampc/meta.hpp"

#include <algorithm>
#include <cmath>

namespace ampc {

std::string variant_name(Variant v) {
  switch (v) {
    case Variant::grbal: return "grbal";
    case Variant::rebal: return "rebal";
    case Variant::mb: return "mb";
    case Variant::mb_de: return "mb_de";
    case Variant::mb_oracle: return "mb_oracle";
  }
  return "?";
}

Variant variant_from_name(const std::string& name) {
  if (name == "grbal") return Variant::grbal;
  if (name == "rebal") return Variant::rebal;
  if (name == "mb") return Variant::mb;
  if (name == "mb_de") return Variant::mb_de;
  if (name == "mb_oracle") return Variant::mb_oracle;
  throw ConfigError("unknown method variant '" + name + "'");
}

void TrainConfig::validate() const {
  if (m < 1 || k < 1) throw ConfigError("train: M and K must be >= 1");
  if (meta_batch < 1) throw ConfigError("train: meta_batch must be >= 1");
  if (rounds < 0 || epochs < 0) throw ConfigError("train: rounds/epochs must be >= 0");
  if (horizon < 1) throw ConfigError("train: horizon must be >= 1");
  if (outer_lr < 0 || psi_lr < 0) throw ConfigError("train: learning rates must be >= 0");
}

Mlp net_with(const DynamicsModel& model, const ParamVector& theta) {
  Mlp net = model.net;
  unpack_params(theta, net);
  return net;
}

Mlp head_with(const RecurrentDynamicsModel& model, const ParamVector& theta) {
  Mlp head = model.head;
  unpack_params(theta, head);
  return head;
}

RecurrentCell cell_with(const RecurrentDynamicsModel& model, const ParamVector& psi) {
  RecurrentCell cell = model.cell;
  unpack_params(psi, cell);
  return cell;
}

ParamVector grbal_update(const MetaParams& meta, const DynamicsModel& model,
                         std::span<const Transition> adaptation_slice) {
  if (adaptation_slice.empty()) throw ArgumentError("grbal_update: empty adaptation slice");
  if (meta.psi.empty()) throw ArgumentError("grbal_update: no inner rates (psi empty)");
  if (meta.psi.size() != 1 && meta.psi.size() != meta.theta.size()) {
    throw DimensionError("grbal_update: psi length must be 1 or the parameter count");
  }
  const Mlp net = net_with(model, meta.theta);
  const Batch batch = to_training_batch(model.norm, adaptation_slice);
  const ParamVector g = mlp_grad(net, batch);
  ParamVector theta_prime = meta.theta;
  const bool scalar = meta.psi_scalar || meta.psi.size() == 1;
  for (std::size_t i = 0; i < theta_prime.size(); ++i) {
    theta_prime[i] -= (scalar ? meta.psi[0] : meta.psi[i]) * g[i];
  }
  return theta_prime;
}

Vector rebal_update(const RecurrentDynamicsModel& model, const RecurrentCell& cell,
                    std::span<const Transition> adaptation_slice) {
  if (adaptation_slice.empty()) throw ArgumentError("rebal_update: empty adaptation slice");
  const std::vector<Vector> inputs = context_inputs(model.norm, adaptation_slice);
  GruTrace trace;
  gru_forward_trace(cell, inputs, Vector(cell.hidden_dim(), 0.0), trace);
  return trace.last_h();
}

namespace {

void check_segment(const Segment& seg, std::size_t index) {
  if (seg.adapt.empty() || seg.eval.empty()) {
    throw ArgumentError("segment " + std::to_string(index) + ": empty slice");
  }
  if (seg.adapt.back().episode_id != seg.eval.front().episode_id) {
    throw ArgumentError("segment " + std::to_string(index) + ": slices from different episodes");
  }
  if (seg.adapt.back().t + 1 != seg.eval.front().t) {
    throw ArgumentError("segment " + std::to_string(index) +
                        ": adaptation slice must end where the evaluation slice begins");
  }
}

}  // namespace

double meta_loss(const MetaParams& meta, const DynamicsModel& model,
                 std::span<const Segment> segments, Variant variant) {
  if (segments.empty()) throw ArgumentError("meta_loss: empty segment list");
  double total = 0.0;
  for (std::size_t i = 0; i < segments.size(); ++i) {
    check_segment(segments[i], i);
    if (variant == Variant::grbal) {
      const ParamVector theta_prime = grbal_update(meta, model, segments[i].adapt);
      total += nll_loss(model, theta_prime, segments[i].eval);
    } else {
      total += nll_loss(model, meta.theta, segments[i].eval);
    }
  }
  return total / static_cast<double>(segments.size());
}

double meta_loss(const MetaParams& meta, const RecurrentDynamicsModel& model,
                 std::span<const Segment> segments) {
  if (segments.empty()) throw ArgumentError("meta_loss: empty segment list");
  const RecurrentCell cell = cell_with(model, meta.psi);
  const Mlp head = head_with(model, meta.theta);
  double total = 0.0;
  for (std::size_t i = 0; i < segments.size(); ++i) {
    check_segment(segments[i], i);
    const Vector ctx = rebal_update(model, cell, segments[i].adapt);
    total += nll_loss_ctx(model, head, ctx, segments[i].eval);
  }
  return total / static_cast<double>(segments.size());
}

namespace {

void apply_update(Vector& param, const Vector& grad, double lr, Vector& m, Vector& v,
                  const TrainConfig& cfg, long step) {
  if (!cfg.adam) {
    axpy(-lr, grad, param);
    return;
  }
  if (m.size() != param.size()) {
    m.assign(param.size(), 0.0);
    v.assign(param.size(), 0.0);
  }
  const double b1 = cfg.adam_beta1, b2 = cfg.adam_beta2;
  const double bc1 = 1.0 - std::pow(b1, static_cast<double>(step));
  const double bc2 = 1.0 - std::pow(b2, static_cast<double>(step));
  for (std::size_t i = 0; i < param.size(); ++i) {
    m[i] = b1 * m[i] + (1.0 - b1) * grad[i];
    v[i] = b2 * v[i] + (1.0 - b2) * grad[i] * grad[i];
    param[i] -= lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + cfg.adam_eps);
  }
}

}  // namespace

MetaStepReport meta_train_step(MetaParams& meta, const DynamicsModel& model,
                               const ReplayBuffer& buffer, const TrainConfig& cfg,
                               std::mt19937_64& sampler_rng, OptState* opt) {
  const std::size_t positions = buffer.segment_positions(cfg.m, cfg.k);
  if (positions == 0) {
    throw DataError("meta_train_step: need at least 1 legal segment of length " +
                    std::to_string(cfg.m + cfg.k) + ", buffer holds " +
                    std::to_string(buffer.total_transitions()) + " transitions");
  }
  const Mlp net = net_with(model, meta.theta);
  const std::size_t n_params = meta.theta.size();
  ParamVector grad_theta(n_params, 0.0);
  ParamVector grad_psi(meta.psi.size(), 0.0);

  MetaStepReport report;
  for (int j = 0; j < cfg.meta_batch; ++j) {
    const Segment seg = buffer.sample_segment(cfg.m, cfg.k, sampler_rng);
    const Batch inner = to_training_batch(model.norm, seg.adapt);
    const Batch outer = to_training_batch(model.norm, seg.eval);
    const MetaGradResult r = mlp_grad_through_update(net, inner, outer, meta.psi);
    add_inplace(grad_theta, r.grad_theta);
    add_inplace(grad_psi, r.grad_psi);
    report.meta_loss += r.outer_loss;
    report.mean_inner_loss += r.inner_loss;
  }
  const double inv = 1.0 / cfg.meta_batch;
  scale_inplace(grad_theta, inv);
  scale_inplace(grad_psi, inv);
  report.meta_loss *= inv;
  report.mean_inner_loss *= inv;

  OptState local;
  OptState& st = opt ? *opt : local;
  ++st.step;
  apply_update(meta.theta, grad_theta, cfg.outer_lr, st.m_theta, st.v_theta, cfg, st.step);
  apply_update(meta.psi, grad_psi, cfg.psi_lr, st.m_psi, st.v_psi, cfg, st.step);
  return report;
}

MetaStepReport meta_train_step(MetaParams& meta, const RecurrentDynamicsModel& model,
                               const ReplayBuffer& buffer, const TrainConfig& cfg,
                               std::mt19937_64& sampler_rng, OptState* opt) {
  const std::size_t positions = buffer.segment_positions(cfg.m, cfg.k);
  if (positions == 0) {
    throw DataError("meta_train_step: need at least 1 legal segment of length " +
                    std::to_string(cfg.m + cfg.k) + ", buffer holds " +
                    std::to_string(buffer.total_transitions()) + " transitions");
  }
  const RecurrentCell cell = cell_with(model, meta.psi);
  const Mlp head = head_with(model, meta.theta);
  ParamVector grad_theta(meta.theta.size(), 0.0);
  ParamVector grad_psi(meta.psi.size(), 0.0);
  const int ctx_dim = model.context_dim();

  MetaStepReport report;
  GruTrace trace;
  std::vector<Vector> input_grads;
  for (int j = 0; j < cfg.meta_batch; ++j) {
    const Segment seg = buffer.sample_segment(cfg.m, cfg.k, sampler_rng);
    const std::vector<Vector> ctx_in = context_inputs(model.norm, seg.adapt);
    gru_forward_trace(cell, ctx_in, Vector(ctx_dim, 0.0), trace);
    const Vector ctx = trace.last_h();

    Batch outer = to_training_batch(model.norm, seg.eval);
    for (auto& [x, t] : outer) x.insert(x.end(), ctx.begin(), ctx.end());

    double outer_loss = 0.0;
    const ParamVector g_head = mlp_grad_io(head, outer, &outer_loss, &input_grads);
    add_inplace(grad_theta, g_head);
    report.meta_loss += outer_loss;

    // gradient reaching the context entries of each head input
    Vector d_ctx(ctx_dim, 0.0);
    const std::size_t base = input_grads.front().size() - static_cast<std::size_t>(ctx_dim);
    for (const Vector& dx : input_grads) {
      for (int i = 0; i < ctx_dim; ++i) d_ctx[i] += dx[base + i];
    }
    const ParamVector g_cell = gru_backprop(cell, trace, {}, d_ctx);
    add_inplace(grad_psi, g_cell);
  }
  const double inv = 1.0 / cfg.meta_batch;
  scale_inplace(grad_theta, inv);
  scale_inplace(grad_psi, inv);
  report.meta_loss *= inv;

  OptState local;
  OptState& st = opt ? *opt : local;
  ++st.step;
  apply_update(meta.theta, grad_theta, cfg.outer_lr, st.m_theta, st.v_theta, cfg, st.step);
  apply_update(meta.psi, grad_psi, cfg.psi_lr, st.m_psi, st.v_psi, cfg, st.step);
  return report;
}

MetaStepReport mb_train_step(MetaParams& meta, const DynamicsModel& model,
                             const ReplayBuffer& buffer, const TrainConfig& cfg,
                             std::mt19937_64& sampler_rng, OptState* opt) {
  const std::vector<Transition> batch =
      buffer.sample_transitions(cfg.meta_batch * cfg.k, sampler_rng);
  const Mlp net = net_with(model, meta.theta);
  MetaStepReport report;
  const ParamVector g = mlp_grad(net, to_training_batch(model.norm, batch), &report.meta_loss);

  OptState local;
  OptState& st = opt ? *opt : local;
  ++st.step;
  apply_update(meta.theta, g, cfg.outer_lr, st.m_theta, st.v_theta, cfg, st.step);
  return report;
}

}  // namespace ampc
