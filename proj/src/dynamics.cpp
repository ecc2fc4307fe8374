#include "ampc/dynamics.hpp"

#include <cmath>
#include <functional>
#include <istream>
#include <ostream>

namespace ampc {

namespace {

void fit_dim(std::span<const Transition> data, int dim,
             const std::function<double(const Transition&, int)>& get, Vector& mean, Vector& std) {
  const double n = static_cast<double>(data.size());
  mean.assign(dim, 0.0);
  std.assign(dim, 0.0);
  for (const auto& tr : data) {
    for (int i = 0; i < dim; ++i) mean[i] += get(tr, i);
  }
  for (int i = 0; i < dim; ++i) mean[i] /= n;
  for (const auto& tr : data) {
    for (int i = 0; i < dim; ++i) {
      const double d = get(tr, i) - mean[i];
      std[i] += d * d;
    }
  }
  for (int i = 0; i < dim; ++i) {
    std[i] = std::sqrt(std[i] / n);
    if (std[i] < Normalizer::kStdFloor) std[i] = Normalizer::kStdFloor;
  }
}

Vector apply_norm(const Vector& x, const Vector& mean, const Vector& std, const char* what) {
  check_length(x, mean.size(), what);
  Vector out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = (x[i] - mean[i]) / std[i];
  return out;
}

}  // namespace

Normalizer Normalizer::identity(int s_dim, int a_dim) {
  Normalizer n;
  n.s_mean.assign(s_dim, 0.0);
  n.s_std.assign(s_dim, 1.0);
  n.a_mean.assign(a_dim, 0.0);
  n.a_std.assign(a_dim, 1.0);
  n.d_mean.assign(s_dim, 0.0);
  n.d_std.assign(s_dim, 1.0);
  return n;
}

Normalizer Normalizer::fit(std::span<const Transition> data) {
  if (data.size() < 2) {
    throw ArgumentError("normalizer: need at least 2 transitions, got " +
                        std::to_string(data.size()));
  }
  const int s_dim = static_cast<int>(data.front().s.size());
  const int a_dim = static_cast<int>(data.front().a.size());
  Normalizer n;
  fit_dim(data, s_dim, [](const Transition& tr, int i) { return tr.s[i]; }, n.s_mean, n.s_std);
  fit_dim(data, a_dim, [](const Transition& tr, int i) { return tr.a[i]; }, n.a_mean, n.a_std);
  fit_dim(
      data, s_dim, [](const Transition& tr, int i) { return tr.s_next[i] - tr.s[i]; }, n.d_mean,
      n.d_std);
  return n;
}

Vector Normalizer::norm_s(const Vector& s) const { return apply_norm(s, s_mean, s_std, "state"); }
Vector Normalizer::norm_a(const Vector& a) const { return apply_norm(a, a_mean, a_std, "action"); }
Vector Normalizer::norm_delta(const Vector& d) const {
  return apply_norm(d, d_mean, d_std, "delta");
}

Vector Normalizer::denorm_delta(const Vector& nd) const {
  check_length(nd, d_mean.size(), "normalized delta");
  Vector out(nd.size());
  for (std::size_t i = 0; i < nd.size(); ++i) out[i] = nd[i] * d_std[i] + d_mean[i];
  return out;
}

nlohmann::json Normalizer::to_json() const {
  return {{"s_mean", s_mean}, {"s_std", s_std}, {"a_mean", a_mean},
          {"a_std", a_std},   {"d_mean", d_mean}, {"d_std", d_std}};
}

Normalizer Normalizer::from_json(const nlohmann::json& j) {
  Normalizer n;
  n.s_mean = j.at("s_mean").get<Vector>();
  n.s_std = j.at("s_std").get<Vector>();
  n.a_mean = j.at("a_mean").get<Vector>();
  n.a_std = j.at("a_std").get<Vector>();
  n.d_mean = j.at("d_mean").get<Vector>();
  n.d_std = j.at("d_std").get<Vector>();
  return n;
}

Vector predict(const DynamicsModel& model, const Mlp& net, const Vector& s, const Vector& a) {
  if (!all_finite(s) || !all_finite(a)) throw ArgumentError("predict: non-finite input");
  Vector x = concat(model.norm.norm_s(s), model.norm.norm_a(a));
  Vector y;
  mlp_forward(net, x, y);
  Vector delta = model.norm.denorm_delta(y);
  Vector out(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) out[i] = s[i] + delta[i];
  return out;
}

double nll_loss(const DynamicsModel& model, const Mlp& net, std::span<const Transition> batch) {
  if (batch.empty()) throw ArgumentError("nll_loss: empty batch");
  return mlp_loss(net, to_training_batch(model.norm, batch));
}

std::vector<Vector> rollout(const DynamicsModel& model, const Mlp& net, const Vector& s0,
                            const std::vector<Vector>& actions) {
  if (actions.empty()) throw ArgumentError("rollout: empty action sequence");
  std::vector<Vector> states;
  states.reserve(actions.size() + 1);
  states.push_back(s0);
  for (std::size_t k = 0; k < actions.size(); ++k) {
    states.push_back(predict(model, net, states.back(), actions[k]));
    if (!all_finite(states.back())) {
      throw NumericError("rollout: non-finite state at step " + std::to_string(k));
    }
  }
  return states;
}

namespace {
Mlp with_theta(const DynamicsModel& model, const ParamVector& theta) {
  Mlp net = model.net;
  unpack_params(theta, net);
  return net;
}
}  // namespace

Vector predict(const DynamicsModel& model, const ParamVector& theta, const Vector& s,
               const Vector& a) {
  return predict(model, with_theta(model, theta), s, a);
}

double nll_loss(const DynamicsModel& model, const ParamVector& theta,
                std::span<const Transition> batch) {
  return nll_loss(model, with_theta(model, theta), batch);
}

std::vector<Vector> rollout(const DynamicsModel& model, const ParamVector& theta, const Vector& s0,
                            const std::vector<Vector>& actions) {
  return rollout(model, with_theta(model, theta), s0, actions);
}

Batch to_training_batch(const Normalizer& norm, std::span<const Transition> data) {
  Batch batch;
  batch.reserve(data.size());
  for (const auto& tr : data) {
    Vector delta(tr.s.size());
    for (std::size_t i = 0; i < tr.s.size(); ++i) delta[i] = tr.s_next[i] - tr.s[i];
    batch.emplace_back(concat(norm.norm_s(tr.s), norm.norm_a(tr.a)), norm.norm_delta(delta));
  }
  return batch;
}

std::vector<Vector> context_inputs(const Normalizer& norm, std::span<const Transition> slice) {
  std::vector<Vector> inputs;
  inputs.reserve(slice.size());
  for (const auto& tr : slice) {
    Vector delta(tr.s.size());
    for (std::size_t i = 0; i < tr.s.size(); ++i) delta[i] = tr.s_next[i] - tr.s[i];
    Vector x = concat(norm.norm_s(tr.s), norm.norm_a(tr.a));
    Vector nd = norm.norm_delta(delta);
    x.insert(x.end(), nd.begin(), nd.end());
    inputs.push_back(std::move(x));
  }
  return inputs;
}

Vector predict_ctx(const RecurrentDynamicsModel& model, const Mlp& head, const Vector& context,
                   const Vector& s, const Vector& a) {
  if (!all_finite(s) || !all_finite(a)) throw ArgumentError("predict_ctx: non-finite input");
  check_length(context, static_cast<std::size_t>(model.context_dim()), "context");
  Vector x = concat(model.norm.norm_s(s), model.norm.norm_a(a));
  x.insert(x.end(), context.begin(), context.end());
  Vector y;
  mlp_forward(head, x, y);
  Vector delta = model.norm.denorm_delta(y);
  Vector out(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) out[i] = s[i] + delta[i];
  return out;
}

double nll_loss_ctx(const RecurrentDynamicsModel& model, const Mlp& head, const Vector& context,
                    std::span<const Transition> batch) {
  if (batch.empty()) throw ArgumentError("nll_loss_ctx: empty batch");
  Batch b = to_training_batch(model.norm, batch);
  for (auto& [x, t] : b) x.insert(x.end(), context.begin(), context.end());
  return mlp_loss(head, b);
}

std::vector<Vector> rollout_ctx(const RecurrentDynamicsModel& model, const Mlp& head,
                                const Vector& context, const Vector& s0,
                                const std::vector<Vector>& actions) {
  if (actions.empty()) throw ArgumentError("rollout_ctx: empty action sequence");
  std::vector<Vector> states;
  states.reserve(actions.size() + 1);
  states.push_back(s0);
  for (std::size_t k = 0; k < actions.size(); ++k) {
    states.push_back(predict_ctx(model, head, context, states.back(), actions[k]));
    if (!all_finite(states.back())) {
      throw NumericError("rollout_ctx: non-finite state at step " + std::to_string(k));
    }
  }
  return states;
}

void save_transitions_ndjson(std::ostream& out, std::span<const Transition> data) {
  for (const auto& tr : data) {
    nlohmann::json j{{"episode", tr.episode_id},
                     {"t", tr.t},
                     {"s", tr.s},
                     {"a", tr.a},
                     {"s_next", tr.s_next}};
    out << j.dump() << "\n";
  }
}

std::vector<Transition> load_transitions_ndjson(std::istream& in) {
  std::vector<Transition> data;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw DataError("dataset line " + std::to_string(lineno) + ": " + e.what());
    }
    Transition tr;
    tr.episode_id = j.at("episode").get<long>();
    tr.t = j.at("t").get<int>();
    tr.s = j.at("s").get<Vector>();
    tr.a = j.at("a").get<Vector>();
    tr.s_next = j.at("s_next").get<Vector>();
    if (tr.s.size() != tr.s_next.size()) {
      throw DataError("dataset line " + std::to_string(lineno) + ": state dims differ");
    }
    data.push_back(std::move(tr));
  }
  return data;
}

}  // namespace ampc
