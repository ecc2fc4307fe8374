#include "ampc/metrics.hpp"

#include <cmath>

namespace ampc {

namespace {

template <typename PredictFn>
double open_loop_error(const Normalizer& norm, const Segment& seg, PredictFn&& predict_one) {
  Vector s = seg.eval.front().s;
  double acc = 0.0;
  const std::size_t dims = s.size();
  for (const Transition& tr : seg.eval) {
    s = predict_one(s, tr.a);
    for (std::size_t i = 0; i < dims; ++i) {
      acc += std::abs(s[i] - tr.s_next[i]) / norm.s_std[i];
    }
  }
  return acc / (static_cast<double>(seg.eval.size()) * dims);
}

}  // namespace

double k_step_error(const DynamicsModel& model, const Mlp& net, const Segment& seg) {
  return open_loop_error(model.norm, seg, [&](const Vector& s, const Vector& a) {
    return predict(model, net, s, a);
  });
}

double k_step_error_ctx(const RecurrentDynamicsModel& model, const Mlp& head, const Vector& context,
                        const Segment& seg) {
  return open_loop_error(model.norm, seg, [&](const Vector& s, const Vector& a) {
    return predict_ctx(model, head, context, s, a);
  });
}

PrePostError pre_post_error(const MetaParams& meta, const DynamicsModel& model,
                            const Segment& seg) {
  PrePostError out;
  const Mlp prior = net_with(model, meta.theta);
  out.pre = k_step_error(model, prior, seg);
  if (meta.psi.empty()) {
    out.post = out.pre;
  } else {
    const Mlp adapted = net_with(model, grbal_update(meta, model, seg.adapt));
    out.post = k_step_error(model, adapted, seg);
  }
  return out;
}

PrePostError pre_post_error(const MetaParams& meta, const RecurrentDynamicsModel& model,
                            const Segment& seg) {
  PrePostError out;
  const Mlp head = head_with(model, meta.theta);
  const RecurrentCell cell = cell_with(model, meta.psi);
  out.pre = k_step_error_ctx(model, head, model.zero_context(), seg);
  out.post = k_step_error_ctx(model, head, rebal_update(model, cell, seg.adapt), seg);
  return out;
}

}  // namespace ampc
