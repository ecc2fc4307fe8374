#pragma once

#include "ampc/meta.hpp"

namespace ampc {

// K-step open-loop prediction error of a segment's evaluation slice:
// actions replayed from the log, states propagated by the model, error
// averaged over the K steps and state dims, each dim normalized by the
// dataset standard deviation of that state coordinate.
double k_step_error(const DynamicsModel& model, const Mlp& net, const Segment& seg);
double k_step_error_ctx(const RecurrentDynamicsModel& model, const Mlp& head, const Vector& context,
                        const Segment& seg);

struct PrePostError {
  double pre = 0.0;   // under theta* (or zero context)
  double post = 0.0;  // under the adapted parameters (or recurrent context)
};

PrePostError pre_post_error(const MetaParams& meta, const DynamicsModel& model, const Segment& seg);
PrePostError pre_post_error(const MetaParams& meta, const RecurrentDynamicsModel& model,
                            const Segment& seg);

}  // namespace ampc
