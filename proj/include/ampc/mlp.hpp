#pragma once

#include <random>
#include <utility>
#include <vector>

#include "ampc/linalg.hpp"

namespace ampc {

// Flat view of all parameters of a network in a fixed canonical order
// (layer 0 weights row-major, layer 0 bias, layer 1 weights, ...).
using ParamVector = Vector;

// (input, target) pairs for supervised losses
using Batch = std::vector<std::pair<Vector, Vector>>;

// Fully connected network, ReLU on hidden layers, identity output.
// The struct holds the weights themselves; ParamVector pack/unpack moves
// them in and out of flat form for optimizer updates and checkpoints.
struct Mlp {
  std::vector<Matrix> w;  // per layer, out x in
  std::vector<Vector> b;  // per layer

  static Mlp make(int in_dim, const std::vector<int>& hidden, int out_dim);

  int in_dim() const { return w.empty() ? 0 : w.front().cols(); }
  int out_dim() const { return w.empty() ? 0 : b.back().size(); }
  int layer_count() const { return static_cast<int>(w.size()); }
  std::size_t param_count() const;

  void init(std::mt19937_64& rng);  // uniform +-1/sqrt(fan_in), biases zero
};

ParamVector pack_params(const Mlp& net);
void unpack_params(const ParamVector& p, Mlp& net);

// Per-sample workspace; reuse across calls to avoid allocation in hot loops.
struct MlpScratch {
  std::vector<Vector> pre;    // a_l
  std::vector<Vector> act;    // z_l (act[0] = input)
  std::vector<Vector> delta;  // backward pass
  std::vector<Vector> r_pre, r_act, r_delta;  // directional (R-op) passes
};

// y = net(x); scratch-backed variant keeps intermediates for backprop
void mlp_forward(const Mlp& net, const Vector& x, Vector& y);
void mlp_forward_ws(const Mlp& net, const Vector& x, MlpScratch& ws, Vector& y);

// MSE, mean over batch and output dims
double mlp_loss(const Mlp& net, const Batch& batch);

// exact gradient of mlp_loss w.r.t. all parameters
ParamVector mlp_grad(const Mlp& net, const Batch& batch, double* loss_out = nullptr);

// as mlp_grad, but also writes the per-sample gradient of the loss w.r.t.
// the network input (used to route gradients into an upstream context)
ParamVector mlp_grad_io(const Mlp& net, const Batch& batch, double* loss_out,
                        std::vector<Vector>* input_grads);

// Hessian-vector product of mlp_loss at the current parameters with
// direction u, computed by a forward-over-reverse sweep. Exact for ReLU
// networks away from activation kinks (ReLU'' taken as 0).
ParamVector mlp_hvp(const Mlp& net, const Batch& batch, const ParamVector& u);

// Meta-gradient through one inner gradient step
//   theta' = theta - psi (.) grad_theta L_inner(theta)
// (one negative-gradient step on the MSE, equivalently one ascent step on
// the Gaussian log-likelihood). Returns d L_outer(theta')/d theta including
// the second-order Hessian-vector term, and d L_outer(theta')/d psi.
struct MetaGradResult {
  ParamVector grad_theta;
  ParamVector grad_psi;    // per-parameter, or length 1 when psi is scalar
  ParamVector theta_prime;
  double inner_loss = 0.0;
  double outer_loss = 0.0;  // evaluated at theta'
};

// psi: either one rate per parameter or a single scalar rate (size 1)
MetaGradResult mlp_grad_through_update(const Mlp& net, const Batch& inner_batch,
                                       const Batch& outer_batch, const ParamVector& psi);

}  // namespace ampc
