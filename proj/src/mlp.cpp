#include "ampc/mlp.hpp"

#include <cmath>
#include <string>

namespace ampc {

Mlp Mlp::make(int in_dim, const std::vector<int>& hidden, int out_dim) {
  if (in_dim < 1 || out_dim < 1) throw ArgumentError("mlp: dims must be positive");
  Mlp net;
  int prev = in_dim;
  for (int h : hidden) {
    if (h < 1) throw ArgumentError("mlp: hidden width must be positive");
    net.w.emplace_back(h, prev);
    net.b.emplace_back(h, 0.0);
    prev = h;
  }
  net.w.emplace_back(out_dim, prev);
  net.b.emplace_back(out_dim, 0.0);
  return net;
}

std::size_t Mlp::param_count() const {
  std::size_t n = 0;
  for (std::size_t l = 0; l < w.size(); ++l) n += w[l].size() + b[l].size();
  return n;
}

void Mlp::init(std::mt19937_64& rng) {
  for (std::size_t l = 0; l < w.size(); ++l) {
    init_uniform(w[l], rng);
    std::fill(b[l].begin(), b[l].end(), 0.0);
  }
}

ParamVector pack_params(const Mlp& net) {
  ParamVector p;
  p.reserve(net.param_count());
  for (std::size_t l = 0; l < net.w.size(); ++l) {
    p.insert(p.end(), net.w[l].data(), net.w[l].data() + net.w[l].size());
    p.insert(p.end(), net.b[l].begin(), net.b[l].end());
  }
  return p;
}

void unpack_params(const ParamVector& p, Mlp& net) {
  if (p.size() != net.param_count()) {
    throw DimensionError("unpack_params: expected " + std::to_string(net.param_count()) +
                         " parameters, got " + std::to_string(p.size()));
  }
  std::size_t off = 0;
  for (std::size_t l = 0; l < net.w.size(); ++l) {
    std::copy(p.begin() + off, p.begin() + off + net.w[l].size(), net.w[l].data());
    off += net.w[l].size();
    std::copy(p.begin() + off, p.begin() + off + net.b[l].size(), net.b[l].begin());
    off += net.b[l].size();
  }
}

namespace {

void ensure_scratch(const Mlp& net, MlpScratch& ws) {
  const std::size_t layers = net.w.size();
  if (ws.pre.size() != layers) {
    ws.pre.resize(layers);
    ws.act.resize(layers + 1);
    ws.delta.resize(layers);
    ws.r_pre.resize(layers);
    ws.r_act.resize(layers + 1);
    ws.r_delta.resize(layers);
  }
}

// forward keeping pre-activations and activations; act[0] is the input
void forward_trace(const Mlp& net, const Vector& x, MlpScratch& ws) {
  ensure_scratch(net, ws);
  const int layers = net.layer_count();
  check_length(x, static_cast<std::size_t>(net.in_dim()), "mlp input");
  ws.act[0] = x;
  for (int l = 0; l < layers; ++l) {
    matvec(net.w[l], ws.act[l], ws.pre[l]);
    add_inplace(ws.pre[l], net.b[l]);
    ws.act[l + 1] = ws.pre[l];
    if (l < layers - 1) {
      for (double& v : ws.act[l + 1]) v = v > 0.0 ? v : 0.0;  // ReLU, subgradient 0 at 0
    }
    if (!all_finite(ws.pre[l])) {
      throw NumericError("mlp forward: non-finite value at layer " + std::to_string(l));
    }
  }
}

struct GradAccum {
  std::vector<Matrix> dw;
  std::vector<Vector> db;

  explicit GradAccum(const Mlp& net) {
    for (std::size_t l = 0; l < net.w.size(); ++l) {
      dw.emplace_back(net.w[l].rows(), net.w[l].cols());
      db.emplace_back(net.b[l].size(), 0.0);
    }
  }

  ParamVector pack() const {
    ParamVector p;
    std::size_t n = 0;
    for (std::size_t l = 0; l < dw.size(); ++l) n += dw[l].size() + db[l].size();
    p.reserve(n);
    for (std::size_t l = 0; l < dw.size(); ++l) {
      p.insert(p.end(), dw[l].data(), dw[l].data() + dw[l].size());
      p.insert(p.end(), db[l].begin(), db[l].end());
    }
    return p;
  }
};

// backward from output delta already scaled by the loss factor
void backward_accumulate(const Mlp& net, MlpScratch& ws, GradAccum& acc) {
  const int layers = net.layer_count();
  for (int l = layers - 1; l >= 0; --l) {
    outer_add(acc.dw[l], ws.delta[l], ws.act[l]);
    add_inplace(acc.db[l], ws.delta[l]);
    if (l > 0) {
      ws.delta[l - 1].assign(net.w[l - 1].rows(), 0.0);
      matvec_t_add(net.w[l], ws.delta[l], ws.delta[l - 1]);
      for (std::size_t i = 0; i < ws.delta[l - 1].size(); ++i) {
        if (ws.pre[l - 1][i] <= 0.0) ws.delta[l - 1][i] = 0.0;
      }
    }
  }
}

}  // namespace

void mlp_forward_ws(const Mlp& net, const Vector& x, MlpScratch& ws, Vector& y) {
  forward_trace(net, x, ws);
  y = ws.act.back();
}

void mlp_forward(const Mlp& net, const Vector& x, Vector& y) {
  MlpScratch ws;
  mlp_forward_ws(net, x, ws, y);
}

double mlp_loss(const Mlp& net, const Batch& batch) {
  if (batch.empty()) throw ArgumentError("mlp_loss: empty batch");
  MlpScratch ws;
  Vector y;
  const double inv = 1.0 / (static_cast<double>(batch.size()) * net.out_dim());
  double acc = 0.0;
  for (const auto& [x, t] : batch) {
    check_length(t, static_cast<std::size_t>(net.out_dim()), "mlp target");
    mlp_forward_ws(net, x, ws, y);
    for (std::size_t i = 0; i < y.size(); ++i) {
      const double r = y[i] - t[i];
      acc += r * r;
    }
  }
  return acc * inv;
}

ParamVector mlp_grad(const Mlp& net, const Batch& batch, double* loss_out) {
  return mlp_grad_io(net, batch, loss_out, nullptr);
}

ParamVector mlp_grad_io(const Mlp& net, const Batch& batch, double* loss_out,
                        std::vector<Vector>* input_grads) {
  if (batch.empty()) throw ArgumentError("mlp_grad: empty batch");
  MlpScratch ws;
  GradAccum acc(net);
  const int layers = net.layer_count();
  const double scale = 2.0 / (static_cast<double>(batch.size()) * net.out_dim());
  double loss = 0.0;
  if (input_grads) input_grads->resize(batch.size());
  for (std::size_t bi = 0; bi < batch.size(); ++bi) {
    const auto& [x, t] = batch[bi];
    check_length(t, static_cast<std::size_t>(net.out_dim()), "mlp target");
    forward_trace(net, x, ws);
    const Vector& y = ws.act[layers];
    ws.delta[layers - 1].resize(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) {
      const double r = y[i] - t[i];
      loss += r * r;
      ws.delta[layers - 1][i] = scale * r;
    }
    backward_accumulate(net, ws, acc);
    if (input_grads) {
      Vector& dx = (*input_grads)[bi];
      dx.assign(x.size(), 0.0);
      matvec_t_add(net.w[0], ws.delta[0], dx);
    }
  }
  if (loss_out) *loss_out = loss * scale / 2.0;
  return acc.pack();
}

ParamVector mlp_hvp(const Mlp& net, const Batch& batch, const ParamVector& u) {
  if (batch.empty()) throw ArgumentError("mlp_hvp: empty batch");
  if (u.size() != net.param_count()) {
    throw DimensionError("mlp_hvp: direction length " + std::to_string(u.size()) +
                         " does not match parameter count " + std::to_string(net.param_count()));
  }
  // unpack the direction into layer shapes
  Mlp dir = net;
  unpack_params(u, dir);

  MlpScratch ws;
  GradAccum racc(net);  // accumulates R{gradient} = H u
  const int layers = net.layer_count();
  const double scale = 2.0 / (static_cast<double>(batch.size()) * net.out_dim());

  for (const auto& [x, t] : batch) {
    check_length(t, static_cast<std::size_t>(net.out_dim()), "mlp target");
    forward_trace(net, x, ws);

    // R-forward: directional derivative of every intermediate along u
    ws.r_act[0].assign(x.size(), 0.0);
    for (int l = 0; l < layers; ++l) {
      matvec(dir.w[l], ws.act[l], ws.r_pre[l]);
      add_inplace(ws.r_pre[l], dir.b[l]);
      Vector tmp(net.w[l].rows(), 0.0);
      matvec(net.w[l], ws.r_act[l], tmp);
      add_inplace(ws.r_pre[l], tmp);
      ws.r_act[l + 1] = ws.r_pre[l];
      if (l < layers - 1) {
        for (std::size_t i = 0; i < ws.r_act[l + 1].size(); ++i) {
          if (ws.pre[l][i] <= 0.0) ws.r_act[l + 1][i] = 0.0;
        }
      }
    }

    // standard backward deltas
    const Vector& y = ws.act[layers];
    ws.delta[layers - 1].resize(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) ws.delta[layers - 1][i] = scale * (y[i] - t[i]);
    for (int l = layers - 1; l > 0; --l) {
      ws.delta[l - 1].assign(net.w[l - 1].rows(), 0.0);
      matvec_t_add(net.w[l], ws.delta[l], ws.delta[l - 1]);
      for (std::size_t i = 0; i < ws.delta[l - 1].size(); ++i) {
        if (ws.pre[l - 1][i] <= 0.0) ws.delta[l - 1][i] = 0.0;
      }
    }

    // R-backward: R{delta_L} picks up only the R of the residual (targets fixed)
    ws.r_delta[layers - 1].resize(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) {
      ws.r_delta[layers - 1][i] = scale * ws.r_act[layers][i];
    }
    for (int l = layers - 1; l > 0; --l) {
      ws.r_delta[l - 1].assign(net.w[l - 1].rows(), 0.0);
      matvec_t_add(dir.w[l], ws.delta[l], ws.r_delta[l - 1]);
      matvec_t_add(net.w[l], ws.r_delta[l], ws.r_delta[l - 1]);
      for (std::size_t i = 0; i < ws.r_delta[l - 1].size(); ++i) {
        if (ws.pre[l - 1][i] <= 0.0) ws.r_delta[l - 1][i] = 0.0;
      }
    }

    // R{dW_l} = Rdelta_l z_{l-1}^T + delta_l Rz_{l-1}^T ; R{db_l} = Rdelta_l
    for (int l = 0; l < layers; ++l) {
      outer_add(racc.dw[l], ws.r_delta[l], ws.act[l]);
      outer_add(racc.dw[l], ws.delta[l], ws.r_act[l]);
      add_inplace(racc.db[l], ws.r_delta[l]);
    }
  }
  return racc.pack();
}

MetaGradResult mlp_grad_through_update(const Mlp& net, const Batch& inner_batch,
                                       const Batch& outer_batch, const ParamVector& psi) {
  if (inner_batch.empty() || outer_batch.empty()) {
    throw ArgumentError("mlp_grad_through_update: empty batch");
  }
  const std::size_t n = net.param_count();
  const bool scalar_psi = psi.size() == 1;
  if (!scalar_psi && psi.size() != n) {
    throw DimensionError("mlp_grad_through_update: psi length " + std::to_string(psi.size()) +
                         " is neither 1 nor the parameter count " + std::to_string(n));
  }

  MetaGradResult out;
  const ParamVector g = mlp_grad(net, inner_batch, &out.inner_loss);

  out.theta_prime = pack_params(net);
  for (std::size_t i = 0; i < n; ++i) {
    out.theta_prime[i] -= (scalar_psi ? psi[0] : psi[i]) * g[i];
  }
  if (!all_finite(out.theta_prime)) {
    throw NumericError("mlp_grad_through_update: non-finite adapted parameters");
  }

  Mlp adapted = net;
  unpack_params(out.theta_prime, adapted);
  const ParamVector v = mlp_grad(adapted, outer_batch, &out.outer_loss);

  // d theta'_i / d theta_j = delta_ij - psi_i H_ij, so
  // grad_theta = v - H (psi (.) v) using symmetry of the inner Hessian.
  ParamVector u(n);
  for (std::size_t i = 0; i < n; ++i) u[i] = (scalar_psi ? psi[0] : psi[i]) * v[i];
  const ParamVector hvp = mlp_hvp(net, inner_batch, u);

  out.grad_theta.resize(n);
  for (std::size_t i = 0; i < n; ++i) out.grad_theta[i] = v[i] - hvp[i];

  // d theta'_i / d psi_i = -g_i
  if (scalar_psi) {
    out.grad_psi.assign(1, -dot(v, g));
  } else {
    out.grad_psi.resize(n);
    for (std::size_t i = 0; i < n; ++i) out.grad_psi[i] = -v[i] * g[i];
  }
  return out;
}

}  // namespace ampc
