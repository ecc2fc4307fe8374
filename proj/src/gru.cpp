#include "ampc/gru.hpp"

#include <cmath>
#include <string>

namespace ampc {

namespace {

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

RecurrentCell RecurrentCell::make(int in_dim, int hidden_dim, int out_dim) {
  if (in_dim < 1 || hidden_dim < 1 || out_dim < 1) {
    throw ArgumentError("recurrent cell: dims must be positive");
  }
  RecurrentCell cell;
  cell.uz = Matrix(hidden_dim, in_dim);
  cell.wz = Matrix(hidden_dim, hidden_dim);
  cell.bz = Vector(hidden_dim, 0.0);
  cell.ur = Matrix(hidden_dim, in_dim);
  cell.wr = Matrix(hidden_dim, hidden_dim);
  cell.br = Vector(hidden_dim, 0.0);
  cell.uh = Matrix(hidden_dim, in_dim);
  cell.wh = Matrix(hidden_dim, hidden_dim);
  cell.bh = Vector(hidden_dim, 0.0);
  cell.v = Matrix(out_dim, hidden_dim);
  cell.c = Vector(out_dim, 0.0);
  return cell;
}

std::size_t RecurrentCell::param_count() const {
  return uz.size() + wz.size() + bz.size() + ur.size() + wr.size() + br.size() + uh.size() +
         wh.size() + bh.size() + v.size() + c.size();
}

void RecurrentCell::init(std::mt19937_64& rng) {
  init_uniform(uz, rng);
  init_uniform(wz, rng);
  std::fill(bz.begin(), bz.end(), 0.0);
  init_uniform(ur, rng);
  init_uniform(wr, rng);
  std::fill(br.begin(), br.end(), 0.0);
  init_uniform(uh, rng);
  init_uniform(wh, rng);
  std::fill(bh.begin(), bh.end(), 0.0);
  init_uniform(v, rng);
  std::fill(c.begin(), c.end(), 0.0);
}

ParamVector pack_params(const RecurrentCell& cell) {
  ParamVector p;
  p.reserve(cell.param_count());
  auto push_m = [&p](const Matrix& m) { p.insert(p.end(), m.data(), m.data() + m.size()); };
  auto push_v = [&p](const Vector& v) { p.insert(p.end(), v.begin(), v.end()); };
  push_m(cell.uz);
  push_m(cell.wz);
  push_v(cell.bz);
  push_m(cell.ur);
  push_m(cell.wr);
  push_v(cell.br);
  push_m(cell.uh);
  push_m(cell.wh);
  push_v(cell.bh);
  push_m(cell.v);
  push_v(cell.c);
  return p;
}

void unpack_params(const ParamVector& p, RecurrentCell& cell) {
  if (p.size() != cell.param_count()) {
    throw DimensionError("unpack_params(cell): expected " + std::to_string(cell.param_count()) +
                         " parameters, got " + std::to_string(p.size()));
  }
  std::size_t off = 0;
  auto pull_m = [&](Matrix& m) {
    std::copy(p.begin() + off, p.begin() + off + m.size(), m.data());
    off += m.size();
  };
  auto pull_v = [&](Vector& v) {
    std::copy(p.begin() + off, p.begin() + off + v.size(), v.begin());
    off += v.size();
  };
  pull_m(cell.uz);
  pull_m(cell.wz);
  pull_v(cell.bz);
  pull_m(cell.ur);
  pull_m(cell.wr);
  pull_v(cell.br);
  pull_m(cell.uh);
  pull_m(cell.wh);
  pull_v(cell.bh);
  pull_m(cell.v);
  pull_v(cell.c);
}

void gru_forward_trace(const RecurrentCell& cell, const std::vector<Vector>& inputs,
                       const Vector& h0, GruTrace& trace) {
  check_length(h0, static_cast<std::size_t>(cell.hidden_dim()), "gru initial hidden state");
  const int hd = cell.hidden_dim();
  trace.h0 = h0;
  const std::size_t n = inputs.size();
  trace.x.resize(n);
  trace.z.resize(n);
  trace.r.resize(n);
  trace.hc.resize(n);
  trace.h.resize(n);

  Vector tmp(hd), gated(hd);
  const Vector* hprev = &h0;
  for (std::size_t t = 0; t < n; ++t) {
    check_length(inputs[t], static_cast<std::size_t>(cell.in_dim()), "gru input");
    trace.x[t] = inputs[t];

    matvec(cell.uz, inputs[t], trace.z[t]);
    matvec(cell.wz, *hprev, tmp);
    add_inplace(trace.z[t], tmp);
    add_inplace(trace.z[t], cell.bz);
    for (double& v : trace.z[t]) v = sigmoid(v);

    matvec(cell.ur, inputs[t], trace.r[t]);
    matvec(cell.wr, *hprev, tmp);
    add_inplace(trace.r[t], tmp);
    add_inplace(trace.r[t], cell.br);
    for (double& v : trace.r[t]) v = sigmoid(v);

    for (int i = 0; i < hd; ++i) gated[i] = trace.r[t][i] * (*hprev)[i];
    matvec(cell.uh, inputs[t], trace.hc[t]);
    matvec(cell.wh, gated, tmp);
    add_inplace(trace.hc[t], tmp);
    add_inplace(trace.hc[t], cell.bh);
    for (double& v : trace.hc[t]) v = std::tanh(v);

    trace.h[t].resize(hd);
    for (int i = 0; i < hd; ++i) {
      trace.h[t][i] = (1.0 - trace.z[t][i]) * (*hprev)[i] + trace.z[t][i] * trace.hc[t][i];
    }
    if (!all_finite(trace.h[t])) {
      throw NumericError("gru forward: non-finite hidden state at step " + std::to_string(t));
    }
    hprev = &trace.h[t];
  }
}

void gru_forward(const RecurrentCell& cell, const std::vector<Vector>& inputs, const Vector& h0,
                 std::vector<Vector>& outputs, Vector& h_final) {
  GruTrace trace;
  gru_forward_trace(cell, inputs, h0, trace);
  outputs.resize(inputs.size());
  for (std::size_t t = 0; t < inputs.size(); ++t) {
    matvec(cell.v, trace.h[t], outputs[t]);
    add_inplace(outputs[t], cell.c);
  }
  h_final = trace.last_h();
}

ParamVector gru_backprop(const RecurrentCell& cell, const GruTrace& trace,
                         const std::vector<Vector>& output_deltas, const Vector& h_final_delta,
                         Vector*) {
  const int hd = cell.hidden_dim();
  const int steps = trace.steps();
  const bool with_outputs = !output_deltas.empty();
  if (with_outputs && static_cast<int>(output_deltas.size()) != steps) {
    throw DimensionError("gru_backprop: one output delta per step required");
  }

  RecurrentCell g = cell;  // same shapes, zeroed: holds the gradient
  unpack_params(ParamVector(cell.param_count(), 0.0), g);

  Vector dh(hd, 0.0);
  if (!h_final_delta.empty()) {
    check_length(h_final_delta, static_cast<std::size_t>(hd), "gru final hidden delta");
    dh = h_final_delta;
  }

  Vector dhc(hd), dz(hd), dr(hd), da(hd), dgated(hd), dh_prev(hd);
  for (int t = steps - 1; t >= 0; --t) {
    const Vector& hprev = t > 0 ? trace.h[t - 1] : trace.h0;

    if (with_outputs) {
      // y_t = V h_t + c
      outer_add(g.v, output_deltas[t], trace.h[t]);
      add_inplace(g.c, output_deltas[t]);
      matvec_t_add(cell.v, output_deltas[t], dh);
    }

    // h_t = (1 - z) h_{t-1} + z hc
    for (int i = 0; i < hd; ++i) {
      dhc[i] = dh[i] * trace.z[t][i];
      dz[i] = dh[i] * (trace.hc[t][i] - hprev[i]);
      dh_prev[i] = dh[i] * (1.0 - trace.z[t][i]);
    }

    // candidate branch (tanh)
    for (int i = 0; i < hd; ++i) da[i] = dhc[i] * (1.0 - trace.hc[t][i] * trace.hc[t][i]);
    outer_add(g.uh, da, trace.x[t]);
    Vector gated(hd);
    for (int i = 0; i < hd; ++i) gated[i] = trace.r[t][i] * hprev[i];
    outer_add(g.wh, da, gated);
    add_inplace(g.bh, da);
    dgated.assign(hd, 0.0);
    matvec_t_add(cell.wh, da, dgated);
    for (int i = 0; i < hd; ++i) {
      dr[i] = dgated[i] * hprev[i];
      dh_prev[i] += dgated[i] * trace.r[t][i];
    }

    // reset gate (sigmoid)
    for (int i = 0; i < hd; ++i) da[i] = dr[i] * trace.r[t][i] * (1.0 - trace.r[t][i]);
    outer_add(g.ur, da, trace.x[t]);
    outer_add(g.wr, da, hprev);
    add_inplace(g.br, da);
    matvec_t_add(cell.wr, da, dh_prev);

    // update gate (sigmoid)
    for (int i = 0; i < hd; ++i) da[i] = dz[i] * trace.z[t][i] * (1.0 - trace.z[t][i]);
    outer_add(g.uz, da, trace.x[t]);
    outer_add(g.wz, da, hprev);
    add_inplace(g.bz, da);
    matvec_t_add(cell.wz, da, dh_prev);

    dh = dh_prev;
  }
  return pack_params(g);
}

double gru_seq_loss(const RecurrentCell& cell, const std::vector<SeqSample>& seqs) {
  if (seqs.empty()) throw ArgumentError("gru_seq_loss: empty sequence set");
  const Vector h0(cell.hidden_dim(), 0.0);
  double total = 0.0;
  std::vector<Vector> outputs;
  Vector h_final;
  for (const auto& seq : seqs) {
    if (seq.inputs.empty()) throw ArgumentError("gru_seq_loss: empty sequence");
    if (seq.inputs.size() != seq.targets.size()) {
      throw DimensionError("gru_seq_loss: inputs/targets length mismatch");
    }
    gru_forward(cell, seq.inputs, h0, outputs, h_final);
    double acc = 0.0;
    for (std::size_t t = 0; t < outputs.size(); ++t) {
      check_length(seq.targets[t], static_cast<std::size_t>(cell.out_dim()), "gru target");
      for (std::size_t i = 0; i < outputs[t].size(); ++i) {
        const double r = outputs[t][i] - seq.targets[t][i];
        acc += r * r;
      }
    }
    total += acc / (static_cast<double>(seq.inputs.size()) * cell.out_dim());
  }
  return total / static_cast<double>(seqs.size());
}

ParamVector gru_grad(const RecurrentCell& cell, const std::vector<SeqSample>& seqs,
                     double* loss_out) {
  if (seqs.empty()) throw ArgumentError("gru_grad: empty sequence set");
  const Vector h0(cell.hidden_dim(), 0.0);
  ParamVector total(cell.param_count(), 0.0);
  double loss = 0.0;
  GruTrace trace;
  for (const auto& seq : seqs) {
    if (seq.inputs.empty()) throw ArgumentError("gru_grad: empty sequence");
    if (seq.inputs.size() != seq.targets.size()) {
      throw DimensionError("gru_grad: inputs/targets length mismatch");
    }
    gru_forward_trace(cell, seq.inputs, h0, trace);
    const double scale =
        2.0 / (static_cast<double>(seq.inputs.size()) * cell.out_dim() * seqs.size());
    std::vector<Vector> dys(trace.steps());
    Vector y;
    for (int t = 0; t < trace.steps(); ++t) {
      matvec(cell.v, trace.h[t], y);
      add_inplace(y, cell.c);
      dys[t].resize(y.size());
      for (std::size_t i = 0; i < y.size(); ++i) {
        const double r = y[i] - seq.targets[t][i];
        loss += r * r / (static_cast<double>(seq.inputs.size()) * cell.out_dim() * seqs.size());
        dys[t][i] = scale * r;
      }
    }
    const ParamVector g = gru_backprop(cell, trace, dys, Vector());
    add_inplace(total, g);
  }
  if (loss_out) *loss_out = loss;
  return total;
}

}  // namespace ampc
