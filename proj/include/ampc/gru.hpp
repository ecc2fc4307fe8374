#pragma once

#include <random>
#include <vector>

#include "ampc/linalg.hpp"
#include "ampc/mlp.hpp"

namespace ampc {

// Gated recurrent unit with a linear readout. Update rule:
//   z_t  = sigmoid(Uz x + Wz h + bz)
//   r_t  = sigmoid(Ur x + Wr h + br)
//   hc_t = tanh(Uh x + Wh (r (.) h) + bh)
//   h_t  = (1 - z_t) (.) h_{t-1} + z_t (.) hc_t
//   y_t  = V h_t + c
// Canonical parameter order: Uz, Wz, bz, Ur, Wr, br, Uh, Wh, bh, V, c.
struct RecurrentCell {
  Matrix uz, wz;
  Vector bz;
  Matrix ur, wr;
  Vector br;
  Matrix uh, wh;
  Vector bh;
  Matrix v;
  Vector c;

  static RecurrentCell make(int in_dim, int hidden_dim, int out_dim);

  int in_dim() const { return uz.cols(); }
  int hidden_dim() const { return uz.rows(); }
  int out_dim() const { return c.size(); }
  std::size_t param_count() const;

  void init(std::mt19937_64& rng);
};

ParamVector pack_params(const RecurrentCell& cell);
void unpack_params(const ParamVector& p, RecurrentCell& cell);

// stored intermediates of one unroll, for backprop through time
struct GruTrace {
  Vector h0;
  std::vector<Vector> x, z, r, hc, h;  // one entry per step

  int steps() const { return static_cast<int>(x.size()); }
  const Vector& last_h() const { return h.empty() ? h0 : h.back(); }
};

// unroll over inputs from h0; outputs are the per-step readouts
void gru_forward(const RecurrentCell& cell, const std::vector<Vector>& inputs, const Vector& h0,
                 std::vector<Vector>& outputs, Vector& h_final);
void gru_forward_trace(const RecurrentCell& cell, const std::vector<Vector>& inputs,
                       const Vector& h0, GruTrace& trace);

// BPTT over one traced unroll. output_deltas holds dL/dy_t per step (pass an
// empty vector when the loss does not touch the readouts); h_final_delta is
// dL/dh_T for losses that consume the final hidden state.
ParamVector gru_backprop(const RecurrentCell& cell, const GruTrace& trace,
                         const std::vector<Vector>& output_deltas, const Vector& h_final_delta,
                         Vector* input_deltas_unused = nullptr);

// per-step MSE over a set of sequences, mean over sequences/steps/dims
struct SeqSample {
  std::vector<Vector> inputs;
  std::vector<Vector> targets;
};

double gru_seq_loss(const RecurrentCell& cell, const std::vector<SeqSample>& seqs);
ParamVector gru_grad(const RecurrentCell& cell, const std::vector<SeqSample>& seqs,
                     double* loss_out = nullptr);

}  // namespace ampc
