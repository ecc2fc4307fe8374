#include <doctest.h>

#include <random>

#include "ampc/gru.hpp"
#include "test_util.hpp"

using namespace ampc;
using namespace ampc::testutil;

namespace {

RecurrentCell seeded_cell(int in, int hidden, int out, std::uint64_t seed) {
  RecurrentCell cell = RecurrentCell::make(in, hidden, out);
  std::mt19937_64 rng(seed);
  cell.init(rng);
  std::uniform_real_distribution<double> dist(-0.2, 0.2);
  for (Vector* b : {&cell.bz, &cell.br, &cell.bh, &cell.c}) {
    for (double& v : *b) v = dist(rng);
  }
  return cell;
}

std::vector<Vector> seeded_inputs(int n, int dim, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  std::vector<Vector> xs(n, Vector(dim));
  for (auto& x : xs) {
    for (double& v : x) v = dist(rng);
  }
  return xs;
}

// scalar-loop reference unroll, independent of the production code path
void reference_unroll(const RecurrentCell& cell, const std::vector<Vector>& inputs, Vector h,
                      std::vector<Vector>& ys, Vector& h_out) {
  const int hd = cell.hidden_dim();
  auto mat = [&](const Matrix& m, const Vector& v) {
    Vector out(m.rows(), 0.0);
    for (int r = 0; r < m.rows(); ++r) {
      for (int c = 0; c < m.cols(); ++c) out[r] += m(r, c) * v[c];
    }
    return out;
  };
  ys.clear();
  for (const Vector& x : inputs) {
    Vector z = mat(cell.uz, x), r = mat(cell.ur, x);
    const Vector zh = mat(cell.wz, h), rh = mat(cell.wr, h);
    for (int i = 0; i < hd; ++i) z[i] = 1.0 / (1.0 + std::exp(-(z[i] + zh[i] + cell.bz[i])));
    for (int i = 0; i < hd; ++i) r[i] = 1.0 / (1.0 + std::exp(-(r[i] + rh[i] + cell.br[i])));
    Vector gated(hd);
    for (int i = 0; i < hd; ++i) gated[i] = r[i] * h[i];
    Vector hc = mat(cell.uh, x);
    const Vector hh = mat(cell.wh, gated);
    for (int i = 0; i < hd; ++i) hc[i] = std::tanh(hc[i] + hh[i] + cell.bh[i]);
    for (int i = 0; i < hd; ++i) h[i] = (1.0 - z[i]) * h[i] + z[i] * hc[i];
    Vector y = mat(cell.v, h);
    for (std::size_t i = 0; i < y.size(); ++i) y[i] += cell.c[i];
    ys.push_back(y);
  }
  h_out = h;
}

}  // namespace

TEST_CASE("gru forward: empty sequence returns h0 untouched") {
  RecurrentCell cell = seeded_cell(3, 4, 2, 1);
  std::vector<Vector> outputs;
  Vector h_final;
  const Vector h0{0.1, -0.2, 0.3, 0.0};
  gru_forward(cell, {}, h0, outputs, h_final);
  CHECK(outputs.empty());
  CHECK(h_final == h0);
}

TEST_CASE("gru forward: zero weights emit the readout bias at every step") {
  RecurrentCell cell = RecurrentCell::make(3, 4, 2);
  cell.c = {0.5, -1.5};
  std::vector<Vector> outputs;
  Vector h_final;
  gru_forward(cell, seeded_inputs(5, 3, 2), Vector(4, 0.0), outputs, h_final);
  for (const auto& y : outputs) {
    CHECK(y[0] == 0.5);
    CHECK(y[1] == -1.5);
  }
}

TEST_CASE("gru forward: 2-step unroll matches the scalar reference") {
  RecurrentCell cell = seeded_cell(3, 5, 2, 7);
  const auto inputs = seeded_inputs(2, 3, 8);
  std::vector<Vector> outputs, ref_outputs;
  Vector h_final, ref_h;
  gru_forward(cell, inputs, Vector(5, 0.0), outputs, h_final);
  reference_unroll(cell, inputs, Vector(5, 0.0), ref_outputs, ref_h);
  for (std::size_t t = 0; t < outputs.size(); ++t) {
    for (std::size_t i = 0; i < outputs[t].size(); ++i) {
      CHECK(outputs[t][i] == doctest::Approx(ref_outputs[t][i]).epsilon(1e-14));
    }
  }
  for (std::size_t i = 0; i < h_final.size(); ++i) {
    CHECK(h_final[i] == doctest::Approx(ref_h[i]).epsilon(1e-14));
  }
}

TEST_CASE("gru forward: input dimension mismatch throws") {
  RecurrentCell cell = seeded_cell(3, 4, 2, 3);
  std::vector<Vector> outputs;
  Vector h_final;
  CHECK_THROWS_AS(gru_forward(cell, {Vector{1.0, 2.0}}, Vector(4, 0.0), outputs, h_final),
                  DimensionError);
}

TEST_CASE("gru grad: zero-residual sequence gives zero gradient") {
  RecurrentCell cell = seeded_cell(2, 4, 2, 17);
  SeqSample seq;
  seq.inputs = seeded_inputs(3, 2, 18);
  std::vector<Vector> outputs;
  Vector h_final;
  gru_forward(cell, seq.inputs, Vector(4, 0.0), outputs, h_final);
  seq.targets = outputs;
  const ParamVector g = gru_grad(cell, {seq});
  for (double v : g) CHECK(v == 0.0);
}

TEST_CASE("gru grad: 3-step sequence matches finite differences") {
  RecurrentCell cell = seeded_cell(2, 4, 2, 23);
  SeqSample seq;
  seq.inputs = seeded_inputs(3, 2, 24);
  std::mt19937_64 rng(25);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  seq.targets.assign(3, Vector(2));
  for (auto& t : seq.targets) {
    for (double& v : t) v = dist(rng);
  }
  const ParamVector analytic = gru_grad(cell, {seq});
  RecurrentCell probe = cell;
  const ParamVector fd = fd_grad(
      [&](const ParamVector& p) {
        unpack_params(p, probe);
        return gru_seq_loss(probe, {seq});
      },
      pack_params(cell));
  require_grad_close(analytic, fd, 1e-5);
}

TEST_CASE("gru grad: single-step sequence reduces to the one-step readout MSE") {
  RecurrentCell cell = seeded_cell(2, 3, 2, 31);
  SeqSample seq;
  seq.inputs = seeded_inputs(1, 2, 32);
  seq.targets = {Vector{0.4, -0.6}};
  const ParamVector analytic = gru_grad(cell, {seq});
  // feedforward oracle: y = V h_1(x) + c with loss (1/D)||y - t||^2
  RecurrentCell probe = cell;
  const ParamVector fd = fd_grad(
      [&](const ParamVector& p) {
        unpack_params(p, probe);
        std::vector<Vector> ys;
        Vector hf;
        gru_forward(probe, seq.inputs, Vector(3, 0.0), ys, hf);
        double acc = 0.0;
        for (std::size_t i = 0; i < ys[0].size(); ++i) {
          const double r = ys[0][i] - seq.targets[0][i];
          acc += r * r;
        }
        return acc / 2.0;
      },
      pack_params(cell));
  require_grad_close(analytic, fd, 1e-5);
}

TEST_CASE("gru backprop: terminal hidden-state delta matches finite differences") {
  // this is the path the recurrence-based learner trains through
  RecurrentCell cell = seeded_cell(3, 4, 2, 41);
  const auto inputs = seeded_inputs(4, 3, 42);
  Vector weight{0.7, -0.3, 0.5, 0.2};  // fixed linear functional of h_T

  GruTrace trace;
  gru_forward_trace(cell, inputs, Vector(4, 0.0), trace);
  const ParamVector analytic = gru_backprop(cell, trace, {}, weight);

  RecurrentCell probe = cell;
  const ParamVector fd = fd_grad(
      [&](const ParamVector& p) {
        unpack_params(p, probe);
        std::vector<Vector> ys;
        Vector hf;
        gru_forward(probe, inputs, Vector(4, 0.0), ys, hf);
        return dot(weight, hf);
      },
      pack_params(cell));
  require_grad_close(analytic, fd, 1e-5);
}

TEST_CASE("gru pack/unpack round-trips exactly") {
  RecurrentCell cell = seeded_cell(3, 4, 2, 51);
  const ParamVector p = pack_params(cell);
  RecurrentCell other = RecurrentCell::make(3, 4, 2);
  unpack_params(p, other);
  CHECK(pack_params(other) == p);
  CHECK(p.size() == cell.param_count());
}
