#include <doctest.h>

#include <random>

#include "ampc/meta.hpp"
#include "ampc/metrics.hpp"
#include "test_util.hpp"

using namespace ampc;
using namespace ampc::testutil;

namespace {

Episode make_episode(long id, int len, int s_dim, int a_dim, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  Episode ep;
  ep.descriptor = "test";
  Vector s(s_dim);
  for (double& v : s) v = dist(rng);
  for (int t = 0; t < len; ++t) {
    Transition tr;
    tr.s = s;
    tr.a.resize(a_dim);
    for (double& v : tr.a) v = dist(rng);
    tr.s_next = s;
    for (int d = 0; d < s_dim; ++d) tr.s_next[d] += 0.05 * dist(rng) + 0.1 * tr.a[d % a_dim];
    tr.episode_id = id;
    tr.t = t;
    ep.transitions.push_back(tr);
    s = tr.s_next;
  }
  return ep;
}

DynamicsModel make_model(const ReplayBuffer& buffer, std::uint64_t seed) {
  DynamicsModel m;
  const auto& tr = buffer.episodes().front().transitions.front();
  m.net = Mlp::make(tr.s.size() + tr.a.size(), {8}, tr.s.size());
  std::mt19937_64 rng(seed);
  m.net.init(rng);
  m.norm = Normalizer::fit(buffer.all_transitions());
  return m;
}

}  // namespace

TEST_CASE("replay buffer: segment sampling respects the invariants") {
  ReplayBuffer buffer;
  buffer.add_episode(make_episode(0, 50, 3, 1, 1));
  buffer.add_episode(make_episode(1, 12, 3, 1, 2));  // too short for M+K=16
  buffer.add_episode(make_episode(2, 30, 3, 1, 3));

  const int m = 8, k = 8;
  // episode lengths 50 and 30 admit 35 + 15 positions; episode 1 none
  CHECK(buffer.segment_positions(m, k) == 50);

  std::mt19937_64 rng(7);
  for (int i = 0; i < 500; ++i) {
    const Segment seg = buffer.sample_segment(m, k, rng);
    REQUIRE(seg.adapt.size() == m);
    REQUIRE(seg.eval.size() == k);
    CHECK(seg.adapt.back().t + 1 == seg.eval.front().t);
    CHECK(seg.adapt.front().episode_id == seg.eval.back().episode_id);
    CHECK(seg.episode_id != 1);
  }
}

TEST_CASE("replay buffer: positions within an episode are uniform (chi-square)") {
  ReplayBuffer buffer;
  buffer.add_episode(make_episode(0, 47, 2, 1, 4));  // 47 - 16 + 1 = 32 positions
  const int m = 8, k = 8;
  const int bins = 32;
  REQUIRE(buffer.segment_positions(m, k) == bins);

  std::mt19937_64 rng(11);
  const int n = 10000;
  std::vector<int> counts(bins, 0);
  for (int i = 0; i < n; ++i) {
    const Segment seg = buffer.sample_segment(m, k, rng);
    ++counts[seg.t0 - m];
  }
  double chi2 = 0.0;
  const double expect = static_cast<double>(n) / bins;
  for (int c : counts) chi2 += (c - expect) * (c - expect) / expect;
  // chi-square critical value, 31 dof, significance 0.01
  CHECK(chi2 < 52.191);
}

TEST_CASE("grbal update: psi = 0 returns theta unchanged") {
  ReplayBuffer buffer;
  buffer.add_episode(make_episode(0, 40, 2, 1, 5));
  DynamicsModel model = make_model(buffer, 6);

  MetaParams meta;
  meta.theta = pack_params(model.net);
  meta.psi.assign(meta.theta.size(), 0.0);

  std::mt19937_64 rng(8);
  const Segment seg = buffer.sample_segment(8, 8, rng);
  CHECK(grbal_update(meta, model, seg.adapt) == meta.theta);
}

TEST_CASE("grbal update: zero-residual slice is stationary") {
  ReplayBuffer buffer;
  buffer.add_episode(make_episode(0, 40, 2, 1, 9));
  DynamicsModel model = make_model(buffer, 10);
  // identity statistics keep the normalize/denormalize round trip exact
  model.norm = Normalizer::identity(2, 1);

  std::mt19937_64 rng(11);
  Segment seg = buffer.sample_segment(8, 8, rng);
  // zero states keep s + delta - s exact, so the residual is bitwise zero
  std::vector<Transition> exact(seg.adapt.begin(), seg.adapt.end());
  for (auto& tr : exact) {
    tr.s = {0.0, 0.0};
    tr.s_next = predict(model, model.net, tr.s, tr.a);
  }

  MetaParams meta;
  meta.theta = pack_params(model.net);
  meta.psi.assign(meta.theta.size(), 0.01);
  CHECK(grbal_update(meta, model, exact) == meta.theta);
}

TEST_CASE("grbal update: matches theta - psi (.) finite-difference gradient") {
  ReplayBuffer buffer;
  buffer.add_episode(make_episode(0, 40, 2, 1, 13));
  DynamicsModel model = make_model(buffer, 14);

  MetaParams meta;
  meta.theta = pack_params(model.net);
  std::mt19937_64 rng(15);
  std::uniform_real_distribution<double> dist(0.005, 0.02);
  meta.psi.resize(meta.theta.size());
  for (double& v : meta.psi) v = dist(rng);

  const Segment seg = buffer.sample_segment(8, 8, rng);
  const ParamVector updated = grbal_update(meta, model, seg.adapt);

  Mlp probe = model.net;
  const std::vector<Transition> slice(seg.adapt.begin(), seg.adapt.end());
  const ParamVector fd = fd_grad(
      [&](const ParamVector& p) {
        unpack_params(p, probe);
        return nll_loss(model, probe, slice);
      },
      meta.theta);
  for (std::size_t i = 0; i < updated.size(); ++i) {
    const double expect = meta.theta[i] - meta.psi[i] * fd[i];
    CHECK(std::abs(updated[i] - expect) <= 1e-6 * (std::abs(expect) + 1e-6));
  }

  CHECK_THROWS_AS(grbal_update(meta, model, std::span<const Transition>()), ArgumentError);
}

TEST_CASE("single-step monotonicity: small psi never increases the slice loss") {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    ReplayBuffer buffer;
    buffer.add_episode(make_episode(0, 30, 2, 1, seed * 3));
    DynamicsModel model = make_model(buffer, seed * 3 + 1);

    MetaParams meta;
    meta.theta = pack_params(model.net);
    meta.psi.assign(meta.theta.size(), 1e-4);

    std::mt19937_64 rng(seed);
    const Segment seg = buffer.sample_segment(8, 8, rng);
    const double before = nll_loss(model, meta.theta, seg.adapt);
    const double after = nll_loss(model, grbal_update(meta, model, seg.adapt), seg.adapt);
    CHECK(after <= before);
  }
}

TEST_CASE("rebal update: context of the zero-weight cell matches the scalar reference") {
  RecurrentDynamicsModel rm;
  rm.cell = RecurrentCell::make(5, 3, 3);
  rm.head = Mlp::make(2 + 1 + 3, {4}, 2);
  rm.norm = Normalizer::identity(2, 1);

  Episode ep = make_episode(0, 6, 2, 1, 21);
  // zero weights: z = r = 1/2, candidate = 0, h <- h/2 from h0 = 0 stays 0
  const Vector ctx = rebal_update(rm, rm.cell, ep.transitions);
  CHECK(ctx == Vector(3, 0.0));

  CHECK_THROWS_AS(rebal_update(rm, rm.cell, std::span<const Transition>()), ArgumentError);
}

TEST_CASE("rebal update: matches an independent reference unroll") {
  RecurrentDynamicsModel rm;
  rm.cell = RecurrentCell::make(5, 3, 3);
  rm.head = Mlp::make(2 + 1 + 3, {4}, 2);
  std::mt19937_64 rng(22);
  rm.cell.init(rng);
  Episode ep = make_episode(0, 8, 2, 1, 23);
  rm.norm = Normalizer::fit(ep.transitions);

  const Vector got = rebal_update(rm, rm.cell, ep.transitions);

  // reference: explicit unroll over normalized (s, a, delta) tuples
  Vector h(3, 0.0);
  for (const auto& tr : ep.transitions) {
    Vector delta(2);
    for (int i = 0; i < 2; ++i) delta[i] = tr.s_next[i] - tr.s[i];
    Vector x = concat(rm.norm.norm_s(tr.s), rm.norm.norm_a(tr.a));
    const Vector nd = rm.norm.norm_delta(delta);
    x.insert(x.end(), nd.begin(), nd.end());
    std::vector<Vector> ys;
    Vector h_next;
    gru_forward(rm.cell, {x}, h, ys, h_next);
    h = h_next;
  }
  for (int i = 0; i < 3; ++i) CHECK(got[i] == doctest::Approx(h[i]).epsilon(1e-14));

  // M identical tuples differ from the single tuple unless the cell is a
  // one-step fixed point; both are computed by the same reference
  std::vector<Transition> repeated(5, ep.transitions[0]);
  for (int i = 0; i < 5; ++i) repeated[i].t = i;
  const Vector multi = rebal_update(rm, rm.cell, repeated);
  const Vector single = rebal_update(rm, rm.cell, std::span<const Transition>(&ep.transitions[0], 1));
  CHECK(multi != single);
}

TEST_CASE("meta loss: psi = 0 reduces exactly to the non-adaptive segment loss") {
  ReplayBuffer buffer;
  buffer.add_episode(make_episode(0, 60, 2, 1, 31));
  DynamicsModel model = make_model(buffer, 32);

  MetaParams meta;
  meta.theta = pack_params(model.net);
  meta.psi.assign(meta.theta.size(), 0.0);

  std::mt19937_64 rng(33);
  std::vector<Segment> segs;
  for (int i = 0; i < 5; ++i) segs.push_back(buffer.sample_segment(8, 8, rng));

  const double adaptive = meta_loss(meta, model, segs, Variant::grbal);
  const double plain = meta_loss(meta, model, segs, Variant::mb);
  CHECK(adaptive == plain);
}

TEST_CASE("meta loss: single segment with perfect adapted prediction is zero") {
  ReplayBuffer buffer;
  buffer.add_episode(make_episode(0, 40, 2, 1, 41));
  DynamicsModel model = make_model(buffer, 42);

  std::mt19937_64 rng(43);
  Segment seg = buffer.sample_segment(8, 8, rng);
  std::vector<Transition> adapt(seg.adapt.begin(), seg.adapt.end());
  std::vector<Transition> eval(seg.eval.begin(), seg.eval.end());
  for (auto& tr : adapt) tr.s_next = predict(model, model.net, tr.s, tr.a);
  for (auto& tr : eval) tr.s_next = predict(model, model.net, tr.s, tr.a);
  Segment exact;
  exact.adapt = adapt;
  exact.eval = eval;
  exact.episode_id = seg.episode_id;
  exact.t0 = seg.t0;

  MetaParams meta;
  meta.theta = pack_params(model.net);
  meta.psi.assign(meta.theta.size(), 0.01);
  CHECK(meta_loss(meta, model, std::vector<Segment>{exact}, Variant::grbal) ==
        doctest::Approx(0.0));
}

TEST_CASE("meta loss: mean of per-segment losses") {
  ReplayBuffer buffer;
  buffer.add_episode(make_episode(0, 60, 2, 1, 51));
  DynamicsModel model = make_model(buffer, 52);

  MetaParams meta;
  meta.theta = pack_params(model.net);
  meta.psi.assign(meta.theta.size(), 0.01);

  std::mt19937_64 rng(53);
  std::vector<Segment> segs{buffer.sample_segment(8, 8, rng), buffer.sample_segment(8, 8, rng)};
  const double both = meta_loss(meta, model, segs, Variant::grbal);
  const double a = meta_loss(meta, model, std::vector<Segment>{segs[0]}, Variant::grbal);
  const double b = meta_loss(meta, model, std::vector<Segment>{segs[1]}, Variant::grbal);
  CHECK(both == doctest::Approx(0.5 * (a + b)).epsilon(1e-12));
}

TEST_CASE("meta loss: malformed segment named in the error") {
  ReplayBuffer buffer;
  buffer.add_episode(make_episode(0, 40, 2, 1, 61));
  DynamicsModel model = make_model(buffer, 62);
  MetaParams meta;
  meta.theta = pack_params(model.net);
  meta.psi.assign(meta.theta.size(), 0.01);

  std::mt19937_64 rng(63);
  Segment good = buffer.sample_segment(8, 8, rng);
  Segment bad = good;
  bad.eval = std::span<const Transition>(good.eval.data() + 1, good.eval.size() - 1);  // gap
  try {
    meta_loss(meta, model, std::vector<Segment>{good, bad}, Variant::grbal);
    FAIL("expected ArgumentError");
  } catch (const ArgumentError& e) {
    CHECK(std::string(e.what()).find("segment 1") != std::string::npos);
  }
}

TEST_CASE("meta train step: zero learning rates leave the parameters unchanged") {
  ReplayBuffer buffer;
  buffer.add_episode(make_episode(0, 60, 2, 1, 71));
  DynamicsModel model = make_model(buffer, 72);

  TrainConfig cfg;
  cfg.m = 8;
  cfg.k = 8;
  cfg.meta_batch = 4;
  cfg.outer_lr = 0.0;
  cfg.psi_lr = 0.0;

  MetaParams meta;
  meta.theta = pack_params(model.net);
  meta.psi.assign(meta.theta.size(), 0.01);
  const MetaParams before = meta;

  std::mt19937_64 rng(73);
  meta_train_step(meta, model, buffer, cfg, rng);
  CHECK(meta.theta == before.theta);
  CHECK(meta.psi == before.psi);
}

TEST_CASE("meta train step: single-segment buffer reduces to the meta gradient") {
  ReplayBuffer buffer;
  buffer.add_episode(make_episode(0, 16, 2, 1, 81));  // exactly one legal segment
  DynamicsModel model = make_model(buffer, 82);
  REQUIRE(buffer.segment_positions(8, 8) == 1);

  TrainConfig cfg;
  cfg.m = 8;
  cfg.k = 8;
  cfg.meta_batch = 1;
  cfg.outer_lr = 0.1;
  cfg.psi_lr = 0.05;

  MetaParams meta;
  meta.theta = pack_params(model.net);
  meta.psi.assign(meta.theta.size(), 0.01);
  const MetaParams before = meta;

  std::mt19937_64 rng(83);
  meta_train_step(meta, model, buffer, cfg, rng);

  const auto segs = buffer.all_segments(8, 8);
  const Batch inner = to_training_batch(model.norm, segs[0].adapt);
  const Batch outer = to_training_batch(model.norm, segs[0].eval);
  Mlp net = model.net;
  unpack_params(before.theta, net);
  const MetaGradResult r = mlp_grad_through_update(net, inner, outer, before.psi);
  for (std::size_t i = 0; i < meta.theta.size(); ++i) {
    CHECK(meta.theta[i] == doctest::Approx(before.theta[i] - 0.1 * r.grad_theta[i]).epsilon(1e-12));
    CHECK(meta.psi[i] == doctest::Approx(before.psi[i] - 0.05 * r.grad_psi[i]).epsilon(1e-12));
  }
}

TEST_CASE("meta train step: insufficient data reports required segment length") {
  ReplayBuffer buffer;
  buffer.add_episode(make_episode(0, 10, 2, 1, 91));
  DynamicsModel model = make_model(buffer, 92);
  TrainConfig cfg;
  cfg.m = 8;
  cfg.k = 8;
  MetaParams meta;
  meta.theta = pack_params(model.net);
  meta.psi.assign(meta.theta.size(), 0.01);
  std::mt19937_64 rng(93);
  CHECK_THROWS_AS(meta_train_step(meta, model, buffer, cfg, rng), DataError);
}

TEST_CASE("meta train step: loss decreases on a synthetic two-mode linear system") {
  // two interleaved linear dynamics (the hidden mode flips the action gain);
  // adaptation from the recent slice should drive the loss down over steps
  ReplayBuffer buffer;
  std::mt19937_64 gen(101);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  for (int epi = 0; epi < 6; ++epi) {
    const double gain = epi % 2 == 0 ? 0.3 : -0.3;
    Episode ep;
    ep.descriptor = "mode";
    Vector s{dist(gen)};
    for (int t = 0; t < 60; ++t) {
      Transition tr;
      tr.s = s;
      tr.a = {dist(gen)};
      tr.s_next = {0.9 * s[0] + gain * tr.a[0] + 0.001 * dist(gen)};
      tr.episode_id = epi;
      tr.t = t;
      ep.transitions.push_back(tr);
      s = tr.s_next;
    }
    buffer.add_episode(std::move(ep));
  }

  DynamicsModel model;
  model.net = Mlp::make(2, {16}, 1);
  std::mt19937_64 rng(102);
  model.net.init(rng);
  model.norm = Normalizer::fit(buffer.all_transitions());

  TrainConfig cfg;
  cfg.m = 8;
  cfg.k = 8;
  cfg.meta_batch = 8;
  cfg.outer_lr = 0.01;
  cfg.psi_lr = 0.01;
  cfg.inner_lr = 0.01;

  MetaParams meta;
  meta.theta = pack_params(model.net);
  meta.psi.assign(meta.theta.size(), cfg.inner_lr);

  std::mt19937_64 srng(103);
  double first = 0.0, last = 0.0;
  for (int step = 0; step < 200; ++step) {
    const MetaStepReport rep = meta_train_step(meta, model, buffer, cfg, srng);
    if (step == 0) first = rep.meta_loss;
    if (step == 199) last = rep.meta_loss;
  }
  CHECK(last < 0.5 * first);
}

TEST_CASE("deterministic meta training: same seed, same parameters") {
  ReplayBuffer buffer;
  buffer.add_episode(make_episode(0, 60, 2, 1, 111));
  DynamicsModel model = make_model(buffer, 112);
  TrainConfig cfg;
  cfg.m = 8;
  cfg.k = 8;
  cfg.meta_batch = 4;

  auto run = [&]() {
    MetaParams meta;
    meta.theta = pack_params(model.net);
    meta.psi.assign(meta.theta.size(), 0.01);
    std::mt19937_64 rng(7);
    for (int i = 0; i < 20; ++i) meta_train_step(meta, model, buffer, cfg, rng);
    return meta;
  };
  const MetaParams a = run(), b = run();
  CHECK(a.theta == b.theta);
  CHECK(a.psi == b.psi);
}
