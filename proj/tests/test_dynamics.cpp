#include <doctest.h>

#include <random>
#include <sstream>

#include "ampc/dynamics.hpp"
#include "test_util.hpp"

using namespace ampc;
using namespace ampc::testutil;

namespace {

std::vector<Transition> seeded_transitions(int n, int s_dim, int a_dim, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  std::vector<Transition> out;
  for (int i = 0; i < n; ++i) {
    Transition tr;
    tr.s.resize(s_dim);
    tr.a.resize(a_dim);
    tr.s_next.resize(s_dim);
    for (double& v : tr.s) v = dist(rng);
    for (double& v : tr.a) v = dist(rng);
    for (int d = 0; d < s_dim; ++d) tr.s_next[d] = tr.s[d] + 0.1 * dist(rng);
    tr.episode_id = 0;
    tr.t = i;
    out.push_back(std::move(tr));
  }
  return out;
}

DynamicsModel seeded_model(int s_dim, int a_dim, std::uint64_t seed) {
  DynamicsModel m;
  m.net = Mlp::make(s_dim + a_dim, {8}, s_dim);
  std::mt19937_64 rng(seed);
  m.net.init(rng);
  m.norm = Normalizer::identity(s_dim, a_dim);
  return m;
}

}  // namespace

TEST_CASE("normalizer: identical transitions floor the std") {
  std::vector<Transition> data(3);
  for (int i = 0; i < 3; ++i) {
    data[i].s = {1.0, 2.0};
    data[i].a = {0.5};
    data[i].s_next = {1.5, 2.5};
    data[i].t = i;
  }
  const Normalizer n = Normalizer::fit(data);
  for (double v : n.s_std) CHECK(v == Normalizer::kStdFloor);
  for (double v : n.a_std) CHECK(v == Normalizer::kStdFloor);
  for (double v : n.d_std) CHECK(v == Normalizer::kStdFloor);
  CHECK(n.s_mean[0] == doctest::Approx(1.0));
  CHECK(n.d_mean[0] == doctest::Approx(0.5));
}

TEST_CASE("normalizer: two-point dataset matches hand-computed statistics") {
  std::vector<Transition> data(2);
  data[0].s = {0.0};
  data[0].a = {1.0};
  data[0].s_next = {2.0};
  data[1].s = {4.0};
  data[1].a = {-1.0};
  data[1].s_next = {3.0};
  data[1].t = 1;
  const Normalizer n = Normalizer::fit(data);
  // population std of {0,4} is 2, of deltas {2,-1} is 1.5
  CHECK(n.s_mean[0] == doctest::Approx(2.0));
  CHECK(n.s_std[0] == doctest::Approx(2.0));
  CHECK(n.a_std[0] == doctest::Approx(1.0));
  CHECK(n.d_mean[0] == doctest::Approx(0.5));
  CHECK(n.d_std[0] == doctest::Approx(1.5));
}

TEST_CASE("normalizer: normalized data has mean 0 and std 1") {
  const auto data = seeded_transitions(200, 3, 2, 5);
  const Normalizer n = Normalizer::fit(data);
  Vector acc(3, 0.0), acc2(3, 0.0);
  for (const auto& tr : data) {
    const Vector z = n.norm_s(tr.s);
    for (int d = 0; d < 3; ++d) {
      acc[d] += z[d];
      acc2[d] += z[d] * z[d];
    }
  }
  for (int d = 0; d < 3; ++d) {
    const double mu = acc[d] / data.size();
    const double var = acc2[d] / data.size() - mu * mu;
    CHECK(std::abs(mu) < 1e-8);
    CHECK(std::abs(std::sqrt(var) - 1.0) < 1e-8);
  }
}

TEST_CASE("normalizer: denormalize inverts normalize") {
  const auto data = seeded_transitions(50, 2, 1, 7);
  const Normalizer n = Normalizer::fit(data);
  const Vector d{0.37, -0.82};
  const Vector round = n.denorm_delta(n.norm_delta(d));
  for (int i = 0; i < 2; ++i) CHECK(std::abs(round[i] - d[i]) < 1e-10);
}

TEST_CASE("normalizer: refit on the same dataset is idempotent") {
  const auto data = seeded_transitions(60, 2, 1, 11);
  const Normalizer a = Normalizer::fit(data);
  const Normalizer b = Normalizer::fit(data);
  CHECK(a.s_mean == b.s_mean);
  CHECK(a.s_std == b.s_std);
  CHECK(a.d_std == b.d_std);
}

TEST_CASE("normalizer: rejects tiny datasets") {
  CHECK_THROWS_AS(Normalizer::fit(std::vector<Transition>(1)), ArgumentError);
}

TEST_CASE("predict: zero net yields s plus the delta mean") {
  DynamicsModel m;
  m.net = Mlp::make(3, {4}, 2);  // all-zero weights
  m.norm = Normalizer::identity(2, 1);
  m.norm.d_mean = {0.3, -0.1};
  const Vector s{1.0, 2.0};
  const Vector out = predict(m, m.net, s, {0.5});
  CHECK(out[0] == doctest::Approx(1.3));
  CHECK(out[1] == doctest::Approx(1.9));
}

TEST_CASE("predict: identity normalizer and zero net leave the state unchanged") {
  DynamicsModel m;
  m.net = Mlp::make(3, {4}, 2);
  m.norm = Normalizer::identity(2, 1);
  const Vector s{0.7, -0.4};
  CHECK(predict(m, m.net, s, {0.0}) == s);
}

TEST_CASE("predict: matches the scalar reference pipeline on a seeded net") {
  DynamicsModel m = seeded_model(2, 1, 3);
  auto data = seeded_transitions(30, 2, 1, 4);
  m.norm = Normalizer::fit(data);
  const Vector s{0.3, -0.6};
  const Vector a{0.25};
  // reference: explicit normalize -> forward -> denormalize -> add
  Vector x(3);
  for (int i = 0; i < 2; ++i) x[i] = (s[i] - m.norm.s_mean[i]) / m.norm.s_std[i];
  x[2] = (a[0] - m.norm.a_mean[0]) / m.norm.a_std[0];
  Vector y;
  mlp_forward(m.net, x, y);
  Vector expect(2);
  for (int i = 0; i < 2; ++i) expect[i] = s[i] + y[i] * m.norm.d_std[i] + m.norm.d_mean[i];
  const Vector got = predict(m, m.net, s, a);
  for (int i = 0; i < 2; ++i) CHECK(got[i] == doctest::Approx(expect[i]).epsilon(1e-14));
}

TEST_CASE("predict: non-finite input rejected") {
  DynamicsModel m = seeded_model(2, 1, 9);
  CHECK_THROWS_AS(predict(m, m.net, {std::nan(""), 0.0}, {0.1}), ArgumentError);
}

TEST_CASE("nll_loss: perfect predictions give zero") {
  DynamicsModel m = seeded_model(2, 1, 13);
  auto data = seeded_transitions(10, 2, 1, 14);
  for (auto& tr : data) tr.s_next = predict(m, m.net, tr.s, tr.a);
  CHECK(nll_loss(m, m.net, data) == doctest::Approx(0.0));
}

TEST_CASE("nll_loss: unit residual in every normalized dim gives 1") {
  DynamicsModel m;
  m.net = Mlp::make(3, {}, 2);  // zero net predicts normalized delta 0
  m.norm = Normalizer::identity(2, 1);
  Transition tr;
  tr.s = {0.0, 0.0};
  tr.a = {0.0};
  tr.s_next = {1.0, 1.0};  // normalized delta target = (1, 1)
  CHECK(nll_loss(m, m.net, std::vector<Transition>{tr}) == doctest::Approx(1.0));
}

TEST_CASE("nll_loss: matches brute-force accumulation") {
  DynamicsModel m = seeded_model(2, 2, 15);
  auto data = seeded_transitions(12, 2, 2, 16);
  m.norm = Normalizer::fit(data);
  double acc = 0.0;
  for (const auto& tr : data) {
    Vector x = concat(m.norm.norm_s(tr.s), m.norm.norm_a(tr.a));
    Vector y;
    mlp_forward(m.net, x, y);
    Vector target(2);
    for (int i = 0; i < 2; ++i) target[i] = (tr.s_next[i] - tr.s[i] - m.norm.d_mean[i]) / m.norm.d_std[i];
    for (int i = 0; i < 2; ++i) acc += (y[i] - target[i]) * (y[i] - target[i]);
  }
  acc /= 12 * 2;
  CHECK(nll_loss(m, m.net, data) == doctest::Approx(acc).epsilon(1e-12));
  CHECK_THROWS_AS(nll_loss(m, m.net, std::vector<Transition>{}), ArgumentError);
}

TEST_CASE("rollout: zero net with identity normalizer holds the state constant") {
  DynamicsModel m;
  m.net = Mlp::make(3, {4}, 2);
  m.norm = Normalizer::identity(2, 1);
  const Vector s0{0.2, -0.9};
  const auto states = rollout(m, m.net, s0, std::vector<Vector>(5, Vector{0.3}));
  CHECK(states.size() == 6);
  for (const auto& s : states) CHECK(s == s0);
}

TEST_CASE("rollout: H=1 equals a single predict, H=3 equals chained predicts") {
  DynamicsModel m = seeded_model(2, 1, 21);
  auto data = seeded_transitions(40, 2, 1, 22);
  m.norm = Normalizer::fit(data);
  const Vector s0{0.1, 0.2};
  const std::vector<Vector> acts{{0.5}, {-0.5}, {0.25}};

  const auto one = rollout(m, m.net, s0, {acts[0]});
  CHECK(one[1] == predict(m, m.net, s0, acts[0]));

  const auto three = rollout(m, m.net, s0, acts);
  Vector s = s0;
  for (int i = 0; i < 3; ++i) s = predict(m, m.net, s, acts[i]);
  CHECK(three[3] == s);
}

TEST_CASE("rollout: composition splits exactly") {
  DynamicsModel m = seeded_model(2, 1, 31);
  auto data = seeded_transitions(40, 2, 1, 32);
  m.norm = Normalizer::fit(data);
  const Vector s0{0.05, -0.1};
  std::vector<Vector> acts;
  std::mt19937_64 rng(33);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  for (int i = 0; i < 6; ++i) acts.push_back({dist(rng)});

  const auto whole = rollout(m, m.net, s0, acts);
  const std::vector<Vector> first(acts.begin(), acts.begin() + 2);
  const std::vector<Vector> rest(acts.begin() + 2, acts.end());
  const auto part1 = rollout(m, m.net, s0, first);
  const auto part2 = rollout(m, m.net, part1.back(), rest);
  CHECK(whole.back() == part2.back());
}

TEST_CASE("delta parameterization: prediction minus state depends on s only through the input") {
  DynamicsModel m = seeded_model(2, 1, 41);
  // with d_std scaled, the delta for equal normalized inputs is equal
  m.norm = Normalizer::identity(2, 1);
  const Vector a{0.3};
  const Vector s1{0.5, -0.5}, s2{0.5, -0.5};
  const Vector p1 = predict(m, m.net, s1, a), p2 = predict(m, m.net, s2, a);
  CHECK(p1[0] - s1[0] == p2[0] - s2[0]);
  CHECK(p1[1] - s1[1] == p2[1] - s2[1]);
}

TEST_CASE("nll gradient matches finite differences through the normalizer") {
  DynamicsModel m = seeded_model(2, 1, 51);
  auto data = seeded_transitions(8, 2, 1, 52);
  m.norm = Normalizer::fit(data);
  const Batch batch = to_training_batch(m.norm, data);
  const ParamVector analytic = mlp_grad(m.net, batch);
  Mlp probe = m.net;
  const ParamVector fd = fd_grad(
      [&](const ParamVector& p) {
        unpack_params(p, probe);
        return nll_loss(m, probe, data);
      },
      pack_params(m.net));
  require_grad_close(analytic, fd, 1e-6);
}

TEST_CASE("transitions round-trip through newline-delimited JSON") {
  const auto data = seeded_transitions(7, 3, 2, 61);
  std::stringstream ss;
  save_transitions_ndjson(ss, data);
  const auto back = load_transitions_ndjson(ss);
  REQUIRE(back.size() == data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    CHECK(back[i].s == data[i].s);
    CHECK(back[i].a == data[i].a);
    CHECK(back[i].s_next == data[i].s_next);
    CHECK(back[i].episode_id == data[i].episode_id);
    CHECK(back[i].t == data[i].t);
  }
}

TEST_CASE("recurrent model: context inputs and conditioned prediction") {
  RecurrentDynamicsModel rm;
  rm.cell = RecurrentCell::make(5, 3, 2);  // 2*2+1 inputs
  rm.head = Mlp::make(2 + 1 + 3, {6}, 2);
  rm.norm = Normalizer::identity(2, 1);
  std::mt19937_64 rng(71);
  rm.cell.init(rng);
  rm.head.init(rng);

  const auto data = seeded_transitions(6, 2, 1, 72);
  const auto inputs = context_inputs(rm.norm, data);
  REQUIRE(inputs.size() == 6);
  CHECK(inputs[0].size() == 5);

  const Vector ctx(3, 0.25);
  const Vector s{0.1, 0.2};
  const Vector out = predict_ctx(rm, rm.head, ctx, s, {0.5});
  CHECK(out.size() == 2);
  CHECK(all_finite(out));

  // zero context vs nonzero context give different predictions in general
  const Vector out0 = predict_ctx(rm, rm.head, rm.zero_context(), s, {0.5});
  CHECK(out != out0);
}
