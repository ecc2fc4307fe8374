#include "ampc/envs.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>

#include "ampc/errors.hpp"

namespace ampc {

std::string family_name(Family f) {
  switch (f) {
    case Family::planar_hopper: return "planar_hopper";
    case Family::slope_car: return "slope_car";
    case Family::reacher_2link: return "reacher_2link";
    case Family::payload_cart: return "payload_cart";
  }
  return "?";
}

Family family_from_name(const std::string& name) {
  if (name == "planar_hopper") return Family::planar_hopper;
  if (name == "slope_car") return Family::slope_car;
  if (name == "reacher_2link") return Family::reacher_2link;
  if (name == "payload_cart") return Family::payload_cart;
  throw ConfigError("unknown environment family '" + name + "'");
}

Vector Env::reset() {
  t_ = 0;
  clip_warnings_ = 0;
  faulted_ = false;
  apply_switches();
  state_ = initial_state(rng_, init_noise_);
  return state_;
}

void Env::apply_switches() {
  for (const auto& [when, cfg] : switches_) {
    if (when == t_) config_ = cfg;
  }
}

StepResult Env::step(const Vector& action) {
  check_length(action, static_cast<std::size_t>(action_dim()), "action");
  if (faulted_) throw ArgumentError("env: step after fault; reset required");

  Vector a = action;
  bool clipped = false;
  for (double& v : a) {
    if (v < -1.0 || v > 1.0) {
      v = std::clamp(v, -1.0, 1.0);
      clipped = true;
    }
  }
  if (clipped && clip_warnings_++ == 0) {
    std::cerr << "[env] warning: action outside [-1,1], clipping\n";
  }

  apply_switches();
  StepResult res;
  res.s_next = integrate(state_, a);
  if (process_noise_ > 0.0) {
    std::normal_distribution<double> noise(0.0, process_noise_);
    for (int i : noise_dims()) res.s_next[i] += noise(rng_);
    repair_state(res.s_next);
  }
  if (!all_finite(res.s_next)) {
    res.fault = true;
    res.done = true;
    faulted_ = true;
    res.reward = 0.0;
    return res;
  }
  res.reward = reward(state_, a, res.s_next);
  state_ = res.s_next;
  ++t_;
  return res;
}

Vector ConfigSampler::sample(std::mt19937_64& rng) const {
  if (!choices.empty()) {
    std::uniform_int_distribution<std::size_t> pick(0, choices.size() - 1);
    return choices[pick(rng)];
  }
  validate();
  Vector out(lo.size());
  for (std::size_t i = 0; i < lo.size(); ++i) {
    if (hi[i] == lo[i]) {
      out[i] = lo[i];
    } else {
      std::uniform_real_distribution<double> dist(lo[i], hi[i]);
      out[i] = dist(rng);
    }
  }
  return out;
}

void ConfigSampler::validate() const {
  if (choices.empty()) {
    if (lo.empty() || lo.size() != hi.size()) {
      throw ConfigError("config sampler: empty range");
    }
    for (std::size_t i = 0; i < lo.size(); ++i) {
      if (hi[i] < lo[i]) throw ConfigError("config sampler: hi < lo");
    }
  }
}

namespace {

constexpr double kGravity = 9.81;

// ---------------------------------------------------------------------------
// Planar hopper: a rigid body with two thrusters canted either side of the
// body axis (thruster 0 pushes up-forward, thruster 1 up-backward), so
// differential thrust gives immediate forward force while combined thrust
// carries the weight. Thrust also torques the body; ground contact is a
// stiff spring-damper with smooth friction plus a righting spring. Config:
// [crippled actuator index] with -1 = healthy. A crippled thruster produces
// no force at all, so its action coordinate has exactly zero effect.
// state: (x, z, phi, vx, vz, omega)
class PlanarHopperEnv final : public Env {
 public:
  using Env::Env;

  static constexpr double kDt = 0.01;
  static constexpr int kSubsteps = 4;
  static constexpr double kMass = 1.0;
  static constexpr double kInertia = 0.1;
  static constexpr double kThrust = 9.0;  // per actuator
  static constexpr double kCant = 0.6;    // thruster cant angle, rad
  static constexpr double kLever = 0.25;
  static constexpr double kGroundK = 120.0;
  static constexpr double kGroundC = 8.0;
  static constexpr double kFriction = 0.3;
  static constexpr double kAngDamp = 0.3;
  static constexpr double kRightK = 3.0;  // contact righting spring

  int state_dim() const override { return 6; }
  int action_dim() const override { return 2; }
  std::string family() const override { return "planar_hopper"; }
  double dt() const override { return kDt; }

  double reward(const Vector& s, const Vector& a, const Vector& s_next) const override {
    const double progress = (s_next[0] - s[0]) / kDt;
    return progress - 0.05 * dot(a, a) + 0.05;
  }

 protected:
  Vector initial_state(std::mt19937_64& rng, double init_noise) override {
    std::normal_distribution<double> n(0.0, init_noise);
    Vector s{0.0, 0.05, 0.0, 0.0, 0.0, 0.0};
    if (init_noise > 0.0) {
      for (int i : {1, 2}) s[i] += n(rng);
    }
    return s;
  }

  Vector integrate(const Vector& s, const Vector& a) const override {
    const int crippled = static_cast<int>(config_[0]);
    Vector st = s;
    const double h = kDt / kSubsteps;
    for (int sub = 0; sub < kSubsteps; ++sub) {
      const double t0 = crippled == 0 ? 0.0 : kThrust * a[0];
      const double t1 = crippled == 1 ? 0.0 : kThrust * a[1];
      const double phi = st[2];
      const double fx = t0 * std::sin(phi + kCant) + t1 * std::sin(phi - kCant);
      const double fz = t0 * std::cos(phi + kCant) + t1 * std::cos(phi - kCant);
      double torque = kLever * (t1 - t0);

      double normal = 0.0, friction = 0.0;
      if (st[1] < 0.0) {
        normal = std::max(0.0, -kGroundK * st[1] - kGroundC * st[4]);
        friction = -kFriction * normal * std::tanh(st[3] / 0.1);
        torque += -kRightK * phi - 0.2 * st[5];  // foot keeps the body upright
      }
      const double ax = (fx + friction) / kMass;
      const double az = (fz + normal) / kMass - kGravity;
      const double aw = (torque - kAngDamp * st[5]) / kInertia;

      st[3] += h * ax;
      st[4] += h * az;
      st[5] += h * aw;
      st[0] += h * st[3];
      st[1] += h * st[4];
      st[2] += h * st[5];
    }
    return st;
  }

  std::vector<int> noise_dims() const override { return {3, 4, 5}; }
};

// ---------------------------------------------------------------------------
// Slope car: a point mass driving along a piecewise-linear terrain profile.
// Config: [slope1, slope2, drag1, drag2] - terrain is flat before x=1,
// inclines at angle slope1 on [1,5), slope2 on [5,9), flat after; each
// sloped section adds its own drag (the floating-pier analogy: per-segment
// damping). state: (x, z, vx, vz), velocities tied to the terrain tangent.
class SlopeCarEnv final : public Env {
 public:
  SlopeCarEnv(Vector config, SwitchSchedule switches, std::uint64_t seed, double process_noise,
              double init_noise, double dt = 0.02)
      : Env(std::move(config), std::move(switches), seed, process_noise, init_noise), dt_(dt) {}

  static constexpr double kMass = 1.0;
  static constexpr double kForce = 4.0;

  int state_dim() const override { return 4; }
  int action_dim() const override { return 1; }
  std::string family() const override { return "slope_car"; }
  double dt() const override { return dt_; }

  double reward(const Vector& s, const Vector& a, const Vector& s_next) const override {
    return (s_next[0] - s[0]) / dt_ - 0.01 * a[0] * a[0];
  }

  double slope_at(double x) const {
    if (x < 1.0 || x >= 9.0) return 0.0;
    return x < 5.0 ? config_[0] : config_[1];
  }
  double drag_at(double x) const { return x < 5.0 ? config_[2] : config_[3]; }
  double height_at(double x) const {
    auto leg = [this](double a, double b) {
      return std::tan(slope_at(0.5 * (a + b))) * (b - a);
    };
    double z = 0.0;
    for (double edge = 1.0; edge < x && edge < 9.0; edge += 4.0) {
      z += leg(edge, std::min(x, edge + 4.0));
    }
    return z;
  }

 protected:
  Vector initial_state(std::mt19937_64& rng, double init_noise) override {
    std::normal_distribution<double> n(0.0, init_noise);
    double x = 0.0;
    if (init_noise > 0.0) x += n(rng);
    return {x, height_at(x), 0.0, 0.0};
  }

  Vector integrate(const Vector& s, const Vector& a) const override {
    Vector st = s;
    const int substeps = 2;
    const double h = dt_ / substeps;
    for (int sub = 0; sub < substeps; ++sub) {
      const double alpha = slope_at(st[0]);
      const double ca = std::cos(alpha), sa = std::sin(alpha);
      double u = st[2] * ca + st[3] * sa;  // speed along the terrain
      const double du = (kForce * a[0] - drag_at(st[0]) * u) / kMass - kGravity * sa;
      u += h * du;
      st[0] += h * u * ca;
      st[1] = height_at(st[0]);
      st[2] = u * ca;
      st[3] = u * sa;
    }
    return st;
  }

  std::vector<int> noise_dims() const override { return {2}; }

  void repair_state(Vector& s) const override {
    // noise entered through vx; project the velocity back onto the terrain
    const double alpha = slope_at(s[0]);
    const double u = s[2] / std::cos(alpha);
    s[1] = height_at(s[0]);
    s[2] = u * std::cos(alpha);
    s[3] = u * std::sin(alpha);
  }

 private:
  double dt_;
};

// ---------------------------------------------------------------------------
// Two-link planar arm (no gravity, viscous joint damping) with a constant
// external force on the end effector as the hidden configuration.
// Config: [Fx, Fy]. state: (q1, q2, w1, w2, ee_x, ee_y)
class Reacher2LinkEnv final : public Env {
 public:
  using Env::Env;

  static constexpr double kDt = 0.02;
  static constexpr int kSubsteps = 4;
  static constexpr double kL1 = 0.5, kL2 = 0.5;
  static constexpr double kR1 = 0.25, kR2 = 0.25;
  static constexpr double kM1 = 1.0, kM2 = 1.0;
  static constexpr double kI1 = kM1 * kL1 * kL1 / 12.0;
  static constexpr double kI2 = kM2 * kL2 * kL2 / 12.0;
  static constexpr double kTorque = 3.0;
  static constexpr double kDamping = 1.0;

  static Vector goal() { return {0.5, 0.5}; }

  int state_dim() const override { return 6; }
  int action_dim() const override { return 2; }
  std::string family() const override { return "reacher_2link"; }
  double dt() const override { return kDt; }

  double reward(const Vector&, const Vector&, const Vector& s_next) const override {
    const Vector g = goal();
    const double dx = s_next[4] - g[0];
    const double dy = s_next[5] - g[1];
    return -(dx * dx + dy * dy);
  }

  // accelerations for (q1, q2, w1, w2) under torques tau (actions already
  // scaled) and the configured end-effector force; shared with the RK4
  // oracle in the tests via accel()
  static void accel(const Vector& q, const double tau[2], const double fext[2], double out[2]) {
    const double c2 = std::cos(q[1]);
    const double s2 = std::sin(q[1]);
    const double m11 = kI1 + kI2 + kM1 * kR1 * kR1 + kM2 * (kL1 * kL1 + kR2 * kR2 + 2 * kL1 * kR2 * c2);
    const double m12 = kI2 + kM2 * (kR2 * kR2 + kL1 * kR2 * c2);
    const double m22 = kI2 + kM2 * kR2 * kR2;
    const double hterm = kM2 * kL1 * kR2 * s2;
    const double cor1 = -hterm * (2.0 * q[2] * q[3] + q[3] * q[3]);
    const double cor2 = hterm * q[2] * q[2];

    const double s1 = std::sin(q[0]), c1 = std::cos(q[0]);
    const double s12 = std::sin(q[0] + q[1]), c12 = std::cos(q[0] + q[1]);
    // J^T F maps the end-effector force to joint torques
    const double jt1 = (-kL1 * s1 - kL2 * s12) * fext[0] + (kL1 * c1 + kL2 * c12) * fext[1];
    const double jt2 = (-kL2 * s12) * fext[0] + (kL2 * c12) * fext[1];

    const double rhs1 = tau[0] + jt1 - cor1 - kDamping * q[2];
    const double rhs2 = tau[1] + jt2 - cor2 - kDamping * q[3];
    const double det = m11 * m22 - m12 * m12;
    out[0] = (m22 * rhs1 - m12 * rhs2) / det;
    out[1] = (m11 * rhs2 - m12 * rhs1) / det;
  }

  static void end_effector(double q1, double q2, double& ex, double& ey) {
    ex = kL1 * std::cos(q1) + kL2 * std::cos(q1 + q2);
    ey = kL1 * std::sin(q1) + kL2 * std::sin(q1 + q2);
  }

 protected:
  Vector initial_state(std::mt19937_64& rng, double init_noise) override {
    std::normal_distribution<double> n(0.0, init_noise);
    Vector s{0.4, 0.8, 0.0, 0.0, 0.0, 0.0};
    if (init_noise > 0.0) {
      s[0] += n(rng);
      s[1] += n(rng);
    }
    end_effector(s[0], s[1], s[4], s[5]);
    return s;
  }

  Vector integrate(const Vector& s, const Vector& a) const override {
    Vector st = s;
    const double h = kDt / kSubsteps;
    const double tau[2] = {kTorque * a[0], kTorque * a[1]};
    const double fext[2] = {config_[0], config_[1]};
    for (int sub = 0; sub < kSubsteps; ++sub) {
      double acc[2];
      accel(st, tau, fext, acc);
      st[2] += h * acc[0];
      st[3] += h * acc[1];
      st[0] += h * st[2];
      st[1] += h * st[3];
    }
    end_effector(st[0], st[1], st[4], st[5]);
    return st;
  }

  std::vector<int> noise_dims() const override { return {2, 3}; }

  void repair_state(Vector& s) const override { end_effector(s[0], s[1], s[4], s[5]); }
};

// ---------------------------------------------------------------------------
// Payload cart: 1-D cart whose effective mass and drag are hidden.
// Config: [payload_mass, drag]. state: (x, v)
class PayloadCartEnv final : public Env {
 public:
  using Env::Env;

  static constexpr double kDt = 0.02;
  static constexpr double kCartMass = 1.0;
  static constexpr double kForce = 3.0;

  int state_dim() const override { return 2; }
  int action_dim() const override { return 1; }
  std::string family() const override { return "payload_cart"; }
  double dt() const override { return kDt; }

  double reward(const Vector& s, const Vector& a, const Vector& s_next) const override {
    return (s_next[0] - s[0]) / kDt - 0.01 * a[0] * a[0];
  }

 protected:
  Vector initial_state(std::mt19937_64& rng, double init_noise) override {
    std::normal_distribution<double> n(0.0, init_noise);
    Vector s{0.0, 0.0};
    if (init_noise > 0.0) s[1] += n(rng);
    return s;
  }

  Vector integrate(const Vector& s, const Vector& a) const override {
    Vector st = s;
    const double mass = kCartMass + config_[0];
    const double drag = config_[1];
    st[1] += kDt * (kForce * a[0] - drag * st[1]) / mass;
    st[0] += kDt * st[1];
    return st;
  }

  std::vector<int> noise_dims() const override { return {1}; }
};

}  // namespace

std::unique_ptr<Env> EnvDistribution::make_env(const Vector& config, SwitchSchedule switches,
                                               std::uint64_t seed) const {
  switch (family) {
    case Family::planar_hopper:
      return std::make_unique<PlanarHopperEnv>(config, std::move(switches), seed, process_noise,
                                               init_noise);
    case Family::slope_car:
      return std::make_unique<SlopeCarEnv>(config, std::move(switches), seed, process_noise,
                                           init_noise, dt_override > 0.0 ? dt_override : 0.02);
    case Family::reacher_2link:
      return std::make_unique<Reacher2LinkEnv>(config, std::move(switches), seed, process_noise,
                                               init_noise);
    case Family::payload_cart:
      return std::make_unique<PayloadCartEnv>(config, std::move(switches), seed, process_noise,
                                              init_noise);
  }
  throw ConfigError("make_env: bad family");
}

Vector EnvDistribution::sample_config(Split split, std::mt19937_64& rng) const {
  return (split == Split::train ? train : test).sample(rng);
}

std::unique_ptr<Env> EnvDistribution::sample_env(Split split, std::mt19937_64& rng) const {
  Vector config = sample_config(split, rng);
  return make_env(config, {}, rng());
}

int EnvDistribution::state_dim() const {
  switch (family) {
    case Family::planar_hopper: return 6;
    case Family::slope_car: return 4;
    case Family::reacher_2link: return 6;
    case Family::payload_cart: return 2;
  }
  return 0;
}

int EnvDistribution::action_dim() const {
  switch (family) {
    case Family::planar_hopper: return 2;
    case Family::slope_car: return 1;
    case Family::reacher_2link: return 2;
    case Family::payload_cart: return 1;
  }
  return 0;
}

EnvDistribution hopper_failure_distribution() {
  EnvDistribution d;
  d.family = Family::planar_hopper;
  d.train.choices = {{-1.0}, {0.0}, {1.0}};
  d.test.choices = {{0.0}, {1.0}};
  return d;
}

EnvDistribution hopper_failure_holdout(int held_out) {
  if (held_out != 0 && held_out != 1) throw ConfigError("hopper holdout: actuator must be 0 or 1");
  EnvDistribution d;
  d.family = Family::planar_hopper;
  d.train.choices = {{-1.0}, {held_out == 0 ? 1.0 : 0.0}};
  d.test.choices = {{static_cast<double>(held_out)}};
  return d;
}

EnvDistribution slope_car_distribution() {
  EnvDistribution d;
  d.family = Family::slope_car;
  d.train.lo = {-0.15, -0.15, 0.02, 0.02};
  d.train.hi = {0.15, 0.15, 0.12, 0.12};
  d.test.lo = {0.35, -0.35, 0.05, 0.15};
  d.test.hi = {0.45, -0.25, 0.05, 0.15};
  return d;
}

EnvDistribution reacher_force_distribution(double train_force_max, double test_force) {
  EnvDistribution d;
  d.family = Family::reacher_2link;
  // force along a direction sampled by magnitude in [0, max] on each axis
  // sign-symmetric; the held-out test force acts along +x
  d.train.lo = {-train_force_max, -train_force_max};
  d.train.hi = {train_force_max, train_force_max};
  d.test.choices = {{test_force, 0.0}};
  return d;
}

EnvDistribution payload_cart_distribution() {
  EnvDistribution d;
  d.family = Family::payload_cart;
  d.train.lo = {0.0, 0.1};
  d.train.hi = {1.0, 0.5};
  d.test.lo = {1.5, 0.5};
  d.test.hi = {2.5, 0.9};
  return d;
}

EnvDistribution default_distribution(Family family) {
  switch (family) {
    case Family::planar_hopper: return hopper_failure_distribution();
    case Family::slope_car: return slope_car_distribution();
    case Family::reacher_2link: return reacher_force_distribution(2.0, 4.0);
    case Family::payload_cart: return payload_cart_distribution();
  }
  throw ConfigError("default_distribution: bad family");
}

Vector nominal_config(Family family) {
  switch (family) {
    case Family::planar_hopper: return {-1.0};
    case Family::slope_car: return {0.0, 0.0, 0.05, 0.05};
    case Family::reacher_2link: return {0.0, 0.0};
    case Family::payload_cart: return {0.0, 0.3};
  }
  throw ConfigError("nominal_config: bad family");
}

}  // namespace ampc
