#pragma once

#include <cstdint>
#include <memory>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "ampc/linalg.hpp"

namespace ampc {

enum class Family { planar_hopper, slope_car, reacher_2link, payload_cart };
enum class Split { train, test };

std::string family_name(Family f);
Family family_from_name(const std::string& name);

struct StepResult {
  Vector s_next;
  double reward = 0.0;
  bool done = false;
  bool fault = false;  // non-finite state encountered
};

// scheduled mid-rollout configuration change: (timestep, new config)
using SwitchSchedule = std::vector<std::pair<int, Vector>>;

// Stateful environment instance with a hidden configuration vector that is
// piecewise constant between switch points. Dynamics integrate with
// semi-implicit Euler at a fixed dt (internally sub-stepped); Gaussian
// process noise acts on velocity coordinates only. Actions live in
// [-1, 1]^|A| and are clipped (with a warning counter) when outside.
class Env {
 public:
  Env(Vector config, SwitchSchedule switches, std::uint64_t seed, double process_noise,
      double init_noise)
      : config_(std::move(config)),
        switches_(std::move(switches)),
        rng_(seed),
        process_noise_(process_noise),
        init_noise_(init_noise) {}
  virtual ~Env() = default;

  virtual int state_dim() const = 0;
  virtual int action_dim() const = 0;
  virtual std::string family() const = 0;
  virtual double dt() const = 0;

  // reward shared between the environment and the planner's task spec
  virtual double reward(const Vector& s, const Vector& a, const Vector& s_next) const = 0;

  Vector reset();
  StepResult step(const Vector& action);

  // debug probes for tests; the agent never sees these
  const Vector& active_config() const { return config_; }
  int timestep() const { return t_; }
  int clip_warnings() const { return clip_warnings_; }

  // noiseless one-step dynamics under the active configuration (test oracle)
  Vector debug_step(const Vector& s, const Vector& a) const { return integrate(s, a); }

 protected:
  virtual Vector initial_state(std::mt19937_64& rng, double init_noise) = 0;
  // integrate one control step from state_ given clipped action
  virtual Vector integrate(const Vector& s, const Vector& a) const = 0;
  // indices of velocity coordinates receiving process noise
  virtual std::vector<int> noise_dims() const = 0;
  // restore derived state entries after noise injection (optional)
  virtual void repair_state(Vector& /*s*/) const {}

  Vector config_;

 private:
  void apply_switches();

  SwitchSchedule switches_;
  Vector state_;
  std::mt19937_64 rng_;
  double process_noise_ = 0.005;
  double init_noise_ = 0.01;
  int t_ = 0;
  int clip_warnings_ = 0;
  bool faulted_ = false;
};

// uniform sampler over either a finite choice set or a box range
struct ConfigSampler {
  std::vector<Vector> choices;  // uniform over these when non-empty
  Vector lo, hi;                // otherwise uniform box (degenerate ok)

  Vector sample(std::mt19937_64& rng) const;
  void validate() const;
};

// A family of environments E ~ rho(E): hidden-configuration sampler with a
// train/test split (test ranges may deliberately sit outside the train
// ranges for extrapolation experiments).
struct EnvDistribution {
  Family family = Family::planar_hopper;
  ConfigSampler train, test;
  double process_noise = 0.005;
  double init_noise = 0.01;
  double dt_override = 0.0;  // 0 = family default (tests only)

  std::unique_ptr<Env> make_env(const Vector& config, SwitchSchedule switches,
                                std::uint64_t seed) const;
  std::unique_ptr<Env> sample_env(Split split, std::mt19937_64& rng) const;
  Vector sample_config(Split split, std::mt19937_64& rng) const;

  int state_dim() const;
  int action_dim() const;
};

// stock distributions used by the experiments
EnvDistribution hopper_failure_distribution();            // cripple one of {none, 0, 1}
EnvDistribution hopper_failure_holdout(int held_out);     // held-out actuator in test split only
EnvDistribution slope_car_distribution();                 // gentle train slopes, steep test hill
EnvDistribution reacher_force_distribution(double train_force_max, double test_force);
EnvDistribution payload_cart_distribution();

EnvDistribution default_distribution(Family family);

// unperturbed configuration (fast-adaptation episodes start here)
Vector nominal_config(Family family);

}  // namespace ampc
