#pragma once

#include <array>
#include <cstdint>

#include "fipwc/dynamics.hpp"
#include "fipwc/stochastic.hpp"

namespace fipwc {

// Episode and reward shaping. Weight order follows the state ordering
// (z, z_dot, phi, phi_dot, theta, theta_dot).
struct EnvConfig {
  double dt = 0.01;                  // control interval (s)
  int episode_steps = 1000;          // 10 s horizon
  double force_limit = 10.0;         // actuator saturation (N)
  double obs_limit = 1e9;            // usable state envelope
  double violation_reward = -1e7;    // applied once when the envelope is left
  std::array<double, 6> reward_weights{0.1, 0.5, 1.0, 1.0, 1.2, 1.0};
  double control_effort_weight = 0.1;
  std::array<double, 6> desired_state{0.0, 0.0, 0.0, 0.0, 0.0, 0.0};

  void validate() const;
};

// Quadratic step cost; never positive, zero only at the target with no
// force applied.
double reward(const StateVector& s, double force, const EnvConfig& cfg);

// True when the state has left the usable envelope (any entry beyond
// obs_limit, or not finite).
bool violates_limit(const StateVector& s, const EnvConfig& cfg);

struct StepInfo {
  double applied_force = 0.0;  // after clamping
  double d_cart = 0.0;         // value added to z_dot this step
  double d_beam = 0.0;         // value added to phi_dot
  double d_tip = 0.0;          // value added to theta_dot
  bool violation = false;
};

struct StepResult {
  StateVector next_state;
  double reward = 0.0;
  bool done = false;
  StepInfo info;
};

// The plant as an episodic decision process. reset() zeroes the state,
// redraws the uncertain springs/dampers, and restarts the disturbance
// processes; step() clamps the force, integrates one control interval,
// injects the disturbance values into the rate states, and scores the
// resulting state.
class Environment {
 public:
  Environment(EnvConfig cfg, ModelParams nominal, UncertaintySpec uncertainty,
              DisturbanceConfig disturbances);

  StateVector reset(std::uint64_t seed);
  StepResult step(double force);

  const StateVector& state() const { return state_; }
  const ModelParams& model() const { return params_; }
  const EnvConfig& config() const { return cfg_; }
  int steps_taken() const { return steps_; }
  bool done() const { return done_; }

 private:
  EnvConfig cfg_;
  ModelParams nominal_;
  UncertaintySpec uncertainty_;
  DisturbanceConfig dist_cfg_;

  ModelParams params_;
  std::array<OuProcess, 3> dist_;
  StateVector state_;
  int steps_ = 0;
  bool done_ = true;  // unusable until the first reset
};

}  // namespace fipwc
