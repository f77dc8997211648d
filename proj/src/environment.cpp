#include "fipwc/environment.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace fipwc {

void EnvConfig::validate() const {
  auto fail = [](const char* msg) { throw std::invalid_argument(std::string("env config: ") + msg); };
  if (!(dt > 0.0)) fail("dt must be positive");
  if (episode_steps < 1) fail("episode_steps must be at least 1");
  if (!(force_limit > 0.0)) fail("force_limit must be positive");
  if (!(obs_limit > 0.0)) fail("obs_limit must be positive");
  if (!(violation_reward <= 0.0)) fail("violation_reward must not be positive");
  for (double w : reward_weights) {
    if (!(w >= 0.0)) fail("reward weights must be non-negative");
  }
  if (!(control_effort_weight >= 0.0)) fail("control effort weight must be non-negative");
  for (double d : desired_state) {
    if (!std::isfinite(d)) fail("desired state must be finite");
  }
}

double reward(const StateVector& s, double force, const EnvConfig& cfg) {
  const auto x = s.as_array();
  double acc = 0.0;
  for (int i = 0; i < 6; ++i) {
    const double e = x[i] - cfg.desired_state[i];
    acc += cfg.reward_weights[i] * e * e;
  }
  acc += cfg.control_effort_weight * force * force;
  return -cfg.dt * acc;
}

bool violates_limit(const StateVector& s, const EnvConfig& cfg) {
  for (double v : s.as_array()) {
    if (!std::isfinite(v) || std::fabs(v) > cfg.obs_limit) return true;
  }
  return false;
}

Environment::Environment(EnvConfig cfg, ModelParams nominal, UncertaintySpec uncertainty,
                         DisturbanceConfig disturbances)
    : cfg_(cfg),
      nominal_(nominal),
      uncertainty_(uncertainty),
      dist_cfg_(disturbances),
      params_(nominal),
      dist_(make_disturbances(disturbances, 0)) {
  cfg_.validate();
  nominal_.validate();
  uncertainty_.validate();
}

StateVector Environment::reset(std::uint64_t seed) {
  params_ = sample_params(nominal_, uncertainty_, derive_stream(seed, stream::uncertainty));
  dist_ = make_disturbances(dist_cfg_, seed);
  state_ = StateVector{};
  steps_ = 0;
  done_ = false;
  return state_;
}

StepResult Environment::step(double force) {
  if (done_) throw std::logic_error("environment: step called on a finished episode");

  const double f = std::clamp(force, -cfg_.force_limit, cfg_.force_limit);

  // A solver failure means the state left any physically meaningful range
  // (non-finite entries poison the matrix); treat it like a limit violation
  // rather than aborting the run.
  bool integration_failed = false;
  try {
    state_ = rk4_step(state_, f, params_, cfg_.dt);
  } catch (const SingularMatrixError&) {
    integration_failed = true;
  }

  StepInfo info;
  info.applied_force = f;
  if (dist_cfg_.enable_cart) {
    info.d_cart = dist_[kDistCart].step(cfg_.dt);
    state_.z_dot += info.d_cart;
  }
  info.d_beam = dist_[kDistBeam].step(cfg_.dt);
  state_.phi_dot += info.d_beam;
  info.d_tip = dist_[kDistTip].step(cfg_.dt);
  state_.theta_dot += info.d_tip;

  double r = reward(state_, f, cfg_);

  ++steps_;
  info.violation = integration_failed || violates_limit(state_, cfg_);
  if (info.violation) {
    r = cfg_.violation_reward;
    done_ = true;
  } else if (steps_ >= cfg_.episode_steps) {
    done_ = true;
  }

  return StepResult{state_, r, done_, info};
}

}  // namespace fipwc
