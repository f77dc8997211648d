#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fipwc/dynamics.hpp"
#include "fipwc/environment.hpp"
#include "fipwc/stochastic.hpp"

namespace fipwc {

// Proportional-derivative gains. Positive kp_theta pushes the cart toward
// the side the tip leans to; the cart terms recenter (negative values push
// back toward the origin).
struct PdGains {
  double kp_theta = 0.0;  // N / rad
  double kd_theta = 0.0;  // N s / rad
  double kp_z = 0.0;      // N / m
  double kd_z = 0.0;      // N s / m

  void validate() const;  // all finite
};

// F = clamp(kp_theta th + kd_theta th_dot + kp_z z + kd_z z_dot, +-limit)
double pd_force(const PdGains& gains, const StateVector& s, double force_limit);

// Exhaustive grid over the four gains. Every grid point is scored on the
// same seeded episodes (common random numbers), so the comparison is fair
// and reproducible.
struct PdSearchSpec {
  // tip feedback spills into the lightly damped beam mode, so the useful
  // kp_theta/kd_theta range is small; larger entries stay in the grid to let
  // the stability gate document that they are rejected rather than untried
  std::vector<double> kp_theta{0.0, 0.5, 1.0, 2.0, 4.0, 8.0};
  std::vector<double> kd_theta{0.0, 0.05, 0.1, 0.3, 1.0};
  std::vector<double> kp_z{0.0, -0.1, -0.3, -1.0};
  std::vector<double> kd_z{0.0, -0.5, -2.0, -6.0};
  int episodes_per_point = 5;
  // points whose tuning-episode mean falls at or below this are infeasible
  double feasible_mean_reward = -1e6;

  void validate() const;
  std::size_t grid_size() const;
  PdGains gains_at(std::size_t index) const;  // row-major over the four axes
};

struct PdTuneResult {
  PdGains gains;
  double mean_reward = 0.0;    // over the tuning episodes
  std::size_t grid_index = 0;  // winning position in grid order
};

// True when the gains do not destabilize the nominal plant: a small
// undisturbed perturbation must neither grow over the closed-loop run nor
// leave the neighborhood of the origin at any point along the way.
bool gains_stabilize_nominal(const PdGains& gains, const ModelParams& params,
                             const EnvConfig& env_cfg);

// Grid search maximizing mean episode reward. Ties break toward the earlier
// grid point. Throws std::runtime_error when no grid point is feasible
// (stabilizing and above the reward floor).
PdTuneResult tune_gains(const EnvConfig& env_cfg, const ModelParams& nominal,
                        const UncertaintySpec& uncertainty,
                        const DisturbanceConfig& disturbances,
                        const PdSearchSpec& spec, std::uint64_t master_seed,
                        int workers = 1);

// key=value gains file, consumed by the campaign runner
void save_gains(const std::string& path, const PdGains& gains,
                double mean_reward);
PdGains load_gains(const std::string& path);

}  // namespace fipwc
