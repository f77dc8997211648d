#pragma once

#include <array>
#include <cstdint>

#include "fipwc/dynamics.hpp"
#include "fipwc/rng.hpp"

namespace fipwc {

// Ornstein-Uhlenbeck parameters. kappa is the mean-reversion rate (1/s),
// sigma the diffusion scale in the units of the driven quantity.
struct OuParams {
  double kappa = 0.0;
  double mu = 0.0;
  double sigma = 0.0;

  void validate() const;
};

// Euler-Maruyama discretization of dy = kappa (mu - y) dt + sigma dW.
// Each step draws exactly one normal variate, even when sigma is zero, so
// stream consumption does not depend on the configuration.
class OuProcess {
 public:
  OuProcess(OuParams params, std::uint64_t stream_seed, double y0 = 0.0);

  double step(double dt);
  double value() const { return y_; }
  const OuParams& params() const { return p_; }

  void reset(double y0) { y_ = y0; }
  std::uint64_t rng_state() const { return rng_.state(); }
  void set_rng_state(std::uint64_t s) { rng_.set_state(s); }

 private:
  OuParams p_;
  double y_;
  SplitMix64 rng_;
};

// The three rate disturbances, indexed cart (z_dot), beam (phi_dot),
// tip (theta_dot). Angular sigmas are stored in rad/s; config parsing
// converts from deg/s at the boundary.
struct DisturbanceConfig {
  bool enable_cart = true;
  OuParams cart{0.01, 0.0, 0.1};
  OuParams beam{10.0, 0.0, 0.017453292519943295};
  OuParams tip{10.0, 0.0, 0.017453292519943295};

  void validate() const;
};

enum DisturbanceIndex { kDistCart = 0, kDistBeam = 1, kDistTip = 2 };

// Each process gets its own stream derived from (seed, fixed tag), so the
// paths are independent of one another and of construction order. Values
// start at zero.
std::array<OuProcess, 3> make_disturbances(const DisturbanceConfig& cfg, std::uint64_t seed);

// Per-episode parametric uncertainty: the two springs and three dampers are
// redrawn as |N(nominal, (spread * nominal)^2)| while masses and geometry
// stay fixed.
struct UncertaintySpec {
  double relative_spread = 0.5;

  void validate() const;
};

// Draws exactly five normals in the order k1, k2, b1, b2, b3. With spread
// zero the nominals come back bit-identical.
ModelParams sample_params(const ModelParams& nominal, const UncertaintySpec& spec, std::uint64_t seed);

// Mean of |N(mu, sigma^2)|. Used by tests as the closed-form reference.
double folded_normal_mean(double mu, double sigma);

}  // namespace fipwc
