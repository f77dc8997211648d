#include "fipwc/pd.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include "doctest.h"
#include "fipwc/rng.hpp"

using namespace fipwc;

namespace {

// compact search space so tuner tests run in well under a second
PdSearchSpec small_spec() {
  PdSearchSpec spec;
  spec.kp_theta = {0.0, 8.0};
  spec.kd_theta = {0.0, 0.1};
  spec.kp_z = {-0.3};
  spec.kd_z = {0.0};
  spec.episodes_per_point = 2;
  return spec;
}

EnvConfig short_env() {
  EnvConfig cfg;
  cfg.episode_steps = 300;
  return cfg;
}

}  // namespace

TEST_CASE("pd force arithmetic and clamping") {
  PdGains zero;
  CHECK(pd_force(zero, StateVector{}, 10.0) == 0.0);

  PdGains unit;
  unit.kp_theta = 1.0;
  StateVector s;
  s.theta = 0.1;
  CHECK(pd_force(unit, s, 10.0) == 0.1);

  PdGains big;
  big.kp_theta = 1000.0;
  CHECK(pd_force(big, s, 10.0) == 10.0);
  s.theta = -0.1;
  CHECK(pd_force(big, s, 10.0) == -10.0);
}

TEST_CASE("pd force is linear below the clamp") {
  PdGains g;
  g.kp_theta = 12.0;
  g.kd_theta = 1.5;
  g.kp_z = -0.8;
  g.kd_z = -2.0;
  SplitMix64 rng(5);
  for (int i = 0; i < 100; ++i) {
    StateVector a{0.1 * gaussian(rng), 0.1 * gaussian(rng), 0.1 * gaussian(rng),
                  0.1 * gaussian(rng), 0.1 * gaussian(rng), 0.1 * gaussian(rng)};
    StateVector b{0.1 * gaussian(rng), 0.1 * gaussian(rng), 0.1 * gaussian(rng),
                  0.1 * gaussian(rng), 0.1 * gaussian(rng), 0.1 * gaussian(rng)};
    StateVector sum;
    sum.z = a.z + b.z;
    sum.z_dot = a.z_dot + b.z_dot;
    sum.phi = a.phi + b.phi;
    sum.phi_dot = a.phi_dot + b.phi_dot;
    sum.theta = a.theta + b.theta;
    sum.theta_dot = a.theta_dot + b.theta_dot;
    const double lhs = pd_force(g, sum, 1e9);
    const double rhs = pd_force(g, a, 1e9) + pd_force(g, b, 1e9);
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
  }
}

TEST_CASE("destabilizing gains are flagged and benign gains pass") {
  const ModelParams nominal;
  const EnvConfig cfg;
  PdGains pump;
  pump.kd_z = 100.0;  // positive cart-velocity feedback injects energy
  CHECK(!gains_stabilize_nominal(pump, nominal, cfg));

  // strong tip feedback spills into the lightly damped beam mode: phi grows
  // from 0.01 rad past 1 rad within the run even though theta itself is held
  PdGains spill;
  spill.kp_theta = 8.0;
  spill.kd_theta = 1.0;
  spill.kp_z = -0.3;
  CHECK(!gains_stabilize_nominal(spill, nominal, cfg));

  // gentle tip feedback plus cart recentering stays bounded
  PdGains calm;
  calm.kp_theta = 1.0;
  calm.kd_theta = 0.1;
  calm.kp_z = -0.3;
  calm.kd_z = -2.0;
  CHECK(gains_stabilize_nominal(calm, nominal, cfg));

  // doing nothing never destabilizes this spring-supported plant
  CHECK(gains_stabilize_nominal(PdGains{}, nominal, cfg));
}

TEST_CASE("tuning is deterministic for a fixed seed and grid") {
  const EnvConfig cfg = short_env();
  const auto a = tune_gains(cfg, ModelParams{}, UncertaintySpec{},
                            DisturbanceConfig{}, small_spec(), 777);
  const auto b = tune_gains(cfg, ModelParams{}, UncertaintySpec{},
                            DisturbanceConfig{}, small_spec(), 777);
  CHECK(a.grid_index == b.grid_index);
  CHECK(a.mean_reward == b.mean_reward);
  CHECK(a.gains.kp_theta == b.gains.kp_theta);
  CHECK(a.gains.kd_theta == b.gains.kd_theta);
}

TEST_CASE("tuning result is invariant to the worker count") {
  const EnvConfig cfg = short_env();
  const auto one = tune_gains(cfg, ModelParams{}, UncertaintySpec{},
                              DisturbanceConfig{}, small_spec(), 88, 1);
  const auto three = tune_gains(cfg, ModelParams{}, UncertaintySpec{},
                                DisturbanceConfig{}, small_spec(), 88, 3);
  CHECK(one.grid_index == three.grid_index);
  CHECK(one.mean_reward == three.mean_reward);
}

TEST_CASE("the winner re-scores at least as well as every other grid point") {
  const EnvConfig cfg = short_env();
  const ModelParams nominal;
  const UncertaintySpec unc;
  const DisturbanceConfig dist;
  const PdSearchSpec spec = small_spec();
  const auto result = tune_gains(cfg, nominal, unc, dist, spec, 4242);

  // independent re-scoring pass over the full grid with the same seeds
  const std::uint64_t root = derive_stream(4242, stream::tune);
  Environment env(cfg, nominal, unc, dist);
  auto score = [&](const PdGains& g) {
    double sum = 0.0;
    for (int e = 0; e < spec.episodes_per_point; ++e) {
      env.reset(derive_stream(root, static_cast<std::uint64_t>(e)));
      double total = 0.0;
      while (!env.done()) {
        total += env.step(pd_force(g, env.state(), cfg.force_limit)).reward;
      }
      sum += total;
    }
    return sum / spec.episodes_per_point;
  };

  const double winner = score(result.gains);
  CHECK(winner == doctest::Approx(result.mean_reward).epsilon(1e-12));
  for (std::size_t i = 0; i < spec.grid_size(); ++i) {
    if (!gains_stabilize_nominal(spec.gains_at(i), nominal, cfg)) continue;
    CHECK(winner >= score(spec.gains_at(i)));
  }
}

TEST_CASE("tuned gains hold the tip within 15 degrees from a 5 degree start") {
  const EnvConfig cfg = short_env();
  const ModelParams nominal;
  const auto result = tune_gains(cfg, nominal, UncertaintySpec{},
                                 DisturbanceConfig{}, small_spec(), 2026);

  StateVector s;
  s.theta = 5.0 * M_PI / 180.0;
  const double limit = 15.0 * M_PI / 180.0;
  for (int i = 0; i < 1000; ++i) {
    const double f = pd_force(result.gains, s, cfg.force_limit);
    s = rk4_step(s, f, nominal, cfg.dt);
    CHECK(std::fabs(s.theta) < limit);
  }
}

TEST_CASE("an all-destabilizing grid reports an empty feasible set") {
  PdSearchSpec spec;
  spec.kp_theta = {0.0};
  spec.kd_theta = {0.0};
  spec.kp_z = {0.0};
  spec.kd_z = {50.0, 120.0};  // both pump energy into the cart
  spec.episodes_per_point = 1;
  CHECK_THROWS_AS(tune_gains(short_env(), ModelParams{}, UncertaintySpec{},
                             DisturbanceConfig{}, spec, 1),
                  std::runtime_error);
}

TEST_CASE("an unreachable reward floor reports an empty feasible set") {
  PdSearchSpec spec = small_spec();
  spec.feasible_mean_reward = 0.5;  // rewards are never positive
  CHECK_THROWS_AS(tune_gains(short_env(), ModelParams{}, UncertaintySpec{},
                             DisturbanceConfig{}, spec, 2),
                  std::runtime_error);
}

TEST_CASE("gains files round-trip and reject malformed input") {
  PdGains g;
  g.kp_theta = 15.0;
  g.kd_theta = 2.5;
  g.kp_z = -1.0;
  g.kd_z = -3.0;
  const std::string path = "pd_gains_test.txt";
  save_gains(path, g, -123.25);
  const PdGains back = load_gains(path);
  CHECK(back.kp_theta == 15.0);
  CHECK(back.kd_theta == 2.5);
  CHECK(back.kp_z == -1.0);
  CHECK(back.kd_z == -3.0);
  std::remove(path.c_str());

  CHECK_THROWS_AS(load_gains("missing_gains.txt"), std::runtime_error);

  std::ofstream bad("pd_gains_bad.txt");
  bad << "kp_theta=15\nkd_theta=oops\n";
  bad.close();
  CHECK_THROWS_AS(load_gains("pd_gains_bad.txt"), std::runtime_error);
  std::remove("pd_gains_bad.txt");

  std::ofstream partial("pd_gains_partial.txt");
  partial << "kp_theta=15\n";
  partial.close();
  CHECK_THROWS_AS(load_gains("pd_gains_partial.txt"), std::runtime_error);
  std::remove("pd_gains_partial.txt");
}

TEST_CASE("search spec validation") {
  PdSearchSpec empty;
  empty.kp_theta = {};
  CHECK_THROWS_AS(empty.validate(), std::invalid_argument);
  PdSearchSpec zero_eps;
  zero_eps.episodes_per_point = 0;
  CHECK_THROWS_AS(zero_eps.validate(), std::invalid_argument);
  PdSearchSpec bad_gain;
  bad_gain.kp_z = {std::numeric_limits<double>::quiet_NaN()};
  CHECK_THROWS_AS(bad_gain.validate(), std::invalid_argument);

  // grid indexing covers every combination exactly once
  PdSearchSpec spec = small_spec();
  CHECK(spec.grid_size() == 4);
  int with_kp8 = 0;
  for (std::size_t i = 0; i < spec.grid_size(); ++i) {
    if (spec.gains_at(i).kp_theta == 8.0) ++with_kp8;
  }
  CHECK(with_kp8 == 2);
}
